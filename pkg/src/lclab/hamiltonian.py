"""Long-range Hamiltonians as symbolic Pauli-string term lists.

Terms are real-coefficient Pauli strings, so every norm is |coefficient|
exactly and every realized matrix is Hermitian.  Provides the power-law
Ising builder, diameter truncation / banding, the extensivity checker for
the power-law decay assumptions, and the one-site energy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .lattice import Lattice, LatticeError, SiteSet, build_lattice, site_set

PAULI_LABELS = ("X", "Y", "Z")


class HamiltonianError(ValueError):
    pass


@dataclass(frozen=True)
class InteractionTerm:
    """One Pauli-string term: coefficient * prod_{k} sigma^{paulis[k]}_{sites[k]}."""

    sites: tuple[int, ...]
    paulis: tuple[str, ...]
    coefficient: float

    def __post_init__(self):
        if len(self.sites) != len(self.paulis):
            raise HamiltonianError("sites and paulis must align")
        if any(self.sites[k] >= self.sites[k + 1] for k in range(len(self.sites) - 1)):
            raise HamiltonianError("sites must be strictly increasing")
        if any(p not in PAULI_LABELS for p in self.paulis):
            raise HamiltonianError(f"unknown Pauli label in {self.paulis}")
        if not self.sites:
            raise HamiltonianError("empty support")

    @property
    def norm(self) -> float:
        """Spectral norm of the term (Pauli strings have unit norm)."""
        return abs(self.coefficient)

    def support(self, lattice: Lattice) -> SiteSet:
        return SiteSet(lattice, self.sites)

    def diameter(self, lattice: Lattice) -> int:
        return self.support(lattice).diameter()


@dataclass(frozen=True)
class HamiltonianSpec:
    """Symbolic Hamiltonian: a lattice plus a list of interaction terms."""

    lattice: Lattice
    terms: tuple[InteractionTerm, ...]
    alpha: float
    g0: float
    g: float = 1.0
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def in_bound_regime(self) -> bool:
        """True when alpha > 2D + 1, the regime the bound machinery needs."""
        return self.alpha > 2 * self.lattice.dim + 1

    def term_diameters(self) -> np.ndarray:
        return np.array([t.diameter(self.lattice) for t in self.terms])

    def to_json(self) -> str:
        obj = {
            "model": self.metadata.get("model", "custom"),
            "dim": self.lattice.dim,
            "extents": list(self.lattice.extents),
            "alpha": self.alpha,
            "g0": self.g0,
            "B": self.metadata.get("B"),
            "terms": [
                {"sites": list(t.sites), "paulis": list(t.paulis), "coeff": t.coefficient}
                for t in self.terms
            ],
        }
        return json.dumps(obj)

    @staticmethod
    def from_json(text: str) -> "HamiltonianSpec":
        obj = json.loads(text)
        lattice = build_lattice(obj["dim"], obj["extents"])
        if obj.get("terms") is not None:
            terms = tuple(
                InteractionTerm(tuple(t["sites"]), tuple(t["paulis"]), float(t["coeff"]))
                for t in obj["terms"]
            )
            meta = {"model": obj.get("model", "custom")}
            if obj.get("B") is not None:
                meta["B"] = obj["B"]
            return HamiltonianSpec(lattice, terms, float(obj["alpha"]),
                                   float(obj["g0"]), metadata=meta)
        return build_power_law_ising(lattice, float(obj["alpha"]),
                                     float(obj["g0"]), float(obj.get("B") or 0.0))


def build_power_law_ising(lattice: Lattice, alpha: float, g0: float,
                          B: float = 0.0) -> HamiltonianSpec:
    """Power-law Ising model: sum_{i<j} g0 d_ij^-alpha X_i X_j + B sum_i Z_i."""
    if alpha <= 0 or g0 <= 0:
        raise HamiltonianError("need alpha > 0 and g0 > 0")
    n = lattice.n_sites
    d = lattice.distances
    terms: list[InteractionTerm] = []
    for i in range(n):
        for j in range(i + 1, n):
            terms.append(InteractionTerm((i, j), ("X", "X"), g0 / float(d[i, j]) ** alpha))
    if B != 0.0:
        for i in range(n):
            terms.append(InteractionTerm((i,), ("Z",), B))
    return HamiltonianSpec(lattice, tuple(terms), alpha, g0,
                           metadata={"model": "power_law_ising", "B": B})


def _replace_terms(H: HamiltonianSpec, terms: Iterable[InteractionTerm]) -> HamiltonianSpec:
    return HamiltonianSpec(H.lattice, tuple(terms), H.alpha, H.g0, H.g, dict(H.metadata))


def truncate_by_diameter(H: HamiltonianSpec, ell: float) -> HamiltonianSpec:
    """H_{<=ell}: keep exactly the terms with diam(Z) <= ell."""
    if ell < 1:
        raise HamiltonianError("need ell >= 1 (single-site terms have diameter 1)")
    kept = [t for t in H.terms if t.diameter(H.lattice) <= ell]
    return _replace_terms(H, kept)


def split_by_diameter(H: HamiltonianSpec, ell: float) -> tuple[HamiltonianSpec, HamiltonianSpec]:
    """(H_{<=ell}, H_{>ell}); the two reassemble H term-for-term."""
    if ell < 1:
        raise HamiltonianError("need ell >= 1")
    lo = [t for t in H.terms if t.diameter(H.lattice) <= ell]
    hi = [t for t in H.terms if t.diameter(H.lattice) > ell]
    return _replace_terms(H, lo), _replace_terms(H, hi)


def band(H: HamiltonianSpec, ell_lo: float, ell_hi: float,
         closed_top: bool = False) -> HamiltonianSpec:
    """Terms with ell_lo <= diam(Z) < ell_hi (<= ell_hi when closed_top)."""
    if not (1 <= ell_lo <= ell_hi):
        raise HamiltonianError("need 1 <= ell_lo <= ell_hi")
    kept = []
    for t in H.terms:
        dm = t.diameter(H.lattice)
        if dm >= ell_lo and (dm <= ell_hi if closed_top else dm < ell_hi):
            kept.append(t)
    return _replace_terms(H, kept)


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of checking the two power-law decay assumptions by direct summation.

    minimal_g / minimal_g0 are the smallest constants that would make the
    respective inequality pass on this instance; worst_ratio_* are LHS/RHS
    with the provided constants.
    """

    passed_g: bool
    passed_g0: bool
    worst_ratio_g: float
    worst_ratio_g0: float
    minimal_g: float
    minimal_g0: float


def check_assumptions(H: HamiltonianSpec, alpha: float | None = None,
                      g: float | None = None, g0: float | None = None) -> AssumptionReport:
    """Verify, by direct summation, the two decay conditions

      (a) sup_i sum_{Z ni i, diam(Z) >= r} |h_Z| <= g r^(-alpha+D)   (integer r >= 1)
      (b) sup_{i<j} sum_{Z ni {i,j}} |h_Z| <= g0 (d_ij + 1)^(-alpha)

    Failing is a report outcome, not an error.
    """
    alpha = H.alpha if alpha is None else alpha
    g = H.g if g is None else g
    g0 = H.g0 if g0 is None else g0
    lat = H.lattice
    n = lat.n_sites
    D = lat.dim

    diams = H.term_diameters()
    norms = np.array([t.norm for t in H.terms])
    max_diam = int(diams.max()) if len(diams) else 1

    minimal_g = 0.0
    for i in range(n):
        on_i = np.array([i in t.sites for t in H.terms])
        if not on_i.any():
            continue
        for r in range(1, max_diam + 1):
            sel = on_i & (diams >= r)
            lhs = float(norms[sel].sum())
            minimal_g = max(minimal_g, lhs * r ** (alpha - D))
    worst_g = minimal_g / g if g > 0 else np.inf

    minimal_g0 = 0.0
    d = lat.distances
    for i in range(n):
        for j in range(i + 1, n):
            lhs = float(sum(t.norm for t in H.terms
                            if i in t.sites and j in t.sites))
            if lhs:
                minimal_g0 = max(minimal_g0, lhs * float(d[i, j] + 1) ** alpha)
    worst_g0 = minimal_g0 / g0 if g0 > 0 else np.inf

    return AssumptionReport(worst_g <= 1.0, worst_g0 <= 1.0,
                            worst_g, worst_g0, minimal_g, minimal_g0)


def one_site_energy(H: HamiltonianSpec) -> float:
    """max_i sum_{Z ni i} |h_Z|."""
    best = 0.0
    for i in range(H.lattice.n_sites):
        best = max(best, sum(t.norm for t in H.terms if i in t.sites))
    return best


def band_energy(H: HamiltonianSpec, ell_lo: float, ell_hi: float,
                closed_top: bool = False) -> float:
    """One-site energy restricted to the [ell_lo, ell_hi) diameter band."""
    return one_site_energy(band(H, ell_lo, ell_hi, closed_top=closed_top))
