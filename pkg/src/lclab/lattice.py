"""D-dimensional hypercubic lattice geometry.

Open-boundary lattices with the graph (= Manhattan) metric, extended balls
X[r], greedy coarse-grained subsets Lambda^(xi) / X^(xi), numeric estimation
of the geometric constant gamma, and a checker for the coarse-grained
summation inequality.  Everything here is pure and immutable; sites are
integer indices in row-major order.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np


class LatticeError(ValueError):
    """Invalid lattice arguments (bad extents, empty ranges, ...)."""


@dataclass(frozen=True)
class Lattice:
    """Hypercubic lattice with open boundaries and l1 graph distance."""

    dim: int
    extents: tuple[int, ...]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.extents))

    @property
    def coords(self) -> np.ndarray:
        """(n_sites, dim) integer coordinates, row-major site order."""
        if "coords" not in self._cache:
            grids = np.indices(self.extents).reshape(self.dim, -1).T
            self._cache["coords"] = np.ascontiguousarray(grids)
        return self._cache["coords"]

    @property
    def distances(self) -> np.ndarray:
        """All-pairs l1 distance matrix (int64)."""
        if "dist" not in self._cache:
            c = self.coords
            d = np.abs(c[:, None, :] - c[None, :, :]).sum(axis=2)
            self._cache["dist"] = d.astype(np.int64)
        return self._cache["dist"]

    def distance(self, i: int, j: int) -> int:
        return int(self.distances[i, j])

    def site_index(self, coord: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(coord), self.extents))

    def full_set(self) -> "SiteSet":
        return SiteSet(self, tuple(range(self.n_sites)))

    def to_json(self) -> str:
        return json.dumps({"dim": self.dim, "extents": list(self.extents)})

    @staticmethod
    def from_json(text: str) -> "Lattice":
        obj = json.loads(text)
        return build_lattice(obj["dim"], obj["extents"])


@dataclass(frozen=True)
class SiteSet:
    """Sorted, duplicate-free set of site indices on a fixed lattice."""

    lattice: Lattice
    members: tuple[int, ...]

    def __post_init__(self):
        m = self.members
        if any(m[k] >= m[k + 1] for k in range(len(m) - 1)):
            raise LatticeError("SiteSet members must be strictly increasing")
        if m and (m[0] < 0 or m[-1] >= self.lattice.n_sites):
            raise LatticeError("site index out of range")

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, i: int) -> bool:
        return i in set(self.members)

    def diameter(self) -> int:
        """diam(X) = max pairwise distance + 1 (>= 1 for nonempty X)."""
        if not self.members:
            raise LatticeError("diameter of empty set is undefined")
        idx = np.asarray(self.members)
        return int(self.lattice.distances[np.ix_(idx, idx)].max()) + 1

    def complement(self) -> "SiteSet":
        rest = sorted(set(range(self.lattice.n_sites)) - set(self.members))
        return SiteSet(self.lattice, tuple(rest))

    def distance_to_sites(self) -> np.ndarray:
        """d_{X,i} for every site i of the lattice."""
        idx = np.asarray(self.members)
        return self.lattice.distances[idx, :].min(axis=0)

    def to_json(self) -> str:
        return json.dumps(list(self.members))


def site_set(lattice: Lattice, members: Iterable[int]) -> SiteSet:
    return SiteSet(lattice, tuple(sorted(set(int(m) for m in members))))


def set_distance(X: SiteSet, Y: SiteSet) -> int:
    """Shortest path length between two site sets (0 if they intersect)."""
    ix = np.asarray(X.members)
    iy = np.asarray(Y.members)
    return int(X.lattice.distances[np.ix_(ix, iy)].min())


def build_lattice(dim: int, extents: Sequence[int]) -> Lattice:
    if dim < 1:
        raise LatticeError(f"dim must be >= 1, got {dim}")
    if len(extents) != dim:
        raise LatticeError(f"expected {dim} extents, got {len(extents)}")
    if any(e < 1 for e in extents):
        raise LatticeError(f"extents must be positive, got {list(extents)}")
    return Lattice(dim, tuple(int(e) for e in extents))


def ball(X: SiteSet, r: float) -> SiteSet:
    """Extended set X[r] = {i : d_{X,i} <= r}; X[0] = X."""
    if not X.members:
        raise LatticeError("ball of empty set")
    if r < 0:
        raise LatticeError("ball radius must be >= 0")
    dmin = X.distance_to_sites()
    return SiteSet(X.lattice, tuple(np.flatnonzero(dmin <= r).tolist()))


def _greedy_cover(lattice: Lattice, candidates: Sequence[int],
                  targets: Sequence[int], xi: float) -> tuple[int, ...]:
    """Greedy set cover of `targets` by xi-balls centered on `candidates`.

    Picks the candidate covering the most uncovered targets; ties break to
    the lowest site index.  Candidates are assumed able to cover targets.
    """
    cand = np.asarray(sorted(candidates))
    targ = np.asarray(sorted(targets))
    covers = lattice.distances[np.ix_(cand, targ)] <= xi
    uncovered = np.ones(len(targ), dtype=bool)
    chosen: list[int] = []
    while uncovered.any():
        gains = (covers & uncovered).sum(axis=1)
        best = int(np.argmax(gains))  # first max = lowest index
        if gains[best] == 0:
            raise LatticeError("candidates cannot cover targets")
        chosen.append(int(cand[best]))
        uncovered &= ~covers[best]
    return tuple(sorted(chosen))


def coarse_grain_total(lattice: Lattice, xi: float) -> SiteSet:
    """Greedy coarse-grained total set Lambda^(xi) with ball(., xi) = Lambda."""
    if xi < 0:
        raise LatticeError("xi must be >= 0")
    allsites = range(lattice.n_sites)
    if xi == 0:
        return SiteSet(lattice, tuple(allsites))
    return SiteSet(lattice, _greedy_cover(lattice, allsites, allsites, xi))


def coarse_grain(X: SiteSet, xi: float) -> SiteSet:
    """Greedy coarse-grained subset X^(xi) of Lambda^(xi) with ball(., xi) >= X."""
    if not X.members:
        raise LatticeError("coarse_grain of empty set")
    if xi == 0:
        return X
    total = coarse_grain_total(X.lattice, xi)
    return SiteSet(X.lattice, _greedy_cover(X.lattice, total.members, X.members, xi))


@dataclass(frozen=True)
class GammaReport:
    """Smallest gamma certifying the four lattice inequalities on the tested ranges."""

    gamma: float
    ratio_cardinality: float      # |X| <= gamma diam(X)^D
    ratio_ball: float             # |i[r]| <= gamma (2r)^D
    ratio_coarse: float           # |X^(xi)| <= max(1, gamma (diam X / xi)^D)
    ratio_shell: float            # shell count <= 2 gamma D (2r/xi)^(D-1)
    xi_range: tuple[float, ...]
    r_range: tuple[float, ...]

    def check(self, lattice: Lattice) -> bool:
        """Re-run the four inequalities with the stored gamma."""
        rerun = estimate_gamma(lattice, list(self.xi_range), list(self.r_range))
        return rerun.gamma <= self.gamma + 1e-12


def _sample_subsets(lattice: Lattice, r_range: Sequence[float]) -> list[SiteSet]:
    """All single-site balls over the r range, plus the full lattice."""
    seen: set[tuple[int, ...]] = set()
    out: list[SiteSet] = []
    for i in range(lattice.n_sites):
        X0 = SiteSet(lattice, (i,))
        for r in r_range:
            B = ball(X0, r)
            if B.members not in seen:
                seen.add(B.members)
                out.append(B)
    full = lattice.full_set()
    if full.members not in seen:
        out.append(full)
    return out


def estimate_gamma(lattice: Lattice, xi_range: Sequence[float],
                   r_range: Sequence[float]) -> GammaReport:
    """Exhaustively estimate the geometric constant gamma.

    Returns the smallest gamma >= 1 such that, over the sampled ranges,

      (1) |X| <= gamma diam(X)^D                       (X: all balls + full set)
      (2) |i[r]| <= gamma (2r)^D                       (r >= 1)
      (3) |X^(xi)| <= max(1, gamma (diam X / xi)^D)    (greedy X^(xi))
      (4) #{j in Lambda^(xi) : r <= d_ij < r + xi} <= 2 gamma D (2r/xi)^(D-1)
                                                       (r >= xi >= 1)
    """
    if not xi_range or not r_range:
        raise LatticeError("xi_range and r_range must be nonempty")
    D = lattice.dim
    samples = _sample_subsets(lattice, r_range)

    ratio1 = max(len(X) / X.diameter() ** D for X in samples)

    ratio2 = 0.0
    for r in r_range:
        if r < 1:
            continue
        for i in range(lattice.n_sites):
            size = int((lattice.distances[i] <= r).sum())
            ratio2 = max(ratio2, size / (2 * r) ** D)

    ratio3 = 0.0
    ratio4 = 0.0
    for xi in xi_range:
        if xi <= 0:
            continue
        for X in samples:
            Xxi = coarse_grain(X, xi)
            if len(Xxi) > 1:
                ratio3 = max(ratio3, len(Xxi) * (xi / X.diameter()) ** D)
        if xi < 1:
            continue
        total = np.asarray(coarse_grain_total(lattice, xi).members)
        dist_to_total = lattice.distances[:, total]
        for r in r_range:
            if r < xi:
                continue
            counts = ((dist_to_total >= r) & (dist_to_total < r + xi)).sum(axis=1)
            ratio4 = max(ratio4, counts.max() / (2 * D * (2 * r / xi) ** (D - 1)))

    gamma = max(1.0, ratio1, ratio2, ratio3, ratio4)
    return GammaReport(gamma, ratio1, ratio2, ratio3, ratio4,
                       tuple(float(x) for x in xi_range),
                       tuple(float(r) for r in r_range))


@dataclass(frozen=True)
class SummationLemmaReport:
    passed: bool
    worst_ratio: float
    gamma: float
    c_f_x0: float


def validate_summation_lemma(lattice: Lattice, f: Callable[[float], float],
                             xi: float, x0: float,
                             gamma: float | None = None) -> SummationLemmaReport:
    """Check the coarse-grained summation inequality site by site.

    For every site i,

        sum_{j in Lambda^(xi), d_ij >= x0} f(d_ij)
            <= 2^(D+1) C_{f,x0} gamma D xi^(-D) x0^D f(x0)

    with C_{f,x0} = sup_{z >= x0} z^(D+1) f(z) / (x0^(D+1) f(x0)), the sup
    taken over x0 and the lattice's realized distances.  Returns pass/fail
    and the largest LHS/RHS ratio.
    """
    if xi < 1 or x0 < xi:
        raise LatticeError("need x0 >= xi >= 1")
    D = lattice.dim
    dists = lattice.distances
    zs = np.unique(dists[dists >= x0]).astype(float)
    zs = np.concatenate(([x0], zs))
    fvals = np.array([f(z) for z in zs])
    if np.any(fvals <= 0):
        raise LatticeError("f must be positive on the sampled range")
    if np.any(np.diff(fvals) > 1e-15):
        raise LatticeError("f must be nonincreasing on the sampled range")
    c_f_x0 = float(np.max(zs ** (D + 1) * fvals) / (x0 ** (D + 1) * f(x0)))

    if gamma is None:
        max_d = float(dists.max())
        shells = [x0 + s * xi for s in range(int((max_d - x0) / xi) + 2)]
        gamma = estimate_gamma(lattice, [xi], shells or [xi]).gamma

    total = np.asarray(coarse_grain_total(lattice, xi).members)
    rhs = 2.0 ** (D + 1) * c_f_x0 * gamma * D * xi ** (-D) * x0 ** D * f(x0)
    worst = 0.0
    for i in range(lattice.n_sites):
        d = dists[i, total]
        sel = d >= x0
        lhs = float(sum(f(float(z)) for z in d[sel]))
        worst = max(worst, lhs / rhs)
    return SummationLemmaReport(worst <= 1.0, worst, float(gamma), c_f_x0)


def brute_force_min_cover(lattice: Lattice, candidates: Sequence[int],
                          targets: Sequence[int], xi: float,
                          max_size: int | None = None) -> tuple[int, ...] | None:
    """Exact minimum set cover by exhaustive search (oracle for small cases)."""
    cand = sorted(candidates)
    targ = set(targets)
    limit = max_size if max_size is not None else len(cand)
    for k in range(1, limit + 1):
        for combo in itertools.combinations(cand, k):
            covered: set[int] = set()
            for c in combo:
                covered |= set(ball(SiteSet(lattice, (c,)), xi).members)
            if targ <= covered:
                return tuple(combo)
    return None
