"""Exact operator dynamics on small Hilbert spaces.

Dense Heisenberg evolution via eigendecomposition (scaling-and-squaring as a
cross-check backend), commutator norms, local approximations by normalized
partial trace, quasi-locality shell decompositions, light-cone scans, and
front extraction.

Tensor convention: the qubits of a DenseOperator are ordered by ascending
site index, the first factor being the most significant bit of the matrix
index.  Cross-operator arithmetic re-embeds into the union support first.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .hamiltonian import HamiltonianSpec, InteractionTerm
from .lattice import Lattice, SiteSet, ball, site_set

PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

DEFAULT_SITE_CAP = 14
DENSE_SITE_CAP = 12
EXACT_NORM_DIM = 2048
HERMITICITY_TOL = 1e-10


class DynamicsError(ValueError):
    pass


class ResourceLimitError(RuntimeError):
    """Raised when a request exceeds the configured site cap."""


# ---------------------------------------------------------------------------
# dense operators


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """Complex matrix on a labeled tensor-product subspace."""

    matrix: np.ndarray
    support: SiteSet
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        dim = 2 ** len(self.support)
        if self.matrix.shape != (dim, dim):
            raise DynamicsError(
                f"matrix shape {self.matrix.shape} does not match support of "
                f"{len(self.support)} sites (expected {dim}x{dim})")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_hermitian(self) -> bool:
        return float(np.abs(self.matrix - self.matrix.conj().T).max()) <= HERMITICITY_TOL

    def norm(self) -> float:
        return spectral_norm(self.matrix)

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        if "eigh" not in self._cache:
            if not self.is_hermitian:
                raise DynamicsError("eigendecomposition requires a Hermitian operator")
            self._cache["eigh"] = np.linalg.eigh(self.matrix)
        return self._cache["eigh"]


def _bit_of_position(pos: int, m: int) -> int:
    # position 0 (first kron factor) is the most significant bit
    return m - 1 - pos


def pauli_string_matrix(paulis: dict[int, str], support: Sequence[int]) -> np.ndarray:
    """Dense matrix of a Pauli string on the given (sorted) support sites."""
    out = np.array([[1.0 + 0j]])
    for s in support:
        out = np.kron(out, PAULI[paulis.get(s, "I")])
    return out


def permute_qubit_order(M: np.ndarray, cur: Sequence[int], new: Sequence[int]) -> np.ndarray:
    """Reorder the tensor factors of M from label order `cur` to `new`."""
    if tuple(cur) == tuple(new):
        return M
    m = len(cur)
    perm = [cur.index(s) for s in new]
    T = M.reshape((2,) * (2 * m))
    T = T.transpose(perm + [p + m for p in perm])
    return np.ascontiguousarray(T.reshape(2 ** m, 2 ** m))


def embed(op: DenseOperator, support: SiteSet) -> DenseOperator:
    """Tensor with identities and reorder so `op` lives on the larger support."""
    old = list(op.support.members)
    new = list(support.members)
    if old == new:
        return op
    if not set(old) <= set(new):
        raise DynamicsError("cannot embed: target support does not contain op support")
    extra = [s for s in new if s not in set(old)]
    big = np.kron(op.matrix, np.eye(2 ** len(extra), dtype=np.complex128))
    big = permute_qubit_order(big, old + extra, new)
    return DenseOperator(big, support)


def _union_embed(A: DenseOperator, B: DenseOperator) -> tuple[DenseOperator, DenseOperator]:
    u = site_set(A.support.lattice, set(A.support.members) | set(B.support.members))
    return embed(A, u), embed(B, u)


def spectral_norm(M: np.ndarray, tol: float = 1e-10, seed: int = 7) -> float:
    """Largest singular value; exact for dim <= 2048, power iteration above.

    The iterative branch runs Rayleigh-quotient power iteration on M+M with
    an absolute convergence criterion (ARPACK's relative criterion stalls on
    the near-zero norms that light-cone tails produce).
    """
    dim = M.shape[0]
    if dim <= 512:
        return float(np.linalg.svd(M, compute_uv=False)[0])
    if dim <= EXACT_NORM_DIM:
        w = np.linalg.eigvalsh(M.conj().T @ M)
        return float(np.sqrt(max(w[-1], 0.0)))
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for it in range(300):
        w = M.conj().T @ (M @ v)
        lam_new = float(np.real(np.vdot(v, w)))
        nw = float(np.linalg.norm(w))
        if nw < 1e-280:
            return 0.0
        v = w / nw
        if it >= 4 and abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            lam = lam_new
            break
        lam = lam_new
    return math.sqrt(max(lam, 0.0))


# ---------------------------------------------------------------------------
# realization of symbolic Hamiltonians


def sparse_matrix(H: HamiltonianSpec, support: SiteSet | None = None) -> sp.csr_matrix:
    """CSR matrix of the terms of H contained in `support` (default: all sites).

    Built by direct index arithmetic; terms straddling the support boundary
    are dropped (realize() reports them).
    """
    if support is None:
        support = H.lattice.full_set()
    sites = list(support.members)
    pos = {s: k for k, s in enumerate(sites)}
    m = len(sites)
    dim = 2 ** m
    idx = np.arange(dim, dtype=np.int64)
    acc = sp.csr_matrix((dim, dim), dtype=np.complex128)
    supp_set = set(sites)
    for t in H.terms:
        if not set(t.sites) <= supp_set:
            continue
        xor_mask = 0
        vals = np.full(dim, t.coefficient, dtype=np.complex128)
        for s, p in zip(t.sites, t.paulis):
            bit = _bit_of_position(pos[s], m)
            b = (idx >> bit) & 1
            if p == "X":
                xor_mask |= 1 << bit
            elif p == "Y":
                xor_mask |= 1 << bit
                vals = vals * (1j * (1 - 2 * b))
            else:  # Z
                vals = vals * (1 - 2 * b)
        rows = idx ^ xor_mask
        acc = acc + sp.csr_matrix((vals, (rows, idx)), shape=(dim, dim))
    return acc.tocsr()


def realize(H: HamiltonianSpec, support: SiteSet | None = None,
            cap: int = DEFAULT_SITE_CAP) -> DenseOperator:
    """Dense Hermitian matrix of the terms of H contained in `support`.

    Terms that straddle the boundary are dropped; they are listed on the
    returned operator as `dropped_terms`.
    """
    if support is None:
        support = H.lattice.full_set()
    if len(support) > cap:
        raise ResourceLimitError(
            f"support of {len(support)} sites exceeds cap {cap} "
            f"(dimension 2^{len(support)} = {2 ** len(support)})")
    supp_set = set(support.members)
    dropped = tuple(t for t in H.terms
                    if set(t.sites) & supp_set and not set(t.sites) <= supp_set)
    mat = sparse_matrix(H, support).toarray()
    op = DenseOperator(mat, support)
    op._cache["dropped_terms"] = dropped
    return op


def dropped_terms(op: DenseOperator) -> tuple[InteractionTerm, ...]:
    return op._cache.get("dropped_terms", ())


def term_operator(t: InteractionTerm, support: SiteSet) -> DenseOperator:
    """Dense operator of a single interaction term embedded in `support`."""
    if not set(t.sites) <= set(support.members):
        raise DynamicsError("term support not contained in operator support")
    paulis = dict(zip(t.sites, t.paulis))
    mat = t.coefficient * pauli_string_matrix(paulis, support.members)
    return DenseOperator(mat, support)


def site_operator(lattice: Lattice, site: int, pauli: str,
                  support: SiteSet | None = None) -> DenseOperator:
    sup = support if support is not None else SiteSet(lattice, (site,))
    return term_operator(InteractionTerm((site,), (pauli,), 1.0), sup)


# ---------------------------------------------------------------------------
# evolution, commutators, local approximation


def evolve_operator(H: DenseOperator, O: DenseOperator, t: float,
                    method: str = "eigh") -> DenseOperator:
    """Heisenberg evolution O(t) = e^{iHt} O e^{-iHt}."""
    if H.support.members != O.support.members:
        raise DynamicsError("H and O must share a support; embed() first")
    if not H.is_hermitian:
        raise DynamicsError("H must be Hermitian")
    if t == 0.0:
        return DenseOperator(O.matrix.copy(), O.support)
    if method == "eigh":
        w, V = H.eigh()
        phases = np.exp(-1j * w * t)
        # U = V diag(phases) V+;  O(t) = U+ O U
        OV = O.matrix @ (V * phases)
        Ot = (V * phases).conj().T @ OV
        Ot = V @ Ot @ V.conj().T
        return DenseOperator(Ot, O.support)
    if method == "expm":
        U = scipy.linalg.expm(-1j * H.matrix * t)
        return DenseOperator(U.conj().T @ O.matrix @ U, O.support)
    raise DynamicsError(f"unknown evolution method {method!r}")


def commutator_norm(A: DenseOperator, B: DenseOperator) -> float:
    """Spectral norm of [A, B] after embedding into the union support."""
    Ae, Be = _union_embed(A, B)
    C = Ae.matrix @ Be.matrix - Be.matrix @ Ae.matrix
    return spectral_norm(C)


def partial_trace(op: DenseOperator, keep: SiteSet) -> np.ndarray:
    """tr_{keep^c}[op] as a matrix on the kept sites (sorted order)."""
    supp = list(op.support.members)
    keep_sites = [s for s in supp if s in set(keep.members)]
    rest = [s for s in supp if s not in set(keep.members)]
    M = permute_qubit_order(op.matrix, supp, keep_sites + rest)
    dk, dc = 2 ** len(keep_sites), 2 ** len(rest)
    T = M.reshape(dk, dc, dk, dc)
    return np.einsum("abcb->ac", T)


def local_approx(O: DenseOperator, region: SiteSet) -> DenseOperator:
    """Normalized partial trace onto `region`, re-embedded with identity.

    This is the best region-supported proxy of O: a contraction, idempotent,
    and exact when region covers the whole support.
    """
    if not set(region.members) <= set(O.support.members):
        raise DynamicsError("region must be contained in the operator support")
    supp = list(O.support.members)
    keep_sites = [s for s in supp if s in set(region.members)]
    rest = [s for s in supp if s not in set(keep_sites)]
    dc = 2 ** len(rest)
    reduced = partial_trace(O, site_set(O.support.lattice, keep_sites)) / dc
    M = np.kron(reduced, np.eye(dc, dtype=np.complex128))
    M = permute_qubit_order(M, keep_sites + rest, supp)
    return DenseOperator(M, O.support)


def approx_error(H: DenseOperator, O_X: DenseOperator, t: float, r: float) -> float:
    """|| O_X(t) - local approximation of O_X(t) on X[r] ||."""
    region = ball(O_X.support, r)
    if not set(region.members) <= set(H.support.members):
        raise DynamicsError("X[r] must lie within the realized support")
    Ot = evolve_operator(H, embed(O_X, H.support), t)
    return spectral_norm(Ot.matrix - local_approx(Ot, region).matrix)


@dataclass(frozen=True)
class Shell:
    index: int
    operator: DenseOperator
    norm: float


@dataclass(frozen=True)
class ShellDecomposition:
    shells: tuple[Shell, ...]
    residual: float          # || a_Z(t) - sum of shells ||
    xi_tilde: float


def decompose_evolved_operator(H0: HamiltonianSpec, a_Z: InteractionTerm,
                               t: float, xi_tilde: float, s_max: int,
                               cap: int = DEFAULT_SITE_CAP) -> ShellDecomposition:
    """Decompose a_Z(t) into shell operators on the growing balls Z[s*xi_tilde].

    Shell 1 is the local approximation on Z[xi_tilde]; shell s >= 2 is the
    difference of consecutive local approximations, so partial sums telescope
    to a_Z(t) once the balls cover the realized support.
    """
    full = H0.lattice.full_set()
    if len(full) > cap:
        raise ResourceLimitError(f"lattice of {len(full)} sites exceeds cap {cap}")
    Z = site_set(H0.lattice, a_Z.sites)
    if not set(ball(Z, s_max * xi_tilde).members) <= set(full.members):
        raise DynamicsError("ball(Z, s_max*xi_tilde) must lie within the support")
    Hop = realize(H0, full, cap=cap)
    at = evolve_operator(Hop, term_operator(a_Z, full), t)
    shells: list[Shell] = []
    prev = None
    for s in range(1, s_max + 1):
        region = ball(Z, s * xi_tilde)
        cur = local_approx(at, region)
        mat = cur.matrix - prev.matrix if prev is not None else cur.matrix
        op = DenseOperator(mat, full)
        shells.append(Shell(s, op, spectral_norm(mat)))
        prev = cur
    residual = spectral_norm(at.matrix - prev.matrix)
    return ShellDecomposition(tuple(shells), residual, xi_tilde)


# ---------------------------------------------------------------------------
# light-cone scans


@dataclass
class ScanRow:
    t: float
    probe: float                     # site index (site probes) or radius
    comm_norm: float | None
    approx_err: float | None
    bound_comm: float | None
    bound_approx: float | None


@dataclass
class LightConeScan:
    rows: list[ScanRow]
    metadata: dict

    CSV_HEADER = "t,probe,comm_norm,approx_err,bound_comm,bound_approx"

    def sorted_rows(self) -> list[ScanRow]:
        return sorted(self.rows, key=lambda r: (r.t, r.probe))

    def csv_body(self) -> str:
        def fmt(x):
            return "" if x is None else repr(float(x))
        lines = [self.CSV_HEADER]
        for r in self.sorted_rows():
            lines.append(",".join([repr(float(r.t)), repr(float(r.probe)),
                                   fmt(r.comm_norm), fmt(r.approx_err),
                                   fmt(r.bound_comm), fmt(r.bound_approx)]))
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> None:
        header = [f"# {k}: {json.dumps(v) if isinstance(v, (dict, list)) else v}"
                  for k, v in sorted(self.metadata.items())]
        header.append(f"# created: {time.strftime('%Y-%m-%dT%H:%M:%S')}")
        with open(path, "w") as fh:
            fh.write("\n".join(header) + "\n")
            fh.write(self.csv_body())

    def to_json(self, path) -> None:
        obj = {"metadata": self.metadata,
               "rows": [[r.t, r.probe, r.comm_norm, r.approx_err,
                         r.bound_comm, r.bound_approx] for r in self.sorted_rows()]}
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=1)

    @staticmethod
    def from_json(path) -> "LightConeScan":
        with open(path) as fh:
            obj = json.load(fh)
        rows = [ScanRow(*vals) for vals in obj["rows"]]
        return LightConeScan(rows, obj["metadata"])


def _parity_symmetric_real(H: HamiltonianSpec) -> bool:
    # real matrix: no Y anywhere; Z2 parity: even number of X per term
    for t in H.terms:
        if "Y" in t.paulis:
            return False
        if t.paulis.count("X") % 2 != 0:
            return False
    return True


def _reflection_site_perm(lattice: Lattice) -> np.ndarray:
    """Site permutation flipping every lattice axis (an involution)."""
    flipped = (np.asarray(lattice.extents) - 1 - lattice.coords).T
    return np.ravel_multi_index(tuple(flipped), lattice.extents)


def _terms_invariant_under(H: HamiltonianSpec, site_perm: np.ndarray) -> bool:
    def key(t: InteractionTerm, perm=None):
        sites = t.sites if perm is None else tuple(int(perm[s]) for s in t.sites)
        pairs = tuple(sorted(zip(sites, t.paulis)))
        return (pairs, round(t.coefficient, 14))

    original = sorted(key(t) for t in H.terms)
    mapped = sorted(key(t, site_perm) for t in H.terms)
    return original == mapped


def _basis_index_perm(site_perm: np.ndarray, n: int) -> np.ndarray:
    """Index permutation on the 2^n basis induced by a site permutation."""
    idx = np.arange(2 ** n, dtype=np.int64)
    out = np.zeros_like(idx)
    for k in range(n):
        bit = (idx >> _bit_of_position(k, n)) & 1
        out |= bit << _bit_of_position(int(site_perm[k]), n)
    return out


class _SectorEvolution:
    """Exact e^{-iHt} for a real H with spin-flip parity, block-diagonalized
    into symmetry sectors (real symmetric eigendecomposition each).

    Sectors combine popcount parity with, when the term list allows it, the
    lattice reflection; the symmetry-adapted basis is a sparse isometry per
    sector, so apply() on (dim, k) complex blocks reduces to real dgemm on
    stacked real/imaginary parts.
    """

    def __init__(self, H: HamiltonianSpec):
        n = H.lattice.n_sites
        dim = 2 ** n
        Hs = sparse_matrix(H)
        if np.abs(Hs.imag).max() > 0:
            raise DynamicsError("sector engine requires a real Hamiltonian")
        Hs = Hs.real.tocsr()
        idx = np.arange(dim, dtype=np.int64)
        parity = np.zeros(dim, dtype=np.int64)
        for b in range(n):
            parity ^= (idx >> b) & 1

        refl_sites = _reflection_site_perm(H.lattice)
        use_refl = (not np.array_equal(refl_sites, np.arange(n))) \
            and _terms_invariant_under(H, refl_sites)
        rho = _basis_index_perm(refl_sites, n) if use_refl else None

        isometries: list[sp.csr_matrix] = []
        for p in (0, 1):
            sel = np.flatnonzero(parity == p)
            if rho is None:
                S = sp.csr_matrix(
                    (np.ones(len(sel)), (sel, np.arange(len(sel)))),
                    shape=(dim, len(sel)))
                isometries.append(S)
                continue
            mirror = rho[sel]
            fixed = sel[mirror == sel]
            pair_mask = mirror > sel
            a, b = sel[pair_mask], mirror[pair_mask]
            inv = 1.0 / math.sqrt(2.0)
            # symmetric sector: palindromes + (|s> + |rho s>)/sqrt(2)
            cols = len(fixed) + len(a)
            rows = np.concatenate([fixed, a, b])
            colidx = np.concatenate([np.arange(len(fixed)),
                                     len(fixed) + np.arange(len(a)),
                                     len(fixed) + np.arange(len(a))])
            vals = np.concatenate([np.ones(len(fixed)),
                                   np.full(len(a), inv), np.full(len(b), inv)])
            isometries.append(sp.csr_matrix((vals, (rows, colidx)),
                                            shape=(dim, cols)))
            if len(a):
                rows = np.concatenate([a, b])
                colidx = np.concatenate([np.arange(len(a)), np.arange(len(a))])
                vals = np.concatenate([np.full(len(a), inv),
                                       np.full(len(b), -inv)])
                isometries.append(sp.csr_matrix((vals, (rows, colidx)),
                                                shape=(dim, len(a))))

        self.sectors = []
        for S in isometries:
            block = (S.T @ (Hs @ S)).toarray()
            w, V = scipy.linalg.eigh(block, driver="evd")
            self.sectors.append((S.tocsc(), w, np.ascontiguousarray(V)))
        self.dim = dim

    def apply(self, t: float, block: np.ndarray) -> np.ndarray:
        single = block.ndim == 1
        if single:
            block = block[:, None]
        k = block.shape[1]
        out = np.zeros_like(block)
        for S, w, V in self.sectors:
            sub = S.T @ block
            stacked = np.concatenate([sub.real, sub.imag], axis=1)
            coef = V.T @ stacked
            c = coef[:, :k] + 1j * coef[:, k:]
            c *= np.exp(-1j * w * t)[:, None]
            stacked = np.concatenate([c.real, c.imag], axis=1)
            res = V @ stacked
            out += S @ (res[:, :k] + 1j * res[:, k:])
        return out[:, 0] if single else out


def _apply_site_pauli(vec: np.ndarray, bit: int, pauli: str) -> np.ndarray:
    idx = np.arange(vec.shape[0])
    b = (idx >> bit) & 1
    if pauli == "X":
        return vec[idx ^ (1 << bit)]
    if pauli == "Z":
        sign = 1 - 2 * b
        return (sign[:, None] if vec.ndim > 1 else sign) * vec
    if pauli == "Y":
        phase = (1j * (1 - 2 * b))[idx ^ (1 << bit)]
        flipped = vec[idx ^ (1 << bit)]
        return (phase[:, None] if vec.ndim > 1 else phase) * flipped
    raise DynamicsError(f"unknown Pauli {pauli!r}")


def _sector_commutator_norms(ev: _SectorEvolution, t: float, bit_i: int,
                             pauli_i: str, probes: Sequence[tuple[int, str]],
                             warm: np.ndarray | None = None,
                             tol: float = 1e-9, max_steps: int = 90,
                             seed: int = 11) -> tuple[np.ndarray, np.ndarray]:
    """|| [P_i(t), P_j] || for all probe (bit, pauli) pairs at once.

    Lanczos with full reorthogonalization on the squared commutator (the
    commutator spectrum comes in +-lambda pairs, so iterating on the
    commutator itself stalls; the square is PSD).  Columns advance in
    lockstep so every time evolution is a blocked real dgemm; converged
    columns drop out of the block.  Returns (norms, start vectors for the
    next grid point).
    """
    dim = ev.dim
    k = len(probes)
    rng = np.random.default_rng(seed)
    V = warm if warm is not None else \
        rng.standard_normal((dim, k)) + 1j * rng.standard_normal((dim, k))

    def a_t_block(B):
        return ev.apply(-t, _apply_site_pauli(ev.apply(t, B), bit_i, pauli_i))

    def comm_block(B, cols):
        AB = a_t_block(np.column_stack(
            [_apply_site_pauli(B[:, c], *probes[col])
             for c, col in enumerate(cols)]))
        BA = a_t_block(B)
        return AB - np.column_stack(
            [_apply_site_pauli(BA[:, c], *probes[col])
             for c, col in enumerate(cols)])

    basis = [np.empty((dim, max_steps + 1), dtype=np.complex128) for _ in range(k)]
    alphas = [[] for _ in range(k)]
    betas = [[] for _ in range(k)]
    ritz = np.zeros(k)
    prev_ritz = np.full(k, -1.0)
    stable = np.zeros(k, dtype=int)
    active = list(range(k))
    q = V / np.linalg.norm(V, axis=0, keepdims=True)
    for c in range(k):
        basis[c][:, 0] = q[:, c]

    for step in range(max_steps):
        if not active:
            break
        Q = np.column_stack([basis[c][:, step] for c in active])
        W = -comm_block(comm_block(Q, active), active)
        still = []
        for pos, c in enumerate(active):
            w = W[:, pos]
            a = float(np.real(np.vdot(basis[c][:, step], w)))
            alphas[c].append(a)
            # full reorthogonalization keeps the tridiagonal honest
            Qc = basis[c][:, :step + 1]
            w = w - Qc @ (Qc.conj().T @ w)
            w = w - Qc @ (Qc.conj().T @ w)
            b = float(np.linalg.norm(w))
            T_ritz = scipy.linalg.eigh_tridiagonal(
                np.array(alphas[c]), np.array(betas[c]),
                select="i", select_range=(step, step),
                eigvals_only=True)[0] if step else alphas[c][0]
            if abs(T_ritz - prev_ritz[c]) <= tol * max(1.0, abs(T_ritz)):
                stable[c] += 1
            else:
                stable[c] = 0
            converged = (stable[c] >= 2 and step >= 4) or b < 1e-140
            prev_ritz[c] = T_ritz
            ritz[c] = max(T_ritz, 0.0)
            if converged:
                continue
            betas[c].append(b)
            basis[c][:, step + 1] = w / b
            still.append(c)
        active = still

    vec_out = np.column_stack([basis[c][:, min(len(alphas[c]), max_steps) - 1]
                               for c in range(k)])
    return np.sqrt(np.clip(ritz, 0.0, None)), vec_out


def lightcone_scan(H: HamiltonianSpec, site: int, t_grid: Sequence[float],
                   probe: dict, pauli: str = "X", probe_pauli: str = "X",
                   params=None, dense_cap: int = DENSE_SITE_CAP,
                   cap: int = DEFAULT_SITE_CAP,
                   workers: int = 1) -> LightConeScan:
    """Tabulate commutator norms / local-approximation errors over a grid.

    probe is {"sites": [...]} (commutator diagnostics) or {"radii": [...]}
    (approximation errors).  When alpha > 2D+1 and |t| >= 1, columns with the
    main-theorem envelopes are attached (linear view, capped at 2).  Grid
    points are independent; `workers` threads share the precomputed
    eigendecompositions and rows are sorted before export.
    """
    from concurrent.futures import ThreadPoolExecutor

    from . import bounds as _bounds

    n = H.lattice.n_sites
    if n > cap:
        raise ResourceLimitError(f"system of {n} sites exceeds cap {cap}")
    probe_sites = list(probe.get("sites", []))
    probe_radii = list(probe.get("radii", []))
    if probe_sites and probe_radii:
        raise DynamicsError("probe must be either sites or radii, not both")
    if not probe_sites and not probe_radii:
        raise DynamicsError("empty probe")

    if params is None and H.in_bound_regime:
        params = _bounds.assemble_for_model(H)

    lat = H.lattice
    dist = lat.distances

    def bound_cols(x: float, t: float):
        if params is None or abs(t) < 1.0:
            return None, None
        bc = _bounds.main_bound(x, t, 1.0, 1.0, params, which="commutator").linear(cap=2.0)
        ba = _bounds.main_bound(x, t, 1.0, 1.0, params, which="local").linear(cap=2.0)
        return bc, ba

    use_sector = n > dense_cap and probe_sites and _parity_symmetric_real(H)
    if n > dense_cap and not use_sector:
        raise ResourceLimitError(
            f"{n} sites exceeds the dense cap {dense_cap} and the sector engine "
            "supports only real, parity-symmetric Hamiltonians with site probes")

    if use_sector:
        ev = _SectorEvolution(H)
        m = n
        bi = _bit_of_position(site, m)
        probes = [(_bit_of_position(j, m), probe_pauli) for j in probe_sites]
        rows = []
        warm = None
        for t in sorted(t_grid):
            if t == 0.0:
                for j in probe_sites:
                    cn = 0.0 if (j != site or probe_pauli == pauli) else \
                        commutator_norm(site_operator(lat, site, pauli),
                                        site_operator(lat, j, probe_pauli))
                    bc, ba = bound_cols(float(dist[site, j]), t)
                    rows.append(ScanRow(float(t), float(j), cn, None, bc, ba))
                continue
            norms, warm = _sector_commutator_norms(ev, t, bi, pauli, probes,
                                                   warm=warm)
            for j, cn in zip(probe_sites, norms):
                bc, ba = bound_cols(float(dist[site, j]), t)
                rows.append(ScanRow(float(t), float(j), float(cn), None, bc, ba))
    else:
        full = lat.full_set()
        Hop = realize(H, full, cap=cap)
        Hop.eigh()
        O = site_operator(lat, site, pauli, full)

        def dense_rows(t):
            out = []
            Ot = evolve_operator(Hop, O, t)
            for j in probe_sites:
                Pj = site_operator(lat, j, probe_pauli, full)
                cn = spectral_norm(Ot.matrix @ Pj.matrix - Pj.matrix @ Ot.matrix)
                bc, ba = bound_cols(float(dist[site, j]), t)
                out.append(ScanRow(float(t), float(j), cn, None, bc, ba))
            for r in probe_radii:
                region = ball(site_set(lat, [site]), r)
                err = spectral_norm(Ot.matrix - local_approx(Ot, region).matrix)
                bc, ba = bound_cols(float(r), t)
                out.append(ScanRow(float(t), float(r), None, err, bc, ba))
            return out

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                chunks = list(pool.map(dense_rows, t_grid))
        else:
            chunks = [dense_rows(t) for t in t_grid]
        rows = [row for chunk in chunks for row in chunk]

    meta = {
        "model": json.loads(H.to_json()) | {"terms": None},
        "dim": lat.dim, "extents": list(lat.extents),
        "source": site, "pauli": pauli, "probe_pauli": probe_pauli,
        "probe_kind": "sites" if probe_sites else "radii",
        "engine": "sector" if use_sector else "dense",
    }
    return LightConeScan(rows, meta)


# ---------------------------------------------------------------------------
# front extraction


@dataclass(frozen=True)
class FrontFit:
    fronts: tuple[tuple[float, float], ...]   # (t, r_front)
    velocity: float
    intercept: float
    residual: float


def front_extract(scan: LightConeScan, delta: float,
                  diagnostic: str | None = None) -> FrontFit:
    """Extract r_front(t) = smallest probed r with diagnostic < delta beyond it.

    The per-t profile is first made monotone by a running max from the far
    side.  Returns the fronts and a least-squares line fit r = v t + b.
    """
    if delta < 1e-12:
        raise DynamicsError("delta below the numerical floor 1e-12")
    rows = scan.sorted_rows()
    if diagnostic is None:
        diagnostic = ("comm_norm" if any(r.comm_norm is not None for r in rows)
                      else "approx_err")

    if scan.metadata.get("probe_kind") == "sites":
        from .lattice import build_lattice
        lat = build_lattice(scan.metadata["dim"], scan.metadata["extents"])
        src = scan.metadata["source"]
        def radius(row): return float(lat.distances[src, int(row.probe)])
    else:
        def radius(row): return float(row.probe)

    by_t: dict[float, dict[float, float]] = {}
    for row in rows:
        val = getattr(row, diagnostic)
        if val is None:
            continue
        r = radius(row)
        cur = by_t.setdefault(row.t, {})
        cur[r] = max(cur.get(r, 0.0), val)

    fronts: list[tuple[float, float]] = []
    for t, prof in sorted(by_t.items()):
        rs = sorted(prof)
        vals = np.array([prof[r] for r in rs])
        runmax = np.maximum.accumulate(vals[::-1])[::-1]
        below = runmax < delta
        if below.all():
            fronts.append((t, 0.0))
        elif below.any():
            fronts.append((t, rs[int(np.argmax(below))]))
        # front beyond probed range: row omitted from the fit

    if len(fronts) < 2:
        return FrontFit(tuple(fronts), float("nan"), float("nan"), float("nan"))
    ts = np.array([f[0] for f in fronts])
    rf = np.array([f[1] for f in fronts])
    A = np.vstack([ts, np.ones_like(ts)]).T
    (v, b), res, _, _ = np.linalg.lstsq(A, rf, rcond=None)
    resid = float(np.sqrt(res[0] / len(ts))) if res.size else 0.0
    return FrontFit(tuple(fronts), float(v), float(b), resid)
