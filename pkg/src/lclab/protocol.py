"""State transfer through long-range Ising couplings, simulated exactly.

CNOT cascades copy the sender bit across L_A and build a GHZ resource on
L_B, a global ZZ coupling imprints the bit as a relative phase on the GHZ
state, and inverse cascades concentrate the phase on the receiver.  Only
the active sites L_A + L_B enter the statevector: every idle site stays in
|0> under all three stages, so excluding them is exact, and the separation
R enters through the coupling constant alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lattice import Lattice, SiteSet, build_lattice, site_set


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class ProtocolConfig:
    lattice: Lattice
    alpha: float
    site_a: int
    site_b: int
    l_a: SiteSet
    l_b: SiteSet
    g: float
    t_total: float
    stage_times: tuple[float, float, float] | None = None
    mode: str = "idealized"            # or "distance-resolved"
    g0: float | None = None
    c_speed: float | None = None
    site_cap: int = 16

    def __post_init__(self):
        if self.site_a not in self.l_a or self.site_b not in self.l_b:
            raise ProtocolError("sender must lie in L_A and receiver in L_B")
        if set(self.l_a.members) & set(self.l_b.members):
            raise ProtocolError("L_A and L_B must be disjoint")
        if self.mode not in ("idealized", "distance-resolved"):
            raise ProtocolError(f"unknown coupling mode {self.mode!r}")
        if self.g0 is not None and self.g > self.g0:
            raise ProtocolError("need g <= g0")
        if len(self.l_a) + len(self.l_b) > self.site_cap:
            raise ProtocolError(
                f"{len(self.l_a) + len(self.l_b)} active sites exceed cap {self.site_cap}")
        if self.c_speed is not None:
            budget = (self.c_speed * self.times[0]) ** self.lattice.dim
            if len(self.l_a) > budget or len(self.l_b) > budget:
                raise ProtocolError(
                    "L_A / L_B exceed the short-range budget (c_speed * t1)^D")

    @property
    def times(self) -> tuple[float, float, float]:
        if self.stage_times is not None:
            return self.stage_times
        return (self.t_total / 3.0,) * 3

    @property
    def separation(self) -> float:
        return float(self.lattice.distances[self.site_a, self.site_b])


@dataclass(frozen=True)
class ProtocolResult:
    theta_exact: float
    signal_sim: float                  # trace distance of the two outputs
    signal_analytic: float             # 2 |sin(2 theta)|
    stage_norms: tuple[float, ...]     # statevector norms after each stage
    overlap_distance: float            # 2 sqrt(1 - |<psi0|psi1>|^2)


# ---------------------------------------------------------------------------
# statevector pipeline on the active sites


def _bit(pos: int, m: int) -> int:
    return m - 1 - pos


def _apply_x(psi: np.ndarray, b: int) -> np.ndarray:
    idx = np.arange(psi.size)
    return psi[idx ^ (1 << b)]


def _apply_h(psi: np.ndarray, b: int) -> np.ndarray:
    idx = np.arange(psi.size)
    hi = (idx >> b) & 1
    flip = psi[idx ^ (1 << b)]
    return (np.where(hi == 0, psi + flip, flip - psi)) / math.sqrt(2.0)


def _apply_cnot(psi: np.ndarray, bc: int, bt: int) -> np.ndarray:
    idx = np.arange(psi.size)
    ctrl = ((idx >> bc) & 1) == 1
    out = psi.copy()
    out[ctrl] = psi[idx[ctrl] ^ (1 << bt)]
    return out


def _cascade_order(members: Sequence[int], root: int) -> list[tuple[int, int]]:
    """(control, target) pairs copying the root qubit outward, nearest first."""
    rest = sorted((abs(s - root), s) for s in members if s != root)
    pairs = []
    prev = root
    for _, s in rest:
        pairs.append((prev, s))
        prev = s
    return pairs


class _ProtocolEngine:
    def __init__(self, config: ProtocolConfig):
        self.config = config
        self.active = sorted(set(config.l_a.members) | set(config.l_b.members))
        self.pos = {s: k for k, s in enumerate(self.active)}
        self.m = len(self.active)
        self.phases = self._stage2_phases()

    def _stage2_phases(self) -> np.ndarray:
        cfg = self.config
        m = self.m
        idx = np.arange(2 ** m)
        za = np.zeros(2 ** m)
        zb = np.zeros(2 ** m)
        if cfg.mode == "idealized":
            for s in cfg.l_a:
                za += 1.0 - 2.0 * ((idx >> _bit(self.pos[s], m)) & 1)
            for s in cfg.l_b:
                zb += 1.0 - 2.0 * ((idx >> _bit(self.pos[s], m)) & 1)
            coupling = cfg.g / cfg.separation ** cfg.alpha
            return coupling * za * zb
        total = np.zeros(2 ** m)
        d = cfg.lattice.distances
        for i in cfg.l_a:
            zi = 1.0 - 2.0 * ((idx >> _bit(self.pos[i], m)) & 1)
            for j in cfg.l_b:
                zj = 1.0 - 2.0 * ((idx >> _bit(self.pos[j], m)) & 1)
                total += cfg.g * float(d[i, j]) ** (-cfg.alpha) * zi * zj
        return total

    def run(self, s: int) -> tuple[np.ndarray, tuple[float, ...]]:
        cfg = self.config
        m = self.m
        psi = np.zeros(2 ** m, dtype=np.complex128)
        psi[0] = 1.0
        ba = _bit(self.pos[cfg.site_a], m)
        bb = _bit(self.pos[cfg.site_b], m)
        if s:
            psi = _apply_x(psi, ba)

        # stage 1: copy the sender, build the GHZ resource
        copy_pairs = _cascade_order(cfg.l_a.members, cfg.site_a)
        for c, tgt in copy_pairs:
            psi = _apply_cnot(psi, _bit(self.pos[c], m), _bit(self.pos[tgt], m))
        psi = _apply_h(psi, bb)
        ghz_pairs = _cascade_order(cfg.l_b.members, cfg.site_b)
        for c, tgt in ghz_pairs:
            psi = _apply_cnot(psi, _bit(self.pos[c], m), _bit(self.pos[tgt], m))
        norms = [float(np.linalg.norm(psi))]

        # stage 2: diagonal ZZ phase accumulation for time t2
        psi = psi * np.exp(-1j * cfg.times[1] * self.phases)
        norms.append(float(np.linalg.norm(psi)))

        # stage 3: exact inverses of the cascades
        for c, tgt in reversed(ghz_pairs):
            psi = _apply_cnot(psi, _bit(self.pos[c], m), _bit(self.pos[tgt], m))
        psi = _apply_h(psi, bb)
        for c, tgt in reversed(copy_pairs):
            psi = _apply_cnot(psi, _bit(self.pos[c], m), _bit(self.pos[tgt], m))
        norms.append(float(np.linalg.norm(psi)))
        return psi, tuple(norms)

    def reduced_receiver(self, psi: np.ndarray) -> np.ndarray:
        m = self.m
        pb = self.pos[self.config.site_b]
        T = psi.reshape((2,) * m)
        T = np.moveaxis(T, pb, 0).reshape(2, -1)
        return T @ T.conj().T


def run_protocol(config: ProtocolConfig, s: int) -> np.ndarray:
    """Reduced receiver state rho_B^(s) (2x2 density matrix)."""
    if s not in (0, 1):
        raise ProtocolError("s must be the bit 0 or 1")
    engine = _ProtocolEngine(config)
    psi, _ = engine.run(s)
    return engine.reduced_receiver(psi)


def trace_distance(rho0: np.ndarray, rho1: np.ndarray) -> float:
    """||rho1 - rho0||_1 via the singular values of the difference."""
    return float(np.abs(np.linalg.eigvalsh(rho1 - rho0)).sum())


@dataclass(frozen=True)
class AnalyticSignal:
    theta: float
    signal: float


def analytic_signal(config: ProtocolConfig) -> AnalyticSignal:
    """theta = g t2 |L_A| |L_B| R^-alpha (idealized); signal = 2 |sin(2 theta)|.

    In distance-resolved mode theta is the effective phase
    g t2 sum_{i in L_A, j in L_B} d_ij^-alpha.
    """
    t2 = config.times[1]
    if config.mode == "idealized":
        theta = config.g * t2 * len(config.l_a) * len(config.l_b) \
            / config.separation ** config.alpha
    else:
        d = config.lattice.distances
        theta = config.g * t2 * sum(
            float(d[i, j]) ** (-config.alpha)
            for i in config.l_a for j in config.l_b)
    return AnalyticSignal(theta, 2.0 * abs(math.sin(2.0 * theta)))


def protocol_result(config: ProtocolConfig) -> ProtocolResult:
    """Run both inputs and compare the simulated and analytic signals."""
    engine = _ProtocolEngine(config)
    psi0, norms0 = engine.run(0)
    psi1, norms1 = engine.run(1)
    rho0 = engine.reduced_receiver(psi0)
    rho1 = engine.reduced_receiver(psi1)
    sig = trace_distance(rho0, rho1)
    # the receiver states are pure, so |<psi0|psi1>|^2 = tr(rho0 rho1)
    overlap = float(np.real(np.trace(rho0 @ rho1)))
    ana = analytic_signal(config)
    return ProtocolResult(ana.theta, sig, ana.signal, norms0 + norms1,
                          2.0 * math.sqrt(max(0.0, 1.0 - overlap)))


# ---------------------------------------------------------------------------
# helpers to build concrete 1D instances and the saturation sweep


def chain_protocol_config(size_la: int, size_lb: int, separation: int,
                          alpha: float, g: float, t_total: float,
                          mode: str = "idealized",
                          stage_times: tuple[float, float, float] | None = None,
                          site_cap: int = 16) -> ProtocolConfig:
    """Chain with L_A on the left, L_B at distance `separation`, idle gap exact."""
    site_a = size_la - 1
    site_b = site_a + separation
    n = site_b + size_lb
    lattice = build_lattice(1, [n])
    l_a = site_set(lattice, range(size_la))
    l_b = site_set(lattice, range(site_b, site_b + size_lb))
    return ProtocolConfig(lattice, alpha, site_a, site_b, l_a, l_b, g,
                          t_total, stage_times, mode, site_cap=site_cap)


@dataclass
class SaturationRow:
    D: int
    alpha: float
    t: float
    R: float
    size_la: int
    size_lb: int
    theta: float
    signal_analytic: float
    signal_sim: float | None
    mode: str
    in_regime: bool                    # theta within the small-angle window


@dataclass
class SaturationScan:
    rows: list[SaturationRow]
    t_slope: float
    r_slope: float
    contour_exponent: float

    CSV_HEADER = "D,alpha,t,R,sizeLA,sizeLB,theta,signal_analytic,signal_sim,mode"

    def csv_body(self) -> str:
        lines = [self.CSV_HEADER]
        for r in self.rows:
            sim = "" if r.signal_sim is None else repr(r.signal_sim)
            lines.append(",".join([str(r.D), repr(r.alpha), repr(r.t), repr(r.R),
                                   str(r.size_la), str(r.size_lb), repr(r.theta),
                                   repr(r.signal_analytic), sim, r.mode]))
        return "\n".join(lines) + "\n"


def saturation_scan(alpha: float, D: int, t_grid: Sequence[float],
                    R_grid: Sequence[float], c_speed: float = 1.0,
                    g: float = 1.0, theta_max: float = 0.1,
                    spot_checks: int = 0) -> SaturationScan:
    """Sweep the analytic signal over (t, R) with |L_A| = |L_B| = (c t)^D spins.

    Rows with theta beyond the small-angle window are flagged and excluded
    from the scaling fits.  A joint log-log regression gives the t and R
    slopes (expected 2D+1 and -alpha) and a constant-signal contour gives
    the light-cone shape exponent (expected (2D+1)/alpha).
    """
    rows: list[SaturationRow] = []
    spot_budget = spot_checks
    for t in t_grid:
        size = max(1, int(math.floor((c_speed * t) ** D)))
        for R in R_grid:
            theta = g * (t / 3.0) * size * size * float(R) ** (-alpha)
            signal = 2.0 * abs(math.sin(2.0 * theta))
            sim = None
            if spot_budget > 0 and D == 1 and 2 * size <= 12 and float(R).is_integer():
                cfg = chain_protocol_config(size, size, int(R), alpha, g, 3 * (t / 3.0))
                sim = protocol_result(cfg).signal_sim
                spot_budget -= 1
            rows.append(SaturationRow(D, alpha, float(t), float(R), size, size,
                                      theta, signal, sim, "idealized",
                                      theta <= theta_max))

    fit_rows = [r for r in rows if r.in_regime and r.signal_analytic > 0]
    if len(fit_rows) < 3:
        raise ProtocolError("not enough small-angle rows to fit the scaling")
    logt = np.array([math.log(r.t) for r in fit_rows])
    logR = np.array([math.log(r.R) for r in fit_rows])
    logS = np.array([math.log(r.signal_analytic) for r in fit_rows])
    A = np.vstack([logt, logR, np.ones_like(logt)]).T
    coef, *_ = np.linalg.lstsq(A, logS, rcond=None)
    t_slope, r_slope = float(coef[0]), float(coef[1])

    # constant-signal contour R(t), interpolated per t in log-log space
    level = float(np.median(logS))
    contour: list[tuple[float, float]] = []
    for t in sorted(set(r.t for r in fit_rows)):
        pts = sorted((math.log(r.R), math.log(r.signal_analytic))
                     for r in fit_rows if r.t == t)
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        if ys.min() <= level <= ys.max():
            contour.append((math.log(t), float(np.interp(level, ys[::-1], xs[::-1]))))
    if len(contour) >= 2:
        ct = np.array([c[0] for c in contour])
        cr = np.array([c[1] for c in contour])
        Ac = np.vstack([ct, np.ones_like(ct)]).T
        (slope, _), *_ = np.linalg.lstsq(Ac, cr, rcond=None)
        contour_exponent = float(slope)
    else:
        contour_exponent = float("nan")
    return SaturationScan(rows, t_slope, r_slope, contour_exponent)
