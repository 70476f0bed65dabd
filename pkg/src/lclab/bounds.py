"""Evaluable light-cone bound apparatus with explicit constants.

Implements the derived exponents, the short / middle / long-range bound
functions, the doubly-exponential length-scale ladder with its base-scale
conditions, the velocity recursion, and the full constant chain down to the
final envelopes for commutators and local-approximation errors.

The base length scale and everything built on it are astronomically large,
so all constants are carried as natural-log magnitudes (every quantity in
the chain is positive).  Bound evaluators return a `LogBound` holding the
uncapped log value plus a linear view capped at the trivial value 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

LN2 = math.log(2.0)


class OutOfRegimeError(ValueError):
    """Raised when parameters leave the regime a formula is proved for."""


@dataclass(frozen=True)
class LogBound:
    """A nonnegative bound value stored as log; linear view capped at 2."""

    log_raw: float           # natural log of the evaluated expression (-inf for 0)
    in_cone: bool = False    # True when the cap region was hit

    @property
    def log(self) -> float:
        return min(self.log_raw, LN2)

    def linear(self, cap: float = 2.0) -> float:
        if self.log_raw >= math.log(cap):
            return cap
        return math.exp(self.log_raw)


# ---------------------------------------------------------------------------
# derived exponents and elementary constants


@dataclass(frozen=True)
class DerivedExponents:
    eta_bar: float
    eta: float
    eta_tilde: float
    alpha_tilde: float


def derived_exponents(alpha: float, D: int) -> DerivedExponents:
    """eta_bar = (a-2D-1)/(D+2), eta = sqrt(1+eta_bar)-1, eta_tilde = 1-(a-2D-1)/(2(a-D))."""
    if alpha <= 2 * D + 1:
        raise OutOfRegimeError(
            f"alpha={alpha} must exceed 2D+1={2 * D + 1} for the linear light cone")
    eta_bar = (alpha - 2 * D - 1) / (D + 2)
    eta = math.sqrt(1.0 + eta_bar) - 1.0
    eta_tilde = 1.0 - (alpha - 2 * D - 1) / (2.0 * (alpha - D))
    return DerivedExponents(eta_bar, eta, eta_tilde, alpha - 2 * D - 1)


def v0(alpha: float, D: int, g: float = 1.0, gamma: float = 1.0) -> float:
    """Short-range velocity constant 2 e^3 g gamma (a-2D)/(a-2D-1)."""
    if alpha <= 2 * D + 1:
        raise OutOfRegimeError(f"alpha={alpha} <= 2D+1={2 * D + 1}")
    return 2.0 * math.e ** 3 * g * gamma * (alpha - 2 * D) / (alpha - 2 * D - 1)


def zeta1(D: int, gamma: float) -> float:
    return 2.0 ** (D + 1) * math.e ** 2 * gamma ** 2 * math.factorial(D)


def zeta2(D: int, gamma: float) -> float:
    return 16.0 * math.e ** 3 * gamma ** 2 * 45.0 ** D


def c_tilde_0(D: int, gamma: float) -> float:
    return (4.0 / 3.0) * math.e ** (10.0 / 3.0) * 15.0 ** D * math.factorial(D) \
        * gamma * zeta2(D, gamma)


@dataclass(frozen=True)
class ShortRangeBound:
    min_form: float
    exp_form: float


def short_range_bound(x: float, t: float, sizeX: float, xi: float,
                      v0_value: float) -> ShortRangeBound:
    """Both printed forms of the finite-interaction-length bound, capped at 2.

    min form:  min(2 |X| (v0 |t| / (e^2 ceil(x/xi)))^ceil(x/xi), 2)
    exp form:  min(2 |X| e^{-2(x - xi v0 |t|)/xi}, 2)
    """
    if x < 0 or xi < 1:
        raise OutOfRegimeError("need x >= 0 and xi >= 1")
    m = math.ceil(x / xi)
    if m == 0:
        min_form = 2.0
    else:
        base = v0_value * abs(t) / (math.e ** 2 * m)
        if base == 0.0:
            min_form = 0.0
        else:
            log_val = math.log(2 * sizeX) + m * math.log(base)
            min_form = 2.0 if log_val >= LN2 else math.exp(log_val)
    log_exp = math.log(2 * sizeX) - 2.0 * (x - xi * v0_value * abs(t)) / xi
    exp_form = 2.0 if log_exp >= LN2 else math.exp(log_exp)
    return ShortRangeBound(min_form, exp_form)


# ---------------------------------------------------------------------------
# conditions on the base length scale


@dataclass(frozen=True)
class Ell1Report:
    log_ell1: float
    conditions: tuple[float, ...]       # margin of each condition at log_ell1 (>= 0)
    integer_representable: bool


def _ell1_conditions(L: float, alpha: float, D: int, g: float,
                     gamma: float) -> list[float]:
    """Margins of the ten base-scale conditions at log(ell_1) = L.

    Rung-dependent quantities are substituted conservatively with
    ell_{q-1} -> ell_1 (every condition is monotone improving in the rung
    scale once past the thresholds enforced here).  Condition 1 is checked
    at both ends of the rung-exponent interval.
    """
    ex = derived_exponents(alpha, D)
    eta, eta_bar = ex.eta, ex.eta_bar
    z1 = zeta1(D, gamma)
    ct0 = c_tilde_0(D, gamma)
    v0v = v0(alpha, D, g, gamma)
    margins: list[float] = []

    # 1. delta_{q-1} <= 1/2, both eta_q ends
    worst = math.inf
    for eta_q in (eta, eta_bar):
        log_num_terms = math.log(ct0) + 2 * math.log(gamma) \
            + 2 * D * (LN2 + (1 + eta_q) * L)
        lg = eta_q * L
        log1p_term = lg - math.log(12.0) if lg > 60 else math.log1p(math.exp(lg) / 12.0)
        num = 6.0 * log_num_terms + 6.0 * (D - 1) * log1p_term
        # condition log(num) - eta_q L <= log(1/2)
        worst = min(worst, -LN2 - (math.log(num) - lg))
    margins.append(worst)
    # 2. ell_1^eta >= max(24 log(2 gamma^2), 48)
    margins.append(eta * L - math.log(max(24.0 * math.log(2 * gamma ** 2), 48.0)))
    # 3. e^2 g gamma^2 (20 D)^D / (3 ell_1 v0) <= 1
    margins.append(L - (2.0 + math.log(g) + 2 * math.log(gamma)
                        + D * math.log(20.0 * D) - math.log(3.0 * v0v)))
    # 4. ell^eta / log(ell) >= eta log(zeta1) / 16
    margins.append(eta * L - math.log(L) - math.log(eta * math.log(z1) / 16.0))
    # 5. ell^eta / log(ell) >= 9 eta / 4
    margins.append(eta * L - math.log(L) - math.log(9.0 * eta / 4.0))
    # 6. log(ell_1) >= 48 / eta
    margins.append(L - 48.0 / eta)
    # 7. 2 log(zeta1) / ell_1^eta <= 1
    margins.append(eta * L - math.log(2.0 * math.log(z1)))
    # 8. ell_1 >= 3
    margins.append(L - math.log(3.0))
    # 9. ell_1 >= (4 zeta1 / e)^(2/eta)
    margins.append(L - (2.0 / eta) * math.log(4.0 * z1 / math.e))
    # 10. [log(C~0) + (D-1) log(v0 ell_1 + 1)] / (2 v0 ell_1) <= 1/2
    #     <=> num10 <= v0 ell_1
    log_v0l = math.log(v0v) + L
    num10 = math.log(ct0) + (D - 1) * (log_v0l if log_v0l > 60
                                       else math.log1p(v0v * math.exp(L)))
    margins.append(log_v0l - math.log(num10))
    return margins


def find_ell1(alpha: float, D: int, g: float = 1.0, gamma: float = 1.0) -> Ell1Report:
    """Smallest base scale (as log ell_1) satisfying all ten conditions.

    Every condition is monotone improving in ell_1, so the threshold is
    found by bisection on log(ell_1); when the result is small enough to be
    an exact integer it is rounded up and re-verified.
    """
    def ok(L: float) -> bool:
        return all(m >= 0.0 for m in _ell1_conditions(L, alpha, D, g, gamma))

    lo = math.log(3.0) - 1e-12
    hi = max(100.0, 96.0 / derived_exponents(alpha, D).eta)
    while not ok(hi):
        hi *= 2.0
        if hi > 1e12:
            raise OutOfRegimeError("no base scale found below the search cap")
    if ok(lo):
        L = lo
    else:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                hi = mid
            else:
                lo = mid
        L = hi
    representable = L <= 53 * LN2
    if representable:
        ell = math.ceil(math.exp(L) - 1e-9)
        ell = max(ell, 3)
        while not ok(math.log(ell)):
            ell += 1
        L = math.log(ell)
    return Ell1Report(L, tuple(_ell1_conditions(L, alpha, D, g, gamma)), representable)


# ---------------------------------------------------------------------------
# ladder and velocity recursion


@dataclass(frozen=True)
class Ladder:
    log_ells: tuple[float, ...]         # log ell_1 .. log ell_{q*}
    eta_qs: tuple[float, ...]           # eta_2 .. eta_{q*}
    q_star: int
    single_scale: bool
    final_eta_clamped: bool


def _round_up_log(log_x: float) -> float:
    """log(ceil(x)) when x fits in exact float integers, else log_x unchanged."""
    if log_x <= 53 * LN2:
        return math.log(math.ceil(math.exp(log_x) - 1e-12))
    return log_x


def ell_ladder(log_ell1: float, log_ell_target: float,
               exponents: DerivedExponents) -> Ladder:
    """Integer ladder ell_q = ell_{q-1}^(1+eta_q), eta_q in [eta, eta_bar],
    ending exactly at the target scale.

    Below ell_1^(1+eta_bar) the single-scale short-range lemma applies and the
    ladder degenerates to the target alone.  Rounding up to integers can push
    the final rung exponent below eta; that rung is clamped and flagged.
    """
    eta, eta_bar = exponents.eta, exponents.eta_bar
    if log_ell_target < (1 + eta_bar) * log_ell1:
        return Ladder((log_ell_target,), (), 1, True, False)
    p_ell = log_ell_target / log_ell1
    q_star = math.ceil(math.log(p_ell) / math.log(1 + eta_bar)) + 1
    clamped = False
    while True:
        step = p_ell ** (1.0 / (q_star - 1))
        if step - 1.0 >= eta - 1e-12 or q_star <= 2:
            break
        q_star -= 1
    log_ells = [log_ell1]
    eta_qs: list[float] = []
    for q in range(2, q_star + 1):
        target_log = log_ell1 * step ** (q - 1) if q < q_star else log_ell_target
        target_log = max(target_log, log_ells[-1] * (1 + eta))
        rounded = _round_up_log(min(target_log, log_ell_target))
        if q == q_star:
            rounded = log_ell_target
        eta_q = rounded / log_ells[-1] - 1.0
        if eta_q < eta - 1e-12:
            clamped = True
        eta_qs.append(eta_q)
        log_ells.append(rounded)
    return Ladder(tuple(log_ells), tuple(eta_qs), q_star, False, clamped)


@dataclass(frozen=True)
class VelocityTrace:
    log_vs: tuple[float, ...]           # log v_1, log v_2, ...
    log_v_star: float                   # log max(ell_1^(1+eta_bar) v0, v_inf)
    converged: bool
    deltas: tuple[float, ...]           # delta_{q-1} per step


def velocity_recursion(log_ell1: float, alpha: float, D: int, g: float,
                       gamma: float, tol: float = 1e-9,
                       q_cap: int = 100000) -> VelocityTrace:
    """Iterate v_q = v_{q-1} (1/(1-delta_{q-1}) + 192 log(zeta2)/(eta log ell_{q-1}))
    along the fastest-growing ladder until the Cauchy tail drops below tol."""
    ex = derived_exponents(alpha, D)
    eta, eta_bar = ex.eta, ex.eta_bar
    z2 = zeta2(D, gamma)
    ct0 = c_tilde_0(D, gamma)
    v0v = v0(alpha, D, g, gamma)
    log_v = log_ell1 + math.log(v0v)
    log_vs = [log_v]
    deltas: list[float] = []
    log_ell_prev = log_ell1
    converged = False
    for _ in range(q_cap):
        eta_q = eta_bar
        log_ell_q = (1 + eta_q) * log_ell_prev
        lg = eta_q * log_ell_prev
        log1p_term = lg - math.log(12.0) if lg > 60 else math.log1p(math.exp(lg) / 12.0)
        num = 6.0 * (math.log(ct0) + 2 * math.log(gamma) + 2 * D * (LN2 + log_ell_q)) \
            + 6.0 * (D - 1) * log1p_term
        delta = num * math.exp(-lg) if lg < 700 else 0.0
        if delta >= 1.0:
            raise OutOfRegimeError("delta_{q-1} >= 1: base-scale conditions violated")
        factor = 1.0 / (1.0 - delta) + 192.0 * math.log(z2) / (eta * log_ell_prev)
        step = math.log(factor)
        log_v += step
        log_vs.append(log_v)
        deltas.append(delta)
        log_ell_prev = log_ell_q
        if abs(factor - 1.0) < tol:
            converged = True
            break
    log_v_star = max((1 + eta_bar) * log_ell1 + math.log(v0v), log_v)
    return VelocityTrace(tuple(log_vs), log_v_star, converged, tuple(deltas))


# ---------------------------------------------------------------------------
# middle-range and quasi-local bounds


def middle_range_bound(x: float, t: float, sizeX: float, ell: float,
                       params: "BoundParams") -> LogBound:
    """C~0 |X|^2 (1 + x/ell)^(D-1) e^{-2(x - v* |t|)/ell}, capped at 2."""
    if ell < 1:
        raise OutOfRegimeError("need ell >= 1")
    D = params.D
    log_vstar_t = params.log_v_star + math.log(abs(t)) if t != 0 else -math.inf
    # exponent -2(x - v*|t|)/ell in log space: v*|t| may dwarf x
    vt = math.exp(log_vstar_t) if log_vstar_t < 700 else math.inf
    expo = math.inf if vt == math.inf else -2.0 * (x - vt) / ell
    log_val = math.log(params.c_tilde_0) + 2 * math.log(sizeX) \
        + (D - 1) * math.log1p(x / ell) + expo
    return LogBound(log_val, in_cone=(expo > 0))


def quasi_local_lr_bound(x: float, t: float, sizeX_xi: float, g_tilde: float,
                         mu: float, xi: float, D: int, gamma: float) -> LogBound:
    """Bound for dynamics under a quasi-local Hamiltonian with shell decay mu.

    e |X^(xi)| [ v~ |t| exp(-(mu-1)x/(2 xi) + v~ |t|) + (e^2 v~ |t| / m*)^{m*} ]
    with v~ = 4 g~ gamma (4D)^D and m* = floor((mu-1)x/(2 mu xi)) + 1.
    """
    if mu <= 1:
        raise OutOfRegimeError("need mu > 1")
    if t == 0.0:
        return LogBound(-math.inf)
    v_tilde = 4.0 * g_tilde * gamma * (4.0 * D) ** D
    vt = v_tilde * abs(t)
    m_star = math.floor((mu - 1) / (2 * mu) * x / xi) + 1
    log_t1 = 1.0 + math.log(sizeX_xi) + math.log(vt) - (mu - 1) * x / (2 * xi) + vt
    log_t2 = 1.0 + math.log(sizeX_xi) + m_star * (2.0 + math.log(vt) - math.log(m_star))
    return LogBound(np.logaddexp(log_t1, log_t2))


def shell_envelope(s: int, s0: float, xi_tilde: float, xi1: float, g2: float,
                   C: float, v: float, t: float, gamma: float, D: int,
                   sizeX_s0xi: float) -> LogBound:
    """Shell-norm envelope for a time-evolved interaction band (raw form).

    s = 1:  (2 xi~)^D g2 gamma |X^(s0 xi~)| (s0 + 1)^D
    s >= 2: 2 (2 xi~)^D C gamma^3 g2 e^{v|t|/xi1} |X^(s0 xi~)| (s+s0)^D
              e^{-(s-1) xi~/xi1}
    """
    base = D * math.log(2 * xi_tilde) + math.log(g2) + math.log(gamma) \
        + math.log(sizeX_s0xi)
    if s == 1:
        return LogBound(base + D * math.log(s0 + 1))
    log_val = LN2 + base + 2 * math.log(gamma) + math.log(C) \
        + v * abs(t) / xi1 + D * math.log(s + s0) - (s - 1) * xi_tilde / xi1
    return LogBound(log_val)


def shell_envelope_simplified(s: int, s0: float, xi_tilde: float, ell: float,
                              g_q: float, gamma: float, D: int,
                              sizeX_s0xi: float) -> LogBound:
    """(2 xi~)^D g_q gamma |X^(s0 xi~)| (s+s0)^D e^{-(s-1) xi~/(2 ell)}.

    Valid once 2 gamma^2 C e^{v|t|/ell} e^{-xi~/(2 ell)} <= 1; see
    shell_condition_ok.
    """
    log_val = D * math.log(2 * xi_tilde) + math.log(g_q) + math.log(gamma) \
        + math.log(sizeX_s0xi) + D * math.log(s + s0) - (s - 1) * xi_tilde / (2 * ell)
    return LogBound(log_val)


def shell_condition_ok(C: float, v: float, t: float, xi1: float,
                       xi_tilde: float, gamma: float) -> bool:
    """2 gamma^2 C e^{v|t|/xi1} e^{-xi~/(2 xi1)} <= 1."""
    return LN2 + 2 * math.log(gamma) + math.log(C) \
        + v * abs(t) / xi1 - xi_tilde / (2 * xi1) <= 0


# ---------------------------------------------------------------------------
# connection constants


def connector_c(xi: float, xi0: float, D: int, gamma: float) -> float:
    """C_{xi,xi0} = 2^(D+2) D! gamma (1 + xi0/xi)^D e^{5 xi/xi0}."""
    if xi <= 0 or xi0 <= 0:
        raise OutOfRegimeError("need xi, xi0 > 0")
    return 2.0 ** (D + 2) * math.factorial(D) * gamma \
        * (1.0 + xi0 / xi) ** D * math.exp(5.0 * xi / xi0)


def _log_sup_on_grid(fn, lo: float, hi: float, n: int = 4001) -> float:
    """Numeric sup of a log-valued function on a log-spaced grid + refinement."""
    us = np.exp(np.linspace(math.log(lo), math.log(hi), n))
    vals = np.array([fn(u) for u in us])
    k = int(np.argmax(vals))
    a = us[max(k - 1, 0)]
    b = us[min(k + 1, n - 1)]
    for _ in range(80):
        m1 = a + (b - a) / 3
        m2 = b - (b - a) / 3
        if fn(m1) < fn(m2):
            a = m1
        else:
            b = m2
    return max(float(vals[k]), fn(0.5 * (a + b)))


def connector_c_prime(kappa: float, p: float, alpha0: float, D: int,
                      gamma: float) -> float:
    """C'_{kappa,p,alpha0} with the inner sup over z >= kappa+3 done numerically."""
    if alpha0 <= D + 1:
        raise OutOfRegimeError("need alpha0 > D + 1")
    if kappa < 0:
        raise OutOfRegimeError("need kappa >= 0")

    def log_h(u: float) -> float:     # u = z - kappa - 2 >= 1
        z = u + kappa + 2.0
        return (D + 1) * math.log(z) + p * math.log(2 * math.log(z) + 1) \
            - alpha0 * math.log(u)

    log_sup = _log_sup_on_grid(log_h, 1.0, 1e12)
    log_c = log_sup + (D + 2) * LN2 + math.log(gamma) + math.log(D) \
        + (alpha0 - 1) * math.log(kappa + 3)
    return math.exp(log_c)


def c_alpha_d(alpha: float, D: int) -> float:
    """D^{-1} sup_{r>=1} [1 + 2D log r]^D / r^(alpha - 2D - 1)."""
    at = alpha - 2 * D - 1
    if at <= 0:
        raise OutOfRegimeError("need alpha > 2D + 1")

    def log_h(r: float) -> float:
        return D * math.log(1 + 2 * D * math.log(r)) - at * math.log(r)

    return math.exp(_log_sup_on_grid(log_h, 1.0, 1e12)) / D


def c_p_kappa(p: float, kappa: float, alpha: float, D: int) -> float:
    """sup_{z >= kappa+2} (log z + 1)^p / (z - 2)^(alpha - D - 1)."""
    def log_h(z: float) -> float:
        return p * math.log(math.log(z) + 1.0) - (alpha - D - 1) * math.log(z - 2.0)

    return math.exp(_log_sup_on_grid(log_h, kappa + 2.0, 1e12))


# ---------------------------------------------------------------------------
# the long-range constant chain


@dataclass(frozen=True)
class LongRangeChain:
    kappa_tilde: float
    c_star: float
    kappa0: float
    log_J1p: float           # log J~'_1
    log_J2p: float           # log J~'_2
    log_lambda0: float
    log_J0: float
    p: int                   # log-power in the envelope (2D generic, 0 k-local)


_TS = np.exp(np.linspace(0.0, math.log(1e8), 160))


def _t_grid() -> np.ndarray:
    return _TS


def _exp_cap(x: np.ndarray | float) -> np.ndarray | float:
    return np.exp(np.minimum(x, 700.0))


def _kappa_tilde(alpha: float, D: int, ex: DerivedExponents, gamma: float,
                 log_v_star: float, k_local: bool) -> float:
    """Smallest kappa >= 16 making the cone-region inequalities hold on a t-grid."""
    log_c0 = (2 * D + 1) * LN2 + 1.0 + 2 * math.log(gamma)   # log(2^{2D+1} e gamma^2)
    ts = _t_grid()
    log_ts = np.log(ts)
    ell_ts = ts ** ex.eta_tilde
    vstar_ts = _exp_cap(log_v_star + log_ts)

    def ok(kappa: float) -> bool:
        if kappa < 16.0:
            return False
        log_R = math.log(kappa) + log_v_star + log_ts
        if not k_local:
            # R/2 >= 4 [ell_t (log_c0 + 2 alpha log R) + 2 v* t]
            f_ell = ell_ts * (log_c0 + 2 * alpha * log_R) + 2.0 * vstar_ts
            if np.any(_exp_cap(log_R) / 2.0 < 4.0 * f_ell):
                return False
            # monotone decrease of R^-alpha log^p(R+1)
            if np.any(alpha * log_R < 2 * D):
                return False
        # e^{-R/(16 ell_t)} <= R^-alpha
        if np.any(_exp_cap(log_R) / (16.0 * ell_ts) < alpha * log_R):
            return False
        return True

    lo, hi = 16.0, 16.0
    while not ok(hi):
        hi *= 2.0
        if hi > 1e9:
            raise OutOfRegimeError("no kappa~ found below the search cap")
    if ok(lo):
        return lo
    for _ in range(80):
        mid = math.sqrt(lo * hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _c_star(alpha: float, D: int, ex: DerivedExponents, gamma: float,
            log_v_star: float, kappa_tilde: float) -> float:
    """Constant with f~_{t,R} ell_t <= c* v* |t| (R below the cone boundary)
    and <= c* v* |t| log(R+1) above it."""
    log_c0 = (2 * D + 1) * LN2 + 1.0 + 2 * math.log(gamma)
    ts = _t_grid()
    log_ts = np.log(ts)
    log_R = math.log(kappa_tilde) + log_v_star + log_ts
    ell_ts = ts ** ex.eta_tilde
    f_log_part = ell_ts * (log_c0 + 2 * alpha * log_R)
    vstar_ts = _exp_cap(log_v_star + log_ts)
    below = f_log_part / vstar_ts + 2.0
    above = f_log_part / (vstar_ts * log_R) + 2.0 / log_R
    return float(max(below.max(), above.max())) * (1.0 + 1e-9)


def _long_range_chain(alpha: float, D: int, ex: DerivedExponents, g: float,
                      g0: float, gamma: float, log_v_star: float,
                      k: int | None) -> LongRangeChain:
    k_local = k is not None
    kt = _kappa_tilde(alpha, D, ex, gamma, log_v_star, k_local)
    if k_local:
        # C = 1 in the middle-range certificate; prefactor 2 e C k^2
        extra = math.log(2.0 * math.e * k ** 2)
        log_J1 = extra + (6 * D + alpha) * LN2 + 1.0 + gammaln(2 * D + 1) \
            + 2 * math.log(gamma)
        log_J2 = extra + 1.0 + D * math.log(6.0) + math.log(gamma) + gammaln(D + 1)
        log_ct3 = 0.0
        c_star = 2.0
        p = 0
    else:
        log_J1 = (6 * D + alpha) * LN2 + 1.0 + gammaln(2 * D + 1) + 2 * math.log(gamma)
        log_J2 = 1.0 + D * math.log(6.0) + math.log(gamma) + gammaln(D + 1)
        log_J3 = 1.0 + math.log(gamma) + gammaln(D + 1) \
            + D * math.log(8.0 * math.log(2.0 * math.e * gamma ** 2)) \
            + math.log(c_alpha_d(alpha, D))
        # absorption of the additive J3 term into both min branches
        log_ct3 = math.log1p(math.exp(log_J3 + math.log(g) - math.log(g0) - log_J1)
                             + math.exp(log_J3 - log_J2))
        c_star = _c_star(alpha, D, ex, gamma, log_v_star, kt)
        p = 2 * D

    log_cv = math.log(c_star) + log_v_star
    log_J1p = LN2 + log_ct3 + math.log(g0) + log_J1 + 2 * D * log_cv
    log_J2p = log_ct3 + math.log(g) + log_J2 + D * log_cv

    # lambda0: sup over t >= 1 of  |t|^{alpha~/2} * lambda~ |t|
    term1 = log_J2p + math.log(gamma) + D * math.log(2.0 * (kt + 3.0))
    cpk = c_p_kappa(p, kt, alpha, D)
    log_ts = np.log(_t_grid())
    if p:
        log_arg = np.logaddexp(math.log(kt) + log_v_star + log_ts, 0.0)
        sup_t = float(np.max(-ex.alpha_tilde / 2.0 * log_ts + p * np.log(log_arg)))
    else:
        sup_t = 0.0
    term2 = math.log(cpk) + log_J1p + math.log(gamma) + math.log(D) \
        + (D + 1) * LN2 - alpha * log_v_star - math.log(kt + 2.0) + sup_t
    log_lambda0 = float(np.logaddexp(term1, term2))

    if log_lambda0 > 700.0:
        raise OverflowError(
            "lambda0 exceeds the float range; the constant chain cannot be "
            "carried in (sign, log) representation for these parameters")
    lam0 = math.exp(log_lambda0)
    W = 2.0 * math.e * lam0 * gamma ** 2 * 9.0 ** D
    log_expm1 = W + math.log1p(-math.exp(-W)) if W > 40 else math.log(math.expm1(W))
    log_J0 = (alpha + 2) * LN2 + 1.0 + float(gammaln(alpha + 2)) + log_expm1 \
        - log_lambda0 + log_J1p

    kappa0 = _kappa0(alpha, D, ex, gamma, log_v_star, kt, log_lambda0, log_J0,
                     log_J1p, p)
    return LongRangeChain(kt, c_star, kappa0, log_J1p, log_J2p, log_lambda0,
                          log_J0, p)


def _kappa0(alpha: float, D: int, ex: DerivedExponents, gamma: float,
            log_v_star: float, kappa_tilde: float, log_lambda0: float,
            log_J0: float, log_J1p: float, p: int) -> float:
    """Smallest kappa0 >= kappa~ where the power-law term dominates the
    stretched-exponential remainder of the long-range envelope."""
    lam_fac = math.log(4.0 * math.e * kappa_tilde) + log_v_star + log_lambda0 \
        + 2 * math.log(gamma) + D * math.log(9.0)
    log_first_const = (alpha + 1) * LN2 + 1.0 + float(gammaln(alpha + 2)) \
        - log_lambda0 + log_J1p
    W = 2.0 * math.e * math.exp(log_lambda0) * gamma ** 2 * 9.0 ** D
    log_first_const += W + (math.log1p(-math.exp(-W)) if W > 40
                            else math.log(math.expm1(W)) - W)

    ts = _t_grid()
    log_ts = np.log(ts)

    def ok(kappa: float) -> bool:
        for t, log_t in zip(ts, log_ts):
            log_vt = log_v_star + log_t
            facs = np.exp(np.linspace(math.log(kappa), max(900.0 - log_vt,
                                                           math.log(kappa) + 1), 60))
            log_R = np.log(facs) + log_vt
            log_first = log_first_const + (2 * D + 1) * log_t - alpha * log_R \
                + (p * np.log(log_R) if p else 0.0)
            log_arg = lam_fac + (1 - ex.alpha_tilde / 2.0) * log_t - log_R
            log_second = LN2 + (facs / (2.0 * kappa_tilde)) * log_arg
            if np.any(log_second > log_first):
                return False
        return True

    lo, hi = kappa_tilde, kappa_tilde
    while not ok(hi):
        hi *= 2.0
        if hi > 1e9:
            raise OutOfRegimeError("no kappa0 found below the search cap")
    if ok(lo):
        return lo
    for _ in range(80):
        mid = math.sqrt(lo * hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# main-theorem plumbing


@dataclass(frozen=True)
class MainChain:
    c1: float
    c2: float
    c3: float
    kappa_tilde_0: float
    log_C_H: float
    log_Cprime_H: float
    log_v_bar: float


def _c1_margins(c1: float, D: int, ex: DerivedExponents, gamma: float,
                ct0: float, log_v_star: float) -> np.ndarray:
    """Reserve of the t-dependent part of the xi_j inequality at scale c1.

    2 (c1 - 1) v* t / ell_t  -  [log C~0 + 2 log gamma + 2D log(2 v* t + 1)
                                 + (D - 1) log(1 + c1 v* t / ell_t)]
    """
    ts = _t_grid()
    log_ts = np.log(ts)
    ell_ts = ts ** ex.eta_tilde
    vts = _exp_cap(log_v_star + log_ts)
    lhs = 2.0 * (c1 - 1.0) * vts / ell_ts
    rhs = math.log(ct0) + 2 * math.log(gamma) \
        + 2 * D * np.logaddexp(LN2 + log_v_star + log_ts, 0.0) \
        + (D - 1) * np.log1p(c1 * vts / ell_ts)
    return lhs - rhs


_J_GRID = np.concatenate(([1.0, 2.0, 3.0], np.exp(np.linspace(1.5, 12, 40))))


def _xi_j_check(c1: float, c2: float, D: int, ex: DerivedExponents,
                gamma: float, ct0: float, log_v_star: float) -> bool:
    """Does xi_j = c1 v* t + c2 ell_t j force the truncated envelope below e^-j?

    Checked on (t, j) grids; tails are guarded by slope conditions: the c1
    reserve grows like t^(1 - eta~) against log t, and the linear (2 c2 - 1) j
    gain dominates the logarithmic j growth of the remaining bracket.
    """
    ts = _t_grid()
    log_ts = np.log(ts)
    ell_ts = (ts ** ex.eta_tilde)[:, None]
    vts = _exp_cap(log_v_star + log_ts)[:, None]
    js = _J_GRID[None, :]
    xi_j = c1 * vts + c2 * ell_ts * js
    log_lhs = math.log(ct0) + 2 * math.log(gamma) \
        + 2 * D * np.logaddexp(LN2 + log_v_star + log_ts, 0.0)[:, None] \
        + (D - 1) * np.log1p(xi_j / ell_ts) - 2.0 * (xi_j - vts) / ell_ts
    if np.any(log_lhs > -js):
        return False
    # j tail: d/dj of the deficit must stay <= -1 at the grid edge
    edge = 1.0 + (c1 * vts + c2 * ell_ts * _J_GRID[-1]) / ell_ts
    if np.any(2.0 * c2 - (D - 1) * c2 / edge < 1.0):
        return False
    # t tail: the c1 reserve must grow at least like 3D/t at the grid edge
    t_max = float(ts[-1])
    vt = float(_exp_cap(log_v_star + math.log(t_max)))
    if 2.0 * (c1 - 1.0) * (1.0 - ex.eta_tilde) * vt / t_max ** ex.eta_tilde < 3.0 * D:
        return False
    return True


def _main_chain(alpha: float, D: int, ex: DerivedExponents, gamma: float,
                log_v_star: float, lr: LongRangeChain) -> MainChain:
    ct0 = c_tilde_0(D, gamma)
    t_grid = _t_grid()
    t_max = float(t_grid[-1])

    def c1_ok(c1: float) -> bool:
        if np.any(_c1_margins(c1, D, ex, gamma, ct0, log_v_star) < 0.0):
            return False
        vt = float(_exp_cap(log_v_star + math.log(t_max)))
        return 2.0 * (c1 - 1.0) * (1.0 - ex.eta_tilde) * vt \
            / t_max ** ex.eta_tilde >= 3.0 * D

    # c1 - 1 can be as small as the float grain near 1, so bisect its log
    lo_u, hi_u = -745.0, 25.0
    if not c1_ok(1.0 + math.exp(hi_u)):
        raise OutOfRegimeError("no c1 found")
    for _ in range(200):
        mid = 0.5 * (lo_u + hi_u)
        if c1_ok(1.0 + math.exp(mid)):
            hi_u = mid
        else:
            lo_u = mid
    c1 = 1.0 + math.exp(hi_u)

    def c2_ok(c2: float) -> bool:
        return _xi_j_check(c1, c2, D, ex, gamma, ct0, log_v_star)

    lo_u, hi_u = -60.0, 25.0
    if not c2_ok(0.5 + math.exp(hi_u)):
        raise OutOfRegimeError("no c2 found")
    for _ in range(200):
        mid = 0.5 * (lo_u + hi_u)
        if c2_ok(0.5 + math.exp(mid)):
            hi_u = mid
        else:
            lo_u = mid
    c2 = 0.5 + math.exp(hi_u)

    vstar = math.exp(min(log_v_star, 700.0))
    c3 = 0.0
    for j in range(1, 400):
        c3 += math.exp(-j + 1) * (3.0 + 2 * c1 + 2 * c2 * j / vstar) ** D

    # kappa~0: truncated-Hamiltonian envelope below the long-range term in the
    # claimed region x >= (2 kappa + 5) v* t
    log_rhs_const = alpha * LN2 + math.log(c3) + lr.log_J0 + math.log(gamma)

    def kt0_ok(kappa: float) -> bool:
        for t in t_grid:
            log_t = math.log(t)
            ell_t = t ** ex.eta_tilde
            log_vt = log_v_star + log_t
            vt = float(_exp_cap(log_vt))
            facs = np.exp(np.linspace(math.log(2 * kappa + 5),
                                      max(900.0 - log_vt, math.log(2 * kappa + 5) + 1),
                                      50))
            log_R = np.log(facs) + log_vt
            R = _exp_cap(log_R)
            log_lhs = math.log(ct0) + 2 * math.log(gamma) \
                + 2 * D * np.logaddexp(LN2 + log_vt, 0.0) \
                + (D - 1) * np.log1p(R / (2 * ell_t)) \
                - 2.0 * (R / 2.0 - vt) / ell_t
            log_rhs = log_rhs_const + (2 * D + 1) * log_t \
                + (lr.p * np.log(log_R) if lr.p else 0.0) \
                - alpha * (np.log(facs - 2 * kappa) + log_vt)
            if np.any(log_lhs > log_rhs):
                return False
        return True

    lo3, hi3 = lr.kappa0, lr.kappa0
    while not kt0_ok(hi3):
        hi3 *= 2.0
        if hi3 > 1e9:
            raise OutOfRegimeError("no kappa~0 found")
    if not kt0_ok(lo3):
        for _ in range(80):
            mid = math.sqrt(lo3 * hi3)
            if kt0_ok(mid):
                hi3 = mid
            else:
                lo3 = mid
    kt0 = hi3

    log_C_H = (alpha + 3) * LN2 + math.log(c3) + lr.log_J0 + math.log(gamma)
    cprime = connector_c_prime(2 * kt0, lr.p, alpha, D, gamma)
    log_Cprime_H = (alpha + 2) * LN2 + math.log(c3) + lr.log_J0 + math.log(gamma) \
        + math.log(cprime) - D * log_v_star
    log_v_bar = math.log(2 * kt0 + 5) + log_v_star
    return MainChain(c1, c2, c3, kt0, log_C_H, log_Cprime_H, log_v_bar)


# ---------------------------------------------------------------------------
# parameter assembly and final bound evaluators


@dataclass(frozen=True)
class BoundParams:
    D: int
    alpha: float
    g: float
    g0: float
    gamma: float
    exponents: DerivedExponents
    v0: float
    zeta1: float
    zeta2: float
    c_tilde_0: float
    ell1: Ell1Report
    velocity: VelocityTrace
    long_range: LongRangeChain
    main: MainChain
    k: int | None = None
    long_range_k: LongRangeChain | None = None
    main_k: MainChain | None = None

    @property
    def log_v_star(self) -> float:
        return self.velocity.log_v_star

    @property
    def log_v_bar(self) -> float:
        return self.main.log_v_bar

    def report(self) -> dict:
        """JSON-ready summary of all derived constants (log space)."""
        out = {
            "D": self.D, "alpha": self.alpha, "g": self.g, "g0": self.g0,
            "gamma": self.gamma,
            "eta_bar": self.exponents.eta_bar, "eta": self.exponents.eta,
            "eta_tilde": self.exponents.eta_tilde,
            "alpha_tilde": self.exponents.alpha_tilde,
            "v0": self.v0, "zeta1": self.zeta1, "zeta2": self.zeta2,
            "c_tilde_0": self.c_tilde_0,
            "log_ell1": self.ell1.log_ell1,
            "ell1_condition_margins": list(self.ell1.conditions),
            "log_v_star": self.log_v_star,
            "velocity_converged": self.velocity.converged,
            "velocity_rungs": len(self.velocity.log_vs),
            "kappa_tilde": self.long_range.kappa_tilde,
            "c_star": self.long_range.c_star,
            "kappa0": self.long_range.kappa0,
            "log_lambda0": self.long_range.log_lambda0,
            "log_J0": self.long_range.log_J0,
            "c1": self.main.c1, "c2": self.main.c2, "c3": self.main.c3,
            "kappa_tilde_0": self.main.kappa_tilde_0,
            "log_C_H": self.main.log_C_H,
            "log_Cprime_H": self.main.log_Cprime_H,
            "log_v_bar": self.log_v_bar,
        }
        if self.k is not None:
            out.update({
                "k": self.k,
                "log_J0_k": self.long_range_k.log_J0,
                "kappa0_k": self.long_range_k.kappa0,
                "log_C_H_k": self.main_k.log_C_H,
                "log_Cprime_H_k": self.main_k.log_Cprime_H,
                "log_v_bar_k": self.main_k.log_v_bar,
            })
        return out


def assemble(alpha: float, D: int, g0: float, gamma: float, g: float = 1.0,
             k: int | None = None) -> BoundParams:
    """Build the full constant chain for given model parameters."""
    ex = derived_exponents(alpha, D)
    e1 = find_ell1(alpha, D, g, gamma)
    vel = velocity_recursion(e1.log_ell1, alpha, D, g, gamma)
    lr = _long_range_chain(alpha, D, ex, g, g0, gamma, vel.log_v_star, None)
    mc = _main_chain(alpha, D, ex, gamma, vel.log_v_star, lr)
    lr_k = mc_k = None
    if k is not None:
        lr_k = _long_range_chain(alpha, D, ex, g, g0, gamma, vel.log_v_star, k)
        mc_k = _main_chain(alpha, D, ex, gamma, vel.log_v_star, lr_k)
    return BoundParams(D, alpha, g, g0, gamma, ex, v0(alpha, D, g, gamma),
                       zeta1(D, gamma), zeta2(D, gamma), c_tilde_0(D, gamma),
                       e1, vel, lr, mc, k, lr_k, mc_k)


def assemble_for_model(H, xi_range: Sequence[float] = (1, 2, 3),
                       r_range: Sequence[float] = (1, 2, 3, 4),
                       k: int | None = None) -> BoundParams:
    """Assemble params for a concrete Hamiltonian: gamma estimated from its
    lattice, (g, g0) the minimal constants its terms actually satisfy."""
    from .hamiltonian import check_assumptions
    from .lattice import estimate_gamma

    gamma = estimate_gamma(H.lattice, list(xi_range), list(r_range)).gamma
    rep = check_assumptions(H)
    g = max(rep.minimal_g, 1e-12)
    g0 = max(rep.minimal_g0, 1e-12)
    return assemble(H.alpha, H.lattice.dim, g0, gamma, g, k)


def long_range_bound(x: float, t: float, sizeX_vt: float, sizeY_vt: float,
                     params: BoundParams, k_local: bool = False) -> LogBound:
    """Envelope for the long-range contribution beyond the cone x > kappa0 v* |t|."""
    if abs(t) < 1.0:
        raise OutOfRegimeError("need |t| >= 1")
    lr = params.long_range_k if k_local else params.long_range
    if lr is None:
        raise OutOfRegimeError("params were assembled without a k-local chain")
    log_cone = math.log(lr.kappa0) + params.log_v_star + math.log(abs(t))
    if x <= 0 or math.log(x) <= log_cone:
        return LogBound(LN2, in_cone=True)
    denom = x - math.exp(min(log_cone, 700.0))
    log_val = lr.log_J0 + math.log(sizeX_vt) + math.log(sizeY_vt) \
        + (2 * params.D + 1) * math.log(abs(t)) - params.alpha * math.log(denom)
    if lr.p:
        log_val += lr.p * math.log(math.log(x + 1.0))
    return LogBound(log_val)


def main_bound(x: float, t: float, sizeX: float, sizeY: float,
               params: BoundParams, which: str = "commutator",
               k_local: bool = False) -> LogBound:
    """Final envelopes: commutator and local-approximation forms.

    commutator: C_H |X^(vt)| |Y^(vt)| |t|^{2D+1} log^{2D}(x+1) / (x - v|t|)^alpha
    local:      C'_H |X^(vt)|^2 |t|^{D+1} log^{2D}(x+1) / (x - v|t|)^{alpha-D}
    (log factors drop in the k-local variant).  Inside the cone the trivial
    cap 2 applies.
    """
    if abs(t) < 1.0:
        raise OutOfRegimeError("need |t| >= 1")
    mc = params.main_k if k_local else params.main
    lr = params.long_range_k if k_local else params.long_range
    if mc is None:
        raise OutOfRegimeError("params were assembled without a k-local chain")
    log_vbar_t = mc.log_v_bar + math.log(abs(t))
    if x <= 0 or math.log(x) <= log_vbar_t:
        return LogBound(LN2, in_cone=True)
    denom = x - math.exp(min(log_vbar_t, 700.0))
    D = params.D
    log_log_factor = lr.p * math.log(math.log(x + 1.0)) if lr.p else 0.0
    if which == "commutator":
        log_val = mc.log_C_H + math.log(sizeX) + math.log(sizeY) \
            + (2 * D + 1) * math.log(abs(t)) + log_log_factor \
            - params.alpha * math.log(denom)
    elif which == "local":
        log_val = mc.log_Cprime_H + 2 * math.log(sizeX) \
            + (D + 1) * math.log(abs(t)) + log_log_factor \
            - (params.alpha - D) * math.log(denom)
    else:
        raise ValueError(f"unknown bound form {which!r}")
    return LogBound(log_val)


@dataclass(frozen=True)
class InvertedCone:
    """Solution of main_bound(local) = delta, split to preserve precision.

    log(x - v_bar |t|) = y_base + y_delta; y_base depends only on the
    assembled constants (it is astronomically large), while y_delta carries
    the entire delta- and t-dependence at full float precision.
    """

    y_base: float
    y_delta: float

    @property
    def log_excess(self) -> float:
        return self.y_base + self.y_delta


def invert_local_bound(log_delta: float, t: float,
                       params: BoundParams) -> InvertedCone:
    """Solve main_bound(local) = delta for x in log space.

    The base part solves y = [log C'_H + 2D log y] / (alpha - D) at the
    reference point (t = 1, delta = 1); the increment solves the remaining
    fixed point, whose log-log correction is a representable small number
    even though the base is ~ 1e180.
    """
    mc = params.main
    D = params.D
    a = params.alpha - D
    y0 = mc.log_Cprime_H / a
    for _ in range(200):
        y_new = (mc.log_Cprime_H + 2 * D * math.log(y0)) / a
        if abs(y_new - y0) <= 1e-12 * max(1.0, abs(y0)):
            y0 = y_new
            break
        y0 = y_new
    d = ((D + 1) * math.log(abs(t)) - log_delta) / a
    for _ in range(200):
        d_new = ((D + 1) * math.log(abs(t)) - log_delta
                 + 2 * D * math.log1p(d / y0)) / a
        if abs(d_new - d) <= 1e-15 * max(1.0, abs(d)) + 1e-300:
            d = d_new
            break
        d = d_new
    return InvertedCone(float(y0), float(d))
