"""Derived exponents, the smallness functional L(eta) and coercivity constants."""
from dataclasses import asdict, dataclass

import numpy as np

from .stress import ParameterError

INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0
ETA_RANGE = (1e-6, 1e6)
ETA_LIMITS = (1e-300, 1e300)


class RangeError(ValueError):
    pass


class ConsistencyError(ValueError):
    pass


def conjugate(x):
    return x / (x - 1.0)


@dataclass(frozen=True)
class ExponentTable:
    d: int
    p: float
    p_star: float
    p_prime: float
    s: float
    r: float
    q: float
    sigma: float

    @property
    def a(self):
        """eta-exponent of the L^r bound of the tangential extension."""
        return 1.0 / self.r - 1.0 / self.q

    @property
    def b(self):
        """eta-exponent of the gradient bound of the tangential extension (negative)."""
        return 1.0 / self.p - 1.0 / self.q - 1.0

    @property
    def r_is_sobolev_branch(self):
        d, p = self.d, self.p
        return d * p / (d * p - 2 * d + p) >= 2.0 * self.p_prime

    def holder_sum(self):
        return 1.0 / self.p + 1.0 / self.p_star + 1.0 / self.r


def candidate_r(d, p):
    return max(d * p / (d * p - 2 * d + p), 2.0 * p / (p - 1.0))


def derive_exponents(d, p, q, sigma=None):
    """Exponent table for ``(d, p, q)``.

    ``sigma`` defaults to ``max(s, 2) + 1``.
    """
    if d not in (2, 3):
        raise RangeError(f"d must be 2 or 3, got {d}")
    lo = 2.0 * d / (d + 1.0)
    if not lo < p < 2.0:
        raise RangeError(f"p = {p} outside the admissible interval ({lo:.6g}, 2)")
    p_star = d * p / (d - p)
    p_prime = conjugate(p)
    s = max(conjugate(p_star / 2.0), p)
    r = candidate_r(d, p)
    if not q > r:
        raise ConsistencyError(f"q = {q} must exceed r = {r:.12g}")
    if sigma is None:
        sigma = max(s, 2.0) + 1.0
    if not sigma > max(s, 2.0):
        raise ConsistencyError(f"sigma = {sigma} must exceed max(s, 2) = {max(s, 2.0):.12g}")
    return ExponentTable(int(d), float(p), p_star, p_prime, s, r, float(q), float(sigma))


def tangential_q_bound(d, p):
    """Lower bound on q for the purely tangential regime (needs p > 2 - 1/d)."""
    return d * (3.0 - p) / (d * p - 2.0 * d + 1.0)


def tangential_regime(ex):
    """Whether purely tangential data satisfy the smallness condition for every size."""
    return ex.p > 2.0 - 1.0 / ex.d and ex.q > tangential_q_bound(ex.d, ex.p)


@dataclass(frozen=True)
class DataNorms:
    K_d: float = 0.0
    K_f: float = 0.0
    K_n: float = 0.0
    K_t: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not (np.isfinite(v) and v >= 0):
                raise ParameterError(f"{k} must be finite and non-negative, got {v}")

    def scaled(self, t):
        return DataNorms(t * self.K_d, t * self.K_f, t * self.K_n, t * self.K_t, self.delta)


@dataclass(frozen=True)
class Calibration:
    """Generic constants of the estimates; all default to 1."""

    c_L: float = 1.0
    c_G2: float = 1.0
    c_G31: float = 1.0
    c_G3f: float = 1.0
    c_G1: float = 1.0

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not v > 0:
                raise ParameterError(f"{k} must be positive, got {v}")

    @classmethod
    def consistent(cls, c=1.0):
        """Constants for which the smallness condition implies the direct
        coercivity inequality: the factor 2 of that inequality is moved
        into ``c_L``."""
        return cls(c_L=2.0 * c, c_G2=c, c_G31=c, c_G3f=c, c_G1=1.0)


def L_terms(eta, norms, ex):
    """The six summands of L(eta); broadcasts over ``eta``."""
    eta = np.asarray(eta, dtype=float)
    if np.any(eta <= 0):
        raise ParameterError("eta must be positive")
    p, a, b = ex.p, ex.a, ex.b
    Kd, Kf, Kn, Kt, dl = norms.K_d, norms.K_f, norms.K_n, norms.K_t, norms.delta
    B = Kd**2 + Kn**2 + Kf + (Kt + Kn + Kd + dl) ** (p - 1.0)
    dn = (Kd + Kn) ** (p - 1.0)
    Bq = B ** (2.0 - p)
    if Kt == 0.0:
        zero = np.zeros_like(eta)
        return np.stack(np.broadcast_arrays(dn * Bq + zero, zero, zero, zero, zero, zero))
    t1 = dn * Bq + 0.0 * eta
    t2 = dn * (eta ** (2.0 * a) * Kt**2) ** (2.0 - p)
    t3 = dn * (eta**b * Kt) ** ((p - 1.0) * (2.0 - p))
    t4 = (eta**a * Kt) ** (p - 1.0) * Bq
    t5 = eta ** (a * (3.0 - p)) * Kt ** (3.0 - p)
    t6 = eta ** ((a + b * (2.0 - p)) * (p - 1.0)) * Kt ** ((p - 1.0) * (3.0 - p))
    return np.stack([t1, t2, t3, t4, t5, t6])


def eval_L(eta, norms, ex):
    return L_terms(eta, norms, ex).sum(axis=0)


def eta_exponents(ex):
    """Powers of eta carried by the six summands."""
    p, a, b = ex.p, ex.a, ex.b
    return np.array([
        0.0,
        2.0 * a * (2.0 - p),
        b * (p - 1.0) * (2.0 - p),
        a * (p - 1.0),
        a * (3.0 - p),
        (a + b * (2.0 - p)) * (p - 1.0),
    ])


@dataclass(frozen=True)
class Minimum:
    eta_star: float
    L_min: float
    flag: str  # "interior", "constant", "infimum at boundary"


def golden_section(f, lo, hi, rtol=1e-10, max_iter=500):
    """Minimize a unimodal ``f`` on [lo, hi]; returns (x, f(x))."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= rtol * max(abs(a), abs(b), 1e-300):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _grow_at(norms, which):
    """Whether theory guarantees L -> infinity at the lower/upper end."""
    if norms.K_t == 0:
        return False
    if which == "lower":
        return norms.K_d + norms.K_n > 0
    return True


def minimize_L(norms, ex, eta_range=ETA_RANGE, n_grid=200, rtol=1e-10):
    """Minimize L over eta: log grid, then golden section on log(eta).

    When the grid minimum sits at an end where L provably grows without
    bound, the range is widened by factors of 1e6 in that direction (up to
    1e-300 / 1e300) before refining.
    """
    lo, hi = map(float, eta_range)
    if not (lo > 0 and hi > lo):
        raise ParameterError(f"invalid eta range {eta_range}")
    while True:
        grid = np.logspace(np.log10(lo), np.log10(hi), n_grid)
        vals = eval_L(grid, norms, ex)
        top = vals.max()
        if top - vals.min() <= 1e-14 * max(top, 1e-300):
            return Minimum(lo, float(vals[0]), "constant")
        i = int(np.argmin(vals))
        if i == 0 and _grow_at(norms, "lower") and lo > ETA_LIMITS[0]:
            lo = max(lo * 1e-6, ETA_LIMITS[0])
            continue
        if i == n_grid - 1 and _grow_at(norms, "upper") and hi < ETA_LIMITS[1]:
            hi = min(hi * 1e6, ETA_LIMITS[1])
            continue
        break
    if i in (0, n_grid - 1):
        return Minimum(float(grid[i]), float(vals[i]), "infimum at boundary")

    def f(t):
        return float(eval_L(np.exp(t), norms, ex))

    t, fmin = golden_section(f, np.log(grid[i - 1]), np.log(grid[i + 1]), rtol=rtol)
    eta = float(np.exp(t))
    if fmin > vals[i]:
        eta, fmin = float(grid[i]), float(vals[i])
    return Minimum(eta, fmin, "interior")


def g_constants(eta, norms, ex, cal, model):
    """Return (G1, G2, G3, G31, G32) at cutoff length ``eta``."""
    if not eta > 0:
        raise ParameterError("eta must be positive")
    p, a, b = ex.p, ex.a, ex.b
    Kd, Kf, Kn, Kt, dl = norms.K_d, norms.K_f, norms.K_n, norms.K_t, norms.delta
    tb = eta**b * Kt if Kt else 0.0
    ta = eta**a * Kt if Kt else 0.0
    G1 = cal.c_G1 * model.C1
    G31 = cal.c_G31 * (tb + Kt + Kn + Kd + dl) ** (p - 1.0)
    G2 = cal.c_G2 * (Kd + Kn + ta)
    G32 = cal.c_G2 * (Kd**2 + Kn**2 + ta**2)
    G3 = G31 + G32 + cal.c_G3f * Kf
    return G1, G2, G3, G31, G32


def coercivity_radius(G1, G3, p):
    """``(2 G3 / G1)^(1/(p-1))``."""
    if not G1 > 0:
        raise ParameterError("G1 must be positive")
    if G3 < 0:
        raise ParameterError("G3 must be non-negative")
    if G3 == 0:
        return 0.0
    return (2.0 * G3 / G1) ** (1.0 / (p - 1.0))


@dataclass(frozen=True)
class SmallnessReport:
    eta_star: float
    L_min: float
    G1: float
    G2: float
    G3: float
    R: float
    satisfied: bool
    direct_ok: bool
    flag: str


def direct_condition(G1, G2, G3, p):
    return G1 >= 2.0 * G2 ** (p - 1.0) * G3 ** (2.0 - p)


def check_smallness(norms, ex, cal, model, eta_range=ETA_RANGE):
    """Decide the smallness condition and report constants at the optimal eta.

    If L decreases to 0 as eta -> 0 (no normal or divergence data and all
    eta-powers positive), the condition holds for every data size; eta_star
    is then the largest eta in ``[1e-300, eta_range[0]]`` at which it holds.
    """
    mn = minimize_L(norms, ex, eta_range)
    eta, L_min, flag = mn.eta_star, mn.L_min, mn.flag
    threshold = model.C1 / cal.c_L
    vanishing = (
        flag == "infimum at boundary"
        and norms.K_d + norms.K_n == 0
        and eta <= eta_range[0]
        and np.all(eta_exponents(ex)[[1, 3, 4, 5]] > 0)
    )
    if vanishing and L_min > threshold:
        eta, L_min = _shrink_until(norms, ex, threshold, eta)
    satisfied = bool(threshold >= L_min)
    G1, G2, G3, _, _ = g_constants(eta, norms, ex, cal, model)
    R = coercivity_radius(G1, G3, ex.p)
    return SmallnessReport(
        eta, L_min, G1, G2, G3, R, satisfied, bool(direct_condition(G1, G2, G3, ex.p)), flag
    )


def _shrink_until(norms, ex, threshold, eta):
    lo_t = np.log(ETA_LIMITS[0])
    hi_t = np.log(eta)

    def L(t):
        return float(eval_L(np.exp(t), norms, ex))

    if L(lo_t) > threshold:
        return float(np.exp(lo_t)), L(lo_t)
    # L is increasing in eta here; find the largest admissible eta
    for _ in range(200):
        mid = 0.5 * (lo_t + hi_t)
        if L(mid) <= threshold:
            lo_t = mid
        else:
            hi_t = mid
    return float(np.exp(lo_t)), L(lo_t)
