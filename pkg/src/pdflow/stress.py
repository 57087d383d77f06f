"""Extra stress with (p, delta)-structure and checks of its defining bounds."""
from dataclasses import dataclass

import numpy as np

PAIR_EPS = 1e-14
# rounding allowance when comparing ratios with C1, C2
RATIO_RTOL = 1e-12


class StructureError(ValueError):
    pass


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class StressModel:
    """Power law ``S(A) = (delta + |A|)^(p-2) A`` with characteristics C1, C2.

    ``|A|`` is the Frobenius norm. C1 and C2 are the coercivity and growth
    constants; use :func:`calibrate` to obtain them for given (p, delta).
    """

    p: float
    delta: float = 0.0
    C1: float = 1.0
    C2: float = 1.0

    def __post_init__(self):
        if not self.p > 1:
            raise ParameterError(f"p must exceed 1, got {self.p}")
        if self.delta < 0:
            raise ParameterError(f"delta must be >= 0, got {self.delta}")
        if not (0 < self.C1 <= self.C2):
            raise ParameterError(f"need 0 < C1 <= C2, got C1={self.C1}, C2={self.C2}")

    def viscosity(self, absA, floor=0.0):
        """Scalar factor ``(delta + |A|)^(p-2)``; ``floor`` bounds the base from below."""
        base = self.delta + np.asarray(absA, dtype=float)
        if floor > 0:
            base = np.maximum(base, floor)
        with np.errstate(divide="ignore"):
            return base ** (self.p - 2.0)

    def __call__(self, A):
        return stress_eval(A, self)


def _frob(A):
    return np.sqrt(np.sum(A * A, axis=(-2, -1)))


def stress_eval(A, m):
    """Evaluate ``S(A)`` for one matrix or a stack (..., d, d)."""
    A = np.asarray(A, dtype=float)
    if A.shape[-1] != A.shape[-2]:
        raise StructureError("stress argument must be square")
    if not np.allclose(A, np.swapaxes(A, -1, -2), rtol=0, atol=1e-12 * max(1.0, np.abs(A).max(initial=0))):
        raise StructureError("stress argument must be symmetric")
    n = _frob(A)
    base = m.delta + n
    fac = np.zeros_like(base)
    nz = base > 0
    fac[nz] = base[nz] ** (m.p - 2.0)
    # A = 0 with delta = 0: the singular factor multiplies a zero matrix
    return fac[..., None, None] * A


def structure_ratios(m, A, B):
    """Per-pair lower and upper ratios of the (p, delta)-structure bounds.

    Pairs with ``|A - B| < 1e-14`` are dropped.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    D = A - B
    nD = _frob(D)
    keep = nD >= PAIR_EPS
    A, B, D, nD = A[keep], B[keep], D[keep], nD[keep]
    dS = stress_eval(A, m) - stress_eval(B, m)
    w = (m.delta + _frob(B) + nD) ** (m.p - 2.0)
    lower = np.sum(dS * D, axis=(-2, -1)) / (w * nD**2)
    upper = _frob(dS) / (w * nD)
    return lower, upper


@dataclass(frozen=True)
class StructureReport:
    min_ratio_lower: float
    max_ratio_upper: float
    n_pairs: int
    passed: bool


def check_structure_inequalities(m, samples):
    """Check both structure inequalities over ``samples``, a sequence of
    (A, B) pairs or a pair of stacked arrays."""
    if isinstance(samples, tuple) and len(samples) == 2 and np.ndim(samples[0]) == 3:
        A, B = samples
    else:
        samples = list(samples)
        if not samples:
            raise ValueError("sample set is empty")
        A = np.array([s[0] for s in samples], dtype=float)
        B = np.array([s[1] for s in samples], dtype=float)
    if len(A) == 0:
        raise ValueError("sample set is empty")
    lower, upper = structure_ratios(m, A, B)
    if len(lower) == 0:
        raise ValueError("every sample pair is degenerate (A == B)")
    lo, hi = float(lower.min()), float(upper.max())
    slack = RATIO_RTOL * m.C2
    return StructureReport(lo, hi, len(lower), lo >= m.C1 - slack and hi <= m.C2 + slack)


def random_sym_pairs(n, d=2, scale=2.0, rng=None):
    """``n`` pairs of symmetric d x d matrices with entries uniform in [-scale, scale]."""
    rng = np.random.default_rng(rng)
    out = []
    for _ in range(2):
        M = rng.uniform(-scale, scale, size=(n, d, d))
        iu = np.triu_indices(d, 1)
        M[:, iu[1], iu[0]] = M[:, iu[0], iu[1]]
        out.append(M)
    return out[0], out[1]


def calibrate(p, delta, n_pairs=10**6, seed=0, d=2, chunk=250_000):
    """Return ``StressModel`` with C1 = 0.99 min and C2 = 1.01 max observed ratios."""
    rng = np.random.default_rng(seed)
    probe = StressModel(p, delta)
    lo, hi = np.inf, -np.inf
    done = 0
    while done < n_pairs:
        k = min(chunk, n_pairs - done)
        A, B = random_sym_pairs(k, d, rng=rng)
        lower, upper = structure_ratios(probe, A, B)
        lo = min(lo, lower.min())
        hi = max(hi, upper.max())
        done += k
    return StressModel(p, delta, 0.99 * lo, 1.01 * hi)


def reverse_jensen_check(alpha, xs):
    """Whether ``(sum x_i)^alpha <= sum x_i^alpha`` holds for ``xs``."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    xs = np.asarray(xs, dtype=float)
    if np.any(xs < 0):
        raise ParameterError("reverse Jensen needs non-negative values")
    lhs = xs.sum() ** alpha
    rhs = np.sum(xs**alpha)
    # one-ulp slack for the n = 1 equality case
    return bool(lhs <= rhs * (1.0 + 4 * np.finfo(float).eps))
