"""Scalar special functions used by the bound engine.

Gaussian tail and its inverse, the regularized incomplete gamma function in
log domain, and fixed-panel Gauss-Legendre expectations under the standard
normal density.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy import special

from .errors import DomainError, SolverError

__all__ = [
    "QuadratureSpec",
    "gaussian_tail_q",
    "gaussian_tail_q_inv",
    "log_gaussian_tail_q",
    "reg_lower_incomplete_gamma",
    "reg_upper_incomplete_gamma",
    "log_reg_incomplete_gamma",
    "normal_expectation",
]

_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_EPS = 1e-17
_MAX_ITER = 100_000


# ---------------------------------------------------------------- Gaussian

def gaussian_tail_q(x):
    """Upper tail of the standard normal, ``Q(x) = P[Z > x]``.

    Evaluated through ``erfc`` so small tails keep full relative precision.
    """
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"gaussian_tail_q requires a finite argument, got {x}")
    return 0.5 * math.erfc(x / _SQRT2)


def log_gaussian_tail_q(x):
    """Natural log of ``Q(x)``, finite far into the upper tail."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"log_gaussian_tail_q requires a finite argument, got {x}")
    return float(special.log_ndtr(-x))


def gaussian_tail_q_inv(p):
    """Inverse of :func:`gaussian_tail_q` on ``(0, 1)``."""
    p = float(p)
    if not (0.0 < p < 1.0):
        raise DomainError(f"gaussian_tail_q_inv requires p in (0, 1), got {p}")
    x = -float(special.ndtri(p))
    # one Newton step polishes the last ulps of ndtri
    q = gaussian_tail_q(x)
    dens = math.exp(-0.5 * x * x - _LOG_SQRT_2PI)
    if dens > 0.0:
        x += (q - p) / dens
    return x


# ---------------------------------------------------- incomplete gamma

def _check_gamma_args(a, z):
    a = float(a)
    z = float(z)
    if not (a > 0.0) or not math.isfinite(a):
        raise DomainError(f"incomplete gamma requires a > 0, got a={a}")
    if not (z >= 0.0):
        raise DomainError(f"incomplete gamma requires z >= 0, got z={z}")
    return a, z


def _log1pmx(u):
    # log(1 + u) - u without cancellation near u = 0
    if abs(u) < 0.25:
        total = 0.0
        power = u
        k = 2
        while True:
            power *= -u
            add = power / k
            total += add
            if abs(add) <= 1e-18 * abs(total):
                return total
            k += 1
    return math.log1p(u) - u


def _stirling_err(a):
    # lgamma(a) - [(a - 1/2) ln a - a + ln sqrt(2 pi)]
    if a < 15.0:
        return math.lgamma(a) - ((a - 0.5) * math.log(a) - a + _LOG_SQRT_2PI)
    ia = 1.0 / a
    ia2 = ia * ia
    return ia * (1.0 / 12 - ia2 * (1.0 / 360 - ia2 * (1.0 / 1260 - ia2 * (1.0 / 1680))))


def _log_prefactor(a, z):
    # log(z^a e^-z / Gamma(a)); the large-a form avoids cancelling a ln z
    # against lgamma(a)
    u = (z - a) / a
    if a < 15.0 or abs(u) > 0.5:
        return a * math.log(z) - z - math.lgamma(a)
    return (a * _log1pmx(u) + 0.5 * math.log(a) - _LOG_SQRT_2PI
            - _stirling_err(a))


def _log_series_p(a, z):
    # P(a,z) = z^a e^-z / Gamma(a+1) * sum_k z^k / ((a+1)...(a+k))
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= z / ap
        total += term
        if term < total * _EPS:
            return _log_prefactor(a, z) + math.log(total)
    raise SolverError(f"incomplete gamma series did not converge (a={a}, z={z})")


def _log_cf_q(a, z):
    # modified Lentz evaluation of the continued fraction for Q(a,z)
    tiny = 1e-300
    b = z + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b if b != 0.0 else 1.0 / tiny
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS * 10:
            return _log_prefactor(a, z) + math.log(h)
    raise SolverError(f"incomplete gamma continued fraction did not converge (a={a}, z={z})")


def log_reg_incomplete_gamma(a, z):
    """Return ``(log P(a, z), log Q(a, z))`` for the regularized gammas.

    The smaller of the two is computed directly (series when ``z < a + 1``,
    continued fraction otherwise); the other comes from ``log1p``.
    """
    a, z = _check_gamma_args(a, z)
    if z == 0.0:
        return -math.inf, 0.0
    if math.isinf(z):
        return 0.0, -math.inf
    if z < a + 1.0:
        lp = _log_series_p(a, z)
        lq = math.log1p(-math.exp(lp)) if lp < -1e-300 else -math.inf
        return lp, lq
    lq = _log_cf_q(a, z)
    lp = math.log1p(-math.exp(lq)) if lq < -1e-300 else -math.inf
    return lp, lq


def reg_lower_incomplete_gamma(a, z):
    """Regularized lower incomplete gamma ``gamma(a, z) / Gamma(a)``."""
    lp, _ = log_reg_incomplete_gamma(a, z)
    return min(1.0, math.exp(lp))


def reg_upper_incomplete_gamma(a, z):
    """Regularized upper incomplete gamma ``1 - gamma(a, z) / Gamma(a)``."""
    _, lq = log_reg_incomplete_gamma(a, z)
    return min(1.0, math.exp(lq))


# ------------------------------------------------------------ quadrature

@dataclass(frozen=True)
class QuadratureSpec:
    """Panel layout for :func:`normal_expectation`.

    ``node_count`` Gauss-Legendre nodes are used on every panel; panels are
    at most ``panel_width`` standard deviations wide and never straddle a
    split point.
    """

    node_count: int = 32
    domain_half_width: float = 10.0
    split_points: tuple = field(default_factory=tuple)
    panel_width: float = 1.0

    def __post_init__(self):
        if int(self.node_count) != self.node_count or self.node_count < 16:
            raise DomainError(f"node_count must be an integer >= 16, got {self.node_count}")
        if not (self.domain_half_width >= 8.0):
            raise DomainError(
                f"domain_half_width must be >= 8, got {self.domain_half_width}")
        pts = tuple(float(p) for p in self.split_points)
        if any(b < a for a, b in zip(pts, pts[1:])):
            raise DomainError(f"split_points must be sorted ascending, got {pts}")
        if not (self.panel_width > 0.0):
            raise DomainError("panel_width must be positive")
        object.__setattr__(self, "split_points", pts)


def _panel_nodes(spec):
    w = spec.domain_half_width
    edges = [-w] + [p for p in spec.split_points if -w < p < w] + [w]
    x0, w0 = np.polynomial.legendre.leggauss(int(spec.node_count))
    xs, ws = [], []
    for lo, hi in zip(edges, edges[1:]):
        if hi <= lo:
            continue
        k = max(1, math.ceil((hi - lo) / spec.panel_width))
        cuts = np.linspace(lo, hi, k + 1)
        for a, b in zip(cuts[:-1], cuts[1:]):
            half = 0.5 * (b - a)
            xs.append(0.5 * (a + b) + half * x0)
            ws.append(half * w0)
    return np.concatenate(xs), np.concatenate(ws)


def normal_expectation(integrand, spec=None):
    """``E[f(Z)]`` for standard normal ``Z`` on the truncated domain.

    ``integrand`` must accept a numpy array of nodes and return an array of
    the same shape.
    """
    spec = QuadratureSpec() if spec is None else spec
    z, w = _panel_nodes(spec)
    dens = np.exp(-0.5 * z * z - _LOG_SQRT_2PI)
    vals = np.asarray(integrand(z), dtype=np.float64)
    if vals.shape != z.shape:
        vals = np.broadcast_to(vals, z.shape)
    return float(np.sum(w * dens * vals))
