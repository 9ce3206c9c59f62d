"""Neyman-Pearson tests between ``N(x, I)`` and ``N(0, (1 + mu P) I)``.

The codeword is taken on the equal-coordinate ray ``x = sqrt(R) * 1``; by
rotation invariance every codeword with ``||x||^2 = nR`` gives the same
test. Information densities are in nats. ``H`` is the density under the
alternative (``Y = x + Z``), ``G`` under the reference output law.

beta is estimated under the alternative through the exact identity
``Q[i >= t] = E_P[exp(-i) 1{i >= t}]`` so tiny false-alarm probabilities
stay reachable.
"""
from dataclasses import dataclass
import math
import os

import numpy as np
from scipy import optimize, special

from . import _rng, kernels
from .errors import DomainError, InsufficientTailSamples
from .specfun import gaussian_tail_q, gaussian_tail_q_inv

__all__ = [
    "SamplingConfig",
    "InfoDensitySpec",
    "BetaEstimate",
    "ThresholdSolve",
    "normal_stats",
    "h_from_stats",
    "g_from_stats",
    "h_from_normals",
    "g_from_normals",
    "sample_h",
    "sample_g",
    "solve_threshold",
    "beta_at_alpha",
    "beta_curve",
    "beta_null_direct",
    "beta_exact_1d",
    "info_density",
    "MIN_TAIL_SAMPLES",
]

LN2 = math.log(2.0)
MIN_TAIL_SAMPLES = 100
SAMPLES_ENV = "COVERTFBL_SAMPLES"
REFERENCE_OUTPUT = "Q_Y = N(0, (1 + mu P) I)"


@dataclass(frozen=True)
class SamplingConfig:
    """Monte Carlo budget and master seed.

    ``method`` picks how each draw's ``(sum Z, sum Z^2)`` is produced:
    ``"coordinates"`` sums n explicit normals; ``"sufficient"`` draws the
    pair from its exact joint law (a normal and an independent
    chi-square(n - 1)), which is much cheaper at large n.
    """

    count: int = 200_000
    seed: int = 0
    method: str = "coordinates"

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 1:
            raise DomainError(f"count must be a positive integer, got {self.count}")
        if self.method not in ("coordinates", "sufficient"):
            raise DomainError(f"unknown sampling method {self.method!r}")

    @classmethod
    def default(cls, seed=0, method="coordinates"):
        """Sweep-sized budget, overridable through ``COVERTFBL_SAMPLES``."""
        raw = os.environ.get(SAMPLES_ENV)
        count = int(float(raw)) if raw else 200_000
        return cls(count=count, seed=seed, method=method)

    def with_seed(self, seed):
        return SamplingConfig(self.count, seed, self.method)


@dataclass(frozen=True)
class InfoDensitySpec:
    n: int
    power: float
    mu: float
    radius_sq: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if not (self.power >= 0.0):
            raise DomainError(f"power must be nonnegative, got {self.power}")
        if not (0.0 <= self.mu <= 1.0):
            raise DomainError(f"mu must lie in [0, 1], got {self.mu}")
        r = float(self.radius_sq)
        if r < 0.0 or r > self.power * (1.0 + 1e-12):
            raise DomainError(f"radius_sq must lie in [0, P={self.power}], got {r}")
        object.__setattr__(self, "radius_sq", min(r, float(self.power)))

    @property
    def signal_var(self):
        """``mu P``: the reference output law is ``N(0, (1 + mu P) I)``."""
        return self.mu * self.power

    @property
    def capacity_nats(self):
        return 0.5 * math.log1p(self.signal_var)

    @property
    def in_shell(self):
        return self.mu ** 2 * self.power <= self.radius_sq <= self.power

    def mean_h(self):
        s = self.signal_var
        return self.n * (self.capacity_nats + (self.radius_sq - s) / (2.0 * (1.0 + s)))

    def var_summand(self):
        """Variance (nats^2) of one summand of ``H``."""
        s = self.signal_var
        c = 1.0 / (2.0 * (1.0 + s))
        return c * c * (4.0 * self.radius_sq + 2.0 * s * s)

    def with_radius(self, radius_sq):
        return InfoDensitySpec(self.n, self.power, self.mu, radius_sq)


@dataclass(frozen=True)
class ThresholdSolve:
    log_gamma: float
    alpha: float
    alpha_achieved: float
    samples: int


@dataclass(frozen=True)
class BetaEstimate:
    """Tilted beta estimate.

    The 95% interval combines the Monte Carlo error of the tilted average
    with the error inherited from the estimated threshold.
    """

    value: float
    log2_value: float
    ci_low: float
    ci_high: float
    samples: int
    alpha: float
    alpha_achieved: float
    tail_samples: int
    log_gamma: float
    reference: str = REFERENCE_OUTPUT

    @property
    def rel_halfwidth(self):
        if self.value > 0:
            return (self.ci_high - self.ci_low) / (2.0 * self.value)
        return math.inf

    @property
    def sigma_log2(self):
        """Standard error of ``log2_value`` by the delta method."""
        return self.rel_halfwidth / 1.96 / LN2


# ------------------------------------------------------------- sampling

def normal_stats(n, count, seed, *stream, method="coordinates"):
    """Per-draw ``(sum_i Z_i, sum_i Z_i^2)`` for ``count`` draws of n normals.

    Chunks are seeded independently from ``(seed, *stream, chunk index)`` so
    the output depends only on these arguments.
    """
    n = int(n)
    count = int(count)
    s1 = np.empty(count)
    s2 = np.empty(count)
    pos = 0
    for idx, size in enumerate(_rng.chunk_sizes(count, _rng.rows_per_chunk(n))):
        rng = _rng.generator(seed, *stream, idx)
        if method == "coordinates":
            a, b = kernels.row_moments(rng.standard_normal((size, n)))
        elif method == "sufficient":
            u = rng.standard_normal(size)
            w = rng.chisquare(n - 1, size) if n > 1 else np.zeros(size)
            a = math.sqrt(n) * u
            b = u * u + w
        else:
            raise DomainError(f"unknown sampling method {method!r}")
        s1[pos:pos + size] = a
        s2[pos:pos + size] = b
        pos += size
    return s1, s2


def h_from_stats(spec, s1, s2):
    s = spec.signal_var
    r = spec.radius_sq
    k = 1.0 / (2.0 * (1.0 + s))
    return (spec.n * (spec.capacity_nats + r * k)
            + k * (2.0 * math.sqrt(r) * np.asarray(s1) - s * np.asarray(s2)))


def g_from_stats(spec, s1, s2):
    s = spec.signal_var
    r = spec.radius_sq
    return (spec.n * (spec.capacity_nats - 0.5 * r)
            + 0.5 * (2.0 * math.sqrt(r * (1.0 + s)) * np.asarray(s1) - s * np.asarray(s2)))


def h_from_normals(spec, z):
    """``H_n(R)`` from an explicit ``(draws, n)`` array of standard normals."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if z.shape[1] != spec.n:
        raise DomainError(f"expected {spec.n} normals per draw, got {z.shape[1]}")
    return h_from_stats(spec, *kernels.row_moments(z))


def g_from_normals(spec, z):
    """``G_n(R)`` from an explicit ``(draws, n)`` array of standard normals."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if z.shape[1] != spec.n:
        raise DomainError(f"expected {spec.n} normals per draw, got {z.shape[1]}")
    return g_from_stats(spec, *kernels.row_moments(z))


def sample_h(spec, count, seed, method="coordinates", stream=(_rng.BETA,)):
    return h_from_stats(spec, *normal_stats(spec.n, count, seed, *stream, method=method))


def sample_g(spec, count, seed, method="coordinates", stream=(_rng.NULL,)):
    return g_from_stats(spec, *normal_stats(spec.n, count, seed, *stream, method=method))


def info_density(x, y, signal_var):
    """``log dN(x, I)/dN(0, (1 + signal_var) I)`` at rows of ``y`` (nats)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    n = x.shape[-1]
    d = y - x
    yy = np.einsum("ij,ij->i", y, y)
    return (0.5 * n * math.log1p(signal_var) - 0.5 * np.einsum("ij,ij->i", d, d)
            + yy / (2.0 * (1.0 + signal_var)))


# ------------------------------------------------------------- thresholds

def _check_alpha(alpha):
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def _thresholds_sorted(h_sorted, alphas):
    """Thresholds accepting ``ceil(alpha N)`` of the ascending sample.

    The threshold sits halfway between the last rejected and first accepted
    order statistic; when everything is accepted it sits just below the
    minimum.
    """
    n = h_sorted.shape[0]
    alphas = np.atleast_1d(np.asarray(alphas, dtype=np.float64))
    accept = np.minimum(n, np.ceil(alphas * n - 1e-9).astype(np.int64))
    accept = np.maximum(accept, 1)
    first = n - accept
    out = np.empty(alphas.shape[0])
    for i, f in enumerate(first):
        if f == 0:
            out[i] = np.nextafter(h_sorted[0], -np.inf)
        else:
            out[i] = 0.5 * (h_sorted[f - 1] + h_sorted[f])
    return out


def solve_threshold(spec, alpha, count, seed, method="coordinates"):
    """Empirical threshold with ``P[H >= log_gamma] ~ alpha``.

    ``alpha_achieved`` is re-measured on an independently seeded sample.
    """
    _check_alpha(alpha)
    if count < 10_000:
        raise DomainError("solve_threshold needs count >= 10^4")
    h = np.sort(sample_h(spec, count, seed, method, stream=(_rng.THRESHOLD,)))
    lg = float(_thresholds_sorted(h, [alpha])[0])
    fresh = sample_h(spec, count, seed, method, stream=(_rng.CHECK,))
    return ThresholdSolve(lg, float(alpha), float(np.mean(fresh >= lg)), int(count))


# ------------------------------------------------------------------ beta

def _tilted_tail(h_desc, log_gamma):
    """Log sums of ``exp(-H)`` and ``exp(-2H)`` over samples with ``H >= t``.

    ``h_desc`` must be sorted descending. Returns ``(m, log_s1, log_s2)``
    arrays aligned with ``log_gamma``.
    """
    a = -h_desc
    c1 = np.logaddexp.accumulate(a)
    c2 = np.logaddexp.accumulate(2.0 * a)
    # number of samples >= t in a descending array
    m = np.searchsorted(-h_desc, -np.asarray(log_gamma), side="right")
    idx = np.maximum(m - 1, 0)
    s1 = np.where(m > 0, c1[idx], -np.inf)
    s2 = np.where(m > 0, c2[idx], -np.inf)
    return m, s1, s2


def _estimates_from_tail(m, log_s1, log_s2, count, alphas, alpha_achieved, log_gamma,
                         threshold_count):
    out = []
    log_n = math.log(count)
    for j in range(len(alphas)):
        mj = int(m[j])
        if mj == 0:
            out.append(None)
            continue
        log_beta = float(log_s1[j]) - log_n
        # relative variance of the sample mean of exp(-H) 1{H >= t}
        ratio = math.exp(log_n + float(log_s2[j]) - 2.0 * float(log_s1[j]))
        rel_var = max(0.0, (ratio - 1.0) / (count - 1)) if count > 1 else math.inf
        # the threshold is itself estimated: its alpha error moves beta with
        # slope d beta / d alpha = exp(-log_gamma) (the boundary likelihood ratio)
        a = float(alphas[j])
        rel_thr = math.exp(-float(log_gamma[j]) - log_beta) * math.sqrt(
            max(a * (1.0 - a), 0.0) / threshold_count)
        rel_half = 1.96 * math.sqrt(rel_var + rel_thr * rel_thr)
        log_beta = min(log_beta, 0.0)
        value = math.exp(log_beta)
        out.append(BetaEstimate(
            value=value,
            log2_value=log_beta / LN2,
            ci_low=max(0.0, value * (1.0 - rel_half)),
            ci_high=min(1.0, value * (1.0 + rel_half)),
            samples=int(count),
            alpha=float(alphas[j]),
            alpha_achieved=float(alpha_achieved[j]),
            tail_samples=mj,
            log_gamma=float(log_gamma[j]),
        ))
    return out


def beta_curve(h_threshold, h_beta, alphas):
    """beta estimates for many ``alphas`` from two shared sample sets.

    ``h_threshold`` fixes the thresholds, ``h_beta`` (independent) carries
    the tilted average. Entries with no sample above threshold are ``None``.
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=np.float64))
    h_threshold = np.asarray(h_threshold, dtype=np.float64)
    lg = _thresholds_sorted(np.sort(h_threshold), alphas)
    h_desc = np.sort(h_beta)[::-1]
    m, s1, s2 = _tilted_tail(h_desc, lg)
    achieved = m / h_desc.shape[0]
    return _estimates_from_tail(m, s1, s2, h_desc.shape[0], alphas, achieved, lg,
                                h_threshold.shape[0])


def beta_at_alpha(spec, alpha, count, seed, method="coordinates",
                  min_tail=MIN_TAIL_SAMPLES):
    """``beta_alpha(x, Q_Y)`` with a 95% interval, via the tilted estimator.

    Threshold and beta samples come from independent streams of ``seed``.
    """
    _check_alpha(alpha)
    h_t = sample_h(spec, count, seed, method, stream=(_rng.THRESHOLD,))
    h_b = sample_h(spec, count, seed, method, stream=(_rng.BETA,))
    est = beta_curve(h_t, h_b, [alpha])[0]
    found = 0 if est is None else est.tail_samples
    if found < min_tail:
        raise InsufficientTailSamples(found, min_tail)
    return est


def beta_null_direct(spec, log_gamma, count, seed, method="coordinates"):
    """Plain null-measure estimate ``mean(G >= log_gamma)`` and its half-width."""
    g = sample_g(spec, count, seed, method)
    p = float(np.mean(g >= log_gamma))
    half = 1.96 * math.sqrt(max(p * (1.0 - p), 0.0) / count)
    return p, half


# ----------------------------------------------------------- 1-D oracle

def _interval_prob(lo, hi, mean, sd):
    """``P[lo <= N(mean, sd^2) <= hi]`` without cancellation in the tails."""
    a = (lo - mean) / sd
    b = (hi - mean) / sd
    if a > 0.0:
        return max(0.0, gaussian_tail_q(a) - gaussian_tail_q(b))
    if b < 0.0:
        return max(0.0, gaussian_tail_q(-b) - gaussian_tail_q(-a))
    return max(0.0, 1.0 - gaussian_tail_q(-a) - gaussian_tail_q(b))


def beta_exact_1d(power, mu, radius_sq, alpha, return_region=False):
    """Exact ``beta_alpha`` for ``n = 1`` by solving the likelihood quadratic.

    With ``s = mu P > 0`` the information density is a concave quadratic in
    ``y`` with vertex ``y0 = sqrt(R)(1 + s)/s``, so the acceptance region is
    an interval ``[y0 - w, y0 + w]``; ``w`` is found so the alternative
    ``N(sqrt(R), 1)`` puts mass ``alpha`` on it. With ``s = 0`` the test is the
    mean-shift test with region ``[t, inf)``.
    """
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if radius_sq < 0.0 or power < 0.0:
        raise DomainError("power and radius_sq must be nonnegative")
    s = mu * power
    root_r = math.sqrt(radius_sq)
    if s == 0.0:
        if root_r == 0.0:
            raise DomainError("identical hypotheses: R = 0 and mu P = 0")
        if alpha == 1.0:
            region = (-math.inf, math.inf)
            return (1.0, region) if return_region else 1.0
        t = root_r + gaussian_tail_q_inv(alpha)
        beta = gaussian_tail_q(t)
        return (beta, (t, math.inf)) if return_region else beta
    if alpha == 1.0:
        region = (-math.inf, math.inf)
        return (1.0, region) if return_region else 1.0
    y0 = root_r * (1.0 + s) / s
    sd_null = math.sqrt(1.0 + s)

    def excess(w):
        return _interval_prob(y0 - w, y0 + w, root_r, 1.0) - alpha

    hi = abs(y0 - root_r) + 1.0
    while excess(hi) < 0.0:
        hi *= 2.0
    w = optimize.brentq(excess, 0.0, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    beta = _interval_prob(y0 - w, y0 + w, 0.0, sd_null)
    return (beta, (y0 - w, y0 + w)) if return_region else beta


def info_density_1d(y, power, mu, radius_sq):
    """Scalar information density for ``n = 1`` (nats)."""
    s = mu * power
    return (0.5 * math.log1p(s) - 0.5 * (y - math.sqrt(radius_sq)) ** 2
            + y * y / (2.0 * (1.0 + s)))
