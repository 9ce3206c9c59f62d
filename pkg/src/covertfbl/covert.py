"""Covertness budget: truncation mass, output KL divergence, power solver.

All noise variances are fixed to one. Divergences are carried in nats and
reported in both nats and bits.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy import special

from . import _rng, kernels
from .errors import BudgetExhausted, DomainError, ScaleError, SolverError
from .specfun import log_reg_incomplete_gamma

__all__ = [
    "CovertParams",
    "PowerSolution",
    "TVDEstimate",
    "truncation_mass",
    "truncation_tail",
    "kl_output_vs_noise",
    "solve_power",
    "asymptotic_power",
    "tvd_certificate",
    "tvd_monte_carlo_oracle",
    "tvd_quadrature_1d",
]

LOG2E = 1.0 / math.log(2.0)
DEFAULT_TOL = 1e-10
ORACLE_MAX_N = 64


@dataclass(frozen=True)
class CovertParams:
    """One experiment point: blocklength, error target, TVD budget, shell."""

    n: int
    epsilon: float
    delta: float
    mu: float
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if not (0.0 < self.epsilon < 1.0):
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not (0.0 < self.delta < 1.0):
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        if not (0.0 < self.mu <= 1.0):
            raise DomainError(f"mu must lie in (0, 1], got {self.mu}")
        if not (self.tol > 0.0):
            raise DomainError(f"tol must be positive, got {self.tol}")

    def replace(self, **changes):
        fields = dict(n=self.n, epsilon=self.epsilon, delta=self.delta,
                      mu=self.mu, tol=self.tol)
        fields.update(changes)
        return CovertParams(**fields)


@dataclass(frozen=True)
class PowerSolution:
    power: float
    trunc_mass: float
    one_minus_trunc: float
    kl_nats: float
    kl_bits: float
    tvd_certificate: float
    residual: float
    neglect_truncation: bool = False


def _check_shell(n, mu):
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    if not (0.0 < mu <= 1.0):
        raise DomainError(f"mu must lie in (0, 1], got {mu}")


def truncation_tail(n, mu):
    """``1 - Delta``: probability an i.i.d. N(0, mu P) vector misses the shell.

    Both tails are evaluated directly so the result keeps relative accuracy
    when it is tiny.
    """
    _check_shell(n, mu)
    if mu == 1.0:
        return 1.0
    a = 0.5 * n
    lp_inner, _ = log_reg_incomplete_gamma(a, 0.5 * n * mu)
    _, lq_outer = log_reg_incomplete_gamma(a, 0.5 * n / mu)
    return min(1.0, math.exp(lp_inner) + math.exp(lq_outer))


def truncation_mass(n, mu):
    """Shell mass ``Delta = P(n/2, n/(2 mu)) - P(n/2, n mu/2)``."""
    return max(0.0, 1.0 - truncation_tail(n, mu))


def _per_symbol_kl(power):
    # P - ln(1 + P), series for small P
    if power < 1e-3:
        total = 0.0
        term = -power
        k = 2
        while True:
            term *= -power
            add = term / k
            total += add
            if abs(add) <= 1e-18 * abs(total) or k > 60:
                break
            k += 1
        return total
    return power - math.log1p(power)


def kl_output_vs_noise(n, power):
    """KL divergence of N(0, (1+P) I_n) from N(0, I_n) as ``(nats, bits)``."""
    power = float(power)
    if not (power >= 0.0):
        raise DomainError(f"power must be nonnegative, got {power}")
    nats = n * (0.5 * _per_symbol_kl(power))
    return nats, nats * LOG2E


def tvd_certificate(n, mu, power):
    """Pinsker/triangle upper bound ``(1 - Delta) + sqrt(D/2)`` on the TVD."""
    nats, _ = kl_output_vs_noise(n, power)
    return truncation_tail(n, mu) + math.sqrt(0.5 * nats)


def asymptotic_power(n, delta):
    """KL-budget reference power ``2 sqrt(delta / n)`` (not the TVD solution)."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not (delta > 0.0):
        raise DomainError(f"delta must be positive, got {delta}")
    return 2.0 * math.sqrt(delta / n)


def solve_power(params, neglect_truncation=False, max_expansions=200):
    """Largest per-symbol power meeting the TVD budget through the certificate.

    Solves ``D_nats(P) = 2 (delta + Delta - 1)^2`` by bisection. With
    ``neglect_truncation`` the target becomes ``2 delta^2`` and the truncation
    term is left out of the budget (the certificate is still reported).
    """
    n, mu, delta, tol = params.n, params.mu, params.delta, params.tol
    tail = truncation_tail(n, mu)
    if neglect_truncation:
        slack = delta
    else:
        if not (tail < delta):
            raise BudgetExhausted(n, mu, delta, tail)
        slack = delta - tail
    target = 2.0 * slack * slack

    def kl(p):
        return kl_output_vs_noise(n, p)[0]

    lo, hi = 0.0, 4.0 * math.sqrt(delta / n)
    for _ in range(max_expansions):
        if kl(hi) >= target:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise SolverError(f"could not bracket the power equation for {params}")

    # invariant: kl(lo) < target <= kl(hi); the answer is taken from below so
    # the certificate never overshoots
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        val = kl(mid)
        if val < target:
            lo = mid
            if target - val <= tol:
                break
        else:
            hi = mid
    power = lo
    residual = abs(kl(power) - target)
    if not (power > 0.0) or residual > tol:
        raise SolverError(
            f"bisection stalled for {params}: residual {residual:.3e} > tol {tol:.1e}")
    nats, bits = kl_output_vs_noise(n, power)
    return PowerSolution(
        power=power,
        trunc_mass=max(0.0, 1.0 - tail),
        one_minus_trunc=tail,
        kl_nats=nats,
        kl_bits=bits,
        tvd_certificate=tail + math.sqrt(0.5 * nats),
        residual=residual,
        neglect_truncation=bool(neglect_truncation),
    )


# ------------------------------------------------------------ TVD oracle

@dataclass(frozen=True)
class TVDEstimate:
    mean: float
    ci_low: float
    ci_high: float
    halfwidth: float
    samples: int


def _shell_radius_nodes(n, mu, power, nodes):
    """Gauss-Legendre nodes in log(u) for u = ||X||^2 / (mu P) on the shell.

    Returns ``(log_weights, rho)`` with ``rho = mu P u`` and weights normalised
    so they sum to one (the quadrature value of Delta is divided out).
    """
    lo, hi = math.log(n * mu), math.log(n / mu)
    x0, w0 = np.polynomial.legendre.leggauss(int(nodes))
    v = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x0
    u = np.exp(v)
    # chi-square(n) density times du = u dv
    log_dens = ((0.5 * n - 1.0) * np.log(u) - 0.5 * u
                - 0.5 * n * math.log(2.0) - special.gammaln(0.5 * n))
    log_w = np.log(0.5 * (hi - lo) * w0) + log_dens + v
    log_w -= special.logsumexp(log_w)
    return log_w, mu * power * u


def tvd_monte_carlo_oracle(n, power, mu, samples=1_000_000, seed=0, nodes=64,
                           chunk=100_000):
    """Monte Carlo estimate of the adversary's TVD for the truncated input.

    Both output laws are spherically symmetric, so the TVD equals that of the
    laws of ``T = ||Y||^2``. Under pure noise ``T`` is chi-square(n); under
    transmission it is a noncentral chi-square mixed over the shell radius
    law. The estimate is ``0.5 E_0 |L(T) - 1|`` with a 95% normal interval.
    """
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    if n > ORACLE_MAX_N:
        raise ScaleError(f"TVD oracle supports n <= {ORACLE_MAX_N}, got {n}")
    if not (0.0 < mu < 1.0):
        raise DomainError(f"the shell needs 0 < mu < 1, got {mu}")
    if not (power >= 0.0):
        raise DomainError(f"power must be nonnegative, got {power}")
    if samples < 1000:
        raise DomainError("tvd_monte_carlo_oracle needs at least 1000 samples")
    if power == 0.0:
        return TVDEstimate(0.0, 0.0, 0.0, 0.0, int(samples))
    log_w, rho = _shell_radius_nodes(n, mu, power, nodes)
    b = 0.5 * n
    total = 0.0
    total_sq = 0.0
    for idx, size in enumerate(_rng.chunk_sizes(samples, chunk)):
        rng = _rng.generator(seed, _rng.TVD, idx)
        t = rng.chisquare(n, size)
        dev = np.abs(np.expm1(kernels.shell_log_likelihood_ratio(t, log_w, rho, b)))
        total += float(dev.sum())
        total_sq += float(np.dot(dev, dev))
    m = total / samples
    var = max(0.0, (total_sq / samples - m * m) * samples / (samples - 1))
    half = 1.96 * 0.5 * math.sqrt(var / samples)
    est = 0.5 * m
    return TVDEstimate(est, est - half, est + half, half, int(samples))


def tvd_quadrature_1d(power, mu):
    """Deterministic TVD for ``n = 1`` by nested adaptive quadrature."""
    from scipy import integrate

    if not (0.0 < mu < 1.0) or not (power > 0.0):
        raise DomainError("tvd_quadrature_1d needs power > 0 and 0 < mu < 1")
    var = mu * power
    a, b = mu * math.sqrt(power), math.sqrt(power)
    delta = truncation_mass(1, mu)

    def phi(x, s2=1.0):
        return math.exp(-0.5 * x * x / s2) / math.sqrt(2.0 * math.pi * s2)

    def f1(y):
        def inner(x):
            return phi(x, var) * (phi(y - x) + phi(y + x))

        val, _ = integrate.quad(inner, a, b, epsabs=1e-14, epsrel=1e-12)
        return val / delta

    def gap(y):
        return abs(f1(y) - phi(y))

    val, _ = integrate.quad(gap, -14.0, 14.0, epsabs=1e-13, epsrel=1e-11, limit=400)
    return 0.5 * val
