"""Achievability and converse bounds on log2 M and their normal approximations.

Rates are reported in bits. Monte Carlo bounds use the tilted beta
estimator of :mod:`covertfbl.hypotest`; the normal approximations drop
their unspecified O(1) terms and are labelled as approximations.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
import math

import numpy as np

from . import _rng
from .covert import CovertParams, solve_power
from .errors import CovertError, DomainError, InsufficientTailSamples
from .hypotest import (
    MIN_TAIL_SAMPLES,
    InfoDensitySpec,
    SamplingConfig,
    beta_at_alpha,
    beta_curve,
    h_from_stats,
    normal_stats,
)
from .specfun import QuadratureSpec, gaussian_tail_q_inv, normal_expectation

__all__ = [
    "ApproxTerms",
    "ConverseResult",
    "AchievabilityResult",
    "NormalApproxResult",
    "BoundPoint",
    "dispersion_terms",
    "berry_esseen_constants",
    "converse_equal_power",
    "converse_normal_approx",
    "achievability_mc",
    "achievability_normal_approx",
    "tau_grid_values",
    "r_grid_values",
    "compute_point",
    "sweep",
    "SWEEP_AXES",
]

LOG2E = 1.0 / math.log(2.0)
LN2 = math.log(2.0)
SWEEP_AXES = ("n", "delta", "epsilon")
DEFAULT_GRID = 16
REFINED_GRID = 64


@dataclass(frozen=True)
class ApproxTerms:
    """Capacity (bits/symbol), dispersions (bits^2) and Berry-Esseen terms.

    Fields not requested by the producing call are ``None``.
    """

    capacity_c: float = None
    dispersion_v: float = None
    vhat: float = None
    third_moment_t: float = None
    be_constant_b: float = None


def _dispersion_forms(power):
    p = power
    closed = p * (p + 2.0) / (2.0 * (p + 1.0) ** 2) * LOG2E ** 2
    moment = (p * LOG2E / (2.0 * (1.0 + p))) ** 2 * (2.0 + 4.0 / p)
    return closed, moment


def dispersion_terms(power):
    """``C = log2(1 + P)/2`` and the AWGN dispersion ``V(P)`` in bits^2."""
    if not (power > 0.0):
        raise DomainError(f"power must be positive, got {power}")
    closed, moment = _dispersion_forms(power)
    if abs(closed - moment) > 1e-12 * max(1.0, closed):
        raise ArithmeticError(f"dispersion forms disagree: {closed} vs {moment}")
    return ApproxTerms(capacity_c=0.5 * math.log2(1.0 + power), dispersion_v=closed)


def _summand_roots(s, root_r):
    # real roots of s + 2 sqrt(R) z - s z^2
    if s == 0.0:
        return ()
    disc = math.sqrt(root_r * root_r + s * s)
    return tuple(sorted(((root_r - disc) / s, (root_r + disc) / s)))


def berry_esseen_constants(power, mu, radius_sq, quad=None):
    """``V_hat``, third absolute central moment ``T`` and ``B = 6T / V_hat^1.5``.

    The summand of the information density is
    ``c (s + 2 sqrt(R) Z - s Z^2)`` with ``c = log2(e) / (2 (1 + s))`` and
    ``s = mu P``; ``T`` is integrated with the panels split at its kinks.
    """
    if not (power > 0.0):
        raise DomainError(f"power must be positive, got {power}")
    if not (0.0 <= radius_sq <= power * (1.0 + 1e-12)):
        raise DomainError(f"radius_sq must lie in [0, P], got {radius_sq}")
    s = mu * power
    root_r = math.sqrt(radius_sq)
    c = LOG2E / (2.0 * (1.0 + s))
    vhat = c * c * (4.0 * radius_sq + 2.0 * s * s)
    if quad is None:
        quad = QuadratureSpec(node_count=32, domain_half_width=12.0,
                              split_points=_summand_roots(s, root_r))
    third = c ** 3 * normal_expectation(
        lambda z: np.abs(s + 2.0 * root_r * z - s * z * z) ** 3, quad)
    return ApproxTerms(vhat=vhat, third_moment_t=third,
                       be_constant_b=6.0 * third / vhat ** 1.5)


# ------------------------------------------------------------- converse

@dataclass(frozen=True)
class ConverseResult:
    bits: float
    raw_bits: float
    sigma_bits: float
    beta: object
    clamped: bool = False
    degenerate: bool = False


def converse_equal_power(n, epsilon, power, mc=None):
    """``-log2 beta_{1-eps}`` at blocklength ``n + 1`` on the sphere of radius
    ``sqrt((n + 1) P)`` against ``N(0, (1 + P) I_{n+1})``.

    Upper-bounds log2 M for codes of length n under the maximal power
    constraint. When the acceptance region is too thin for the sample
    budget (epsilon near one) the bound is reported as ``inf`` and flagged
    degenerate.
    """
    if not (0.0 < epsilon < 1.0):
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    mc = SamplingConfig.default() if mc is None else mc
    spec = InfoDensitySpec(n + 1, power, 1.0, power)
    try:
        est = beta_at_alpha(spec, 1.0 - epsilon, mc.count, mc.seed, mc.method)
    except InsufficientTailSamples:
        return ConverseResult(math.inf, math.inf, math.nan, None, degenerate=True)
    raw = -est.log2_value
    return ConverseResult(
        bits=max(0.0, raw),
        raw_bits=raw,
        sigma_bits=est.sigma_log2,
        beta=est,
        clamped=raw < 0.0,
    )


def converse_normal_approx(n, epsilon, power):
    """``n C - sqrt(n V) Q^-1(eps) + log2(n)/2`` in bits (O(1) term dropped)."""
    if not (0.0 < epsilon < 1.0):
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    terms = dispersion_terms(power)
    return (n * terms.capacity_c
            - math.sqrt(n * terms.dispersion_v) * gaussian_tail_q_inv(epsilon)
            + 0.5 * math.log2(n))


# -------------------------------------------------------- achievability

def tau_grid_values(epsilon, count):
    """Logarithmic grid inside ``(0, epsilon)``, densest towards the top."""
    if count < 1:
        raise DomainError("tau grid needs at least one point")
    return epsilon * np.geomspace(1e-4, 0.98, int(count))


def r_grid_values(power, mu, count):
    """Linear grid of per-symbol codeword energies on ``[mu^2 P, P]``."""
    if count < 2:
        return np.array([power])
    return np.linspace(mu * mu * power, power, int(count))


@dataclass(frozen=True)
class AchievabilityResult:
    bits: float
    raw_bits: float
    sigma_bits: float
    tau_star: float
    r_star: float
    beta: object
    clamped: bool = False
    failed: bool = False
    worst_r: tuple = field(default_factory=tuple)


def achievability_mc(params, power, mc=None, tau_grid=DEFAULT_GRID, r_grid=DEFAULT_GRID):
    """``max_tau [log2 tau - log2 sup_R beta_{1-eps+tau}(R)]``, clamped at 0.

    All (tau, R) cells share two independent sample sets of per-draw normal
    sums (one for thresholds, one for the tilted beta average). ``worst_r``
    records, per tau, which R attains the supremum of beta.
    """
    if tau_grid < 8 or r_grid < 8:
        raise DomainError("achievability_mc needs tau_grid >= 8 and r_grid >= 8")
    mc = SamplingConfig.default() if mc is None else mc
    n, eps, mu = params.n, params.epsilon, params.mu
    taus = tau_grid_values(eps, tau_grid)
    alphas = 1.0 - eps + taus
    rs = r_grid_values(power, mu, r_grid)
    thr = normal_stats(n, mc.count, mc.seed, _rng.THRESHOLD, method=mc.method)
    bet = normal_stats(n, mc.count, mc.seed, _rng.BETA, method=mc.method)

    log2_beta = np.full((len(rs), len(taus)), np.nan)
    table = [[None] * len(taus) for _ in rs]
    for i, r in enumerate(rs):
        spec = InfoDensitySpec(n, power, mu, r)
        ests = beta_curve(h_from_stats(spec, *thr), h_from_stats(spec, *bet), alphas)
        for j, est in enumerate(ests):
            if est is not None and est.tail_samples >= MIN_TAIL_SAMPLES:
                log2_beta[i, j] = est.log2_value
                table[i][j] = est
    if np.all(np.isnan(log2_beta)):
        return AchievabilityResult(0.0, math.nan, math.nan, math.nan, math.nan,
                                   None, clamped=True, failed=True)

    worst = []
    objective = np.full(len(taus), -np.inf)
    for j in range(len(taus)):
        col = log2_beta[:, j]
        if np.all(np.isnan(col)):
            worst.append(-1)
            continue
        top = np.nanmax(col)
        # ties go to the largest R
        i_star = int(np.flatnonzero(col == top)[-1])
        worst.append(i_star)
        objective[j] = math.log2(taus[j]) - top
    j_star = int(np.argmax(objective))
    i_star = worst[j_star]
    est = table[i_star][j_star]
    raw = float(objective[j_star])
    return AchievabilityResult(
        bits=max(0.0, raw),
        raw_bits=raw,
        sigma_bits=est.sigma_log2,
        tau_star=float(taus[j_star]),
        r_star=float(rs[i_star]),
        beta=est,
        clamped=raw < 0.0,
        worst_r=tuple(float(rs[i]) if i >= 0 else math.nan for i in worst),
    )


@dataclass(frozen=True)
class NormalApproxResult:
    bits: float
    feasible: bool
    r_star: float = math.nan
    tau0_star: float = math.nan
    reason: str = ""


def _achievability_na_terms(n, epsilon, power, mu, r):
    """R-dependent part of the normal approximation (without log2 tau0), bits.

    Returns ``None`` when ``1 - eps + 2B/sqrt(n)`` leaves ``(0, 1)``.
    """
    s = mu * power
    be = berry_esseen_constants(power, mu, r)
    b = be.be_constant_b
    arg = 1.0 - epsilon + 2.0 * b / math.sqrt(n)
    if not (0.0 < arg < 1.0):
        return None, b
    vhat_nats = be.vhat * LN2 * LN2
    cap = 0.5 * math.log2(1.0 + s)
    value = (n * cap
             + n * (r - s) * LOG2E / (2.0 * (1.0 + s))
             + math.sqrt(n * be.vhat) * gaussian_tail_q_inv(arg)
             + 0.5 * math.log2(n)
             - math.log2(2.0 * LN2 / math.sqrt(2.0 * math.pi * vhat_nats) + 4.0 * b))
    return value, b


def achievability_normal_approx(params, power, tau0_grid=DEFAULT_GRID, r_grid=REFINED_GRID):
    """Normal approximation of the Gaussian random-coding achievability bound.

    Maximises ``f(R) + log2 tau0`` over ``R`` in ``[mu^2 P, P]`` and ``tau0`` on a
    log grid in ``(0, eps)`` subject to ``tau0 <= B(R)/sqrt(n) <= n eps/(n+1)``.
    For each R, ``tau0 = B(R)/sqrt(n)`` itself is also tried since it is the
    largest admissible value. Infeasible when no (tau0, R) pair qualifies.
    """
    n, eps, mu = params.n, params.epsilon, params.mu
    rs = r_grid_values(power, mu, r_grid)
    cap = n * eps / (n + 1.0)
    cands = []
    min_tau_n = math.inf
    for r in rs:
        val, b = _achievability_na_terms(n, eps, power, mu, r)
        tau_n = b / math.sqrt(n)
        min_tau_n = min(min_tau_n, tau_n)
        if val is None or tau_n > cap:
            continue
        cands.append((float(r), val, tau_n))
    if not cands:
        return NormalApproxResult(
            math.nan, False,
            reason=(f"no R with B/sqrt(n) <= n eps/(n+1) and 1 - eps + 2B/sqrt(n) < 1 "
                    f"(min B/sqrt(n) = {min_tau_n:.4g}, n eps/(n+1) = {cap:.4g})"))
    taus = list(tau_grid_values(eps, tau0_grid)) + [c[2] for c in cands]
    best = (-math.inf, math.nan, math.nan)
    for tau0 in taus:
        if not (0.0 < tau0 < eps):
            continue
        for r, val, tau_n in cands:
            if tau0 > tau_n:
                continue
            total = val + math.log2(tau0)
            # ties go to the largest R
            if total > best[0] or (total == best[0] and r > best[1]):
                best = (total, r, tau0)
    if not math.isfinite(best[0]):
        return NormalApproxResult(math.nan, False, reason="no tau0 on the grid is admissible")
    return NormalApproxResult(best[0], True, r_star=best[1], tau0_star=best[2])


# --------------------------------------------------------------- sweeps

@dataclass
class BoundPoint:
    params: CovertParams
    power: float = math.nan
    achievability_bits: float = math.nan
    converse_bits: float = math.nan
    achievability_na_bits: float = math.nan
    converse_na_bits: float = math.nan
    tau_star: float = math.nan
    r_star: float = math.nan
    achievability_sigma: float = math.nan
    converse_sigma: float = math.nan
    one_minus_trunc: float = math.nan
    tvd_certificate: float = math.nan
    flags: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    error: str = ""

    def row(self):
        p = self.params
        return {
            "n": p.n,
            "epsilon": p.epsilon,
            "delta": p.delta,
            "mu": p.mu,
            "power": self.power,
            "one_minus_trunc": self.one_minus_trunc,
            "tvd_certificate": self.tvd_certificate,
            "achievability_bits": self.achievability_bits,
            "converse_bits": self.converse_bits,
            "achievability_na_bits": self.achievability_na_bits,
            "converse_na_bits": self.converse_na_bits,
            "achievability_sigma": self.achievability_sigma,
            "converse_sigma": self.converse_sigma,
            "tau_star": self.tau_star,
            "r_star": self.r_star,
            "flags": ";".join(self.flags),
            "error": self.error,
        }


def _clamp(value, label, flags):
    if value is None or not math.isfinite(value):
        return value
    if value < 0.0:
        flags.append(f"{label}_clamped")
        return 0.0
    return value


def compute_point(params, mc=None, neglect_truncation=False,
                  tau_grid=DEFAULT_GRID, r_grid=DEFAULT_GRID):
    """Power solve plus all four bounds for one parameter point.

    Failures are recorded on the returned row rather than raised.
    """
    mc = SamplingConfig.default() if mc is None else mc
    point = BoundPoint(params)
    try:
        sol = solve_power(params, neglect_truncation=neglect_truncation)
    except CovertError as exc:
        point.error = f"{type(exc).__name__}: {exc}"
        point.diagnostics["exception"] = exc
        return point
    point.power = sol.power
    point.one_minus_trunc = sol.one_minus_trunc
    point.tvd_certificate = sol.tvd_certificate
    if neglect_truncation:
        point.flags.append("neglect_truncation")
    P = sol.power
    try:
        conv = converse_equal_power(params.n, params.epsilon, P, mc)
        ach = achievability_mc(params, P, mc, tau_grid, r_grid)
    except CovertError as exc:
        point.error = f"{type(exc).__name__}: {exc}"
        point.diagnostics["exception"] = exc
        return point
    point.converse_bits = conv.bits
    point.converse_sigma = conv.sigma_bits
    if conv.clamped:
        point.flags.append("converse_clamped")
    if conv.degenerate:
        point.flags.append("converse_degenerate")
    point.achievability_bits = ach.bits
    point.achievability_sigma = ach.sigma_bits
    point.tau_star = ach.tau_star
    point.r_star = ach.r_star
    if ach.clamped:
        point.flags.append("achievability_clamped")
    point.converse_na_bits = _clamp(
        converse_normal_approx(params.n, params.epsilon, P), "converse_na", point.flags)
    na = achievability_normal_approx(params, P, tau_grid, max(r_grid, REFINED_GRID))
    if na.feasible:
        point.achievability_na_bits = _clamp(na.bits, "achievability_na", point.flags)
    else:
        point.flags.append("achievability_na_infeasible")
    point.diagnostics = {
        "converse_raw_bits": conv.raw_bits,
        "achievability_raw_bits": ach.raw_bits,
        "converse_beta": conv.beta,
        "achievability_beta": ach.beta,
        "achievability_na": na,
    }
    return point


def _axis_params(base, axis, value):
    if axis == "n":
        return base.replace(n=int(value))
    if axis == "delta":
        return base.replace(delta=float(value))
    if axis == "epsilon":
        return base.replace(epsilon=float(value))
    raise DomainError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")


def row_seed(seed, axis, value):
    """Row seed derived from (master seed, axis, axis value)."""
    return _rng.seed_sequence(seed, SWEEP_AXES.index(axis), _rng.key_of(value))


def sweep(base, axis, values, mc=None, neglect_truncation=False,
          tau_grid=DEFAULT_GRID, r_grid=DEFAULT_GRID, workers=1):
    """Evaluate :func:`compute_point` along one axis; rows are independent."""
    if axis not in SWEEP_AXES:
        raise DomainError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    mc = SamplingConfig.default() if mc is None else mc

    def one(value):
        try:
            params = _axis_params(base, axis, value)
        except CovertError as exc:
            bad = BoundPoint(base, error=f"{type(exc).__name__}: {exc}")
            bad.diagnostics["axis_value"] = value
            return bad
        row_mc = SamplingConfig(mc.count, row_seed(mc.seed, axis, value), mc.method)
        return compute_point(params, row_mc, neglect_truncation, tau_grid, r_grid)

    values = list(values)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, values))
    return [one(v) for v in values]
