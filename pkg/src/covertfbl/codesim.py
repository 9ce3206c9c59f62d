"""Small-scale simulation of the shell-truncated random-coding construction.

Reference output law for the decoder statistic is ``N(0, (1 + mu P) I)``
throughout, matching the thresholds computed in :mod:`covertfbl.hypotest`.
Codeword indices are 0-based.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.stats import binomtest

from . import _rng, kernels
from .bounds import achievability_mc
from .covert import CovertParams, solve_power, truncation_mass
from .errors import BudgetExhausted, DomainError, ParameterError, ScaleError
from .hypotest import InfoDensitySpec, SamplingConfig, solve_threshold

__all__ = [
    "Codebook",
    "SimResult",
    "ThresholdRule",
    "LemmaCheck",
    "ValidationReport",
    "generate_codebook",
    "constant_tau_rule",
    "sequential_decode",
    "simulate_error",
    "lemma_bounds",
    "EnsembleCheck",
    "ensemble_check",
    "validate_achievability",
]

MIN_ACCEPTANCE = 1e-4
MAX_SIM_N = 64


@dataclass(frozen=True)
class Codebook:
    n: int
    codewords: np.ndarray
    thresholds: np.ndarray
    mu: float
    power: float
    seed: object
    proposals: int = 0

    @property
    def size(self):
        return self.codewords.shape[0]

    @property
    def out_var(self):
        return 1.0 + self.mu * self.power

    @property
    def radii_sq(self):
        return np.einsum("ij,ij->i", self.codewords, self.codewords)


@dataclass(frozen=True)
class Interval:
    value: float
    low: float
    high: float

    @property
    def sigma(self):
        # half-width of a 95% interval expressed in standard deviations
        return 0.5 * (self.high - self.low) / 1.959963984540054


@dataclass(frozen=True)
class SimResult:
    max_err_est: Interval
    avg_err_est: Interval
    trials: int
    per_codeword_err: np.ndarray
    worst_index: int = 0


def _wilson(errors, trials):
    ci = binomtest(int(errors), int(trials)).proportion_ci(0.95, method="wilson")
    return Interval(errors / trials, float(ci.low), float(ci.high))


# ------------------------------------------------------------- codebook

@dataclass(frozen=True)
class ThresholdRule:
    """Threshold ``log gamma`` as a function of per-symbol energy ``R``.

    Values are solved on a grid over ``[mu^2 P, P]`` and interpolated
    linearly; any measurable threshold function is admissible for the
    random-coding lemmas, so interpolation costs nothing in validity.
    """

    radius_grid: np.ndarray
    log_gamma_grid: np.ndarray
    alpha: float = math.nan

    def __call__(self, radius_sq):
        return np.interp(radius_sq, self.radius_grid, self.log_gamma_grid)


def constant_tau_rule(n, power, mu, epsilon, tau0, mc=None, grid=17):
    """Thresholds hitting ``P[i >= log gamma] = 1 - eps + tau0`` for every R."""
    if not (0.0 < tau0 < epsilon):
        raise DomainError(f"tau0 must lie in (0, epsilon), got {tau0}")
    mc = SamplingConfig(20000, 0, "coordinates") if mc is None else mc
    alpha = 1.0 - epsilon + tau0
    rs = np.linspace(mu * mu * power, power, grid)
    lg = np.array([
        solve_threshold(InfoDensitySpec(n, power, mu, r), alpha, mc.count, mc.seed,
                        mc.method).log_gamma
        for r in rs
    ])
    return ThresholdRule(rs, lg, alpha)


def _shell_draws(n, count, mu, power, seed, stream):
    """``count`` i.i.d. draws of the shell-truncated Gaussian law, and proposals used."""
    lo, hi = mu * mu * n * power, n * power
    sd = math.sqrt(mu * power)
    out = np.empty((count, n))
    have = 0
    proposals = 0
    batch_idx = 0
    rate = max(truncation_mass(n, mu), MIN_ACCEPTANCE)
    while have < count:
        need = count - have
        size = int(min(max(64, 1.2 * need / rate + 16), _rng.rows_per_chunk(n)))
        rng = _rng.generator(seed, stream, batch_idx)
        batch_idx += 1
        x = sd * rng.standard_normal((size, n))
        r2 = np.einsum("ij,ij->i", x, x)
        keep = x[(r2 >= lo) & (r2 <= hi)]
        take = min(need, keep.shape[0])
        if take < keep.shape[0]:
            # count proposals only up to the last accepted row used
            accepted_pos = np.flatnonzero((r2 >= lo) & (r2 <= hi))
            proposals += int(accepted_pos[take - 1]) + 1 if take else size
        else:
            proposals += size
        out[have:have + take] = keep[:take]
        have += take
    return out, proposals


def generate_codebook(n, m, mu, power, threshold_rule, seed=0):
    """Draw ``m`` codewords by rejection from ``N(0, mu P I_n)`` onto the shell.

    ``threshold_rule`` maps ``||c||^2 / n`` to ``log gamma(c)``; pass a
    constant (e.g. ``math.inf``) for a fixed threshold.
    """
    if m < 1:
        raise DomainError(f"codebook size must be >= 1, got {m}")
    if not (0.0 < mu <= 1.0):
        raise DomainError(f"mu must lie in (0, 1], got {mu}")
    rate = truncation_mass(n, mu)
    if mu == 1.0 or rate < MIN_ACCEPTANCE:
        raise ParameterError(
            f"shell acceptance rate {rate:.3g} below {MIN_ACCEPTANCE:g} at n={n}, mu={mu}")
    words, proposals = _shell_draws(n, int(m), mu, power, seed, _rng.CODEBOOK)
    r = np.einsum("ij,ij->i", words, words) / n
    if callable(threshold_rule):
        lg = np.asarray(threshold_rule(r), dtype=np.float64)
    else:
        lg = np.full(int(m), float(threshold_rule))
    return Codebook(int(n), words, np.broadcast_to(lg, (int(m),)).copy(), mu, power, seed,
                    proposals)


# -------------------------------------------------------------- decoding

def sequential_decode(book, received):
    """Index of the first codeword whose information density beats its threshold.

    ``None`` signals an erasure.
    """
    y = np.asarray(received, dtype=np.float64)
    if y.shape != (book.n,):
        raise DomainError(f"received vector must have length {book.n}")
    j = int(kernels.decode_first(book.codewords, book.thresholds, y[None, :],
                                 book.mu * book.power)[0])
    return None if j < 0 else j


def simulate_error(book, trials, seed=0, min_trials=1000):
    """Per-codeword error frequencies over ``trials`` AWGN uses each.

    Erasures count as errors. ``max_err_est`` reports the worst codeword's
    frequency with an interval spanning the per-codeword Wilson bounds.
    """
    if trials < min_trials:
        raise DomainError(f"need at least {min_trials} trials per codeword")
    s = book.mu * book.power
    per_chunk = max(1, _rng.rows_per_chunk(book.n) // max(1, book.size))
    errs = np.zeros(book.size, dtype=np.int64)
    for j in range(book.size):
        c = book.codewords[j]
        for idx, size in enumerate(_rng.chunk_sizes(trials, per_chunk)):
            rng = _rng.generator(seed, _rng.CHANNEL, j, idx)
            y = c + rng.standard_normal((size, book.n))
            dec = kernels.decode_first(book.codewords, book.thresholds, y, s)
            errs[j] += int(np.count_nonzero(dec != j))
    per = errs / trials
    worst = int(np.argmax(per))
    ints = [_wilson(e, trials) for e in errs]
    max_est = Interval(float(per[worst]), max(i.low for i in ints), max(i.high for i in ints))
    avg_est = _wilson(int(errs.sum()), trials * book.size)
    return SimResult(max_est, avg_est, int(trials), per, worst)


# ---------------------------------------------------------------- lemmas

def _density(x, y, s):
    n = x.shape[-1]
    d = y - x
    return (0.5 * n * math.log1p(s) - 0.5 * np.einsum("ij,ij->i", d, d)
            + np.einsum("ij,ij->i", y, y) / (2.0 * (1.0 + s)))


@dataclass(frozen=True)
class LemmaCheck:
    """Right-hand sides of the random-coding lemmas, normalised by ``P_X[F]``.

    ``miss`` estimates ``E[P(i(X;Y) <= log gamma(X)) | F]``; ``sup_false``
    estimates ``sup_x P_Y[i(x;Y) > log gamma(x)]`` and ``avg_false`` its
    average over X drawn from the truncated law. ``P_Y`` is the output of
    the truncated input, sampled directly.
    """

    m: int
    miss: Interval
    sup_false: Interval
    avg_false: Interval

    @property
    def max_error_rhs(self):
        return self.miss.value + (self.m - 1) * self.sup_false.value

    @property
    def max_error_sigma(self):
        return math.hypot(self.miss.sigma, (self.m - 1) * self.sup_false.sigma)

    @property
    def avg_error_rhs(self):
        return self.miss.value + 0.5 * (self.m - 1) * self.avg_false.value

    @property
    def avg_error_sigma(self):
        return math.hypot(self.miss.sigma, 0.5 * (self.m - 1) * self.avg_false.sigma)


def _lemma_terms(n, m, mu, P, rule, radii, samples, seed, sup_grid):
    s = mu * P
    x = _shell_draws(n, samples, mu, P, seed, _rng.OUTPUT)[0]
    z = _rng.generator(seed, _rng.CHANNEL, 1 << 20).standard_normal((samples, n))
    r = np.einsum("ij,ij->i", x, x) / n
    misses = int(np.count_nonzero(_density(x, x + z, s) <= rule(r)))

    # Y ~ P_Y built from a second, independent truncated input
    xo = _shell_draws(n, samples, mu, P, seed, _rng.NULL)[0]
    zo = _rng.generator(seed, _rng.CHANNEL, 1 << 21).standard_normal((samples, n))
    y = xo + zo
    false_avg = int(np.count_nonzero(_density(x, y, s) > rule(r)))

    grid = np.linspace(mu * mu * P, P, sup_grid)
    best = -1
    for rr in np.unique(np.concatenate([grid, np.asarray(radii, dtype=float)])):
        xr = np.full((1, n), math.sqrt(rr))
        best = max(best, int(np.count_nonzero(_density(xr, y, s) > float(rule(rr)))))
    return LemmaCheck(int(m), _wilson(misses, samples), _wilson(best, samples),
                      _wilson(false_avg, samples))


def lemma_bounds(book, rule, samples=20000, seed=0, sup_grid=17, extra_radii=()):
    """Monte Carlo estimates of both lemma right-hand sides for ``book``'s rule.

    ``P_Y`` is rotation invariant, so the false-alarm probability of ``x``
    depends on ``||x||`` alone; the supremum over the shell is taken over a
    radius grid together with the book's own radii.
    """
    radii = np.concatenate([book.radii_sq / book.n, np.asarray(extra_radii, dtype=float)])
    return _lemma_terms(book.n, book.size, book.mu, book.power, rule, radii,
                        samples, seed, sup_grid)


@dataclass(frozen=True)
class EnsembleCheck:
    """Codebook-ensemble comparison against the lemma bounds.

    The lemmas bound error probabilities averaged over the random codebook
    construction, so a single drawn book may exceed them. Here the error of
    codeword j is averaged over ``books`` independent codebooks; the largest
    such mean is compared with the maximal-error bound and the mean average
    error with the average-error bound.
    """

    lemma: LemmaCheck
    per_index_mean: np.ndarray
    per_index_sigma: np.ndarray
    avg_mean: float
    avg_sigma: float
    books: int
    single_book: tuple = ()

    @property
    def max_mean(self):
        return float(self.per_index_mean.max())

    @property
    def max_sigma(self):
        return float(self.per_index_sigma[int(np.argmax(self.per_index_mean))])

    def max_ok(self, k=3.0):
        slack = k * math.hypot(self.max_sigma, self.lemma.max_error_sigma)
        return self.max_mean <= self.lemma.max_error_rhs + slack

    def avg_ok(self, k=3.0):
        slack = k * math.hypot(self.avg_sigma, self.lemma.avg_error_sigma)
        return self.avg_mean <= self.lemma.avg_error_rhs + slack


def ensemble_check(n, m, mu, power, rule, books=20, trials=2000, seed=0,
                   lemma_samples=20000):
    errs = np.empty((books, m))
    radii = []
    singles = []
    for b in range(books):
        book = generate_codebook(n, m, mu, power, rule, _rng.seed_sequence(seed, b))
        sim = simulate_error(book, trials, _rng.seed_sequence(seed, b), min_trials=min(trials, 1000))
        errs[b] = sim.per_codeword_err
        radii.extend(book.radii_sq / n)
        singles.append((sim.max_err_est.value, sim.avg_err_est.value))
    lemma = _lemma_terms(n, m, mu, power, rule, radii, lemma_samples, seed, 17)
    avg = errs.mean(axis=1)
    sd = errs.std(axis=0, ddof=1) if books > 1 else np.zeros(m)
    return EnsembleCheck(
        lemma=lemma,
        per_index_mean=errs.mean(axis=0),
        per_index_sigma=sd / math.sqrt(books),
        avg_mean=float(avg.mean()),
        avg_sigma=float(avg.std(ddof=1) / math.sqrt(books)) if books > 1 else 0.0,
        books=books,
        single_book=tuple(singles),
    )


# ------------------------------------------------------------ end-to-end

@dataclass
class ValidationReport:
    n: int
    m: int
    power: float
    certified_bits: float
    tau0: float
    epsilon: float
    max_error: Interval = None
    passed: bool = True
    neglect_truncation: bool = False
    notes: list = field(default_factory=list)


def validate_achievability(n, params, mc=None, seed=0, m=None, trials=10000):
    """Build a codebook of the certified size and check its maximal error.

    The size is ``floor(2^bits)`` from :func:`covertfbl.bounds.achievability_mc`
    unless ``m`` overrides it. A single-codeword code needs no decoder and has
    error 0. When truncation alone exhausts the covert budget at this ``n``
    the truncation-neglecting power is used and the report says so.
    """
    if n > MAX_SIM_N:
        raise ScaleError(f"validate_achievability is limited to n <= {MAX_SIM_N}")
    mc = SamplingConfig(100000, seed, "coordinates") if mc is None else mc
    p = params.replace(n=int(n))
    notes = []
    neglect = False
    try:
        sol = solve_power(p)
    except BudgetExhausted as exc:
        notes.append(f"truncation exhausts the budget ({exc}); using truncation-neglecting power")
        sol = solve_power(p, neglect_truncation=True)
        neglect = True
    ach = achievability_mc(p, sol.power, mc)
    certified = ach.bits
    size = int(m) if m is not None else max(1, int(math.floor(2.0 ** certified + 1e-9)))
    tau0 = ach.tau_star if math.isfinite(ach.tau_star) else 0.5 * p.epsilon
    report = ValidationReport(int(n), size, sol.power, certified, tau0, p.epsilon,
                              neglect_truncation=neglect, notes=notes)
    if size == 1:
        report.max_error = Interval(0.0, 0.0, 0.0)
        report.notes.append("single codeword: decoder always outputs it")
        return report
    rule = constant_tau_rule(n, sol.power, p.mu, p.epsilon, tau0,
                             SamplingConfig(20000, seed, mc.method))
    book = generate_codebook(n, size, p.mu, sol.power, rule, seed)
    sim = simulate_error(book, trials, seed)
    report.max_error = sim.max_err_est
    report.passed = sim.max_err_est.value <= p.epsilon + 3.0 * sim.max_err_est.sigma
    if not report.passed:
        report.notes.append(
            f"bound violation: max error {sim.max_err_est.value:.4g} > epsilon {p.epsilon}")
    return report
