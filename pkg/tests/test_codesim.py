import math

import numpy as np
import pytest

from covertfbl.codesim import (
    Codebook,
    constant_tau_rule,
    ensemble_check,
    generate_codebook,
    lemma_bounds,
    sequential_decode,
    simulate_error,
    validate_achievability,
)
from covertfbl.covert import CovertParams, truncation_mass
from covertfbl.errors import DomainError, ParameterError, ScaleError
from covertfbl.hypotest import SamplingConfig, info_density


@pytest.fixture(scope="module")
def rule16():
    return constant_tau_rule(16, 0.2, 0.8, 0.1, 0.05)


def test_acceptance_rate_matches_truncation_mass():
    n, mu = 16, 0.8
    book = generate_codebook(n, 50_000, mu, 0.2, math.inf, seed=5)
    rate = book.size / book.proposals
    d = truncation_mass(n, mu)
    sd = math.sqrt(d * (1 - d) / book.proposals)
    assert book.proposals >= 100_000
    assert abs(rate - d) <= 3 * sd


def test_shell_membership_exact():
    n, mu, p = 12, 0.75, 0.3
    book = generate_codebook(n, 2000, mu, p, 0.0, seed=1)
    r2 = book.radii_sq
    assert np.all(r2 >= mu * mu * n * p) and np.all(r2 <= n * p)


def test_generate_errors():
    with pytest.raises(ParameterError):
        generate_codebook(8, 2, 1.0, 0.2, 0.0)
    with pytest.raises(ParameterError):
        generate_codebook(8, 2, 0.99999, 0.2, 0.0)
    with pytest.raises(DomainError):
        generate_codebook(8, 0, 0.8, 0.2, 0.0)


def test_codebook_deterministic(rule16):
    a = generate_codebook(16, 4, 0.8, 0.2, rule16, seed=3)
    b = generate_codebook(16, 4, 0.8, 0.2, rule16, seed=3)
    assert np.array_equal(a.codewords, b.codewords)
    assert np.array_equal(a.thresholds, b.thresholds)


def test_threshold_rule_hits_alpha(rule16):
    assert rule16.alpha == pytest.approx(0.95)
    # at each grid R the miss probability of a codeword of that energy is 1 - alpha
    rng = np.random.default_rng(0)
    for r in rule16.radius_grid[::8]:
        x = np.full(16, math.sqrt(r))
        i = info_density(x, x + rng.standard_normal((40_000, 16)), 0.16)
        miss = np.mean(i <= rule16(r))
        assert abs(miss - 0.05) < 4 * math.sqrt(0.05 * 0.95 / 40_000) + 0.005


def test_sequential_decode_semantics(rule16):
    book = generate_codebook(16, 4, 0.8, 0.2, rule16, seed=2)
    generous = Codebook(book.n, book.codewords, np.full(4, -np.inf), book.mu, book.power, 0)
    assert sequential_decode(generous, book.codewords[0]) == 0
    never = Codebook(book.n, book.codewords, np.full(4, np.inf), book.mu, book.power, 0)
    assert sequential_decode(never, book.codewords[1]) is None
    # appending codewords after the first qualifying one changes nothing
    y = book.codewords[1] + 0.1
    first = sequential_decode(book, y)
    if first is not None:
        extra = np.vstack([book.codewords[: first + 1], np.zeros((3, 16))])
        longer = Codebook(16, extra, np.concatenate([book.thresholds[: first + 1], [-1e9] * 3]),
                          book.mu, book.power, 0)
        assert sequential_decode(longer, y) == first
    assert sequential_decode(book, y) == sequential_decode(book, y)
    with pytest.raises(DomainError):
        sequential_decode(book, np.zeros(3))


def test_simulate_sanity_floor():
    # widely separated codewords and a permissive threshold
    n = 8
    words = np.zeros((2, n))
    words[0, 0], words[1, 0] = 6.0, -6.0
    lg = np.array([-3.0, -3.0])
    book = Codebook(n, words, lg, 0.8, 8.0, 0)
    sim = simulate_error(book, 2000, seed=1)
    assert sim.max_err_est.value < 0.5 and sim.avg_err_est.value < 0.5
    assert sim.avg_err_est.value <= sim.max_err_est.value + 1e-12
    with pytest.raises(DomainError):
        simulate_error(book, 10)


def test_simulate_deterministic(rule16):
    book = generate_codebook(16, 2, 0.8, 0.2, rule16, seed=4)
    a = simulate_error(book, 2000, seed=7)
    b = simulate_error(book, 2000, seed=7)
    assert np.array_equal(a.per_codeword_err, b.per_codeword_err)


def test_single_codeword_error_is_miss_probability(rule16):
    book = generate_codebook(16, 1, 0.8, 0.2, rule16, seed=6)
    sim = simulate_error(book, 20_000, seed=1)
    assert abs(sim.max_err_est.value - 0.05) < 4 * math.sqrt(0.05 * 0.95 / 20_000) + 0.005


def test_lemma_terms(rule16):
    book = generate_codebook(16, 4, 0.8, 0.2, rule16, seed=8)
    lem = lemma_bounds(book, rule16, samples=20_000)
    assert abs(lem.miss.value - 0.05) < 0.01
    assert lem.sup_false.value >= lem.avg_false.value - 3 * lem.avg_false.sigma
    assert lem.max_error_rhs == pytest.approx(lem.miss.value + 3 * lem.sup_false.value)
    assert lem.avg_error_rhs == pytest.approx(lem.miss.value + 1.5 * lem.avg_false.value)


@pytest.mark.parametrize("m", [2, 4])
def test_ensemble_lemma_inequalities(rule16, m):
    chk = ensemble_check(16, m, 0.8, 0.2, rule16, books=10, trials=1000, seed=1)
    assert chk.max_ok() and chk.avg_ok()
    assert len(chk.single_book) == 10


def test_validate_achievability_small():
    params = CovertParams(32, 0.1, 0.1, 0.8)
    rep = validate_achievability(32, params, SamplingConfig(50_000, 0, "coordinates"))
    assert rep.neglect_truncation and rep.m == 1 and rep.passed
    assert rep.max_error.value == 0.0
    with pytest.raises(ScaleError):
        validate_achievability(65, params)


def test_validate_achievability_records_overshoot():
    params = CovertParams(32, 0.1, 0.1, 0.8)
    rep = validate_achievability(32, params, SamplingConfig(50_000, 0, "coordinates"), m=2,
                                 trials=2000)
    assert rep.m == 2 and rep.max_error is not None
    assert rep.passed == (rep.max_error.value <= 0.1 + 3 * rep.max_error.sigma)
