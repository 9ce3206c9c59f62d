"""Hot numeric kernels with numba and pure-numpy implementations.

Each kernel is defined twice with identical semantics. The module-level
names (``row_moments``, ``shell_log_likelihood_ratio``, ``decode_first``)
point at the numba versions unless the backend flag selects numpy; the
explicit ``*_numba`` / ``*_numpy`` names stay importable for tests and
benchmarks.
"""
import math

import numpy as np
from scipy import special

from ._accel import USE_NUMBA, njit

__all__ = [
    "row_moments",
    "shell_log_likelihood_ratio",
    "decode_first",
    "log_hyp0f1",
]


# --------------------------------------------------------------------------
# per-draw sums of n standard normals
# --------------------------------------------------------------------------

@njit
def row_moments_numba(z):
    k, n = z.shape
    s1 = np.empty(k)
    s2 = np.empty(k)
    for i in range(k):
        a = 0.0
        b = 0.0
        for j in range(n):
            v = z[i, j]
            a += v
            b += v * v
        s1[i] = a
        s2[i] = b
    return s1, s2


def row_moments_numpy(z):
    z = np.asarray(z, dtype=np.float64)
    return z.sum(axis=1), np.einsum("ij,ij->i", z, z)


# --------------------------------------------------------------------------
# likelihood ratio of ||Y||^2 under shell-truncated input vs pure noise
# --------------------------------------------------------------------------

@njit
def _log_hyp0f1_scalar(b, x):
    # log 0F1(; b; x) for b > 0, x >= 0, summed outward from the peak term
    if x <= 0.0:
        return 0.0
    bp1 = b + 1.0
    disc = bp1 * bp1 - 4.0 * (b - x)
    k = 0
    if disc > 0.0:
        kf = 0.5 * (-bp1 + math.sqrt(disc))
        if kf > 0.0:
            k = int(math.ceil(kf))
    log_peak = (k * math.log(x) - math.lgamma(b + k) + math.lgamma(b)
                - math.lgamma(k + 1.0))
    total = 1.0
    r = 1.0
    j = k
    while True:
        r *= x / ((b + j) * (j + 1.0))
        j += 1
        total += r
        if r < 1e-17 * total:
            break
    r = 1.0
    j = k
    while j > 0:
        r *= (b + j - 1.0) * j / x
        j -= 1
        total += r
        if r < 1e-17 * total:
            break
    return log_peak + math.log(total)


@njit
def log_hyp0f1_numba(b, x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = _log_hyp0f1_scalar(b, x[i])
    return out


def log_hyp0f1_numpy(b, x):
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    pos = x > 0
    xp = x[pos]
    root = np.sqrt(xp)
    # 0F1(;b;x) = Gamma(b) x^((1-b)/2) I_{b-1}(2 sqrt x)
    out[pos] = (special.gammaln(b) + 0.5 * (1.0 - b) * np.log(xp)
                + np.log(special.ive(b - 1.0, 2.0 * root)) + 2.0 * root)
    return out


@njit
def shell_log_likelihood_ratio_numba(t, log_w, rho, b):
    m = t.shape[0]
    kn = rho.shape[0]
    out = np.empty(m)
    terms = np.empty(kn)
    for i in range(m):
        top = -np.inf
        for q in range(kn):
            v = log_w[q] - 0.5 * rho[q] + _log_hyp0f1_scalar(b, 0.25 * rho[q] * t[i])
            terms[q] = v
            if v > top:
                top = v
        acc = 0.0
        for q in range(kn):
            acc += math.exp(terms[q] - top)
        out[i] = top + math.log(acc)
    return out


def shell_log_likelihood_ratio_numpy(t, log_w, rho, b):
    t = np.asarray(t, dtype=np.float64)
    x = 0.25 * np.outer(t, rho)
    terms = log_w[None, :] - 0.5 * rho[None, :] + log_hyp0f1_numpy(b, x)
    return special.logsumexp(terms, axis=1)


# --------------------------------------------------------------------------
# sequential threshold decoding
# --------------------------------------------------------------------------

@njit
def decode_first_numba(codewords, log_gamma, y, s):
    m, n = codewords.shape
    trials = y.shape[0]
    base = 0.5 * n * math.log1p(s)
    scale = 1.0 / (2.0 * (1.0 + s))
    out = np.full(trials, -1, dtype=np.int64)
    for t in range(trials):
        yy = 0.0
        for i in range(n):
            yy += y[t, i] * y[t, i]
        for j in range(m):
            d = 0.0
            for i in range(n):
                e = y[t, i] - codewords[j, i]
                d += e * e
            if base - 0.5 * d + scale * yy > log_gamma[j]:
                out[t] = j
                break
    return out


def decode_first_numpy(codewords, log_gamma, y, s):
    codewords = np.asarray(codewords, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = codewords.shape[1]
    yy = np.einsum("ij,ij->i", y, y)
    cc = np.einsum("ij,ij->i", codewords, codewords)
    dist = yy[:, None] - 2.0 * y @ codewords.T + cc[None, :]
    dens = 0.5 * n * math.log1p(s) - 0.5 * dist + yy[:, None] / (2.0 * (1.0 + s))
    hit = dens > np.asarray(log_gamma)[None, :]
    first = np.argmax(hit, axis=1)
    return np.where(hit.any(axis=1), first, -1).astype(np.int64)


if USE_NUMBA:
    row_moments = row_moments_numba
    log_hyp0f1 = log_hyp0f1_numba
    shell_log_likelihood_ratio = shell_log_likelihood_ratio_numba
    decode_first = decode_first_numba
else:
    row_moments = row_moments_numpy
    log_hyp0f1 = log_hyp0f1_numpy
    shell_log_likelihood_ratio = shell_log_likelihood_ratio_numpy
    decode_first = decode_first_numpy
