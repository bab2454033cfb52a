"""
Asymptotic P-values for the Kuiper and Kolmogorov-Smirnov statistics

Under the null hypothesis, the cumulative differences normalized by sigma
behave like a standard Brownian motion B on [0, 1] (a driftless random walk
with unit terminal variance).  The Kuiper statistic divided by sigma then
follows the range max B - min B, and the Kolmogorov-Smirnov statistic divided
by sigma follows max |B|.

Each tail probability has two classical series representations: one in terms
of normal tail probabilities, converging fast for large x, and one
theta-function (Fourier) form, converging fast for small x.  With
Q(z) = erfc(z / sqrt(2)) / 2 the standard normal upper tail,

    P(range >= x)  = 8 sum_{k>=1} (-1)^(k-1) k Q(k x)
                   = 1 - 8 sum_{j odd} (1/x^2 + 1/(pi j)^2) exp(-(pi j)^2 / (2 x^2))

    P(max|B| >= x) = 4 sum_{k>=1} (-1)^(k-1) Q((2k-1) x)
                   = 1 - (4/pi) sum_{k>=0} (-1)^k / (2k+1) exp(-((2k+1) pi)^2 / (8 x^2))

The range series is Feller's; its theta form comes from integrating the
Poisson-resummed density.  mc_null_tail simulates random walks as an
independent check on both.
"""

import math
from dataclasses import dataclass

import numpy as np

from cumdiff.rng import make_generator

# Terms below this fraction of the leading term are dropped.
RELATIVE_CUTOFF = 1e-16
MAX_TERMS = 10_000
# Crossovers between the large-x and small-x representations.
KUIPER_CROSSOVER = 1.5
KS_CROSSOVER = 1.2
# Below this, either tail probability is 1 to double precision.
NEGLIGIBLE_X = 0.05


@dataclass(frozen=True)
class TailProbability:
    """A tail probability together with bookkeeping from the series."""

    value: float
    terms: int
    truncation: float

    def __float__(self):
        return self.value


def _normal_tail(z):
    return 0.5 * math.erfc(z / math.sqrt(2))


def _sum_series(term, start, step):
    """Sum term(k) for k = start, start + step, ... until terms are negligible."""
    total = 0.0
    lead = None
    k = start
    for n in range(1, MAX_TERMS + 1):
        t = term(k)
        if lead is None:
            lead = abs(t)
        total += t
        k += step
        nxt = abs(term(k))
        if nxt <= RELATIVE_CUTOFF * lead or nxt == 0:
            return total, n, nxt
    return total, MAX_TERMS, abs(term(k))


def _check(x):
    x = float(x)
    if not x >= 0:
        raise ValueError(f'domain error: x must be nonnegative, got {x}')
    return x


def _clamp(p):
    return min(1.0, max(0.0, p))


def pvalue_kuiper(x):
    """
    Asymptotic P-value for the Kuiper statistic divided by sigma.

    Parameters
    ----------
    x : float
        nonnegative value of Kuiper / sigma

    Returns
    -------
    TailProbability
        probability that the range of standard Brownian motion on [0, 1]
        is at least x
    """
    x = _check(x)
    if x < NEGLIGIBLE_X:
        return TailProbability(1.0, 0, 0.0)
    if x >= KUIPER_CROSSOVER:
        def term(k):
            t = k * _normal_tail(k * x)
            return t if k % 2 else -t
        s, n, rest = _sum_series(term, 1, 1)
        return TailProbability(_clamp(8 * s), n, 8 * rest)
    c = math.pi**2 / (2 * x**2)

    def term(j):
        return (1 / x**2 + 1 / (math.pi * j)**2) * math.exp(-c * j * j)
    s, n, rest = _sum_series(term, 1, 2)
    return TailProbability(_clamp(1 - 8 * s), n, 8 * rest)


def pvalue_ks(x):
    """
    Asymptotic P-value for the Kolmogorov-Smirnov statistic divided by sigma.

    Parameters
    ----------
    x : float
        nonnegative value of KS / sigma

    Returns
    -------
    TailProbability
        probability that max |B| over [0, 1] is at least x, for standard
        Brownian motion B
    """
    x = _check(x)
    if x < NEGLIGIBLE_X:
        return TailProbability(1.0, 0, 0.0)
    if x >= KS_CROSSOVER:
        def term(k):
            t = _normal_tail((2 * k - 1) * x)
            return t if k % 2 else -t
        s, n, rest = _sum_series(term, 1, 1)
        return TailProbability(_clamp(4 * s), n, 4 * rest)
    c = math.pi**2 / (8 * x**2)

    def term(k):
        t = math.exp(-c * (2 * k + 1)**2) / (2 * k + 1)
        return -t if k % 2 else t
    s, n, rest = _sum_series(term, 0, 1)
    return TailProbability(_clamp(1 - 4 / math.pi * s), n, 4 / math.pi * rest)


@dataclass(frozen=True)
class MonteCarloTail:
    estimate: float
    stderr: float
    trials: int


# 2 (M - a)(M - b) / dt above this makes a bridge crossing level M
# less likely than exp(-40).
_BRIDGE_CUTOFF = 40.0
_CHUNK = 4000


def simulate_null_extremes(walk_length, trials, seed, bridge=True):
    """
    Maxima and minima of simulated driftless Gaussian random walks.

    Each walk has walk_length independent N(0, 1/walk_length) steps, so its
    terminal variance is 1.  With bridge=True, the walk is treated as a
    Brownian path observed on the grid and the extremes include the path's
    excursions between grid points, sampled exactly from the law of the
    maximum (or minimum) of a Brownian bridge; this removes the O(walk^-1/2)
    bias of the discrete extremes.  Only intervals that could plausibly move
    the discrete extreme are sampled.

    Returns
    -------
    tuple of ndarray
        (maxima, minima), each of length trials
    """
    rng = make_generator(seed)
    dt = 1.0 / walk_length
    his = []
    los = []
    done = 0
    while done < trials:
        k = min(_CHUNK, trials - done)
        w = np.empty((k, walk_length + 1))
        w[:, 0] = 0
        w[:, 1:] = rng.standard_normal((k, walk_length))
        w[:, 1:] *= math.sqrt(dt)
        np.cumsum(w[:, 1:], axis=1, out=w[:, 1:])
        hi = w.max(axis=1)
        lo = w.min(axis=1)
        if bridge:
            a = w[:, :-1]
            b = w[:, 1:]
            for sign, ext in ((1.0, hi), (-1.0, lo)):
                gap = (sign * (ext[:, None] - a)) * (sign * (ext[:, None] - b))
                rows, cols = np.nonzero(gap < _BRIDGE_CUTOFF * dt / 2)
                aa = a[rows, cols]
                bb = b[rows, cols]
                u = rng.random(len(rows))
                root = np.sqrt((bb - aa)**2 - 2 * dt * np.log1p(-u))
                vals = (aa + bb + sign * root) / 2
                if sign > 0:
                    np.maximum.at(hi, rows, vals)
                else:
                    np.minimum.at(lo, rows, vals)
        his.append(hi)
        los.append(lo)
        done += k
    return np.concatenate(his), np.concatenate(los)


def tail_fraction(sample, x):
    """Fraction of sample at least x, with its binomial standard error."""
    sample = np.asarray(sample)
    p = float(np.mean(sample >= x))
    return MonteCarloTail(p, math.sqrt(p * (1 - p) / len(sample)), len(sample))


def mc_null_tail(x, walk_length=1000, trials=10**6, seed=0, kind='range',
                 bridge=True):
    """
    Monte Carlo estimate of a null tail probability.

    Parameters
    ----------
    x : float
        threshold
    walk_length : int
        steps per walk (at least 100)
    trials : int
        number of walks (at least 1000)
    seed : int
        seed for the random walks
    kind : str
        'range' (Kuiper) or 'maxabs' (Kolmogorov-Smirnov)
    bridge : bool
        include Brownian excursions between grid points

    Returns
    -------
    MonteCarloTail
    """
    if walk_length < 100 or trials < 1000:
        raise ValueError('need walk_length >= 100 and trials >= 1000')
    if kind not in ('range', 'maxabs'):
        raise ValueError(f'unknown kind {kind!r}')
    hi, lo = simulate_null_extremes(walk_length, trials, seed, bridge=bridge)
    sample = hi - lo if kind == 'range' else np.maximum(hi, -lo)
    return tail_fraction(sample, x)

