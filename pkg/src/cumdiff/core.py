"""
Shared data model and the assembly of cumulative-difference graphs

A cumulative-difference graph is built from per-bin differences D_1, ..., D_L
and positive per-bin weight totals T_1, ..., T_L (already ordered by score):

    A_j = (T_1 + ... + T_j) / (T_1 + ... + T_L)
    C_j = (D_1 T_1 + ... + D_j T_j) / (T_1 + ... + T_L)

with A_0 = C_0 = 0.  The slope of the secant line between two points of the
graph is the weighted average difference over the scores in between.  The
Kuiper statistic is the range of C and the Kolmogorov-Smirnov statistic is
the maximum of |C|.

All prefix sums use Neumaier's compensated summation, since survey files with
~4e5 rows otherwise lose digits in the printed summary statistics.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from cumdiff import significance


@dataclass(frozen=True)
class Observation:
    """One (score, response, weight) triple."""

    score: float
    response: float
    weight: float

    def __post_init__(self):
        if not (math.isfinite(self.score) and math.isfinite(self.response)):
            raise ValueError('score and response must be finite')
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise ValueError('weight must be positive and finite')


@dataclass(frozen=True)
class PairedObservation:
    """A score observed together with two responses and one weight."""

    score: float
    response_r: float
    response_q: float
    weight: float

    def __post_init__(self):
        values = (self.score, self.response_r, self.response_q)
        if not all(math.isfinite(v) for v in values):
            raise ValueError('score and responses must be finite')
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise ValueError('weight must be positive and finite')


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Observations sorted by score (stably, so ties keep their input order).

    Parameters
    ----------
    scores, responses, weights : array_like
        one entry per observation; weights must be positive
    responses2 : array_like, optional
        second response per observation (paired samples only)
    groups : array_like, optional
        subpopulation label per observation (any hashable values)
    dropped : int, optional
        number of raw rows discarded by the reader for missing values
    """

    scores: np.ndarray
    responses: np.ndarray
    weights: np.ndarray
    responses2: np.ndarray = None
    groups: np.ndarray = None
    dropped: int = 0

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float).ravel()
        r = np.asarray(self.responses, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if not (len(s) == len(r) == len(w)):
            raise ValueError('scores, responses, and weights differ in length')
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(r))):
            raise ValueError('scores and responses must be finite')
        if not np.all((w > 0) & np.isfinite(w)):
            raise ValueError('weights must be positive and finite')
        order = np.argsort(s, kind='stable')
        object.__setattr__(self, 'scores', _frozen(s[order]))
        object.__setattr__(self, 'responses', _frozen(r[order]))
        object.__setattr__(self, 'weights', _frozen(w[order]))
        if self.responses2 is not None:
            q = np.asarray(self.responses2, dtype=float).ravel()
            if len(q) != len(s):
                raise ValueError('responses2 differs in length')
            if not np.all(np.isfinite(q)):
                raise ValueError('responses2 must be finite')
            object.__setattr__(self, 'responses2', _frozen(q[order]))
        if self.groups is not None:
            g = np.asarray(self.groups).ravel()
            if len(g) != len(s):
                raise ValueError('groups differs in length')
            object.__setattr__(self, 'groups', _frozen(g[order]))

    @classmethod
    def from_observations(cls, observations, groups=None):
        obs = list(observations)
        paired = bool(obs) and isinstance(obs[0], PairedObservation)
        if paired:
            return cls([o.score for o in obs], [o.response_r for o in obs],
                       [o.weight for o in obs],
                       responses2=[o.response_q for o in obs], groups=groups)
        return cls([o.score for o in obs], [o.response for o in obs],
                   [o.weight for o in obs], groups=groups)

    def __len__(self):
        return len(self.scores)

    @property
    def total_count(self):
        """m, the number of observations."""
        return len(self.scores)

    @property
    def is_paired(self):
        return self.responses2 is not None

    @property
    def distinct_scores(self):
        return np.unique(self.scores)

    @property
    def multiplicities(self):
        return np.unique(self.scores, return_counts=True)[1]

    @property
    def num_distinct(self):
        """l, the number of distinct scores."""
        return len(self.distinct_scores)

    @property
    def observations(self):
        if self.is_paired:
            return [PairedObservation(*t) for t in zip(
                self.scores.tolist(), self.responses.tolist(),
                self.responses2.tolist(), self.weights.tolist())]
        return [Observation(*t) for t in zip(
            self.scores.tolist(), self.responses.tolist(),
            self.weights.tolist())]

    def subset(self, mask):
        """Observations where the boolean mask (aligned to this order) holds."""
        mask = np.asarray(mask, dtype=bool)
        return Dataset(
            self.scores[mask], self.responses[mask], self.weights[mask],
            responses2=None if self.responses2 is None
            else self.responses2[mask],
            groups=None if self.groups is None else self.groups[mask])

    def with_scores(self, scores):
        """Copy with replaced scores (aligned to this order), re-sorted."""
        return Dataset(scores, self.responses, self.weights,
                       responses2=self.responses2, groups=self.groups,
                       dropped=self.dropped)

    def with_groups(self, groups):
        return Dataset(self.scores, self.responses, self.weights,
                       responses2=self.responses2, groups=groups,
                       dropped=self.dropped)


@dataclass(frozen=True)
class SubpopulationSelector:
    """
    Subpopulation addressed by lexicographically increasing index pairs.

    Each pair is (index of the distinct score, index within that score's
    repeated observations), both zero-based, relative to a Dataset.
    """

    index_pairs: tuple

    def __post_init__(self):
        pairs = tuple((int(j), int(k)) for j, k in self.index_pairs)
        for a, b in zip(pairs, pairs[1:]):
            if not a < b:
                raise ValueError('index pairs must increase lexicographically')
        if pairs and min(min(p) for p in pairs) < 0:
            raise ValueError('index pairs must be nonnegative')
        object.__setattr__(self, 'index_pairs', pairs)

    def __len__(self):
        return len(self.index_pairs)

    @classmethod
    def from_mask(cls, dataset, mask):
        mask = np.asarray(mask, dtype=bool)
        if len(mask) != len(dataset):
            raise ValueError('mask differs in length from the dataset')
        _, first, inverse = np.unique(
            dataset.scores, return_index=True, return_inverse=True)
        rows = np.nonzero(mask)[0]
        j = inverse[rows]
        k = rows - first[j]
        return cls(tuple(zip(j.tolist(), k.tolist())))

    def mask(self, dataset):
        """Boolean mask over the dataset's (sorted) observations."""
        counts = dataset.multiplicities
        offsets = np.concatenate([[0], np.cumsum(counts)])
        out = np.zeros(len(dataset), dtype=bool)
        for j, k in self.index_pairs:
            if j >= len(counts) or k >= counts[j]:
                raise ValueError(f'index pair {(j, k)} addresses no observation')
            out[offsets[j] + k] = True
        return out


def group_sums(keys, *values):
    """
    Sums of each value array over runs of equal keys.

    keys must be sorted (or at least have equal keys adjacent).  Returns the
    distinct keys and a list with one array of run sums per value array.
    """
    keys = np.asarray(keys)
    starts = np.concatenate([[0], np.nonzero(keys[1:] != keys[:-1])[0] + 1])
    return keys[starts], [np.add.reduceat(np.asarray(v, dtype=float), starts)
                          for v in values]


def compensated_cumsum(values):
    """Prefix sums via Neumaier's variant of Kahan summation."""
    values = np.asarray(values, dtype=float)
    out = np.empty(len(values))
    s = 0.0
    c = 0.0
    for i, v in enumerate(values.tolist()):
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out[i] = s + c
    return out


@dataclass(frozen=True, eq=False)
class CumulativeGraph:
    """
    Abscissae A_0..A_L and ordinates C_0..C_L of a cumulative graph.

    sigma is the estimated standard deviation of C_L (used for the triangle
    at the origin and for normalizing statistics); it is None until a mode
    supplies it.  Graphs built by accumulate also keep the increments D and
    T so that secant slopes can be formed without cancellation.
    """

    abscissae: np.ndarray
    ordinates: np.ndarray
    sigma: float = None
    diffs: np.ndarray = None
    totals: np.ndarray = None

    def __post_init__(self):
        a = _frozen(np.asarray(self.abscissae, dtype=float))
        c = _frozen(np.asarray(self.ordinates, dtype=float))
        if a.ndim != 1 or a.shape != c.shape or len(a) < 1:
            raise ValueError('abscissae and ordinates must be equal-length 1-D')
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(c))):
            raise ValueError('graph values must be finite')
        if a[0] != 0 or c[0] != 0:
            raise ValueError('graph must start at the origin')
        if len(a) > 1 and (a[-1] != 1 or not np.all(np.diff(a) > 0)):
            raise ValueError('abscissae must increase strictly up to 1')
        if self.sigma is not None and not (self.sigma >= 0):
            raise ValueError('sigma must be nonnegative')
        object.__setattr__(self, 'abscissae', a)
        object.__setattr__(self, 'ordinates', c)
        for name in ('diffs', 'totals'):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _frozen(np.asarray(v, float)))

    @property
    def length(self):
        """L, the number of steps in the graph."""
        return len(self.abscissae) - 1

    def with_sigma(self, sigma):
        return replace(self, sigma=None if sigma is None else float(sigma))


def accumulate(diffs, totals):
    """
    Cumulative graph from per-bin differences and weight totals.

    The bins must already be ordered by score; the result depends on order.

    Parameters
    ----------
    diffs : array_like
        D_1, ..., D_L
    totals : array_like
        T_1, ..., T_L, all positive

    Returns
    -------
    CumulativeGraph
        graph with sigma left unset
    """
    d = np.asarray(diffs, dtype=float)
    t = np.asarray(totals, dtype=float)
    if d.ndim != 1 or t.shape != d.shape:
        raise ValueError('diffs and totals must be 1-D and of equal length')
    if len(d) == 0:
        raise ValueError('empty graph')
    if not np.all((t > 0) & np.isfinite(t)):
        raise ValueError('invalid weight total')
    if not np.all(np.isfinite(d)):
        raise ValueError('differences must be finite')
    wsum = compensated_cumsum(t)
    dsum = compensated_cumsum(d * t)
    total = wsum[-1]
    a = np.concatenate([[0.0], wsum / total])
    c = np.concatenate([[0.0], dsum / total])
    return CumulativeGraph(a, c, diffs=d, totals=t)


def kuiper_stat(graph):
    """Range max C_j - min C_j over 0 <= j <= L (C_0 = 0 included)."""
    c = graph.ordinates
    return float(np.max(c) - np.min(c))


def ks_stat(graph):
    """Maximum of |C_j| over 1 <= j <= L."""
    if graph.length < 1:
        raise ValueError('empty graph')
    return float(np.max(np.abs(graph.ordinates[1:])))


def secant_slope(graph, j0, j1):
    """Slope (C_j1 - C_j0) / (A_j1 - A_j0) of the secant line."""
    if not (0 <= j0 < j1 <= graph.length):
        raise ValueError('invalid secant indices')
    if graph.diffs is not None:
        d = graph.diffs[j0:j1]
        t = graph.totals[j0:j1]
        return math.fsum((d * t).tolist()) / math.fsum(t.tolist())
    a, c = graph.abscissae, graph.ordinates
    return float((c[j1] - c[j0]) / (a[j1] - a[j0]))


@dataclass
class SummaryStats:
    """
    Scalar summaries of a cumulative graph.

    Ratios and P-values are None when sigma is zero or unavailable.  The
    optional nearest-neighbor ATEs apply to the two-sample mode only.
    """

    kuiper: float
    ks: float
    ate: float
    sigma: float = None
    kuiper_over_sigma: float = None
    ks_over_sigma: float = None
    ate_over_sigma: float = None
    pvalue_kuiper: float = None
    pvalue_ks: float = None
    ate_nearest: float = None
    ate_nearest_over_sigma: float = None
    ate_replicated: float = None
    ate_replicated_over_sigma: float = None
    counts: dict = field(default_factory=dict)

    def ratio(self, value):
        """value / sigma, or None when sigma is zero or unavailable."""
        if value is None or not self.sigma:
            return None
        return value / self.sigma

    def set_ate_nearest(self, value):
        self.ate_nearest = value
        self.ate_nearest_over_sigma = self.ratio(value)

    def set_ate_replicated(self, value):
        self.ate_replicated = value
        self.ate_replicated_over_sigma = self.ratio(value)

    def as_dict(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out['counts'] = dict(self.counts)
        return out


def summarize(graph, ate=None, counts=None):
    """
    Kuiper and Kolmogorov-Smirnov statistics, ATE, and asymptotic P-values.

    ate defaults to the terminal ordinate C_L.
    """
    kuiper = kuiper_stat(graph)
    ks = ks_stat(graph)
    if ate is None:
        ate = float(graph.ordinates[-1])
    stats = SummaryStats(kuiper=kuiper, ks=ks, ate=ate, sigma=graph.sigma,
                         counts=dict(counts or {}))
    if graph.sigma:
        stats.kuiper_over_sigma = kuiper / graph.sigma
        stats.ks_over_sigma = ks / graph.sigma
        stats.ate_over_sigma = ate / graph.sigma
        stats.pvalue_kuiper = significance.pvalue_kuiper(
            stats.kuiper_over_sigma).value
        stats.pvalue_ks = significance.pvalue_ks(stats.ks_over_sigma).value
    return stats
