"""
Reliability diagrams

The classical alternative to cumulative plots: bin the scores, then plot the
weighted mean response in each bin against the weighted mean score.  Bins
are half-open intervals (B_{q-1}, B_q] with B_0 = -inf and B_p = +inf.
"""

from dataclasses import dataclass

import numpy as np

from cumdiff.core import group_sums

EQUAL_WIDTH = 'equal-width'
EQUAL_RATIO = 'equal-weight-ratio'

TITLES = {
    EQUAL_WIDTH: 'reliability diagram',
    EQUAL_RATIO: r'reliability diagram ($\|W\|_2 / \|W\|_1$ is similar for '
                 r'every bin)',
}

# Slack when comparing a bin's weight ratio with its target, so that ratios
# equal in exact arithmetic count as reaching the target.
_RATIO_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class BinEdges:
    p: int
    edges: np.ndarray
    policy: str

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        if self.p < 1 or len(e) != self.p + 1:
            raise ValueError('need p >= 1 and p + 1 edges')
        if e[0] != -np.inf or e[-1] != np.inf:
            raise ValueError('outer edges must be infinite')
        if np.any(np.diff(e) <= 0):
            raise ValueError('edges must increase strictly')
        object.__setattr__(self, 'edges', e)

    @property
    def interior(self):
        return self.edges[1:-1]

    def assign(self, scores):
        return np.searchsorted(self.interior, scores, side='left')


def _edges(interior):
    return np.concatenate([[-np.inf], interior, [np.inf]])


def bins_equal_width(dataset, p):
    """p bins whose finite edges are equally spaced from min to max score."""
    if p < 1:
        raise ValueError('p must be at least 1')
    if len(dataset) == 0:
        raise ValueError('empty dataset')
    lo, hi = float(dataset.scores[0]), float(dataset.scores[-1])
    if p > 1 and lo == hi:
        raise ValueError('degenerate score range')
    interior = lo + (hi - lo) * np.arange(1, p) / p
    return BinEdges(p, _edges(interior), EQUAL_WIDTH)


def bins_equal_weight_ratio(dataset, p):
    """
    p bins with similar values of sum(w^2) / (sum w)^2.

    A greedy scan over the distinct scores in increasing order closes the
    current bin as soon as its ratio is at most p times the ratio for the
    whole dataset.  A bin is also closed when exactly enough distinct scores
    remain to give each later bin one, so there are always p nonempty bins.
    The last bin takes whatever is left.  Edges sit midway between the
    neighboring distinct scores.  With unit weights each bin holds about
    m / p observations.

    Parameters
    ----------
    dataset : Dataset
    p : int
        number of bins

    Returns
    -------
    BinEdges
    """
    if p < 1:
        raise ValueError('p must be at least 1')
    if len(dataset) == 0:
        raise ValueError('empty dataset')
    w = dataset.weights
    keys, (w1, w2) = group_sums(dataset.scores, w, w * w)
    if p > len(keys):
        raise ValueError('too many bins')
    target = p * float(np.sum(w2)) / float(np.sum(w1))**2
    cuts = []
    s1 = s2 = 0.0
    for j in range(len(keys)):
        if len(cuts) == p - 1:
            break
        s1 += w1[j]
        s2 += w2[j]
        forced = len(keys) - 1 - j == p - 1 - len(cuts)
        if forced or s2 / s1**2 <= target * (1 + _RATIO_SLACK):
            cuts.append(j)
            s1 = s2 = 0.0
    cuts = np.array(cuts, dtype=int)
    interior = (keys[cuts] + keys[cuts + 1]) / 2
    return BinEdges(p, _edges(interior), EQUAL_RATIO)


def make_bins(dataset, p, policy):
    if policy in (EQUAL_WIDTH, 'equal-width'):
        return bins_equal_width(dataset, p)
    if policy in (EQUAL_RATIO, 'equal-ratio'):
        return bins_equal_weight_ratio(dataset, p)
    raise ValueError(f'unknown bin policy {policy!r}')


@dataclass(frozen=True, eq=False)
class BinMeans:
    """Per-bin weighted means; entries of empty bins are NaN and flagged."""

    scores: np.ndarray
    responses: np.ndarray
    weights: np.ndarray
    empty: np.ndarray
    edges: BinEdges

    def points(self):
        keep = ~self.empty
        return np.column_stack([self.scores[keep], self.responses[keep]])


def diagram_points(dataset, edges, mask=None):
    """
    Weighted mean score and response of the observations in each bin.

    Parameters
    ----------
    dataset : Dataset
    edges : BinEdges
    mask : array_like of bool, optional
        restricts the observations to a subpopulation

    Returns
    -------
    BinMeans
    """
    s, r, w = dataset.scores, dataset.responses, dataset.weights
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        s, r, w = s[mask], r[mask], w[mask]
    idx = edges.assign(s)
    wsum = np.bincount(idx, weights=w, minlength=edges.p)
    ssum = np.bincount(idx, weights=s * w, minlength=edges.p)
    rsum = np.bincount(idx, weights=r * w, minlength=edges.p)
    empty = wsum == 0
    with np.errstate(invalid='ignore', divide='ignore'):
        return BinMeans(np.where(empty, np.nan, ssum / wsum),
                        np.where(empty, np.nan, rsum / wsum), wsum, empty,
                        edges)


@dataclass(frozen=True, eq=False)
class DiagramSeries:
    """
    Reliability diagram: black for the subpopulation of interest and gray
    for the population it is compared against.
    """

    black: BinMeans
    gray: BinMeans
    title: str


def reliability_diagram(dataset, mask, p, policy=EQUAL_WIDTH,
                        comparison='full', share_bins=False):
    """
    Reliability diagram of a subpopulation against a comparison population.

    Parameters
    ----------
    dataset : Dataset
    mask : array_like of bool
        the subpopulation (black)
    p : int
        number of bins
    policy : str
        'equal-width' or 'equal-weight-ratio' (alias 'equal-ratio')
    comparison : str
        'full' compares with the whole dataset, 'complement' with the
        observations outside the subpopulation
    share_bins : bool
        use the subpopulation's bins for the comparison too, instead of
        binning the comparison population separately

    Returns
    -------
    DiagramSeries
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError('empty subpopulation')
    if comparison == 'full':
        other = np.ones_like(mask)
    elif comparison == 'complement':
        other = ~mask
        if not other.any():
            raise ValueError('empty comparison population')
    else:
        raise ValueError(f'unknown comparison {comparison!r}')
    edges = make_bins(dataset.subset(mask), p, policy)
    gray_edges = edges if share_bins else make_bins(
        dataset.subset(other), p, policy)
    return DiagramSeries(diagram_points(dataset, edges, mask),
                         diagram_points(dataset, gray_edges, other),
                         TITLES[edges.policy])
