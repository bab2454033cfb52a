"""
Cumulative differences between a subpopulation and the full population

Each distinct subpopulation score S_j gets a bin (B_{j-1}, B_j] whose interior
edges are the midpoints between consecutive distinct subpopulation scores.
The subpopulation's weighted mean response at S_j is compared against the
weighted mean response of the full population over that bin.
"""

import math
from dataclasses import dataclass

import numpy as np

from cumdiff.core import SubpopulationSelector, accumulate, group_sums, summarize


class SigmaModelMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MidpointBins:
    """Edges -inf = B_0 < B_1 < ... < B_n = +inf."""

    edges: np.ndarray

    @property
    def interior(self):
        return self.edges[1:-1]

    def __len__(self):
        return len(self.edges) - 1

    def assign(self, scores):
        """Zero-based bin index of each score, bins closed on the right."""
        return np.searchsorted(self.interior, scores, side='left')


def midpoint_bins(scores):
    s = np.unique(np.asarray(scores, dtype=float))
    if len(s) == 0:
        raise ValueError('need at least one subpopulation score')
    mid = (s[:-1] + s[1:]) / 2
    return MidpointBins(np.concatenate([[-np.inf], mid, [np.inf]]))


@dataclass(frozen=True, eq=False)
class SubFullAggregate:
    """
    Per distinct subpopulation score j: the subpopulation's mean response
    (r_means), the full population's mean over bin j (q_means), the
    subpopulation's total weight and sum of squared weights, and the number
    of full-population observations in the bin.
    """

    scores: np.ndarray
    r_means: np.ndarray
    q_means: np.ndarray
    weights: np.ndarray
    sq_weights: np.ndarray
    bin_counts: np.ndarray
    bins: MidpointBins


def _as_mask(dataset, selector):
    if isinstance(selector, SubpopulationSelector):
        return selector.mask(dataset)
    mask = np.asarray(selector, dtype=bool)
    if mask.shape != (len(dataset),):
        raise ValueError('mask differs in length from the dataset')
    return mask


def aggregate_subfull(dataset, selector):
    mask = _as_mask(dataset, selector)
    if not mask.any():
        raise ValueError('empty subpopulation')
    w = dataset.weights[mask]
    r = dataset.responses[mask]
    scores, (wsum, rsum, w2sum) = group_sums(
        dataset.scores[mask], w, r * w, w * w)
    bins = midpoint_bins(scores)
    # Every bin holds at least its own subpopulation members, and the sorted
    # dataset visits bins in order, so each bin is one contiguous run.
    idx = bins.assign(dataset.scores)
    starts = np.searchsorted(idx, np.arange(len(scores)))
    full_w = np.add.reduceat(dataset.weights, starts)
    full_rw = np.add.reduceat(dataset.responses * dataset.weights, starts)
    counts = np.diff(np.append(starts, len(idx)))
    return SubFullAggregate(scores, rsum / wsum, full_rw / full_w, wsum, w2sum,
                            counts, bins)


def analyze_subfull(dataset, selector, sigma_model='bernoulli'):
    """
    Compare a subpopulation with the full population it belongs to.

    Parameters
    ----------
    dataset : Dataset
        the full population
    selector : SubpopulationSelector or array_like of bool
        the subpopulation
    sigma_model : str or None
        'bernoulli' estimates the variance of the ATE as
        sum_j Qbar_j (1 - Qbar_j) sum_{k in j} W_k^2 / (sum W)^2 over the
        subpopulation's weights, which requires responses in [0, 1];
        None suppresses sigma (and hence ratios and P-values)

    Returns
    -------
    CumulativeGraph
    SummaryStats
        counts include min_bin_count, the fewest full-population
        observations in any bin (the variance estimate assumes many)
    """
    if sigma_model not in ('bernoulli', None):
        raise ValueError(f'unknown sigma model {sigma_model!r}')
    if sigma_model == 'bernoulli':
        r = dataset.responses
        if np.any((r < 0) | (r > 1)):
            raise SigmaModelMismatch(
                'sigma model mismatch: the Bernoulli estimate needs responses '
                'in [0, 1]')
    agg = aggregate_subfull(dataset, selector)
    graph = accumulate(agg.r_means - agg.q_means, agg.weights)
    if sigma_model == 'bernoulli':
        var = math.fsum(agg.q_means * (1 - agg.q_means) * agg.sq_weights)
        total = math.fsum(agg.weights.tolist())
        graph = graph.with_sigma(math.sqrt(max(var, 0.0)) / total)
    counts = {
        'm': len(dataset), 'l': dataset.num_distinct,
        'n0': int(_as_mask(dataset, selector).sum()), 'n': len(agg.scores),
        'min_bin_count': int(agg.bin_counts.min())}
    return graph, summarize(graph, counts=counts)
