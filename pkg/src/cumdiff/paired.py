"""
Cumulative differences between paired samples

Every observation carries two responses, R and Q, measured at the same score
with the same weight.  Responses are averaged within each distinct score,
and the graph accumulates the per-score differences of the averages.
Duplicate scores aggregate, so no perturbation is needed.
"""

import math
from dataclasses import dataclass

import numpy as np

from cumdiff.core import accumulate, group_sums, summarize


@dataclass(frozen=True, eq=False)
class PairedAggregate:
    """Per distinct score: weighted means of R and Q and the total weight."""

    scores: np.ndarray
    r_means: np.ndarray
    q_means: np.ndarray
    weights: np.ndarray


def aggregate_by_score(dataset):
    if len(dataset) == 0:
        raise ValueError('empty dataset')
    if not dataset.is_paired:
        raise ValueError('dataset has no second response')
    w = dataset.weights
    scores, (wsum, rsum, qsum) = group_sums(
        dataset.scores, w, dataset.responses * w, dataset.responses2 * w)
    return PairedAggregate(scores, rsum / wsum, qsum / wsum, wsum)


def analyze_paired(dataset):
    """
    Cumulative graph and summary statistics for paired responses.

    The graph accumulates D_j = Rbar_j - Qbar_j with totals Wbar_j over the
    distinct scores; the ATE is the terminal ordinate, and

        sigma^2 = sum_j (Rbar_j - Qbar_j)^2 Wbar_j^2 / (sum_j Wbar_j)^2

    estimates the variance of the ATE under the null hypothesis.

    Returns
    -------
    CumulativeGraph
    SummaryStats
    """
    agg = aggregate_by_score(dataset)
    d = agg.r_means - agg.q_means
    graph = accumulate(d, agg.weights)
    total = math.fsum(agg.weights.tolist())
    sigma = math.sqrt(math.fsum((d * agg.weights)**2)) / total
    graph = graph.with_sigma(sigma)
    counts = {'m': len(dataset), 'l': len(agg.scores), 'n': len(agg.scores)}
    return graph, summarize(graph, counts=counts)
