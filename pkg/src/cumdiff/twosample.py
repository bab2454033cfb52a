"""
Cumulative differences between two subpopulations with disjoint scores

After perturbation makes every score unique, the observations sorted by score
split into maximal runs sharing a subpopulation label.  Each interior run is
compared with the average of its two neighboring runs (which belong to the
other subpopulation), giving a centered difference D and weight total T per
interior run; the cumulative graph accumulates these.

All differences are oriented as subpopulation 0 minus subpopulation 1.
"""

import math
from dataclasses import dataclass

import numpy as np

from cumdiff.core import accumulate, summarize
from cumdiff.ingest import PerturbPolicy, perturb_scores


def binary_labels(groups):
    """
    Map a column of two distinct group values to labels 0 and 1.

    Values are ordered numerically when they all parse as numbers and as
    strings otherwise; the smaller value becomes label 0.
    """
    groups = np.asarray(groups)
    values = np.unique(groups)
    if len(values) != 2:
        raise ValueError(
            f'two-sample mode needs exactly two groups, found {len(values)}')
    try:
        values = sorted(values, key=float)
    except (TypeError, ValueError):
        values = sorted(values, key=str)
    return (groups == values[1]).astype(np.int8), tuple(values)


def _check_labels(dataset, labels):
    if labels is None:
        if dataset.groups is None:
            raise ValueError('dataset has no group labels')
        labels, _ = binary_labels(dataset.groups)
    labels = np.asarray(labels)
    if labels.shape != (len(dataset),):
        raise ValueError('labels differ in length from the dataset')
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError('labels must be 0 or 1')
    if labels.all() or not labels.any():
        raise ValueError('empty subpopulation')
    return labels.astype(np.int8)


def _check_unique(scores):
    if np.any(np.diff(scores) <= 0):
        raise ValueError('scores must be unique; perturb them first')


@dataclass(frozen=True, eq=False)
class GroupSequence:
    """
    Maximal same-label runs of score-sorted observations.

    Run k covers observations starts[k]:stops[k].  Labels alternate starting
    from 0; swapped_labels records that the input labels were exchanged to
    make that so.
    """

    labels: np.ndarray
    starts: np.ndarray
    stops: np.ndarray
    mean_scores: np.ndarray
    mean_responses: np.ndarray
    weights: np.ndarray
    swapped_labels: bool

    def __len__(self):
        return len(self.labels)

    @property
    def n(self):
        return (len(self.labels) + 1) // 2

    def members(self, k):
        return np.arange(self.starts[k], self.stops[k])


def interleave_groups(dataset, labels=None):
    labels = _check_labels(dataset, labels)
    _check_unique(dataset.scores)
    swapped = bool(labels[0] == 1)
    if swapped:
        labels = 1 - labels
    starts = np.concatenate([[0], np.flatnonzero(labels[1:] != labels[:-1]) + 1])
    stops = np.append(starts[1:], len(labels))
    w = dataset.weights
    wsum = np.add.reduceat(w, starts)
    ssum = np.add.reduceat(dataset.scores * w, starts)
    rsum = np.add.reduceat(dataset.responses * w, starts)
    return GroupSequence(labels[starts], starts, stops, ssum / wsum,
                         rsum / wsum, wsum, swapped)


@dataclass(frozen=True, eq=False)
class CenteredDiffs:
    diffs: np.ndarray
    totals: np.ndarray

    def __len__(self):
        return len(self.diffs)


def centered_differences(seq):
    """
    Centered differences and weight totals of the interior groups.

    For interior group c with neighbors p and q,

        D = R_c - (R_p + R_q) / 2    when c has label 0
        D = (R_p + R_q) / 2 - R_c    when c has label 1
        T = W_c + (W_p + W_q) / 2

    with D negated throughout when the labels were swapped, so that D is
    always subpopulation 0 minus subpopulation 1 in the caller's labels.
    """
    if len(seq) < 3:
        raise ValueError('no interior groups')
    r = seq.mean_responses
    w = seq.weights
    center = r[1:-1]
    around = (r[:-2] + r[2:]) / 2
    d = np.where(seq.labels[1:-1] == 1, around - center, center - around)
    if seq.swapped_labels:
        d = -d
    t = w[1:-1] + (w[:-2] + w[2:]) / 2
    return CenteredDiffs(d, t)


def sigma_empirical(diffs):
    """
    Standard deviation of the terminal ATE estimated from the data.

    sigma^2 = sum_{j=1}^{M+1} (D_{j-1} - D_j)^2 (T_{j-1} + T_j)^2 / (4 (sum T)^2)

    with D_0 = D_{M+1} = T_0 = T_{M+1} = 0.  Differencing consecutive D
    cancels any linear trend; the 4 compensates for counting each weight
    twice.
    """
    d = np.concatenate([[0.0], diffs.diffs, [0.0]])
    t = np.concatenate([[0.0], diffs.totals, [0.0]])
    terms = (d[:-1] - d[1:])**2 * (t[:-1] + t[1:])**2
    return math.sqrt(math.fsum(terms.tolist()) / 4) / math.fsum(
        diffs.totals.tolist())


def ate_nearest(dataset, labels=None):
    """
    Weighted ATE from nearest neighbors in the other subpopulation.

    Each observation is compared with the other subpopulation's observations
    at the greatest smaller score and the least greater score, averaging the
    two response differences (or using the one that exists at either end).
    Weights are rescaled to total 1/2 within each subpopulation.

    Parameters
    ----------
    dataset : Dataset
        observations with unique scores
    labels : array_like of {0, 1}, optional
        subpopulation per observation; defaults to dataset.groups

    Returns
    -------
    float
        weighted mean of subpopulation 0 minus subpopulation 1 responses
    """
    labels = _check_labels(dataset, labels)
    _check_unique(dataset.scores)
    s, r, w = dataset.scores, dataset.responses, dataset.weights
    zero = labels == 0
    parts = []
    for mine, sign in ((zero, 1.0), (~zero, -1.0)):
        s_me, r_me, w_me = s[mine], r[mine], w[mine]
        s_other, r_other = s[~mine], r[~mine]
        idx = np.searchsorted(s_other, s_me)
        below = idx > 0
        above = idx < len(s_other)
        lo = r_other[np.maximum(idx - 1, 0)]
        hi = r_other[np.minimum(idx, len(s_other) - 1)]
        nbr = (np.where(below, lo, 0.0) + np.where(above, hi, 0.0)) / (
            below.astype(float) + above)
        parts.append(sign * (r_me - nbr) * w_me / (2 * math.fsum(w_me.tolist())))
    return math.fsum(np.concatenate(parts).tolist())


def ate_replicated(dataset, labels=None, seed=None, replicates=25,
                   epsilon='auto'):
    """
    Mean of ate_nearest over independently perturbed copies of the data.

    Replicate k perturbs with substream (1, k) of seed, so the result is
    deterministic given the seed.
    """
    if replicates < 1:
        raise ValueError('replicates must be at least 1')
    labels = _check_labels(dataset, labels)
    policy = PerturbPolicy(epsilon=epsilon) if seed is None else PerturbPolicy(
        seed=seed, epsilon=epsilon)
    base = dataset.with_groups(labels)
    values = []
    for k in range(replicates):
        ds = perturb_scores(base, policy, stream=(1, k))
        values.append(ate_nearest(ds, ds.groups))
    return math.fsum(values) / replicates


def analyze_two_sample(dataset, labels=None, policy=PerturbPolicy(),
                       replicates=None):
    """
    Cumulative graph and summary statistics comparing two subpopulations.

    Scores are perturbed (substream 0 of policy.seed), grouped into
    alternating runs, and turned into centered differences.  The ATE is the
    terminal ordinate; the nearest-neighbor ATE of the same perturbed data is
    reported alongside, and with replicates the average over that many
    further perturbations too.

    Returns
    -------
    CumulativeGraph
    SummaryStats
        counts hold m, l (distinct raw scores), n0, n1, G (groups), and n
    """
    labels = _check_labels(dataset, labels)
    ds = perturb_scores(dataset.with_groups(labels), policy)
    seq = interleave_groups(ds, ds.groups)
    diffs = centered_differences(seq)
    graph = accumulate(diffs.diffs, diffs.totals).with_sigma(
        sigma_empirical(diffs))
    counts = {'m': len(dataset), 'l': dataset.num_distinct,
              'n0': int(np.sum(labels == 0)), 'n1': int(np.sum(labels == 1)),
              'G': len(seq), 'n': seq.n}
    stats = summarize(graph, counts=counts)
    stats.set_ate_nearest(ate_nearest(ds, ds.groups))
    if replicates:
        stats.set_ate_replicated(ate_replicated(
            dataset, labels, policy.seed, replicates, policy.epsilon))
    return graph, stats
