"""
Acceptance suite.

Each criterion is one test that runs all of its checks, records a verdict
for the summary printed at the end of the run, and then fails if any check
failed.  Run with

    pytest tests/test_acceptance.py -v

Set CUMDIFF_BRFSS to the raw 2022 BRFSS file (CSV with codebook names, or
fixed width together with CUMDIFF_BRFSS_LAYOUT) to run criterion 6.
"""

import math
import os
import time
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import ACCEPTANCE
from cumdiff.brfss import CountWarning, brfss_prepare
from cumdiff.core import Dataset, accumulate, ks_stat, kuiper_stat, secant_slope
from cumdiff.ingest import ColumnMapping, PerturbPolicy, perturb_scores, read_csv
from cumdiff.paired import aggregate_by_score, analyze_paired
from cumdiff.reliability import (EQUAL_WIDTH, BinEdges, bins_equal_weight_ratio,
                                 bins_equal_width, diagram_points)
from cumdiff.significance import (pvalue_ks, pvalue_kuiper,
                                  simulate_null_extremes, tail_fraction)
from cumdiff.subfull import analyze_subfull, midpoint_bins
from cumdiff.twosample import (CenteredDiffs, analyze_two_sample, ate_nearest,
                               centered_differences, interleave_groups,
                               sigma_empirical)

from oracles import ks_tail_mp, kuiper_tail_mp

PROPERTY_RUNS = settings(max_examples=1000, deadline=None,
                         suppress_health_check=list(HealthCheck))


class Checks:
    """Collects named sub-checks so one failure does not hide the others."""

    def __init__(self):
        self.failed = []
        self.count = 0

    def __call__(self, name, ok):
        self.count += 1
        if not ok:
            self.failed.append(name)

    def run(self, name, fn):
        try:
            fn()
        except Exception as e:
            first = (str(e).splitlines() or [''])[0]
            self(f'{name}: {type(e).__name__}: {first}', False)
        else:
            self(name, True)

    def verdict(self, number, title, extra=''):
        passed = not self.failed
        detail = f'{self.count - len(self.failed)}/{self.count} checks'
        if self.failed:
            detail += '; failed: ' + ', '.join(self.failed)
        if extra:
            detail += '; ' + extra
        ACCEPTANCE[number] = (title, passed, detail)
        print(f'criterion {number} {"PASS" if passed else "FAIL"}: {title} '
              f'({detail})')
        assert passed, detail


# 1. P-values against reference values

KUIPER_REFERENCE = [('2.456', '0.05622'), ('3.052', '0.009106'),
                   ('4.083', '0.0001781'), ('4.635', '0.000014'),
                   ('4.713', '0.0000097'), ('5.214', '0.0000007')]
KS_REFERENCE = [('1.707', '0.1755'), ('2.015', '0.08773'),
               ('4.078', '0.0000908'), ('2.607', '0.01827'),
               ('3.286', '0.002034'), ('3.066', '0.004335')]


def within_reference_tolerance(got, want):
    """±2 units in the 4th significant digit, or ±30% below 1e-5."""
    if want < 1e-5:
        return abs(got - want) <= 0.3 * want
    unit = 10.0 ** (math.floor(math.log10(want)) - 3)
    return abs(got - want) <= 2 * unit * (1 + 1e-9)


def test_criterion_1_reference_pvalues():
    checks = Checks()
    worst = []
    for fn, table in ((pvalue_kuiper, KUIPER_REFERENCE),
                      (pvalue_ks, KS_REFERENCE)):
        for x, p in table:
            got = fn(float(x)).value
            checks(f'{fn.__name__}({x})={got:.4g} vs {p}',
                   within_reference_tolerance(got, float(p)))
            worst.append(abs(got / float(p) - 1))
    checks.verdict(1, 'P-values reproduce reference values',
                   f'largest relative gap {max(worst):.2%}')


def printed_interval(text):
    """Values that print as text: half a unit of the last digit either way."""
    decimals = len(text.split('.')[1]) if '.' in text else 0
    half = 0.5 * 10.0 ** -decimals
    return float(text) - half, float(text) + half


@pytest.mark.parametrize('fn, oracle, table', [
    (pvalue_kuiper, kuiper_tail_mp, KUIPER_REFERENCE),
    (pvalue_ks, ks_tail_mp, KS_REFERENCE)])
def test_reference_pvalues_consistent_with_printed_precision(fn, oracle, table):
    # the statistic itself was printed to 3 decimals, so compare intervals:
    # P over the statistic's rounding interval must meet the P-value's
    for x, p in table:
        x_lo, x_hi = printed_interval(x)
        p_lo, p_hi = printed_interval(p)
        assert fn(x_hi).value <= p_hi and fn(x_lo).value >= p_lo, (x, p)
        got = fn(float(x)).value
        assert got == pytest.approx(oracle(float(x)), rel=1e-13)


# 2. Monte Carlo agreement

MC_TRIALS = 10**6
MC_WALK = 1000
MC_POINTS = (1.0, 1.7, 2.5, 3.0)


@pytest.mark.slow
def test_criterion_2_monte_carlo():
    start = time.perf_counter()
    hi, lo = simulate_null_extremes(MC_WALK, MC_TRIALS, seed=20240601)
    samples = {'range': hi - lo, 'maxabs': np.maximum(hi, -lo)}
    del hi, lo
    checks = Checks()
    gaps = []
    for kind, fn in (('range', pvalue_kuiper), ('maxabs', pvalue_ks)):
        for x in MC_POINTS:
            mc = tail_fraction(samples[kind], x)
            z = abs(mc.estimate - fn(x).value) / mc.stderr
            gaps.append(z)
            checks(f'{kind} at {x}: {z:.2f} SE', z <= 3)
    checks.verdict(2, 'Monte Carlo agrees with both series within 3 SE',
                   f'largest gap {max(gaps):.2f} SE, '
                   f'{time.perf_counter() - start:.0f} s')


# 3. Worked examples

def _eq(a, b):
    assert np.asarray(a).tolist() == list(b), (np.asarray(a).tolist(), b)


def _close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def ex_accumulate():
    g = accumulate([1, -1], [1, 1])
    _eq(g.abscissae, [0, 0.5, 1])
    _eq(g.ordinates, [0, 0.5, 0])
    g = accumulate([-0.5], [3])
    _eq(g.abscissae, [0, 1])
    _eq(g.ordinates, [0, -0.5])


def ex_statistics():
    from cumdiff.core import CumulativeGraph
    g = CumulativeGraph([0, 0.25, 0.5, 1], [0, 0.1, -0.2, 0.05])
    _close(kuiper_stat(g), 0.3, 1e-15)
    assert ks_stat(g) == 0.2
    assert kuiper_stat(CumulativeGraph([0, 0.5, 1], [0, 0.5, 0])) == 0.5
    assert ks_stat(CumulativeGraph([0, 1], [0, -0.5])) == 0.5


def ex_secant():
    g = accumulate([1, -1], [1, 1])
    assert secant_slope(g, 0, 1) == 1
    assert secant_slope(g, 0, 2) == 0


def ex_csv(tmp):
    path = os.path.join(tmp, 'd.csv')
    with open(path, 'w') as f:
        f.write('score,response,weight\n1,1,1\n1,0,1\n2,1,2\n')
    ds = read_csv(path, ColumnMapping('score', 'response', 'weight'))
    assert (len(ds), ds.num_distinct) == (3, 2)
    _eq(ds.multiplicities, [2, 1])


def ex_fixed_width(tmp):
    from cumdiff.ingest import DecodeRule, FieldSpec, FixedWidthLayout
    from cumdiff.ingest import read_fixed_width
    layout = FixedWidthLayout({
        'score': FieldSpec(1, 2),
        'response': FieldSpec(3, 1, DecodeRule(codes={'1': 1.0, '2': 0.0},
                                               default=None)),
        'weight': FieldSpec(4, 3)})
    path = os.path.join(tmp, 'd.txt')
    with open(path, 'w') as f:
        f.write('2310.5\n')
    ds = read_fixed_width(path, layout)
    assert (ds.scores[0], ds.responses[0], ds.weights[0]) == (23, 1, 0.5)


def ex_paired():
    agg = aggregate_by_score(Dataset([1, 1, 2], [1, 0, 1], [1, 1, 2],
                                     responses2=[0, 1, 1]))
    _eq(agg.r_means, [0.5, 1])
    _eq(agg.q_means, [0.5, 1])
    _eq(agg.weights, [2, 2])
    g, s = analyze_paired(Dataset([1, 2], [1, 0], [1, 3], responses2=[0, 1]))
    _eq(g.abscissae, [0, 0.25, 1])
    _eq(g.ordinates, [0, 0.25, -0.5])
    assert (s.kuiper, s.ks, s.ate) == (0.75, 0.5, -0.5)
    _close(s.sigma, 0.7906, 5e-5)
    _close(s.sigma, math.sqrt(10) / 4, 1e-15)


def ex_midpoints():
    _eq(midpoint_bins([1, 3, 7]).edges, [-np.inf, 2, 5, np.inf])
    _eq(midpoint_bins([0, 1]).edges, [-np.inf, 0.5, np.inf])


def ex_subfull():
    g, s = analyze_subfull(Dataset([1, 2, 3], [1, 0, 1], [1, 1, 1]),
                           [True, False, True])
    _eq(g.abscissae, [0, 0.5, 1])
    _eq(g.ordinates, [0, 0.25, 0.25])
    assert s.kuiper == s.ks == s.ate == 0.25
    assert s.sigma == 0.25


def _two(s0, s1, r0, r1):
    return Dataset(s0 + s1, r0 + r1, [1] * (len(s0) + len(s1)),
                   groups=[0] * len(s0) + [1] * len(s1))


def ex_interleave():
    seq = interleave_groups(_two([1, 2, 5], [3, 4, 6], [0] * 3, [0] * 3))
    _eq(seq.labels, [0, 1, 0, 1])
    assert (len(seq), seq.n) == (4, 2)
    seq = interleave_groups(_two([2], [1, 3], [0], [0, 0]))
    assert seq.swapped_labels and len(seq) == 3


def ex_two_sample():
    ds = _two([1, 4], [2, 3], [1, 0], [1, 1])
    d = centered_differences(interleave_groups(ds))
    _eq(d.diffs, [-0.5])
    _eq(d.totals, [3])
    _close(sigma_empirical(d), 0.35355, 5e-6)
    c = 0.7
    _close(sigma_empirical(CenteredDiffs(np.array([c, c]), np.ones(2))),
           c / math.sqrt(8), 1e-16)
    g, s = analyze_two_sample(ds)
    _eq(g.abscissae, [0, 1])
    _eq(g.ordinates, [0, -0.5])
    assert s.kuiper == s.ks == 0.5 and s.ate == -0.5
    _close(s.sigma, 0.35355, 5e-6)
    assert ate_nearest(ds) == -0.5


def ex_equal_width():
    def unit(s):
        return Dataset(s, [0] * len(s), [1] * len(s))
    _eq(bins_equal_width(unit([0, 10]), 5).interior, [2, 4, 6, 8])
    _eq(bins_equal_width(unit([1, 3]), 2).interior, [2])
    _eq(bins_equal_width(unit([1, 3]), 1).edges, [-np.inf, np.inf])


def ex_equal_ratio_unit():
    ds = Dataset(np.arange(100), np.zeros(100), np.ones(100))
    e = bins_equal_weight_ratio(ds, 10)
    _eq(np.bincount(e.assign(ds.scores), minlength=10), [10] * 10)
    _eq(bins_equal_weight_ratio(ds, 1).edges, [-np.inf, np.inf])


def ex_equal_ratio_weighted():
    # stated output {1,1,1} | {4}
    ds = Dataset([1, 2, 3, 4], [0] * 4, [1, 1, 1, 4])
    e = bins_equal_weight_ratio(ds, 2)
    _eq(e.interior, [3.5])


def ex_diagram_points():
    ds = Dataset([1, 2, 3, 4], [1, 0, 0, 1], [1, 1, 1, 1])
    m = diagram_points(ds, BinEdges(2, [-np.inf, 2.5, np.inf], EQUAL_WIDTH))
    _eq(m.points().ravel(), [1.5, 0.5, 3.5, 0.5])


def ex_plot_and_svg(tmp):
    import xml.etree.ElementTree as ET
    from cumdiff.render import emit_plot_data, emit_svg
    path = os.path.join(tmp, 'g.csv')
    emit_plot_data(accumulate([1, -1], [1, 1]), path)
    with open(path) as f:
        assert f.read().splitlines()[1:] == ['0,0', '0.5,0.5', '1,0']
    svg = os.path.join(tmp, 'g.svg')
    emit_svg(accumulate([1, -1], [1, 1]).with_sigma(0.5), None, svg)
    tri = ET.parse(svg).getroot().find(
        './/{http://www.w3.org/2000/svg}polygon')
    assert (float(tri.get('data-ymin')), float(tri.get('data-ymax'))) == \
        (-1.0, 1.0)


def test_criterion_3_worked_examples(tmp_path):
    tmp = str(tmp_path)
    examples = {
        'accumulate': ex_accumulate,
        'kuiper/ks': ex_statistics,
        'secant': ex_secant,
        'csv counts': lambda: ex_csv(tmp),
        'fixed-width record': lambda: ex_fixed_width(tmp),
        'paired': ex_paired,
        'midpoint edges': ex_midpoints,
        'subfull sigma 0.25': ex_subfull,
        'interleaving': ex_interleave,
        'two-sample G=3': ex_two_sample,
        'equal-width bins': ex_equal_width,
        'equal-ratio unit weights': ex_equal_ratio_unit,
        'equal-ratio weights 1,1,1,4': ex_equal_ratio_weighted,
        'bin means': ex_diagram_points,
        'plot data and triangle': lambda: ex_plot_and_svg(tmp),
    }
    checks = Checks()
    start = time.perf_counter()
    for name, fn in examples.items():
        checks.run(name, fn)
    checks.verdict(3, 'worked examples',
                   f'{time.perf_counter() - start:.2f} s')


# 4. Property suites, each over 1000 random instances

@st.composite
def increments(draw):
    n = draw(st.integers(1, 40))
    d = draw(st.lists(st.floats(-1e3, 1e3), min_size=n, max_size=n))
    t = draw(st.lists(st.floats(1e-3, 1e3), min_size=n, max_size=n))
    return d, t


@st.composite
def paired_sets(draw):
    n = draw(st.integers(1, 40))
    s = draw(st.lists(st.integers(0, 15), min_size=n, max_size=n))
    r = draw(st.lists(st.sampled_from([0.0, 1.0]), min_size=n, max_size=n))
    q = draw(st.lists(st.sampled_from([0.0, 1.0]), min_size=n, max_size=n))
    w = draw(st.lists(st.floats(0.01, 100), min_size=n, max_size=n))
    return s, r, q, w


@st.composite
def two_sample_sets(draw):
    n = draw(st.integers(3, 40))
    s = draw(st.lists(st.integers(0, 10**6), min_size=n, max_size=n,
                      unique=True))
    r = draw(st.lists(st.sampled_from([0.0, 1.0, 2.5]), min_size=n, max_size=n))
    w = draw(st.lists(st.floats(0.1, 10), min_size=n, max_size=n))
    lab = draw(st.lists(st.sampled_from([0, 1]), min_size=n, max_size=n))
    lab[0], lab[1] = 0, 1
    return s, r, w, lab


@PROPERTY_RUNS
@given(increments(), st.data())
def prop_secant(inc, data):
    d, t = inc
    g = accumulate(d, t)
    j0 = data.draw(st.integers(0, len(d) - 1))
    j1 = data.draw(st.integers(j0 + 1, len(d)))
    want = math.fsum(x * y for x, y in zip(d[j0:j1], t[j0:j1])) / \
        math.fsum(t[j0:j1])
    scale = max(abs(x) for x in d[j0:j1])
    assert abs(secant_slope(g, j0, j1) - want) <= 8 * np.spacing(scale)


@PROPERTY_RUNS
@given(paired_sets(), st.floats(1e-3, 1e3))
def prop_weight_scale(data, c):
    s, r, q, w = data
    g1, s1 = analyze_paired(Dataset(s, r, w, responses2=q))
    g2, s2 = analyze_paired(Dataset(s, r, np.array(w) * c, responses2=q))
    # C_j and sigma come from weighted means of responses in [0, 1], so
    # rounding is judged against that scale, not against the (possibly
    # cancelled) results
    tol = 8 * np.spacing(1.0)
    assert np.all(np.abs(g1.ordinates - g2.ordinates) <= tol)
    assert np.all(np.abs(g1.abscissae - g2.abscissae) <= tol)
    assert abs(s1.sigma - s2.sigma) <= tol


@PROPERTY_RUNS
@given(two_sample_sets())
def prop_antisymmetry(data):
    s, r, w, lab = data
    ds = Dataset(s, r, w, groups=lab)
    labels = ds.groups.astype(int)
    policy = PerturbPolicy(seed=5)
    try:
        g0, s0 = analyze_two_sample(ds, labels, policy)
    except ValueError as e:
        assert 'no interior groups' in str(e)
        return
    g1, s1 = analyze_two_sample(ds, 1 - labels, policy)
    assert np.array_equal(g0.ordinates, -g1.ordinates)
    assert np.array_equal(centered_differences(interleave_groups(ds, labels))
                          .totals,
                          centered_differences(interleave_groups(ds, 1 - labels))
                          .totals)
    assert s0.ate == -s1.ate and s0.sigma == s1.sigma


@PROPERTY_RUNS
@given(increments())
def prop_statistic_order(inc):
    g = accumulate(*inc)
    assert kuiper_stat(g) >= ks_stat(g) >= abs(g.ordinates[-1])


@PROPERTY_RUNS
@given(paired_sets(), st.integers(1, 10))
def prop_bin_mass(data, p):
    s, r, _, w = data
    ds = Dataset(s, r, w)
    p = min(p, ds.num_distinct)
    m = diagram_points(ds, bins_equal_weight_ratio(ds, p))
    keep = ~m.empty
    total = math.fsum((ds.weights * ds.responses).tolist())
    binned = math.fsum((m.weights[keep] * m.responses[keep]).tolist())
    assert abs(binned - total) <= 1e-12 * max(1.0, math.fsum(ds.weights))
    assert abs(math.fsum(m.weights.tolist()) - math.fsum(ds.weights)) <= \
        1e-13 * math.fsum(ds.weights)


@PROPERTY_RUNS
@given(st.lists(st.integers(0, 20), min_size=1, max_size=60),
       st.integers(0, 2**64 - 1))
def prop_perturbation(scores, seed):
    ds = Dataset(scores, [0] * len(scores), [1] * len(scores))
    a = perturb_scores(ds, PerturbPolicy(seed=seed))
    b = perturb_scores(ds, PerturbPolicy(seed=seed))
    assert a.scores.tobytes() == b.scores.tobytes()
    assert len(np.unique(a.scores)) == len(scores)
    distinct = np.unique(scores)
    eps = np.min(np.diff(distinct)) / 4 if len(distinct) > 1 else \
        max(1.0, abs(float(distinct[0]))) * 1e-6
    assert np.all(np.abs(np.sort(a.scores) - np.sort(scores)) <= eps)


PROPERTIES = {
    'secant identity': prop_secant,
    'weight-scale invariance': prop_weight_scale,
    'label antisymmetry': prop_antisymmetry,
    'Kuiper >= KS >= |C_L|': prop_statistic_order,
    'reliability mass conservation': prop_bin_mass,
    'perturbation determinism and uniqueness': prop_perturbation,
}


def test_criterion_4_properties():
    checks = Checks()
    start = time.perf_counter()
    for name, prop in PROPERTIES.items():
        checks.run(name, prop)
    checks.verdict(4, 'property suites, 1000 instances each',
                   f'{time.perf_counter() - start:.0f} s')


# 5. Null calibration

NULL_TRIALS = 1000
NULL_SIZE = 2000


def null_rejections(trials, size, seed):
    rng = np.random.default_rng(seed)
    pvals = np.empty(trials)
    z = np.empty(trials)
    for k in range(trials):
        scores = rng.random(2 * size)
        responses = (rng.random(2 * size) < 0.3).astype(float)
        groups = np.repeat([0, 1], size)
        ds = Dataset(scores, responses, np.ones(2 * size), groups=groups)
        _, stats = analyze_two_sample(ds, policy=PerturbPolicy(seed=k))
        pvals[k] = stats.pvalue_kuiper
        z[k] = stats.ate_over_sigma
    return pvals, z


@pytest.mark.slow
def test_criterion_5_null_calibration():
    start = time.perf_counter()
    pvals, z = null_rejections(NULL_TRIALS, NULL_SIZE, seed=314159)
    frac = float(np.mean(pvals < 0.05))
    checks = Checks()
    checks(f'rejection fraction {frac:.3f} outside [0.03, 0.08]',
           0.03 <= frac <= 0.08)
    checks.verdict(5, 'null calibration of the Kuiper P-value',
                   f'rejection fraction {frac:.3f}, sd of ATE/sigma '
                   f'{np.std(z):.2f}, {time.perf_counter() - start:.0f} s')


# 6. BRFSS reproduction (optional)

BRFSS_RAW = os.environ.get('CUMDIFF_BRFSS')
BRFSS_LAYOUT = os.environ.get('CUMDIFF_BRFSS_LAYOUT')


def _figure(path, response2=False, group=False):
    mapping = ColumnMapping(
        'score', 'response', 'weight',
        second_response_column='response2' if response2 else None,
        group_column='group' if group else None)
    return read_csv(path, mapping)


@pytest.mark.slow
@pytest.mark.skipif(not BRFSS_RAW, reason='set CUMDIFF_BRFSS to the raw file')
def test_criterion_6_brfss(tmp_path):
    checks = Checks()
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', CountWarning)
        prep = brfss_prepare(BRFSS_RAW, tmp_path, layout=BRFSS_LAYOUT)
    checks(f'rows {prep.rows}', prep.rows == 445132)
    checks(f'BMI rows {prep.bmi_rows}', prep.bmi_rows == 396326)

    def printed(value, text):
        decimals = len(text.split('.')[1])
        return f'{value:.{decimals}f}' == text

    for name, want in (('angina_heart_attack', ('2.456', '1.707', '0.7254')),
                       ('stroke_kidney', ('3.052', '2.015', '-0.9889'))):
        ds = _figure(prep.paths[name], response2=True)
        if name == 'angina_heart_attack':
            checks(f'distinct BMIs {ds.num_distinct}', ds.num_distinct == 3985)
        _, s = analyze_paired(ds)
        got = (s.kuiper_over_sigma, s.ks_over_sigma, s.ate_over_sigma)
        for label, g, w in zip(('Kuiper', 'KS', 'ATE'), got, want):
            checks(f'{name} {label}/sigma {g:.5g} vs {w}', printed(g, w))

    ds = _figure(prep.paths['heart_attack_no_doctor'], group=True)
    mask = ds.groups.astype(float) == 1
    _, s = analyze_subfull(ds, mask)
    checks(f'n0 {s.counts["n0"]}', s.counts['n0'] == 23035)
    for label, g, w in zip(('Kuiper', 'KS', 'ATE'),
                           (s.kuiper_over_sigma, s.ks_over_sigma,
                            s.ate_over_sigma), ('4.083', '4.078', '4.061')):
        checks(f'subpop {label}/sigma {g:.5g} vs {w}', printed(g, w))

    ranges = {'hiv_kidney': ((4.4, 5.5), (-3.3, -2.5), (79000, 80000)),
              'heights': ((18, 21), (31, 35), (45000, 46000))}
    for name, (kr, ar, nr) in ranges.items():
        ds = _figure(prep.paths[name], group=True)
        labels = ds.groups.astype(float).astype(int)
        for seed in (543216789, 54321, 6789):
            _, s = analyze_two_sample(ds, labels, PerturbPolicy(seed=seed),
                                      replicates=25)
            rep = s.ate_replicated_over_sigma
            checks(f'{name} seed {seed} Kuiper/sigma {s.kuiper_over_sigma:.4g}',
                   kr[0] <= s.kuiper_over_sigma <= kr[1])
            checks(f'{name} seed {seed} averaged ATE/sigma {rep:.4g}',
                   ar[0] <= rep <= ar[1])
            checks(f'{name} seed {seed} n {s.counts["n"]}',
                   nr[0] <= s.counts['n'] <= nr[1])
    checks.verdict(6, 'BRFSS reproduction')
