"""
Command-line interface

    cumdiff paired      --input d.csv --score-col s --response-col r --response2-col q
    cumdiff subpop      --input d.csv ... --subpop-filter col=value
    cumdiff two-sample  --input d.csv ... --group-col g [--seed N] [--replicates K]
    cumdiff reliability --input d.csv ... (--subpop-filter col=value | --group-col g)
    cumdiff pvalue      --kind kuiper|ks --x X
    cumdiff prep-brfss  --input raw --out-dir dir [--variable-map m.toml] [--layout l.toml]

Exit status is 0 on success, 1 for bad data, and 2 for bad usage or
configuration.
"""

import argparse
import sys

from cumdiff import paired, reliability, render, significance, subfull, twosample
from cumdiff.errors import ConfigError, DataError
from cumdiff.ingest import (ColumnMapping, FixedWidthLayout, PerturbPolicy,
                            read_csv, read_fixed_width, resolve_epsilon)
from cumdiff.rng import DEFAULT_SEED


class UsageError(Exception):
    pass


def _filter(text):
    col, sep, value = text.partition('=')
    if not sep or not col.strip():
        raise argparse.ArgumentTypeError('expected COLUMN=VALUE')
    return col.strip(), value.strip()


def _epsilon(text):
    if text == 'auto':
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError('expected a positive number or auto')
    if not value > 0:
        raise argparse.ArgumentTypeError('epsilon must be positive')
    return value


def _seed(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError('seed must fit in 64 unsigned bits')
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError('must be at least 1')
    return value


def _data_args(p, response2=False, group=False, subpop=False):
    p.add_argument('--input', required=True, help='CSV or fixed-width file')
    p.add_argument('--layout', help='fixed-width layout (TOML); input is CSV '
                   'without it')
    p.add_argument('--score-col', default='score')
    p.add_argument('--response-col', default='response')
    p.add_argument('--weight-col', help='omit for unit weights')
    if response2:
        p.add_argument('--response2-col', required=True)
    if group:
        p.add_argument('--group-col', required=group == 'required')
    if subpop:
        p.add_argument('--subpop-filter', type=_filter,
                       required=subpop == 'required', metavar='COL=VALUE')


def _output_args(p, plot=True):
    p.add_argument('--out-json', help='write the analysis report here')
    if plot:
        p.add_argument('--out-plot', help='write (abscissa, ordinate) CSV here')
    p.add_argument('--out-svg', help='write an SVG plot here')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='cumdiff',
        description='Cumulative differences between subpopulations.')
    sub = parser.add_subparsers(dest='command', required=True,
                                metavar='COMMAND')

    p = sub.add_parser('paired', help='two responses per observation')
    _data_args(p, response2=True)
    p.add_argument('--sigma-model', choices=['paired'], default='paired')
    _output_args(p)

    p = sub.add_parser('subpop', help='subpopulation versus full population')
    _data_args(p, subpop='required')
    p.add_argument('--sigma-model', choices=['bernoulli', 'none'],
                   default='bernoulli',
                   help='none skips sigma for responses outside [0, 1]')
    _output_args(p)

    p = sub.add_parser('two-sample', help='two disjoint subpopulations')
    _data_args(p, group='required')
    p.add_argument('--sigma-model', choices=['empirical'], default='empirical')
    p.add_argument('--seed', type=_seed, default=DEFAULT_SEED)
    p.add_argument('--epsilon', type=_epsilon, default='auto',
                   help='perturbation half-width (default: a quarter of the '
                   'smallest gap between distinct scores)')
    p.add_argument('--replicates', type=int, default=25,
                   help='perturbations to average the nearest-neighbor ATE '
                   'over; 0 skips (default 25)')
    _output_args(p)

    p = sub.add_parser('reliability', help='reliability diagram')
    _data_args(p, group=True, subpop=True)
    p.add_argument('--bins', type=_positive, default=10)
    p.add_argument('--bin-policy', choices=['equal-width', 'equal-ratio'],
                   default='equal-width')
    p.add_argument('--share-bins', action='store_true',
                   help='bin the comparison population like the subpopulation')
    _output_args(p)

    p = sub.add_parser('pvalue', help='asymptotic P-value of a statistic')
    p.add_argument('--kind', choices=['kuiper', 'ks'], required=True)
    p.add_argument('--x', type=float, required=True,
                   help='statistic divided by sigma')

    p = sub.add_parser('prep-brfss', help='per-figure CSVs from BRFSS data')
    p.add_argument('--input', required=True)
    p.add_argument('--out-dir', required=True)
    p.add_argument('--variable-map')
    p.add_argument('--layout')
    return parser


def _load(args, group=None):
    mapping = ColumnMapping(
        args.score_col, args.response_col, args.weight_col,
        second_response_column=getattr(args, 'response2_col', None),
        group_column=group)
    if args.layout:
        return read_fixed_width(args.input, FixedWidthLayout.load(args.layout),
                                mapping)
    return read_csv(args.input, mapping)


def _matches(groups, value):
    """Group labels equal to value, as text or (when both parse) as numbers."""
    hit = groups == value
    try:
        target = float(value)
    except ValueError:
        return hit
    for i, g in enumerate(groups):
        try:
            hit[i] |= float(g) == target
        except ValueError:
            pass
    return hit


def _emit(args, graph, report):
    if args.out_json:
        report.write(args.out_json)
    if args.out_plot:
        render.emit_plot_data(graph, args.out_plot)
    if args.out_svg:
        render.emit_svg(graph, report, args.out_svg)
    for line in report.caption_lines():
        print(line)


def _report(args, mode, dataset, stats, **kwargs):
    counts = dict(stats.counts)
    counts['dropped'] = dataset.dropped
    stats.counts = counts
    return render.AnalysisReport.from_stats(
        mode, stats, input_digest=render.file_digest(args.input), **kwargs)


def cmd_paired(args):
    dataset = _load(args)
    graph, stats = paired.analyze_paired(dataset)
    _emit(args, graph, _report(args, 'paired', dataset, stats))


def cmd_subpop(args):
    col, value = args.subpop_filter
    dataset = _load(args, group=col)
    mask = _matches(dataset.groups, value)
    if not mask.any():
        raise DataError(f'no rows have {col} = {value}')
    model = None if args.sigma_model == 'none' else args.sigma_model
    graph, stats = subfull.analyze_subfull(dataset, mask, sigma_model=model)
    _emit(args, graph, _report(args, 'subpop', dataset, stats))


def cmd_two_sample(args):
    if args.replicates < 0:
        raise UsageError('--replicates must be nonnegative')
    dataset = _load(args, group=args.group_col)
    labels, values = twosample.binary_labels(dataset.groups)
    policy = PerturbPolicy(seed=args.seed, epsilon=args.epsilon)
    graph, stats = twosample.analyze_two_sample(
        dataset, labels, policy, replicates=args.replicates)
    report = _report(
        args, 'two-sample', dataset, stats, seed=args.seed,
        epsilon=resolve_epsilon(dataset.scores, policy),
        replicates=args.replicates or None,
        extra={'group_values': [str(v) for v in values]})
    _emit(args, graph, report)


def cmd_reliability(args):
    if (args.subpop_filter is None) == (args.group_col is None):
        raise UsageError('give exactly one of --subpop-filter and --group-col')
    if args.subpop_filter:
        col, value = args.subpop_filter
        dataset = _load(args, group=col)
        mask = _matches(dataset.groups, value)
        comparison = 'full'
    else:
        dataset = _load(args, group=args.group_col)
        labels, _ = twosample.binary_labels(dataset.groups)
        mask = labels == 0
        comparison = 'complement'
    if not mask.any():
        raise DataError('empty subpopulation')
    policy = {'equal-width': reliability.EQUAL_WIDTH,
              'equal-ratio': reliability.EQUAL_RATIO}[args.bin_policy]
    series = reliability.reliability_diagram(
        dataset, mask, args.bins, policy, comparison, args.share_bins)
    if args.out_svg:
        render.emit_reliability_svg(series, args.out_svg)
    if args.out_plot:
        _write_bins(series, args.out_plot)
    if args.out_json:
        report = render.AnalysisReport(
            'reliability', {'m': len(dataset), 'l': dataset.num_distinct,
                            'n0': int(mask.sum()), 'dropped': dataset.dropped},
            {}, input_digest=render.file_digest(args.input),
            extra={'bins': args.bins, 'bin_policy': policy,
                   'black': _points(series.black),
                   'gray': _points(series.gray)})
        report.write(args.out_json)
    print(series.title)


def _points(means):
    return [[float(s), float(r)] for s, r in means.points()]


def _write_bins(series, path):
    with open(path, 'w', newline='\n') as f:
        f.write('series,score,response\n')
        for name, means in (('black', series.black), ('gray', series.gray)):
            for s, r in means.points():
                f.write(f'{name},{s:.17g},{r:.17g}\n')


def cmd_pvalue(args):
    if not args.x >= 0:
        raise UsageError('--x must be nonnegative')
    fn = significance.pvalue_kuiper if args.kind == 'kuiper' else \
        significance.pvalue_ks
    print(f'{fn(args.x).value:.4g}')


def cmd_prep_brfss(args):
    from cumdiff.brfss import brfss_prepare
    result = brfss_prepare(args.input, args.out_dir, args.variable_map,
                           args.layout)
    print(f'{result.rows:,} rows read, {result.bmi_rows:,} with a BMI')
    for name, path in result.paths.items():
        print(f'{path}: {result.figure_rows[name]:,} rows')


COMMANDS = {
    'paired': cmd_paired,
    'subpop': cmd_subpop,
    'two-sample': cmd_two_sample,
    'reliability': cmd_reliability,
    'pvalue': cmd_pvalue,
    'prep-brfss': cmd_prep_brfss,
}


def run_cli(argv=None):
    """Run one command; returns the exit status instead of exiting."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    try:
        COMMANDS[args.command](args)
    except (UsageError, ConfigError) as e:
        print(f'cumdiff {args.command}: error: {e}', file=sys.stderr)
        return 2
    except (DataError, ValueError, OSError) as e:
        print(f'cumdiff {args.command}: error: {e}', file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run_cli())


if __name__ == '__main__':
    main()
