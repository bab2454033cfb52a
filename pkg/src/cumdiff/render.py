"""
Plot data, standalone SVG plots, and JSON analysis reports

SVG is written by hand, so no plotting library is needed.  Plot-data files
are CSV with 17 significant digits, enough to reproduce every double
exactly.  Reports are JSON with sorted keys and no timestamps, so equal
inputs give byte-identical files.
"""

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from cumdiff.rng import ALGORITHM

SCHEMA_VERSION = 1

_WIDTH, _HEIGHT = 640, 520
_LEFT, _RIGHT, _TOP, _BOTTOM = 80, 20, 20, 60
_CAPTION_LINE = 18
# Horizontal reach of the significance triangle, in cumulative weight.
_TRIANGLE_REACH = 0.04


def emit_plot_data(graph, path):
    """Write (A_j, C_j) for j = 0..L as CSV with header abscissa,ordinate."""
    with open(path, 'w', newline='') as f:
        out = csv.writer(f, lineterminator='\n')
        out.writerow(['abscissa', 'ordinate'])
        for a, c in zip(graph.abscissae.tolist(), graph.ordinates.tolist()):
            out.writerow([format(a, '.17g'), format(c, '.17g')])


def read_plot_data(path):
    """Abscissae and ordinates from a file written by emit_plot_data."""
    with open(path, newline='') as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != ['abscissa', 'ordinate']:
        raise ValueError(f'{path}: not a plot-data file')
    data = np.array([[float(a), float(c)] for a, c in rows[1:]])
    return data[:, 0], data[:, 1]


def file_digest(path):
    h = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(1 << 20), b''):
            h.update(block)
    return 'sha256:' + h.hexdigest()


def _plain(value):
    """JSON-ready copy with numpy scalars turned into Python numbers."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


@dataclass
class AnalysisReport:
    """
    Everything needed to reproduce and cite one analysis.

    Attributes
    ----------
    mode : str
        paired, subpop, or two-sample
    counts : dict
        m (observations), l (distinct scores), and where applicable n, n0,
        n1, G, min_bin_count, dropped
    stats : dict
        SummaryStats.as_dict(), without the counts
    seed : int or None
        base seed, for modes that perturb
    rng_algorithm : str or None
    epsilon : float or None
        perturbation half-width
    replicates : int or None
        perturbations averaged for the replicated nearest-neighbor ATE
    input_digest : str or None
        sha256 of the input file
    """

    mode: str
    counts: dict
    stats: dict
    seed: int = None
    rng_algorithm: str = None
    epsilon: float = None
    replicates: int = None
    input_digest: str = None
    schema_version: int = SCHEMA_VERSION
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_stats(cls, mode, stats, **kwargs):
        d = stats.as_dict()
        counts = d.pop('counts')
        if kwargs.get('seed') is not None:
            kwargs.setdefault('rng_algorithm', ALGORITHM)
        return cls(mode, counts, d, **kwargs)

    def to_json(self):
        return json.dumps(_plain(asdict(self)), sort_keys=True, indent=2,
                          allow_nan=False) + '\n'

    def write(self, path):
        with open(path, 'w', newline='\n') as f:
            f.write(self.to_json())

    def caption_lines(self):
        s, c = self.stats, self.counts
        lines = []
        if 'm' in c:
            line = f"m = {c['m']:,}"
            if 'l' in c:
                line += f" (with l = {c['l']:,} distinct scores)"
            lines.append(line)
        parts = [f'{k} = {c[k]:,}' for k in ('n0', 'n1', 'n') if k in c]
        if parts:
            lines.append(', '.join(parts))

        def num(key):
            v = s.get(key)
            return 'n/a' if v is None else f'{v:.4g}'
        lines.append(f"Kuiper / sigma = {num('kuiper_over_sigma')}, "
                     f"KS / sigma = {num('ks_over_sigma')}")
        lines.append(f"P-values: {num('pvalue_kuiper')} (Kuiper), "
                     f"{num('pvalue_ks')} (KS)")
        lines.append(f"ATE / sigma = {num('ate_over_sigma')}")
        if s.get('ate_nearest') is not None:
            lines.append(f"nearest-neighbor ATE / sigma = "
                         f"{num('ate_nearest_over_sigma')}")
        if s.get('ate_replicated') is not None:
            lines.append(f"averaged over {self.replicates} perturbations = "
                         f"{num('ate_replicated_over_sigma')}")
        return lines


class _Frame:
    """Affine map from data coordinates into the plotting rectangle."""

    def __init__(self, xlim, ylim, height):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.w = _WIDTH - _LEFT - _RIGHT
        self.h = height

    def x(self, v):
        return _LEFT + (v - self.x0) / (self.x1 - self.x0) * self.w

    def y(self, v):
        return _TOP + (self.y1 - v) / (self.y1 - self.y0) * self.h


def _ticks(lo, hi, count=5):
    return [lo + (hi - lo) * k / (count - 1) for k in range(count)]


def _fmt(v):
    return format(v, '.6g')


def _axes(frame, xlabel, ylabel):
    out = [
        f'<rect x="{_LEFT}" y="{_TOP}" width="{frame.w}" height="{frame.h}" '
        'fill="none" stroke="black"/>']
    for v in _ticks(frame.x0, frame.x1):
        x = frame.x(v)
        out.append(f'<text x="{x:.2f}" y="{_TOP + frame.h + 16}" '
                   f'text-anchor="middle" font-size="11">{_fmt(v)}</text>')
    for v in _ticks(frame.y0, frame.y1):
        y = frame.y(v)
        out.append(f'<text x="{_LEFT - 6}" y="{y + 4:.2f}" text-anchor="end" '
                   f'font-size="11">{_fmt(v)}</text>')
    out.append(f'<text class="xlabel" x="{_LEFT + frame.w / 2:.2f}" '
               f'y="{_TOP + frame.h + 36}" text-anchor="middle" '
               f'font-size="13">{escape(xlabel)}</text>')
    yc = _TOP + frame.h / 2
    out.append(f'<text class="ylabel" x="18" y="{yc:.2f}" '
               f'transform="rotate(-90 18 {yc:.2f})" text-anchor="middle" '
               f'font-size="13">{escape(ylabel)}</text>')
    return out


def _document(body, height, title=None):
    head = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{height}" viewBox="0 0 {_WIDTH} {height}">',
        f'<rect width="{_WIDTH}" height="{height}" fill="white"/>']
    if title:
        head.append(f'<title>{escape(title)}</title>')
    return '\n'.join(head + body + ['</svg>']) + '\n'


def _caption(lines, top):
    out = ['<g class="caption" font-size="12">']
    for k, line in enumerate(lines):
        out.append(f'<text x="{_LEFT}" y="{top + k * _CAPTION_LINE}">'
                   f'{escape(line)}</text>')
    out.append('</g>')
    return out


def _points(frame, xs, ys):
    return ' '.join(f'{frame.x(a):.3f},{frame.y(c):.3f}'
                    for a, c in zip(xs, ys))


def emit_svg(graph, metadata, path):
    """
    Standalone SVG of a cumulative graph.

    The triangle at the origin has a vertical side from -2 sigma to 2 sigma;
    deviations of the graph beyond its height are significant at roughly the
    95% level.  It is omitted when sigma is zero or unknown.

    Parameters
    ----------
    graph : CumulativeGraph
    metadata : AnalysisReport, list of str, or None
        caption printed below the plot
    path : str or path-like
    """
    if isinstance(metadata, AnalysisReport):
        lines = metadata.caption_lines()
    else:
        lines = list(metadata or [])
    a, c = graph.abscissae, graph.ordinates
    sigma = graph.sigma or 0.0
    lo = min(float(c.min()), -2 * sigma)
    hi = max(float(c.max()), 2 * sigma)
    if hi == lo:
        lo, hi = lo - 1, hi + 1
    pad = (hi - lo) * 0.05
    plot_h = _HEIGHT - _TOP - _BOTTOM - _CAPTION_LINE * len(lines)
    plot_h = max(plot_h, 240)
    height = _TOP + plot_h + _BOTTOM + _CAPTION_LINE * len(lines)
    frame = _Frame((0.0, 1.0), (lo - pad, hi + pad), plot_h)
    body = _axes(frame, 'cumulative weight', 'cumulative difference')
    body.append(f'<line x1="{frame.x(0):.3f}" y1="{frame.y(0):.3f}" '
                f'x2="{frame.x(1):.3f}" y2="{frame.y(0):.3f}" '
                'stroke="gray" stroke-dasharray="4 3"/>')
    body.append(f'<polyline class="cumulative" fill="none" stroke="black" '
                f'stroke-width="1.2" points="{_points(frame, a, c)}"/>')
    if sigma > 0:
        tri = [(0.0, -2 * sigma), (0.0, 2 * sigma), (_TRIANGLE_REACH, 0.0)]
        pts = ' '.join(f'{frame.x(x):.3f},{frame.y(y):.3f}' for x, y in tri)
        body.append(
            f'<polygon class="triangle" data-sigma={quoteattr(repr(sigma))} '
            f'data-ymin={quoteattr(repr(-2 * sigma))} '
            f'data-ymax={quoteattr(repr(2 * sigma))} fill="none" '
            f'stroke="black" points="{pts}"/>')
    body += _caption(lines, _TOP + plot_h + _BOTTOM)
    with open(path, 'w', newline='\n') as f:
        f.write(_document(body, height, 'cumulative differences'))


def emit_reliability_svg(series, path):
    """Standalone SVG of a reliability diagram (black and gray series)."""
    pts = [series.black.points(), series.gray.points()]
    allpts = np.concatenate(pts)
    x0, x1 = float(allpts[:, 0].min()), float(allpts[:, 0].max())
    y0, y1 = float(allpts[:, 1].min()), float(allpts[:, 1].max())
    x0, x1 = (x0 - 1, x1 + 1) if x0 == x1 else (x0, x1)
    y0, y1 = (y0 - 1, y1 + 1) if y0 == y1 else (y0, y1)
    px, py = (x1 - x0) * 0.05, (y1 - y0) * 0.05
    plot_h = _HEIGHT - _TOP - _BOTTOM
    frame = _Frame((x0 - px, x1 + px), (y0 - py, y1 + py), plot_h)
    body = [f'<text x="{_WIDTH / 2}" y="14" text-anchor="middle" '
            f'font-size="13">{escape(series.title)}</text>']
    body += _axes(frame, 'score', 'response')
    for name, colour, p in (('gray', 'gray', pts[1]), ('black', 'black', pts[0])):
        body.append(f'<polyline class="{name}" fill="none" stroke="{colour}" '
                    f'points="{_points(frame, p[:, 0], p[:, 1])}"/>')
        for x, y in p:
            body.append(f'<circle cx="{frame.x(x):.3f}" cy="{frame.y(y):.3f}" '
                        f'r="2.5" fill="{colour}"/>')
    with open(path, 'w', newline='\n') as f:
        f.write(_document(body, _HEIGHT, series.title))
