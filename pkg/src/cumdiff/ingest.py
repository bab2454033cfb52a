"""
Reading weighted survey data and making scores unique

Two input formats are supported: comma-separated files with a header row,
and fixed-width text records described by a layout file.  Layout files are
TOML with the grammar

    record_length = 10            # optional; informational

    [fields.<name>]
    start = 1                     # 1-based first column
    width = 2
    scale = 1                     # optional divisor for numeric values
    codes = { "1" = 1, "2" = 0 }  # optional code map; values 0, 1, or "missing"
    default = "missing"           # outcome for codes absent from the map:
                                  # "missing", "numeric", 0, or 1

Blank fields are always missing.  Without a code map, fields are numeric
(float(text) / scale).
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from cumdiff.core import Dataset
from cumdiff.errors import ConfigError, DataError
from cumdiff.rng import DEFAULT_SEED, make_generator

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

MISSING = None
_MISSING_TOKENS = {'', 'na', 'nan', 'null', '.'}


@dataclass(frozen=True)
class ColumnMapping:
    """
    Names of the input columns (or layout fields) holding each role.

    weight_column may be None for unit weights.
    """

    score_column: str
    response_column: str
    weight_column: str
    second_response_column: str = None
    group_column: str = None

    def columns(self):
        return [c for c in (self.score_column, self.response_column,
                            self.second_response_column, self.weight_column,
                            self.group_column) if c is not None]


def _outcome(value, where):
    if isinstance(value, str):
        if value.lower() == 'missing':
            return MISSING
        raise ConfigError(f'{where}: unknown outcome {value!r}')
    if isinstance(value, bool) or value not in (0, 1):
        raise ConfigError(f'{where}: outcomes must be 0, 1, or "missing"')
    return float(value)


@dataclass(frozen=True)
class DecodeRule:
    """
    Decoding of one raw text field.

    codes maps stripped raw strings to 0.0, 1.0, or None (missing).  Strings
    absent from codes get `default`: None, 0.0, 1.0, or 'numeric' for
    float(text) / scale.  With no codes at all, every value is numeric.
    """

    codes: dict = field(default_factory=dict)
    default: object = 'numeric'
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ConfigError('scale must be positive')

    @classmethod
    def from_config(cls, cfg, where='field'):
        codes = {str(k).strip(): _outcome(v, f'{where} code {k!r}')
                 for k, v in cfg.get('codes', {}).items()}
        default = cfg.get('default', 'missing' if codes else 'numeric')
        if default != 'numeric':
            default = _outcome(default, f'{where} default')
        return cls(codes=codes, default=default,
                   scale=float(cfg.get('scale', 1.0)))

    def decode(self, raw):
        """Decoded float, or None when missing; ValueError if unparseable."""
        text = raw.strip()
        if text.lower() in _MISSING_TOKENS:
            return MISSING
        if text in self.codes:
            return self.codes[text]
        if self.default != 'numeric':
            return self.default
        value = float(text) / self.scale
        if not math.isfinite(value):
            raise ValueError(f'non-finite value {text!r}')
        return value


NUMERIC = DecodeRule()


@dataclass(frozen=True)
class FieldSpec:
    start: int
    width: int
    rule: DecodeRule = NUMERIC

    @property
    def stop(self):
        return self.start - 1 + self.width


@dataclass(frozen=True)
class FixedWidthLayout:
    """Named fields of fixed-width records; starts are 1-based columns."""

    fields: dict
    record_length: int = None

    def __post_init__(self):
        spans = sorted((f.start, f.stop, name) for name, f in self.fields.items())
        for start, stop, name in spans:
            if start < 1 or stop < start:
                raise ConfigError(f'field {name}: bad start/width')
            if self.record_length is not None and stop > self.record_length:
                raise ConfigError(f'field {name} runs past the record length')
        for (_, stop, a), (start, _, b) in zip(spans, spans[1:]):
            if start <= stop:
                raise ConfigError(f'fields {a} and {b} overlap')

    @classmethod
    def from_dict(cls, cfg):
        fields = {}
        for name, spec in cfg.get('fields', {}).items():
            try:
                start, width = int(spec['start']), int(spec['width'])
            except (KeyError, TypeError, ValueError):
                raise ConfigError(
                    f'field {name}: integer start and width are required')
            fields[name] = FieldSpec(
                start, width, DecodeRule.from_config(spec, f'field {name}'))
        if not fields:
            raise ConfigError('layout defines no fields')
        length = cfg.get('record_length')
        return cls(fields, None if length is None else int(length))

    @classmethod
    def load(cls, path):
        with open(path, 'rb') as f:
            try:
                cfg = tomllib.load(f)
            except tomllib.TOMLDecodeError as e:
                raise ConfigError(f'{path}: {e}')
        return cls.from_dict(cfg)

    def format_record(self, values):
        """Fixed-width record holding the given raw strings (right-aligned)."""
        length = self.record_length or max(f.stop for f in self.fields.values())
        buf = [' '] * length
        for name, text in values.items():
            spec = self.fields[name]
            if len(text) > spec.width:
                raise ValueError(f'{text!r} does not fit field {name}')
            buf[spec.start - 1:spec.stop] = text.rjust(spec.width)
        return ''.join(buf)


def iter_fixed_width(path, layout, names=None):
    """
    Yield (record number, {name: raw text}) for each record of a file.

    Records shorter than a requested field raise DataError; fully blank
    records yield all-blank fields.
    """
    names = list(layout.fields) if names is None else list(names)
    for name in names:
        if name not in layout.fields:
            raise ConfigError(f'layout has no field {name!r}')
    specs = [(name, layout.fields[name]) for name in names]
    with open(path, encoding='latin-1', newline='') as f:
        for number, line in enumerate(f, start=1):
            line = line.rstrip('\r\n')
            if not line.strip():
                yield number, {name: '' for name in names}
                continue
            out = {}
            for name, spec in specs:
                if len(line) < spec.stop:
                    raise DataError(
                        f'record has {len(line)} columns, field {name} needs '
                        f'{spec.start}..{spec.stop}', row=number)
                out[name] = line[spec.start - 1:spec.stop]
            yield number, out


_ROLES = ('score', 'response', 'response2', 'weight')


def _build(rows, mapping, rules, dropped):
    """Dataset from decoded rows; rows with any missing role are dropped."""
    cols = {role: [] for role in _ROLES}
    groups = []
    names = dict(zip(_ROLES, (mapping.score_column, mapping.response_column,
                              mapping.second_response_column,
                              mapping.weight_column)))
    for number, raw in rows:
        values = {}
        for role, name in names.items():
            if name is None:
                continue
            try:
                values[role] = rules.get(name, NUMERIC).decode(raw[name])
            except ValueError as e:
                raise DataError(f'column {name}: {e}', row=number)
        if any(v is MISSING for v in values.values()):
            dropped += 1
            continue
        values.setdefault('weight', 1.0)
        if values['weight'] <= 0:
            raise DataError(f'nonpositive weight {values["weight"]}', row=number)
        for role, v in values.items():
            cols[role].append(v)
        if mapping.group_column is not None:
            groups.append(raw[mapping.group_column].strip())
    return Dataset(
        cols['score'], cols['response'], cols['weight'],
        responses2=cols['response2'] if mapping.second_response_column else None,
        groups=np.array(groups, dtype=str) if mapping.group_column else None,
        dropped=dropped)


def read_csv(path, mapping, rules=None):
    """
    Read a comma-separated file with a header row into a Dataset.

    Parameters
    ----------
    path : str or path-like
        UTF-8 CSV file
    mapping : ColumnMapping
        which columns hold the score, responses, weight, and group label
    rules : dict, optional
        DecodeRule per column name; columns without one are numeric

    Returns
    -------
    Dataset
        rows with a missing score, response, or weight are dropped and
        counted in Dataset.dropped; group labels are kept as stripped text
    """
    rules = rules or {}
    with open(path, encoding='utf-8-sig', newline='') as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ConfigError(f'{path}: missing header row')
        index = {h: i for i, h in enumerate(header)}
        for col in mapping.columns():
            if col not in index:
                raise ConfigError(f'{path}: no column named {col!r}')
        wanted = [(c, index[c]) for c in mapping.columns()]

        def rows():
            for number, row in enumerate(reader, start=2):
                if not row:
                    continue
                yield number, {c: row[i] if i < len(row) else ''
                               for c, i in wanted}

        return _build(rows(), mapping, rules, 0)


def read_fixed_width(path, layout, mapping=None):
    """
    Read fixed-width records into a Dataset.

    mapping defaults to fields named score, response, weight (and response2
    and group when the layout has them).  Decoding follows each field's rule.
    """
    if mapping is None:
        mapping = ColumnMapping(
            'score', 'response', 'weight',
            second_response_column='response2'
            if 'response2' in layout.fields else None,
            group_column='group' if 'group' in layout.fields else None)
    rules = {name: spec.rule for name, spec in layout.fields.items()}
    rows = iter_fixed_width(path, layout, mapping.columns())
    return _build(rows, mapping, rules, 0)


@dataclass(frozen=True)
class PerturbPolicy:
    """Seed and half-width for uniform score perturbation ('auto' or > 0)."""

    seed: int = DEFAULT_SEED
    epsilon: object = 'auto'

    def __post_init__(self):
        if self.epsilon != 'auto' and not (float(self.epsilon) > 0):
            raise ValueError('epsilon must be positive or "auto"')


def resolve_epsilon(scores, policy):
    """
    Perturbation half-width: explicit, or a quarter of the smallest gap
    between distinct scores (max(1, |s|) * 1e-6 for a single distinct value).
    """
    if policy.epsilon != 'auto':
        return float(policy.epsilon)
    distinct = np.unique(scores)
    if len(distinct) == 1:
        return max(1.0, abs(float(distinct[0]))) * 1e-6
    return float(np.min(np.diff(distinct))) / 4


_RETRIES = 8


def perturb_scores(dataset, policy, stream=(0,)):
    """
    Add i.i.d. uniform(-eps, eps) noise so that every score is distinct.

    With the automatic epsilon, observations at different original scores
    never swap order.  Draws come from substream `stream` of policy.seed, in
    the dataset's sorted order, so results are reproducible.  Ties surviving
    the noise (a probability-zero event) trigger a redraw from a fresh
    substream; after several attempts the remaining ties are split by
    nudging to adjacent floating-point numbers.

    Returns
    -------
    Dataset
        copy with perturbed (and re-sorted) scores
    """
    if len(dataset) == 0:
        raise ValueError('cannot perturb an empty dataset')
    eps = resolve_epsilon(dataset.scores, policy)
    scores = dataset.scores
    for attempt in range(_RETRIES):
        rng = make_generator(policy.seed, *stream, attempt)
        out = scores + rng.uniform(-eps, eps, size=len(scores))
        if len(np.unique(out)) == len(out):
            return dataset.with_scores(out)
    order = np.argsort(out, kind='stable')
    s = out[order]
    for i in range(1, len(s)):
        if s[i] <= s[i - 1]:
            s[i] = np.nextafter(s[i - 1], np.inf)
    out[order] = s
    return dataset.with_scores(out)
