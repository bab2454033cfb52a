"""
Analysis-ready files from the 2022 BRFSS survey

The raw file is either a CSV export whose header uses the codebook's
variable names, or the fixed-width ASCII release together with a layout
file (see data/brfss2022_layout.template.toml).  A variable map
(data/brfss2022.toml by default) says how to decode each variable and which
figures to emit.
"""

import csv
import logging
import math
import os
import warnings
from dataclasses import dataclass, field
from importlib import resources

from cumdiff.errors import ConfigError, DataError
from cumdiff.ingest import DecodeRule, FixedWidthLayout, iter_fixed_width

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger(__name__)


class CountWarning(UserWarning):
    """The number of rows with a BMI differs from the documented count."""


def load_variable_map(path=None):
    if path is None:
        text = resources.files('cumdiff').joinpath(
            'data/brfss2022.toml').read_text()
        return tomllib.loads(text)
    with open(path, 'rb') as f:
        try:
            return tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f'{path}: {e}')


@dataclass
class Variable:
    name: str
    source: str
    rule: DecodeRule
    blank: object

    @classmethod
    def from_config(cls, name, cfg):
        if 'field' not in cfg:
            raise ConfigError(f'variable {name}: no field')
        blank = cfg.get('blank', 'missing')
        blank = None if blank == 'missing' else float(blank)
        return cls(name, cfg['field'],
                   DecodeRule.from_config(cfg, f'variable {name}'), blank)

    def decode(self, raw):
        if not raw.strip():
            return self.blank
        return self.rule.decode(raw)


def _numeric(raw, scale):
    raw = raw.strip()
    if not raw or raw == '.':
        return None
    value = float(raw) / scale
    return value if math.isfinite(value) else None


@dataclass
class Prepared:
    """Paths of the emitted files and the row counts behind them."""

    paths: dict = field(default_factory=dict)
    rows: int = 0
    bmi_rows: int = 0
    figure_rows: dict = field(default_factory=dict)


def _read_raw(raw, fields, layout):
    if layout is not None:
        if not isinstance(layout, FixedWidthLayout):
            layout = FixedWidthLayout.load(layout)
        yield from iter_fixed_width(raw, layout, fields)
        return
    with open(raw, encoding='utf-8-sig', newline='') as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ConfigError(f'{raw}: missing header row')
        index = {h: i for i, h in enumerate(header)}
        missing = [name for name in fields if name not in index]
        if missing:
            raise ConfigError(f'{raw}: no column(s) {", ".join(missing)}')
        for number, row in enumerate(reader, start=2):
            yield number, {name: row[index[name]] if index[name] < len(row)
                           else '' for name in fields}


def _bmi_reader(cfg):
    if cfg.get('source', 'precomputed') == 'precomputed':
        name, scale = cfg['field'], float(cfg.get('scale', 100))
        return [name], lambda r: _numeric(r[name], scale)
    if cfg['source'] != 'derived':
        raise ConfigError('bmi source must be precomputed or derived')
    wf, hf = cfg['weight_field'], cfg['height_field']
    ws, hs = float(cfg.get('weight_scale', 100)), float(
        cfg.get('height_scale', 100))

    def bmi(r):
        kg, m = _numeric(r[wf], ws), _numeric(r[hf], hs)
        if kg is None or not m:
            return None
        return kg / m**2
    return [wf, hf], bmi


_COLUMNS = {
    'paired': ['score', 'response', 'response2', 'weight'],
    'subpop': ['score', 'response', 'weight', 'group'],
    'two-sample': ['score', 'response', 'weight', 'group'],
}


def brfss_prepare(raw, out_dir, variable_map=None, layout=None):
    """
    Write one CSV per figure from a raw BRFSS file.

    Only rows with a BMI enter any figure; a warning (CountWarning) is issued
    when their number differs from the map's expected_bmi_rows, which
    usually means a different survey year or a misread codebook.  Each
    figure additionally drops rows missing any of its own variables.

    Parameters
    ----------
    raw : str or path-like
        CSV with codebook variable names, or fixed-width records
    out_dir : str or path-like
        directory for <figure>.csv files (created if needed)
    variable_map : str, path-like, dict, or None
        decoding and figure definitions; the bundled 2022 map by default
    layout : str, path-like, FixedWidthLayout, or None
        fixed-width layout; None means raw is CSV

    Returns
    -------
    Prepared
    """
    cfg = variable_map if isinstance(variable_map, dict) else \
        load_variable_map(variable_map)
    try:
        variables = {name: Variable.from_config(name, v)
                     for name, v in cfg.get('variables', {}).items()}
        weight_field = cfg['weight']['field']
        bmi_fields, read_bmi = _bmi_reader(cfg['bmi'])
        height = cfg.get('height')
        figures = cfg['figures']
    except KeyError as e:
        raise ConfigError(f'variable map lacks {e}')
    fields = {weight_field, *bmi_fields}
    fields.update(v.source for v in variables.values())
    if height:
        fields.add(height['field'])
    fields = sorted(fields)
    known = set(variables) | {'bmi', 'height'}
    for name, fig in figures.items():
        if fig.get('mode') not in _COLUMNS:
            raise ConfigError(f'figure {name}: unknown mode {fig.get("mode")!r}')
        for role in ('score', 'response', 'response2', 'group'):
            if role in fig and fig[role] not in known:
                raise ConfigError(f'figure {name}: unknown variable {fig[role]!r}')

    os.makedirs(out_dir, exist_ok=True)
    result = Prepared()
    files, writers = {}, {}
    try:
        for name, fig in figures.items():
            path = os.path.join(out_dir, f'{name}.csv')
            files[name] = open(path, 'w', newline='')
            writers[name] = csv.writer(files[name], lineterminator='\n')
            writers[name].writerow(_COLUMNS[fig['mode']])
            result.paths[name] = path
            result.figure_rows[name] = 0
        for number, row in _read_raw(raw, fields, layout):
            result.rows += 1
            try:
                bmi = read_bmi(row)
                if bmi is None:
                    continue
                weight = _numeric(row[weight_field], 1.0)
                values = {'bmi': bmi}
                if height:
                    values['height'] = _numeric(
                        row[height['field']], float(height.get('scale', 1)))
                for name, var in variables.items():
                    values[name] = var.decode(row[var.source])
            except ValueError as e:
                raise DataError(str(e), row=number)
            result.bmi_rows += 1
            if weight is None or weight <= 0:
                continue
            for name, fig in figures.items():
                out = [values.get(fig.get(role)) if role != 'weight' else weight
                       for role in _COLUMNS[fig['mode']]]
                if any(v is None for v in out):
                    continue
                writers[name].writerow(
                    [str(int(v)) if role == 'group' else repr(float(v))
                     for role, v in zip(_COLUMNS[fig['mode']], out)])
                result.figure_rows[name] += 1
    finally:
        for f in files.values():
            f.close()
    expected = cfg.get('expected_bmi_rows')
    if expected is not None and result.bmi_rows != expected:
        msg = (f'{result.bmi_rows} rows have a BMI, expected {expected}; '
               'check the survey year and the variable map')
        log.warning(msg)
        warnings.warn(msg, CountWarning, stacklevel=2)
    return result
