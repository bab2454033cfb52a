"""
Cumulative differences between subpopulations, with Kuiper and
Kolmogorov-Smirnov significance tests and reliability diagrams.
"""

from cumdiff.core import (CumulativeGraph, Dataset, Observation,
                          PairedObservation, SubpopulationSelector,
                          SummaryStats, accumulate, ks_stat, kuiper_stat,
                          secant_slope, summarize)
from cumdiff.errors import ConfigError, DataError
from cumdiff.ingest import (ColumnMapping, DecodeRule, FixedWidthLayout,
                            PerturbPolicy, perturb_scores, read_csv,
                            read_fixed_width)
from cumdiff.paired import analyze_paired
from cumdiff.reliability import (bins_equal_weight_ratio, bins_equal_width,
                                 diagram_points, reliability_diagram)
from cumdiff.significance import mc_null_tail, pvalue_ks, pvalue_kuiper
from cumdiff.subfull import analyze_subfull
from cumdiff.twosample import (analyze_two_sample, ate_nearest,
                               ate_replicated)

__version__ = '0.1.0'
