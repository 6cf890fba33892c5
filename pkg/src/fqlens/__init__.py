"""Tsallis-order F-statistics for haplotype panels."""

__version__ = "0.1.0"

from .entropy import heterozygosity, shannon_bern, tsallis_bern
from .errors import (ConfigurationError, DomainError, ExtinctionError, FormatError,
                     ParseError, UndefinedStatisticError)
from .panel import HaplotypePanel
from .stats import (DEFAULT_Q_GRID, FqSpectrum, LocusDiff, LocusFreqTable, fq_spectrum,
                    fst_classic, locus_diff, loo_influence, micro_average, mutual_information,
                    ovr_tables, regional_fq, slope_diagnostic)
