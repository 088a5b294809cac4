# errors
from .errors import (
    ParameterDomainError,
    MomentUndefinedError,
    NonStationaryError,
    SeriesFormatError,
    SeriesMismatchError,
    TruncationError,
    FilterError,
    ClampWarning,
    EstimationWarning,
)

# conditional laws
from .distributions import (
    BnbParams,
    NbParams,
    BnbMoments,
    bnb_log_pmf,
    bnb_log_pmf_ratio,
    bnb_pmf_support,
    bnb_cdf,
    bnb_quantile,
    bnb_sample,
    bnb_moments,
    bnb_score_loglambda,
    nb_log_pmf,
    nb_sample,
    nb_score_loglambda,
    poisson_log_pmf,
)

# running summaries
from .running import RunningStats, StatsTable

# series files
from .series_io import parse_series, read_series, write_series_csv, write_table_csv, write_json

__all__ = [
    # errors
    "ParameterDomainError", "MomentUndefinedError", "NonStationaryError",
    "SeriesFormatError", "SeriesMismatchError", "TruncationError", "FilterError",
    "ClampWarning", "EstimationWarning",

    # distributions
    "BnbParams", "NbParams", "BnbMoments",
    "bnb_log_pmf", "bnb_log_pmf_ratio", "bnb_pmf_support", "bnb_cdf", "bnb_quantile",
    "bnb_sample", "bnb_moments", "bnb_score_loglambda",
    "nb_log_pmf", "nb_sample", "nb_score_loglambda", "poisson_log_pmf",

    # running
    "RunningStats", "StatsTable",

    # io
    "parse_series", "read_series", "write_series_csv", "write_table_csv", "write_json",
]
