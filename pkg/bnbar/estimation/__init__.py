# filtering
from .likelihood import FilterOutput, filter_series

# maximum likelihood
from .mle import FitOptions, FitResult, RankRow, fit, fit_all, compare, aic

# replication studies
from .montecarlo import (
    McDesign,
    McCell,
    McReport,
    ScorePoint,
    SelectionReport,
    run_mc,
    reported_se,
    preset_design,
    preset_spec,
    score_curve,
    run_model_selection,
    outlier_excursion,
    robustness_contrast,
)

__all__ = [
    # filtering
    "FilterOutput", "filter_series",

    # mle
    "FitOptions", "FitResult", "RankRow", "fit", "fit_all", "compare", "aic",

    # montecarlo
    "McDesign", "McCell", "McReport", "ScorePoint", "SelectionReport",
    "run_mc", "reported_se", "preset_design", "preset_spec", "score_curve",
    "run_model_selection", "outlier_excursion", "robustness_contrast",
]
