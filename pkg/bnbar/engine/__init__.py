from .dynamics import (
    DistFamily,
    DynFamily,
    IngarchParams,
    GasParams,
    ModelSpec,
    StationarityReport,
    parse_family,
    ingarch_update,
    gas_update,
    check_strict_stationarity,
    check_weak_stationarity,
)
from .simulation import SimulatedPath, simulate, inject_outliers, lookalike_fixture

__all__ = [
    "DistFamily",
    "DynFamily",
    "IngarchParams",
    "GasParams",
    "ModelSpec",
    "StationarityReport",
    "parse_family",
    "ingarch_update",
    "gas_update",
    "check_strict_stationarity",
    "check_weak_stationarity",
    "SimulatedPath",
    "simulate",
    "inject_outliers",
    "lookalike_fixture",
]
