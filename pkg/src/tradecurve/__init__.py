"""Export-diversity S-curves: ingestion, logistic fitting, stages, dynamics."""

from tradecurve.diversity import DiversityProfile, normalize, profile, profiles, shannon_entropy
from tradecurve.dynamics import (
    POWER_LAW_PAIRS,
    PowerLawFit,
    SeriesResult,
    Variable,
    YearlyResult,
    fit_panel,
    fit_power_law,
    fit_year,
    power_law_matrix,
    run_series,
    series_from_panels,
)
from tradecurve.ingest import (
    CountryObservation,
    GdpRecord,
    LogBase,
    Panel,
    TradeFileFormat,
    TradeFlow,
    build_panel,
    build_panels,
    iter_trade_flows,
    parse_crosswalk,
    parse_gdp_table,
    parse_trade_flows,
)
from tradecurve.sigmoid_fit import (
    FitOptions,
    LogisticFit,
    LogisticParams,
    fit_diagnostics,
    fit_logistic,
    logistic_eval,
    logistic_jacobian,
)
from tradecurve.stages import CriticalPoints, StageLabel, classify, critical_points, stage_counts

__version__ = "0.1.0"
