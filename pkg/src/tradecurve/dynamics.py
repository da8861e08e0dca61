"""Per-year pipeline runs, multi-year series, and power-law cross-relations."""

from __future__ import annotations

import logging
import math
import os
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from tradecurve import diversity
from tradecurve.errors import AllYearsFailed, InsufficientData, TradeCurveError
from tradecurve.ingest import GdpRecord, LogBase, Panel, TradeFlow, build_panel, build_panels
from tradecurve.sigmoid_fit import FitOptions, LogisticFit, fit_logistic
from tradecurve.stages import CriticalPoints, StageCounts, count_stages, critical_points

log = logging.getLogger(__name__)

THREADS_ENV = "TRADECURVE_THREADS"


class Variable(str, Enum):
    EXPORT_GOODS = "export_goods"
    IMPORT_GOODS = "import_goods"
    EXPORTERS = "exporters"
    IMPORTERS = "importers"

    @property
    def attr(self) -> str:
        """Field name on :class:`CountryObservation`."""
        return _ATTRS[self]

    @classmethod
    def parse(cls, token: str | Variable) -> Variable:
        if isinstance(token, Variable):
            return token
        t = str(token).strip().lower().replace("-", "_")
        for v in cls:
            if t in (v.value, v.attr, v.name.lower()):
                return v
        raise ValueError(f"unknown variable {token!r}; expected one of {[v.value for v in cls]}")


_ATTRS = {
    Variable.EXPORT_GOODS: "export_goods",
    Variable.IMPORT_GOODS: "import_goods",
    Variable.EXPORTERS: "exporter_partners",
    Variable.IMPORTERS: "importer_partners",
}

# (X, Y) pairs in the order of the published power-law table
POWER_LAW_PAIRS: tuple[tuple[Variable, Variable], ...] = (
    (Variable.IMPORTERS, Variable.EXPORTERS),
    (Variable.IMPORTERS, Variable.EXPORT_GOODS),
    (Variable.IMPORT_GOODS, Variable.EXPORTERS),
    (Variable.IMPORT_GOODS, Variable.EXPORT_GOODS),
    (Variable.IMPORTERS, Variable.IMPORT_GOODS),
    (Variable.EXPORTERS, Variable.EXPORT_GOODS),
)


@dataclass(frozen=True)
class YearlyResult:
    year: int
    variable: Variable
    fit: LogisticFit
    cp: CriticalPoints
    stages: StageCounts
    normalized: bool
    y_min: float
    y_max: float
    # (country, log_gdp, y as fitted) per observation
    points: tuple[tuple[str, float, float], ...] = field(repr=False)

    @property
    def proportions(self) -> tuple[float, float, float]:
        return self.stages.proportions()


@dataclass(frozen=True)
class SeriesResult:
    results: list[YearlyResult]
    failures: dict[int, TradeCurveError]

    def __len__(self) -> int:
        return len(self.results)

    def __iter__(self):
        return iter(self.results)

    def __getitem__(self, i):
        return self.results[i]


def fit_panel(
    panel: Panel,
    variable: Variable | str,
    normalize: bool = False,
    options: FitOptions | None = None,
) -> YearlyResult:
    """Fit the logistic for one variable of an already-built panel."""
    variable = Variable.parse(variable)
    countries = [o.country for o in panel]
    x = np.array(panel.values("log_gdp"), dtype=float)
    raw = np.array(panel.values(variable.attr), dtype=float)
    y_min, y_max = float(raw.min()), float(raw.max())
    y = diversity.normalize(raw) if normalize else raw
    try:
        fit = fit_logistic(np.column_stack([x, y]), options)
    except TradeCurveError as exc:
        exc.details.setdefault("year", panel.year)
        exc.details.setdefault("variable", variable.value)
        raise
    cp = critical_points(fit.params)
    stages = count_stages(zip(countries, x.tolist()), cp)
    return YearlyResult(
        year=panel.year,
        variable=variable,
        fit=fit,
        cp=cp,
        stages=stages,
        normalized=normalize,
        y_min=y_min,
        y_max=y_max,
        points=tuple(zip(countries, x.tolist(), y.tolist())),
    )


def fit_year(
    trades: Iterable[TradeFlow],
    gdp: Iterable[GdpRecord],
    year: int,
    variable: Variable | str = Variable.EXPORT_GOODS,
    normalize: bool = False,
    log_base: LogBase | str = LogBase.TEN,
    options: FitOptions | None = None,
    crosswalk: Mapping[str, str] | None = None,
) -> YearlyResult:
    panel = build_panel(trades, gdp, year, log_base, crosswalk)
    return fit_panel(panel, variable, normalize, options)


def thread_cap(default: int | None = None) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, env)
    return default or min(8, os.cpu_count() or 1)


def run_series(
    trades: Iterable[TradeFlow],
    gdp: Iterable[GdpRecord],
    years: Iterable[int],
    variable: Variable | str = Variable.EXPORT_GOODS,
    normalize: bool = True,
    log_base: LogBase | str = LogBase.TEN,
    options: FitOptions | None = None,
    crosswalk: Mapping[str, str] | None = None,
    max_workers: int | None = None,
) -> SeriesResult:
    """Fit every requested year; failed years become gaps, not errors.

    ``trades`` is consumed once, so a streaming reader works. Results are
    ordered by year whatever the degree of parallelism.
    """
    years = sorted(set(years))
    if not years:
        raise ValueError("years must be non-empty")
    panels = build_panels(trades, gdp, years, log_base, crosswalk)
    return series_from_panels(panels, variable, normalize, options, max_workers)


def series_from_panels(
    panels: Mapping[int, Panel | TradeCurveError],
    variable: Variable | str = Variable.EXPORT_GOODS,
    normalize: bool = True,
    options: FitOptions | None = None,
    max_workers: int | None = None,
) -> SeriesResult:
    """Fit prebuilt panels; entries that are already errors count as failed years."""
    years = sorted(panels)
    if not years:
        raise ValueError("panels must be non-empty")

    def one(year: int) -> YearlyResult | TradeCurveError:
        panel = panels[year]
        if isinstance(panel, TradeCurveError):
            return panel
        try:
            return fit_panel(panel, variable, normalize, options)
        except TradeCurveError as exc:
            exc.details.setdefault("year", year)
            return exc

    workers = min(max_workers or thread_cap(), len(years))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, years))
    else:
        outcomes = [one(y) for y in years]

    results, failures = [], {}
    for year, out in zip(years, outcomes):
        if isinstance(out, YearlyResult):
            results.append(out)
        else:
            log.warning("year %d skipped: %s (%s)", year, out.code, out.message)
            failures[year] = out
    if not results:
        raise AllYearsFailed(
            f"no year in {years[0]}..{years[-1]} could be fitted",
            failures={str(y): e.code for y, e in failures.items()},
        )
    return SeriesResult(results, failures)


@dataclass(frozen=True)
class PowerLawFit:
    c: float
    gamma: float
    r_squared: float
    n_points: int
    n_excluded: int = 0

    @property
    def regime(self) -> str:
        if self.gamma > 1:
            return "super-linear"
        if self.gamma < 1:
            return "sub-linear"
        return "linear"

    def predict(self, x):
        return self.c * np.power(x, self.gamma)


def fit_power_law(pairs: Sequence[tuple[float, float]]) -> PowerLawFit:
    """OLS of log Y on log X; pairs with a non-positive coordinate are dropped."""
    arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
    keep = (arr[:, 0] > 0) & (arr[:, 1] > 0) & np.isfinite(arr).all(axis=1)
    n_excluded = int((~keep).sum())
    lx, ly = np.log(arr[keep, 0]), np.log(arr[keep, 1])
    n = lx.size
    if n < 3:
        raise InsufficientData(f"need 3 positive pairs, have {n}", n_points=int(n), n_excluded=n_excluded)
    dx, dy = lx - lx.mean(), ly - ly.mean()
    sxx = float(dx @ dx)
    if sxx == 0:
        raise InsufficientData("all X values are equal", n_points=int(n), n_excluded=n_excluded)
    gamma = float(dx @ dy) / sxx
    intercept = float(ly.mean() - gamma * lx.mean())
    resid = dy - gamma * dx
    ssr, sst = float(resid @ resid), float(dy @ dy)
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    return PowerLawFit(math.exp(intercept), gamma, r2, int(n), n_excluded)


@dataclass(frozen=True)
class PowerLawEntry:
    x: Variable
    y: Variable
    fit: PowerLawFit | None
    error: TradeCurveError | None = None


def power_law_matrix(
    panel: Iterable, pairs: Sequence[tuple[Variable, Variable]] = POWER_LAW_PAIRS
) -> list[PowerLawEntry]:
    """One power-law fit per variable pair; a failing pair does not affect the rest."""
    obs = list(panel)
    out = []
    for xv, yv in pairs:
        data = [(getattr(o, xv.attr), getattr(o, yv.attr)) for o in obs]
        try:
            out.append(PowerLawEntry(xv, yv, fit_power_law(data)))
        except InsufficientData as exc:
            out.append(PowerLawEntry(xv, yv, None, exc))
    return out
