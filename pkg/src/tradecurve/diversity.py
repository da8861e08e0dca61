"""Diversity measures of a country's trade in one year.

Counts are distinct-set sizes over flows with strictly positive value; a
zero-value line is treated as a reporting artifact rather than trade.
"""

from __future__ import annotations

import math
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from tradecurve.errors import DegenerateRange, NoExports

if TYPE_CHECKING:
    from tradecurve.ingest import TradeFlow


@dataclass(frozen=True, slots=True)
class DiversityProfile:
    country: str
    year: int
    export_goods: int = 0
    import_goods: int = 0
    exporter_partners: int = 0
    importer_partners: int = 0
    shannon_export: float | None = None


@dataclass(slots=True)
class _Tally:
    export_goods: set = field(default_factory=set)
    import_goods: set = field(default_factory=set)
    destinations: set = field(default_factory=set)
    sources: set = field(default_factory=set)
    export_value: dict = field(default_factory=lambda: defaultdict(float))


def profiles_by_year(
    trades: Iterable[TradeFlow], years: Iterable[int] | None = None, *, entropy: bool = False
) -> dict[int, dict[str, DiversityProfile]]:
    """Profiles of every country appearing in each year's flows, in one pass.

    A country seen only in zero-value flows still gets an (all-zero) profile.
    ``shannon_export`` is filled only when ``entropy`` is set and the
    country has positive exports. ``years=None`` keeps every year.
    """
    wanted = None if years is None else set(years)
    tallies: dict[tuple[int, str], _Tally] = {}
    get = tallies.get
    for year, exporter, importer, category, value, *_ in trades:
        if wanted is not None and year not in wanted:
            continue
        exp = get((year, exporter))
        if exp is None:
            exp = tallies[year, exporter] = _Tally()
        imp = get((year, importer))
        if imp is None:
            imp = tallies[year, importer] = _Tally()
        if value <= 0:
            continue
        exp.export_goods.add(category)
        exp.destinations.add(importer)
        imp.import_goods.add(category)
        imp.sources.add(exporter)
        if entropy:
            exp.export_value[category] += value

    out: dict[int, dict[str, DiversityProfile]] = {}
    for (year, country), t in tallies.items():
        h = _entropy(t.export_value.values()) if entropy and t.export_value else None
        out.setdefault(year, {})[country] = DiversityProfile(
            country=country,
            year=year,
            export_goods=len(t.export_goods),
            import_goods=len(t.import_goods),
            exporter_partners=len(t.destinations),
            importer_partners=len(t.sources),
            shannon_export=h,
        )
    return out


def profiles(trades: Iterable[TradeFlow], year: int, *, entropy: bool = False) -> dict[str, DiversityProfile]:
    return profiles_by_year(trades, [year], entropy=entropy).get(year, {})


def profile(trades: Iterable[TradeFlow], country: str, year: int, *, entropy: bool = False) -> DiversityProfile:
    relevant = (f for f in trades if f.exporter == country or f.importer == country)
    found = profiles(relevant, year, entropy=entropy).get(country)
    return found if found is not None else DiversityProfile(country, year)


def _entropy(values: Iterable[float]) -> float:
    vals = [v for v in values if v > 0]
    total = math.fsum(vals)
    h = -math.fsum((v / total) * math.log(v / total) for v in vals)
    return max(h, 0.0)


def shannon_entropy(trades: Iterable[TradeFlow], country: str, year: int) -> float:
    """Entropy (nats) of the country's export-value shares across categories."""
    by_category: dict[str, float] = defaultdict(float)
    for f in trades:
        if f.year == year and f.exporter == country and f.value > 0:
            by_category[f.category] += f.value
    if not by_category:
        raise NoExports(f"{country} has no positive exports in {year}", country=country, year=year)
    return _entropy(by_category.values())


def normalize(values: Sequence[float]) -> np.ndarray:
    """Min-max rescale to [0, 1]: min maps to 0, max to 1."""
    v = np.asarray(values, dtype=float)
    lo, hi = (float(v.min()), float(v.max())) if v.size else (0.0, 0.0)
    if hi == lo:
        raise DegenerateRange("min-max normalization needs at least two distinct values", value=lo)
    return (v - lo) / (hi - lo)
