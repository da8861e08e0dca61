"""Parsing of trade-flow, GDP and crosswalk tables, and the country-year join.

Trade CSV (default layout)::

    year,exporter,importer,sitc,value,quantity
    1995,USA,JPN,7810,125000,40

GDP CSV::

    year,country,gdp
    1995,CHN,7.28e11

Crosswalk CSV (trade-data code -> GDP-table code)::

    from,to
    Fm USSR,SUN

Row-level problems never abort a parse; they are tallied in a
:class:`ParseReport`. Structural problems (missing file, wrong header,
duplicate GDP keys) raise.
"""

from __future__ import annotations

import csv
import io
import math
import os
import sys
from collections import Counter
from collections.abc import Iterable, Iterator, Mapping, Sequence
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Any, NamedTuple, Union

from tradecurve import diversity
from tradecurve.errors import DuplicateKey, EmptyPanel, SchemaMismatch, UnreadableSource

Source = Union[str, "os.PathLike[str]", IO[str]]

MAX_BAD_SAMPLES = 20
_MISSING_TOKENS = frozenset({"", "NA", "na", "N/A", ".", ".."})


class TradeFlow(NamedTuple):
    year: int
    exporter: str
    importer: str
    category: str
    value: float
    quantity: float | None = None


@dataclass(frozen=True, slots=True)
class GdpRecord:
    year: int
    country: str
    gdp: float


@dataclass(frozen=True, slots=True)
class CountryObservation:
    country: str
    year: int
    log_gdp: float
    export_goods: int
    import_goods: int
    exporter_partners: int
    importer_partners: int
    shannon_export: float | None = None


@dataclass(frozen=True)
class TradeFileFormat:
    """Declared column layout of a trade file.

    With ``strict`` the header must equal the declared columns exactly (same
    order, nothing extra). Otherwise the declared columns only need to be
    present, which suits wide distribution files such as the NBER-UN extracts.
    """

    year: str = "year"
    exporter: str = "exporter"
    importer: str = "importer"
    category: str = "sitc"
    value: str = "value"
    quantity: str | None = "quantity"
    strict: bool = True
    year_range: tuple[int, int] = (1900, 2100)
    delimiter: str = ","

    @property
    def columns(self) -> list[str]:
        cols = [self.year, self.exporter, self.importer, self.category, self.value]
        if self.quantity is not None:
            cols.append(self.quantity)
        return cols


DEFAULT_TRADE_FORMAT = TradeFileFormat()
# NBER-UN world trade flow files: year,icode,importer,ecode,exporter,sitc4,unit,dot,value,quantity
NBER_UN_FORMAT = TradeFileFormat(category="sitc4", strict=False)


class LogBase(str, Enum):
    TEN = "10"
    NATURAL = "e"

    @classmethod
    def parse(cls, token: str | LogBase) -> LogBase:
        if isinstance(token, LogBase):
            return token
        aliases = {"10": cls.TEN, "ten": cls.TEN, "e": cls.NATURAL, "natural": cls.NATURAL, "ln": cls.NATURAL}
        try:
            return aliases[str(token).strip().lower()]
        except KeyError:
            raise ValueError(f"unknown log base {token!r}; expected 10 or e") from None

    def log(self, value: float) -> float:
        return math.log10(value) if self is LogBase.TEN else math.log(value)


@dataclass
class ParseReport:
    """Row accounting for one parsed file."""

    rows_total: int = 0
    rows_bad: int = 0
    bad_samples: list[dict[str, Any]] = field(default_factory=list)
    reasons: Counter = field(default_factory=Counter)

    def bad(self, line: int, reason: str, raw: Sequence[str]) -> None:
        self.rows_bad += 1
        self.reasons[reason] += 1
        if len(self.bad_samples) < MAX_BAD_SAMPLES:
            self.bad_samples.append(
                {"error": "MalformedRow", "line": line, "reason": reason, "row": list(raw)}
            )

    @property
    def self_flows(self) -> int:
        return self.reasons.get(_SELF_FLOW, 0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "rows_total": self.rows_total,
            "rows_bad": self.rows_bad,
            "bad_samples": list(self.bad_samples),
            "reasons": dict(sorted(self.reasons.items())),
        }


_SELF_FLOW = "exporter equals importer"


class _BadRow(ValueError):
    pass


@contextmanager
def _open_text(source: Source) -> Iterator[IO[str]]:
    if hasattr(source, "read"):
        yield source  # type: ignore[misc]
        return
    try:
        fh = open(source, encoding="utf-8-sig", newline="")  # type: ignore[arg-type]
    except OSError as exc:
        raise UnreadableSource(f"cannot open {os.fspath(source)!s}: {exc.strerror}", path=os.fspath(source)) from exc
    with fh:
        yield fh


def _rows(fh: IO[str], delimiter: str) -> Iterator[list[str]]:
    reader = csv.reader(fh, delimiter=delimiter)
    try:
        yield from reader
    except (UnicodeDecodeError, csv.Error) as exc:
        raise UnreadableSource(f"unreadable input near line {reader.line_num}: {exc}") from exc


def _header_index(header: list[str] | None, declared: list[str], strict: bool) -> dict[str, int]:
    if header is None:
        raise SchemaMismatch("input is empty; expected a header", expected=declared)
    header = [h.strip().lstrip("﻿") for h in header]
    if strict and header != declared:
        raise SchemaMismatch(f"header {header} does not match {declared}", expected=declared, found=header)
    missing = [c for c in declared if c not in header]
    if missing:
        raise SchemaMismatch(f"header lacks columns {missing}", expected=declared, found=header)
    return {name: header.index(name) for name in declared}


def _parse_year(token: str, year_range: tuple[int, int]) -> int:
    try:
        year = int(token.strip())
    except ValueError:
        raise _BadRow(f"year {token!r} is not an integer") from None
    if not year_range[0] <= year <= year_range[1]:
        raise _BadRow(f"year {year} outside {year_range[0]}..{year_range[1]}")
    return year


def _parse_number(token: str, name: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise _BadRow(f"{name} {token!r} is not a number") from None
    if not math.isfinite(value):
        raise _BadRow(f"{name} {token!r} is not finite")
    return value


def _token(token: str, name: str) -> str:
    token = token.strip()
    if not token:
        raise _BadRow(f"{name} is empty")
    return token


def iter_trade_flows(
    source: Source, fmt: TradeFileFormat = DEFAULT_TRADE_FORMAT, report: ParseReport | None = None
) -> Iterator[TradeFlow]:
    """Stream :class:`TradeFlow` records, tallying bad rows into ``report``."""
    report = report if report is not None else ParseReport()
    with _open_text(source) as fh:
        rows = _rows(fh, fmt.delimiter)
        idx = _header_index(next(rows, None), fmt.columns, fmt.strict)
        width = len(fmt.columns) if fmt.strict else max(idx.values()) + 1
        i_year, i_exp, i_imp = idx[fmt.year], idx[fmt.exporter], idx[fmt.importer]
        i_cat, i_val = idx[fmt.category], idx[fmt.value]
        i_qty = idx[fmt.quantity] if fmt.quantity is not None else None

        ylo, yhi = fmt.year_range
        strict = fmt.strict
        intern = sys.intern
        for line, row in enumerate(rows, start=2):
            if not row:
                continue
            report.rows_total += 1
            # fast path for clean rows; anything unusual goes through the validator
            if len(row) == width or (not strict and len(row) > width):
                try:
                    year, value = int(row[i_year]), float(row[i_val])
                except ValueError:
                    year, value = 0, -1.0
                exporter, importer, category = row[i_exp].strip(), row[i_imp].strip(), row[i_cat].strip()
                quantity = None
                if i_qty is not None:
                    q = row[i_qty].strip()
                    if q not in _MISSING_TOKENS:
                        try:
                            quantity = float(q)
                        except ValueError:
                            quantity = -1.0
                if (
                    ylo <= year <= yhi
                    and 0.0 <= value < math.inf
                    and exporter
                    and importer
                    and category
                    and exporter != importer
                    and (quantity is None or 0.0 <= quantity < math.inf)
                ):
                    yield TradeFlow(year, intern(exporter), intern(importer), intern(category), value, quantity)
                    continue
            try:
                flow = _validate_trade_row(row, width, fmt, idx)
            except _BadRow as exc:
                report.bad(line, str(exc), row)
                continue
            yield flow._replace(
                exporter=intern(flow.exporter), importer=intern(flow.importer), category=intern(flow.category)
            )


def _validate_trade_row(row: list[str], width: int, fmt: TradeFileFormat, idx: dict[str, int]) -> TradeFlow:
    if len(row) < width or (fmt.strict and len(row) != width):
        raise _BadRow(f"expected {width} fields, got {len(row)}")
    exporter = _token(row[idx[fmt.exporter]], "exporter")
    importer = _token(row[idx[fmt.importer]], "importer")
    if exporter == importer:
        raise _BadRow(_SELF_FLOW)
    value = _parse_number(row[idx[fmt.value]], "value")
    if value < 0:
        raise _BadRow(f"value {value} is negative")
    quantity = None
    if fmt.quantity is not None and row[idx[fmt.quantity]].strip() not in _MISSING_TOKENS:
        quantity = _parse_number(row[idx[fmt.quantity]], "quantity")
        if quantity < 0:
            raise _BadRow(f"quantity {quantity} is negative")
    return TradeFlow(
        year=_parse_year(row[idx[fmt.year]], fmt.year_range),
        exporter=exporter,
        importer=importer,
        category=_token(row[idx[fmt.category]], "category"),
        value=value,
        quantity=quantity,
    )


def parse_trade_flows(
    source: Source, fmt: TradeFileFormat = DEFAULT_TRADE_FORMAT
) -> tuple[list[TradeFlow], ParseReport]:
    report = ParseReport()
    flows = list(iter_trade_flows(source, fmt, report))
    return flows, report


def parse_gdp_table(source: Source, year_range: tuple[int, int] = (1900, 2100)) -> tuple[list[GdpRecord], ParseReport]:
    """Parse a long-format ``year,country,gdp`` table (GDP in current USD).

    Raises :class:`DuplicateKey` on the first repeated ``(year, country)``.
    """
    report = ParseReport()
    records: list[GdpRecord] = []
    seen: dict[tuple[int, str], int] = {}
    with _open_text(source) as fh:
        rows = _rows(fh, ",")
        _header_index(next(rows, None), ["year", "country", "gdp"], strict=True)
        for line, row in enumerate(rows, start=2):
            if not row:
                continue
            report.rows_total += 1
            try:
                if len(row) != 3:
                    raise _BadRow(f"expected 3 fields, got {len(row)}")
                year = _parse_year(row[0], year_range)
                country = _token(row[1], "country")
                if row[2].strip() in _MISSING_TOKENS:
                    raise _BadRow("gdp is missing")
                gdp = _parse_number(row[2], "gdp")
                if gdp <= 0:
                    raise _BadRow(f"gdp {gdp} is not positive")
            except _BadRow as exc:
                report.bad(line, str(exc), row)
                continue
            key = (year, country)
            if key in seen:
                raise DuplicateKey(
                    f"duplicate GDP row for ({year}, {country}) at lines {seen[key]} and {line}",
                    year=year,
                    country=country,
                )
            seen[key] = line
            records.append(GdpRecord(year, country, gdp))
    return records, report


def parse_crosswalk(source: Source) -> dict[str, str]:
    mapping: dict[str, str] = {}
    with _open_text(source) as fh:
        rows = _rows(fh, ",")
        _header_index(next(rows, None), ["from", "to"], strict=True)
        for line, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != 2 or not row[0].strip() or not row[1].strip():
                raise SchemaMismatch(f"crosswalk line {line} must have two non-empty fields", line=line)
            src, dst = row[0].strip(), row[1].strip()
            if mapping.get(src, dst) != dst:
                raise DuplicateKey(f"crosswalk maps {src!r} to both {mapping[src]!r} and {dst!r}", code=src)
            mapping[src] = dst
    return mapping


@dataclass(frozen=True)
class Panel(Sequence[CountryObservation]):
    """Observations for one year, ordered by country code.

    ``excluded_no_gdp`` lists trading countries dropped for lack of a GDP
    record (after crosswalk mapping); ``excluded_no_trade`` the reverse.
    """

    year: int
    observations: tuple[CountryObservation, ...]
    excluded_no_gdp: tuple[str, ...] = ()
    excluded_no_trade: tuple[str, ...] = ()
    dropped_self_flows: int = 0

    def __len__(self) -> int:
        return len(self.observations)

    def __getitem__(self, i):  # type: ignore[override]
        return self.observations[i]

    def __iter__(self) -> Iterator[CountryObservation]:
        return iter(self.observations)

    def values(self, attr: str) -> list[float]:
        return [getattr(o, attr) for o in self.observations]


def remap_flows(
    trades: Iterable[TradeFlow],
    years: int | Iterable[int],
    crosswalk: Mapping[str, str] | None,
    dropped: Counter | None = None,
) -> Iterator[TradeFlow]:
    """Flows of the given year(s) with codes renamed through ``crosswalk``.

    Flows that become self-flows after renaming are skipped and counted per
    year in ``dropped``.
    """
    wanted = {years} if isinstance(years, int) else set(years)
    dropped = dropped if dropped is not None else Counter()
    for f in trades:
        if f.year not in wanted:
            continue
        if not crosswalk:
            yield f
            continue
        exp = crosswalk.get(f.exporter, f.exporter)
        imp = crosswalk.get(f.importer, f.importer)
        if exp == imp:
            dropped[f.year] += 1
            continue
        yield f if (exp is f.exporter and imp is f.importer) else f._replace(exporter=exp, importer=imp)


def assemble_panel(
    profiles: Mapping[str, diversity.DiversityProfile],
    gdp_by_country: Mapping[str, float],
    year: int,
    log_base: LogBase | str = LogBase.TEN,
    dropped_self_flows: int = 0,
) -> Panel:
    """Join one year's diversity profiles with GDP; raises :class:`EmptyPanel`."""
    base = LogBase.parse(log_base)
    observations = []
    for country in sorted(profiles.keys() & gdp_by_country.keys()):
        p = profiles[country]
        observations.append(
            CountryObservation(
                country=country,
                year=year,
                log_gdp=base.log(gdp_by_country[country]),
                export_goods=p.export_goods,
                import_goods=p.import_goods,
                exporter_partners=p.exporter_partners,
                importer_partners=p.importer_partners,
                shannon_export=p.shannon_export,
            )
        )
    if not observations:
        raise EmptyPanel(f"no country has both trade flows and GDP in {year}", year=year)
    return Panel(
        year=year,
        observations=tuple(observations),
        excluded_no_gdp=tuple(sorted(profiles.keys() - gdp_by_country.keys())),
        excluded_no_trade=tuple(sorted(gdp_by_country.keys() - profiles.keys())),
        dropped_self_flows=dropped_self_flows,
    )


def build_panel(
    trades: Iterable[TradeFlow],
    gdp: Iterable[GdpRecord],
    year: int,
    log_base: LogBase | str = LogBase.TEN,
    crosswalk: Mapping[str, str] | None = None,
    *,
    entropy: bool = False,
) -> Panel:
    """Join one year's diversity counts with log GDP.

    A country is kept only when it appears in at least one flow that year
    and has a GDP record. Crosswalk entries rename trade-data codes to
    GDP-table codes before counting.
    """
    result = build_panels(trades, gdp, [year], log_base, crosswalk, entropy=entropy)[year]
    if isinstance(result, EmptyPanel):
        raise result
    return result


def build_panels(
    trades: Iterable[TradeFlow],
    gdp: Iterable[GdpRecord],
    years: Iterable[int],
    log_base: LogBase | str = LogBase.TEN,
    crosswalk: Mapping[str, str] | None = None,
    *,
    entropy: bool = False,
) -> dict[int, Panel | EmptyPanel]:
    """Panels for several years from a single pass over ``trades``.

    ``trades`` may be a one-shot stream (e.g. :func:`iter_trade_flows`), so
    a multi-decade extract never has to be held in memory. Years without a
    panel map to the :class:`EmptyPanel` error instead of raising.
    """
    years = sorted(set(years))
    dropped: Counter = Counter()
    by_year = diversity.profiles_by_year(remap_flows(trades, years, crosswalk, dropped), years, entropy=entropy)
    gdp_by_year: dict[int, dict[str, float]] = {y: {} for y in years}
    for r in gdp:
        if r.year in gdp_by_year:
            gdp_by_year[r.year][r.country] = r.gdp
    out: dict[int, Panel | EmptyPanel] = {}
    for y in years:
        try:
            out[y] = assemble_panel(by_year.get(y, {}), gdp_by_year[y], y, log_base, dropped[y])
        except EmptyPanel as exc:
            out[y] = exc
    return out


def read_text(text: str) -> IO[str]:
    """Wrap literal CSV text as a stream, mostly for tests and notebooks."""
    return io.StringIO(text)
