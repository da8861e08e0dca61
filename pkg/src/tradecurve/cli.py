"""Command-line frontend.

    tradecurve fit      --trades t.csv --gdp g.csv --year 1995 --variable export_goods
    tradecurve stages   --trades t.csv --gdp g.csv --year 1995
    tradecurve series   --trades t.csv --gdp g.csv --years 1971:2000
    tradecurve powerlaw --trades t.csv --gdp g.csv --year 1995 [--pair importers:export_goods]
    tradecurve profile  --trades t.csv --gdp g.csv --year 1995 [--entropy]

Exit status: 0 when every output was written, 1 on a data error (a JSON
error object goes to stderr), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

from tradecurve import report
from tradecurve.dynamics import (
    POWER_LAW_PAIRS,
    Variable,
    fit_panel,
    power_law_matrix,
    series_from_panels,
)
from tradecurve.errors import TradeCurveError
from tradecurve.ingest import (
    DEFAULT_TRADE_FORMAT,
    NBER_UN_FORMAT,
    LogBase,
    ParseReport,
    Panel,
    build_panels,
    iter_trade_flows,
    parse_crosswalk,
    parse_gdp_table,
)
from tradecurve.sigmoid_fit import FitOptions, LogisticParams, fit_diagnostics

log = logging.getLogger("tradecurve")

TRADE_FORMATS = {"default": DEFAULT_TRADE_FORMAT, "nber": NBER_UN_FORMAT}


def _year_range(token: str) -> range:
    try:
        if ":" in token:
            a, b = token.split(":", 1)
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(token)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid year range {token!r}; use A:B") from None
    if hi < lo:
        raise argparse.ArgumentTypeError(f"empty year range {token!r}")
    return range(lo, hi + 1)


def _init(token: str) -> LogisticParams:
    try:
        A, k, xm = (float(t) for t in token.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("--init expects A,k,XM") from None
    if A <= 0 or k <= 0:
        raise argparse.ArgumentTypeError("--init needs A > 0 and k > 0")
    return LogisticParams(A, k, xm)


def _pair(token: str) -> tuple[Variable, Variable]:
    try:
        a, b = token.split(":")
        return Variable.parse(a), Variable.parse(b)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid pair {token!r}: {exc}") from None


def _variable(token: str) -> Variable:
    try:
        return Variable.parse(token)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--trades", required=True, help="trade-flow CSV")
    common.add_argument("--gdp", required=True, help="GDP CSV (year,country,gdp)")
    common.add_argument("--crosswalk", help="CSV mapping trade codes to GDP codes (from,to)")
    common.add_argument("--trade-format", choices=sorted(TRADE_FORMATS), default="default")
    common.add_argument("--log-base", choices=["10", "e"], default="10")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    single = argparse.ArgumentParser(add_help=False)
    single.add_argument("--year", type=int, required=True)

    fitting = argparse.ArgumentParser(add_help=False)
    fitting.add_argument("--variable", type=_variable, default=Variable.EXPORT_GOODS)
    fitting.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=None)
    fitting.add_argument("--max-iter", type=int, default=200)
    fitting.add_argument("--tol", type=float, default=1e-10)
    fitting.add_argument("--init", type=_init, help="manual starting point A,k,XM")

    parser = argparse.ArgumentParser(prog="tradecurve", description="Export-diversity S-curve analysis")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("fit", parents=[common, single, fitting], help="fit one year's S-curve")
    sub.add_parser("stages", parents=[common, single, fitting], help="three-stage classification")
    p = sub.add_parser("series", parents=[common, fitting], help="fit a range of years")
    p.add_argument("--years", "--year", dest="years", type=_year_range, required=True, help="A:B inclusive")
    p = sub.add_parser("powerlaw", parents=[common, single], help="power laws between diversity variables")
    p.add_argument("--pair", type=_pair, action="append", help="X:Y, repeatable; default all six")
    p = sub.add_parser("profile", parents=[common, single], help="per-country diversity counts")
    p.add_argument("--entropy", action="store_true", help="include export-value Shannon entropy")
    return parser


class _Inputs:
    """Parsed inputs aggregated straight into per-year panels.

    Trade rows are streamed; only the per-country tallies are kept.
    """

    def __init__(self, args: argparse.Namespace, years: Iterable[int], *, entropy: bool = False):
        self.trade_report = ParseReport()
        self.gdp, self.gdp_report = parse_gdp_table(args.gdp)
        self.crosswalk = parse_crosswalk(args.crosswalk) if args.crosswalk else None
        self.log_base = LogBase.parse(args.log_base)
        flows = iter_trade_flows(args.trades, TRADE_FORMATS[args.trade_format], self.trade_report)
        self.panels = build_panels(flows, self.gdp, years, self.log_base, self.crosswalk, entropy=entropy)

    def panel(self, year: int) -> Panel:
        p = self.panels[year]
        if isinstance(p, TradeCurveError):
            raise p
        return p

    def parse_report(self, panels: Sequence[Any] = ()) -> str:
        payload: dict[str, Any] = {"trades": self.trade_report.to_dict(), "gdp": self.gdp_report.to_dict()}
        if panels:
            payload["panels"] = [
                {
                    "year": p.year,
                    "n_countries": len(p),
                    "excluded_no_gdp": list(p.excluded_no_gdp),
                    "excluded_no_trade": list(p.excluded_no_trade),
                    "dropped_self_flows": p.dropped_self_flows,
                }
                for p in panels
            ]
        return report.dumps(payload) + "\n"


def _options(args: argparse.Namespace) -> FitOptions:
    return FitOptions(max_iter=args.max_iter, tol=args.tol, init=args.init)


def cmd_fit(args: argparse.Namespace) -> dict[str, Any]:
    inputs = _Inputs(args, {args.year})
    panel = inputs.panel(args.year)
    result = fit_panel(panel, args.variable, bool(args.normalize), _options(args))
    diag = fit_diagnostics(result.fit, [(x, y) for _, x, y in result.points])
    record = report.yearly_record(result)
    record.update(
        n_points=result.fit.n_points,
        iterations=result.fit.iterations,
        converged=result.fit.converged,
        stage_counts=list(result.stages.as_tuple()),
        stage_mean_abs_residual={str(s): v for s, v in diag.stage_residuals.items()},
    )
    fitted = result.fit.predict([x for _, x, _ in result.points])
    out = Path(args.out)
    report.write_all(
        {
            out / "fit.json": report.dumps(record) + "\n",
            out / "fit_plot.tsv": report.delimited(
                ["country", "x", "y_observed", "y_fitted"],
                ((c, x, y, yf) for (c, x, y), yf in zip(result.points, fitted)),
                "\t",
            ),
            out / "parse_report.json": inputs.parse_report([panel]),
        }
    )
    return {"A": record["A"], "k": record["k"], "XM": record["XM"], "r2": record["r2"]}


def cmd_stages(args: argparse.Namespace) -> dict[str, Any]:
    inputs = _Inputs(args, {args.year})
    panel = inputs.panel(args.year)
    result = fit_panel(panel, args.variable, bool(args.normalize), _options(args))
    counts = result.stages
    summary = {
        "year": args.year,
        "variable": result.variable.value,
        "counts": list(counts.as_tuple()),
        "total": counts.total,
        "XL": result.cp.x_left,
        "XM": result.cp.x_mid,
        "XR": result.cp.x_right,
    }
    out = Path(args.out)
    report.write_all(
        {
            out / "stages.csv": report.stage_csv(args.year, counts),
            out / "stage_counts.json": report.dumps(summary) + "\n",
            out / "parse_report.json": inputs.parse_report([panel]),
        }
    )
    return summary


def cmd_series(args: argparse.Namespace) -> dict[str, Any]:
    inputs = _Inputs(args, set(args.years))
    normalize = True if args.normalize is None else args.normalize
    series = series_from_panels(inputs.panels, args.variable, normalize, _options(args))
    records = [report.yearly_record(r) for r in series]
    out = Path(args.out)
    report.write_all(
        {
            out / "series.json": report.dumps(records) + "\n",
            out / "fig2_r2.tsv": report.delimited(["year", "r2"], ((r["year"], r["r2"]) for r in records), "\t"),
            out / "fig3_params.tsv": report.delimited(
                ["year", "A", "k", "XM"], ((r["year"], r["A"], r["k"], r["XM"]) for r in records), "\t"
            ),
            out / "fig4_critical_points.tsv": report.delimited(
                ["year", "XL", "XM", "XR", "YL", "YM", "YR"],
                ((r["year"], r["XL"], r["XM"], r["XR"], r["YL"], r["YM"], r["YR"]) for r in records),
                "\t",
            ),
            out / "fig5_proportions.tsv": report.delimited(
                ["year", "initial", "acceleration", "final"],
                ((r["year"], *r["proportions"]) for r in records),
                "\t",
            ),
            out / "parse_report.json": inputs.parse_report([p for p in inputs.panels.values() if isinstance(p, Panel)]),
        }
    )
    return {
        "years_fitted": [r["year"] for r in records],
        "years_failed": {str(y): e.to_dict() for y, e in sorted(series.failures.items())},
    }


def cmd_powerlaw(args: argparse.Namespace) -> dict[str, Any]:
    inputs = _Inputs(args, {args.year})
    panel = inputs.panel(args.year)
    entries = power_law_matrix(panel, args.pair or POWER_LAW_PAIRS)
    records = [dict(year=args.year, **report.power_law_record(e)) for e in entries]
    out = Path(args.out)
    report.write_all(
        {
            out / "powerlaw.json": report.dumps(records) + "\n",
            out / "parse_report.json": inputs.parse_report([panel]),
        }
    )
    return {"pairs": len(records), "failed": sum("error" in r for r in records)}


def cmd_profile(args: argparse.Namespace) -> dict[str, Any]:
    inputs = _Inputs(args, {args.year}, entropy=args.entropy)
    panel = inputs.panel(args.year)
    header = ["country", "year", "log_gdp", "export_goods", "import_goods", "exporters", "importers"]
    if args.entropy:
        header.append("shannon_export")
    rows = []
    for o in panel:
        row = [o.country, o.year, o.log_gdp, o.export_goods, o.import_goods, o.exporter_partners, o.importer_partners]
        if args.entropy:
            row.append(float("nan") if o.shannon_export is None else o.shannon_export)
        rows.append(row)
    out = Path(args.out)
    report.write_all(
        {
            out / "profiles.csv": report.delimited(header, rows, ","),
            out / "parse_report.json": inputs.parse_report([panel]),
        }
    )
    return {"countries": len(rows)}


COMMANDS = {
    "fit": cmd_fit,
    "stages": cmd_stages,
    "series": cmd_series,
    "powerlaw": cmd_powerlaw,
    "profile": cmd_profile,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        summary = COMMANDS[args.command](args)
    except TradeCurveError as exc:
        sys.stderr.write(report.dumps(exc.to_dict()) + "\n")
        return 1
    sys.stdout.write(report.dumps(summary) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
