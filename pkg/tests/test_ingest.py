import csv
import io
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tradecurve.errors import DuplicateKey, EmptyPanel, SchemaMismatch, UnreadableSource
from tradecurve.ingest import (
    NBER_UN_FORMAT,
    GdpRecord,
    LogBase,
    TradeFileFormat,
    TradeFlow,
    build_panel,
    build_panels,
    parse_crosswalk,
    parse_gdp_table,
    parse_trade_flows,
)

HEADER = "year,exporter,importer,sitc,value,quantity\n"


def test_trade_row_maps_fields():
    flows, report = parse_trade_flows(io.StringIO(HEADER + "1995,USA,JPN,7810,125000,40\n"))
    assert flows == [TradeFlow(1995, "USA", "JPN", "7810", 125000, 40)]
    assert report.rows_total == 1 and report.rows_bad == 0


def test_category_keeps_leading_zeros_and_empty_quantity():
    flows, _ = parse_trade_flows(io.StringIO(HEADER + "1995,USA,JPN,0011,5,\n"))
    assert flows[0].category == "0011"
    assert flows[0].quantity is None


def test_negative_value_is_reported_and_skipped():
    text = HEADER + "1995,USA,JPN,7810,-5,1\n1995,USA,CAN,7810,3,1\n"
    flows, report = parse_trade_flows(io.StringIO(text))
    assert [f.importer for f in flows] == ["CAN"]
    assert report.rows_bad == 1
    assert report.bad_samples[0]["line"] == 2
    assert "negative" in report.bad_samples[0]["reason"]


def test_empty_file_with_header():
    flows, report = parse_trade_flows(io.StringIO(HEADER))
    assert flows == []
    assert report.rows_bad == 0


@pytest.mark.parametrize(
    "row, reason",
    [
        ("1995,USA,USA,7810,5,1", "exporter equals importer"),
        ("abc,USA,JPN,7810,5,1", "not an integer"),
        ("1995,USA,JPN,7810,lots,1", "not a number"),
        ("1995,USA,JPN,7810,nan,1", "not finite"),
        ("1995,,JPN,7810,5,1", "exporter is empty"),
        ("1995,USA,JPN,7810,5", "expected 6 fields"),
        ("2500,USA,JPN,7810,5,1", "outside"),
        ("1995,USA,JPN,7810,5,-1", "quantity"),
    ],
)
def test_malformed_rows(row, reason):
    flows, report = parse_trade_flows(io.StringIO(HEADER + row + "\n"))
    assert flows == []
    assert report.rows_bad == 1
    assert reason in report.bad_samples[0]["reason"]


def test_self_flows_are_counted():
    _, report = parse_trade_flows(io.StringIO(HEADER + "1995,USA,USA,1,1,\n1995,JPN,JPN,1,1,\n"))
    assert report.self_flows == 2


def test_report_json_shape():
    _, report = parse_trade_flows(io.StringIO(HEADER + "1995,USA,JPN,1,-1,\n"))
    d = report.to_dict()
    assert {"rows_total", "rows_bad", "bad_samples"} <= d.keys()
    assert d["rows_total"] == 1 and d["rows_bad"] == 1


def test_schema_mismatch():
    with pytest.raises(SchemaMismatch):
        parse_trade_flows(io.StringIO("year,from,to,sitc,value,quantity\n"))
    with pytest.raises(SchemaMismatch):
        parse_trade_flows(io.StringIO(""))


def test_nber_layout_reads_declared_columns_only():
    text = "year,icode,importer,ecode,exporter,sitc4,unit,dot,value,quantity\n1995,1,Japan,2,USA,7810,N,1,125000,\n"
    flows, _ = parse_trade_flows(io.StringIO(text), NBER_UN_FORMAT)
    assert flows == [TradeFlow(1995, "USA", "Japan", "7810", 125000.0, None)]


def test_unreadable_path(tmp_path):
    with pytest.raises(UnreadableSource):
        parse_trade_flows(tmp_path / "missing.csv")


def test_undecodable_bytes(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_bytes(HEADER.encode() + b"1995,US\xff\xfe,JPN,1,1,\n")
    with pytest.raises(UnreadableSource):
        parse_trade_flows(p)


def test_gdp_row():
    recs, report = parse_gdp_table(io.StringIO("year,country,gdp\n1995,CHN,7.28e11\n"))
    assert recs == [GdpRecord(1995, "CHN", 7.28e11)]
    assert report.rows_bad == 0


@pytest.mark.parametrize("value", ["0", "-3", "..", ""])
def test_gdp_non_positive_or_missing(value):
    recs, report = parse_gdp_table(io.StringIO(f"year,country,gdp\n1995,CHN,{value}\n"))
    assert recs == [] and report.rows_bad == 1


def test_gdp_duplicate_key_names_pair():
    with pytest.raises(DuplicateKey) as err:
        parse_gdp_table(io.StringIO("year,country,gdp\n1995,CHN,1\n1995,CHN,2\n"))
    assert err.value.details == {"year": 1995, "country": "CHN"}
    assert "CHN" in str(err.value)


def test_crosswalk(tmp_path):
    assert parse_crosswalk(io.StringIO("from,to\nJapan,JPN\n")) == {"Japan": "JPN"}
    with pytest.raises(DuplicateKey):
        parse_crosswalk(io.StringIO("from,to\nJapan,JPN\nJapan,JAP\n"))


def _flows():
    return [
        TradeFlow(1995, "USA", "JPN", "7810", 10.0),
        TradeFlow(1995, "USA", "JPN", "7810", 20.0),
        TradeFlow(1995, "JPN", "USA", "0011", 5.0),
        TradeFlow(1995, "FRA", "USA", "0011", 5.0),
        TradeFlow(1996, "USA", "FRA", "9999", 5.0),
    ]


def _gdp():
    return [GdpRecord(1995, "USA", 1e13), GdpRecord(1995, "JPN", 5e12), GdpRecord(1995, "DEU", 2e12)]


def test_panel_excludes_countries_missing_either_source():
    panel = build_panel(_flows(), _gdp(), 1995)
    assert [o.country for o in panel] == ["JPN", "USA"]
    assert panel.excluded_no_gdp == ("FRA",)
    assert panel.excluded_no_trade == ("DEU",)


def test_panel_counts_and_log_base():
    usa = build_panel(_flows(), _gdp(), 1995)[1]
    assert usa.export_goods == 1  # 7810 twice
    assert usa.importer_partners == 2
    assert usa.log_gdp == pytest.approx(13.0)
    ln = build_panel(_flows(), _gdp(), 1995, LogBase.NATURAL)[1]
    assert ln.log_gdp == pytest.approx(math.log(1e13))


def test_panel_crosswalk_renames_trade_codes():
    flows = [TradeFlow(1995, "Japan", "USA", "1", 1.0)]
    panel = build_panel(flows, _gdp(), 1995, crosswalk={"Japan": "JPN"})
    assert [o.country for o in panel] == ["JPN", "USA"]


def test_crosswalk_merging_to_self_flow_is_dropped():
    flows = [TradeFlow(1995, "FRG", "DEU", "1", 1.0), TradeFlow(1995, "DEU", "USA", "1", 1.0)]
    panel = build_panel(flows, _gdp(), 1995, crosswalk={"FRG": "DEU"})
    assert panel.dropped_self_flows == 1
    assert next(o for o in panel if o.country == "DEU").exporter_partners == 1


def test_empty_panel():
    with pytest.raises(EmptyPanel):
        build_panel(_flows(), _gdp(), 1980)


def test_panel_invariant_to_row_order():
    flows, gdp = _flows(), _gdp()
    ref = build_panel(flows, gdp, 1995)
    rng = random.Random(3)
    for _ in range(10):
        rng.shuffle(flows)
        rng.shuffle(gdp)
        assert build_panel(flows, gdp, 1995) == ref


def test_panel_bounds():
    flows, gdp = _flows(), _gdp()
    panel = build_panel(flows, gdp, 1995)
    cats = {f.category for f in flows if f.year == 1995}
    assert all(o.export_goods <= len(cats) for o in panel)
    trade_countries = {c for f in flows if f.year == 1995 for c in (f.exporter, f.importer)}
    assert len(panel) <= min(len(trade_countries), len({g.country for g in gdp}))


_TOKENS = ["1995", " 1996 ", "1899", "x", "", "USA", "JPN", " USA", "0011", "5", "-1", "0", "-0.0", "1e3",
           "nan", "inf", "NA", ".", "..", "2.5", "12"]


def _reference_parse(text, fmt):
    # every row through the validator, no fast path
    from tradecurve import ingest

    rows = list(csv.reader(io.StringIO(text)))
    idx = ingest._header_index(rows[0], fmt.columns, fmt.strict)
    width = len(fmt.columns) if fmt.strict else max(idx.values()) + 1
    flows, bad = [], []
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            flows.append(ingest._validate_trade_row(row, width, fmt, idx))
        except ingest._BadRow as exc:
            bad.append((line, str(exc)))
    return flows, bad


@settings(max_examples=200, deadline=None)
@given(st.lists(st.lists(st.sampled_from(_TOKENS), min_size=4, max_size=8), max_size=30), st.booleans())
def test_fast_path_matches_validator(rows, strict):
    fmt = TradeFileFormat(strict=strict)
    text = HEADER + "".join(",".join(r) + "\n" for r in rows)
    flows, report = parse_trade_flows(io.StringIO(text), fmt)
    want_flows, want_bad = _reference_parse(text, fmt)
    assert flows == want_flows
    assert [(s["line"], s["reason"]) for s in report.bad_samples] == want_bad[:20]
    assert report.rows_bad == len(want_bad)


def test_build_panels_matches_build_panel():
    from conftest import synthetic_world

    trades, gdp = synthetic_world(years=(1994, 1995, 1996), jitter=3.0)
    trades.append(TradeFlow(1995, "C001", "C002", "9999", 0.0))
    cw = {"C003": "C004"}
    panels = build_panels(iter(trades), gdp, [1993, 1994, 1995, 1996], crosswalk=cw)
    assert isinstance(panels[1993], EmptyPanel)
    for y in (1994, 1995, 1996):
        assert panels[y] == build_panel(trades, gdp, y, crosswalk=cw)
