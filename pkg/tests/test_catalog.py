import lzma
import statistics
import zipfile

import pytest
from hypothesis import given, strategies as st

from mcp_risk.catalog import (
    AttackPatternRecord,
    CweCapecPair,
    Flag,
    ManualOverride,
    OrdinalLikelihood,
    OrdinalSeverity,
    WeaknessRecord,
    apply_manual_overrides,
    build_pairs,
    catalog_stats,
    catalog_version,
    compute_cwe_risk_index,
    default_overrides,
    format_risk_table,
    parse_capec_catalog,
    parse_cwe_catalog,
    parse_overrides,
    read_catalog_bytes,
    read_risk_table,
)
from mcp_risk.catalog.model import Consequence
from mcp_risk.catalog.stats import distribution
from mcp_risk.errors import ConfigError, IntegrityError, ParseError, ScoringError

from conftest import CWE_414

NS = 'xmlns="http://cwe.mitre.org/cwe-7"'


def cwe_doc(body: str) -> bytes:
    return f'<Weakness_Catalog {NS} Name="CWE" Version="t"><Weaknesses>{body}</Weaknesses></Weakness_Catalog>'.encode()


def capec_doc(body: str) -> bytes:
    return (f'<Attack_Pattern_Catalog xmlns="http://capec.mitre.org/capec-3" Name="CAPEC" Version="t">'
            f'<Attack_Patterns>{body}</Attack_Patterns></Attack_Pattern_Catalog>').encode()


def w(cwe_id, le=None, mi=1, cc=1, capecs=()):
    return WeaknessRecord(
        cwe_id=cwe_id, name=f"w{cwe_id}",
        likelihood_of_exploit=None if le is None else OrdinalLikelihood(le),
        modes_of_introduction=("Implementation",) * mi,
        consequence_entries=tuple(Consequence(("Integrity",), ("Other",)) for _ in range(cc)),
        related_capec_ids=tuple(capecs),
    )


def p(capec_id, la=None, ts=None, cwes=()):
    return AttackPatternRecord(
        capec_id=capec_id, name=f"p{capec_id}",
        likelihood_of_attack=None if la is None else OrdinalLikelihood(la),
        typical_severity=None if ts is None else OrdinalSeverity(ts),
        related_cwe_ids=tuple(cwes),
    )


# parsing

def test_two_weaknesses_one_without_le():
    doc = cwe_doc(
        '<Weakness ID="1" Name="a"><Likelihood_Of_Exploit>High</Likelihood_Of_Exploit></Weakness>'
        '<Weakness ID="2" Name="b"/>'
    )
    recs = parse_cwe_catalog(doc)
    assert [r.cwe_id for r in recs] == [1, 2]
    assert recs[0].likelihood_of_exploit is OrdinalLikelihood.HIGH
    assert recs[1].likelihood_of_exploit is None


def test_pattern_without_la_and_ts():
    recs = parse_capec_catalog(capec_doc('<Attack_Pattern ID="7" Name="x"/>'))
    assert len(recs) == 1
    assert recs[0].likelihood_of_attack is None and recs[0].typical_severity is None


def test_malformed_xml_reports_position():
    with pytest.raises(ParseError) as exc:
        parse_cwe_catalog(b"<Weakness_Catalog>\n<Weaknesses>\n<Weakness ID='1'>\n</Weaknesses>")
    assert exc.value.line == 4
    assert "line 4" in str(exc.value)


def test_wrong_root_rejected():
    with pytest.raises(ParseError, match="Weakness_Catalog"):
        parse_cwe_catalog(capec_doc(""))


def test_duplicate_ids_are_integrity_errors():
    with pytest.raises(IntegrityError):
        parse_cwe_catalog(cwe_doc('<Weakness ID="5" Name="a"/><Weakness ID="5" Name="b"/>'))
    with pytest.raises(IntegrityError):
        parse_capec_catalog(capec_doc('<Attack_Pattern ID="5" Name="a"/><Attack_Pattern ID="5" Name="b"/>'))


def test_unknown_ordinal_label_is_parse_error():
    with pytest.raises(ParseError, match="CWE-3"):
        parse_cwe_catalog(cwe_doc(
            '<Weakness ID="3" Name="a"><Likelihood_Of_Exploit>Huge</Likelihood_Of_Exploit></Weakness>'))


def test_fixture_catalog_fields(cwe_fixture_bytes, capec_fixture_bytes):
    recs = {r.cwe_id: r for r in parse_cwe_catalog(cwe_fixture_bytes, scope="all")}
    r78 = recs[78]
    assert r78.mi_count == 2 and r78.cc_count == 2 and r78.impact_count == 2
    assert r78.related_capec_ids == (88,)
    assert recs[732].impact_count == 5 and recs[732].cc_count == 3
    pats = {p.capec_id: p for p in parse_capec_catalog(capec_fixture_bytes)}
    assert pats[66].typical_severity is OrdinalSeverity.HIGH
    assert pats[999].deprecated and pats[999].name.startswith("DEPRECATED:")
    assert catalog_version(cwe_fixture_bytes) == "CWE fixture-1.0"


def test_scopes(cwe_fixture_bytes):
    ids = lambda scope: {r.cwe_id for r in parse_cwe_catalog(cwe_fixture_bytes, scope=scope)}
    assert ids("software-development") == {22, 78, 79, 89, 306, 476, 639, 1333}
    # classes outside the view still get scored; hardware-only and deprecated do not
    assert ids("scoring") == ids("all") - {1234, 100}
    assert {862, 732, 200} <= ids("scoring")
    with pytest.raises(ValueError):
        parse_cwe_catalog(cwe_fixture_bytes, scope="web")


def test_read_catalog_bytes_archives(tmp_path, cwe_fixture_bytes):
    z = tmp_path / "c.xml.zip"
    with zipfile.ZipFile(z, "w") as zf:
        zf.writestr("cwec.xml", cwe_fixture_bytes)
    x = tmp_path / "c.xml.xz"
    x.write_bytes(lzma.compress(cwe_fixture_bytes))
    assert read_catalog_bytes(z) == cwe_fixture_bytes == read_catalog_bytes(x)
    bad = tmp_path / "two.zip"
    with zipfile.ZipFile(bad, "w") as zf:
        zf.writestr("a.xml", b"<a/>")
        zf.writestr("b.xml", b"<b/>")
    with pytest.raises(ParseError):
        read_catalog_bytes(bad)


# pairs

def test_le_from_la():
    pairs = build_pairs([w(1, le=None, capecs=[10])], [p(10, la=3, ts=3)])
    assert len(pairs) == 1
    assert pairs[0].le == 3 and pairs[0].flags == {Flag.LE_FROM_LA}


def test_both_likelihoods_missing_discarded():
    discards = []
    assert build_pairs([w(1, capecs=[10])], [p(10, ts=3)], discards=discards) == []
    assert discards[0].reason == "both likelihoods missing"


def test_complete_pair_has_no_flags():
    (pair,) = build_pairs([w(1, le=2, capecs=[10])], [p(10, la=2, ts=2)])
    assert pair.flags == frozenset()
    assert (pair.la, pair.le, pair.mi, pair.cc, pair.ts) == (2, 2, 1, 1, 2)


def test_links_are_union_of_both_catalogs():
    pairs = build_pairs([w(1, le=2, capecs=[10])], [p(10, la=2, ts=2), p(11, la=1, ts=1, cwes=[1])])
    assert [q.capec_id for q in pairs] == [10, 11]


def test_other_discard_reasons():
    discards = []
    build_pairs([w(1, le=2, capecs=[10]), w(2, le=2, capecs=[99]), w(3, le=2),
                 w(4, le=2, mi=0, capecs=[12]), w(5, le=2, cc=0, capecs=[12])],
                [p(10, la=2), p(12, la=1, ts=1)], discards=discards)
    reasons = {(d.cwe_id, d.reason) for d in discards}
    assert reasons == {(1, "typical severity missing"), (2, "attack pattern not in catalog"),
                       (3, "no linked attack pattern"), (4, "no modes of introduction"),
                       (5, "no common consequences")}


def test_override_212_imputes_both_high():
    ws, ps = [w(212, capecs=[168])], [p(168, ts=2)]
    assert build_pairs(ws, ps) == []
    (pair,) = apply_manual_overrides([], [ManualOverride(212, le=3, la=3, capec_ids=(168,))], ws, ps)
    assert (pair.le, pair.la) == (3, 3)
    assert Flag.MANUAL_OVERRIDE in pair.flags


def test_override_639_raw_135():
    ws = [w(639, le=3, mi=2, cc=1)]
    o = ManualOverride(639, le=3, la=3, mi=1, cc=3, ts=5, capec_ids=())
    (pair,) = apply_manual_overrides([], [o], ws, [])
    assert pair.capec_id is None
    assert (pair.likelihood, pair.impact, pair.raw_risk) == (9, 15, 135)


def test_empty_override_table_is_identity():
    pairs = build_pairs([w(1, le=2, capecs=[10])], [p(10, la=2, ts=2)])
    assert apply_manual_overrides(pairs, [], [], []) == pairs


def test_override_for_absent_cwe_is_config_error():
    with pytest.raises(ConfigError, match="CWE-9"):
        apply_manual_overrides([], [ManualOverride(9, le=1)], [w(1)], [])


def test_override_validation_and_parsing():
    with pytest.raises(ConfigError):
        ManualOverride(1, ts=6)
    with pytest.raises(ConfigError):
        parse_overrides("cwe_id,le\n1,x\n")
    with pytest.raises(ConfigError):
        parse_overrides("cwe_id\n1\n1\n")
    rows = parse_overrides('[{"cwe_id": "CWE-7", "capec_ids": [1, 2], "ts": 4}]', fmt="json")
    assert rows == [ManualOverride(7, ts=4, capec_ids=(1, 2))]


def test_shipped_override_table():
    table = {o.cwe_id: o for o in default_overrides()}
    assert set(table) == {36, 186, 639, 863, 212}
    o = table[639]
    assert (o.le, o.la, o.mi, o.cc, o.ts, o.capec_ids) == (3, 3, 1, 3, 5, ())
    assert table[212].le == table[212].la == 3
    assert set(table[863].capec_ids) == {3, 114}
    assert table[186].cc == 1


# risk index

def pair(cwe, capec, la, le, mi, cc, ts):
    return CweCapecPair(cwe, capec, la=la, le=le, mi=mi, cc=cc, ts=ts)


def test_single_pair_scales_to_100():
    idx = compute_cwe_risk_index([pair(1, 1, 1, 1, 1, 1, 1)])
    assert idx[1].risk_index == 100.0


def test_indices_25_and_100():
    # 135 = 3*3*1*5*3; 540 = 3*3*4*5*3
    idx = compute_cwe_risk_index([pair(1, 1, 3, 3, 1, 3, 5), pair(2, 2, 3, 3, 4, 3, 5)])
    assert idx[1].raw_risk == 135 and idx[2].raw_risk == 540
    assert idx[1].risk_index == 25.0 and idx[2].risk_index == 100.0


def test_worst_pair_wins():
    idx = compute_cwe_risk_index([pair(1, 1, 1, 1, 1, 1, 1), pair(1, 2, 2, 2, 1, 1, 1),
                                  pair(2, 3, 1, 1, 1, 1, 8 // 2)])
    assert idx[1].raw_risk == 4 and idx[1].risk_index == 100.0


def test_empty_pairs_is_scoring_error():
    with pytest.raises(ScoringError):
        compute_cwe_risk_index([])


def test_pair_range_validation():
    with pytest.raises(ValueError):
        pair(1, 1, 4, 1, 1, 1, 1)
    with pytest.raises(ValueError):
        pair(1, 1, 1, 1, 0, 1, 1)


def test_risk_table_roundtrip(tmp_path):
    idx = compute_cwe_risk_index([pair(1, 1, 3, 3, 1, 3, 5), pair(2, 2, 1, 3, 2, 1, 1)],
                                 names={1: "one, with comma"})
    path = tmp_path / "risk.csv"
    path.write_text(format_risk_table(idx))
    assert read_risk_table(path) == {c: e.risk_index for c, e in idx.items()}


factors = st.tuples(st.integers(1, 3), st.integers(1, 3), st.integers(1, 6),
                    st.integers(1, 6), st.integers(1, 5))


@given(st.dictionaries(st.integers(1, 2000), st.lists(factors, min_size=1, max_size=4),
                       min_size=1, max_size=30))
def test_risk_index_properties(table):
    pairs = [pair(c, i, *f) for c, fs in table.items() for i, f in enumerate(fs)]
    idx = compute_cwe_risk_index(pairs)
    brute_raw = {c: max(la * le * mi * ts * cc for la, le, mi, cc, ts in fs) for c, fs in table.items()}
    top = max(brute_raw.values())
    assert {c: e.raw_risk for c, e in idx.items()} == brute_raw
    assert max(e.risk_index for e in idx.values()) == 100.0
    for c, e in idx.items():
        assert 0 < e.risk_index <= 100.0
        assert e.risk_index == pytest.approx(100.0 * brute_raw[c] / top, abs=1e-12)
        assert 1 <= e.raw_risk <= 3 * 3 * 6 * 5 * 6


# statistics

def test_mi_distribution_example():
    d = distribution([1, 1, 2, 4])
    assert d.mean == 2.0 and d.median == 1.5
    assert d.histogram == {1: 2, 2: 1, 4: 1}


@given(st.lists(st.integers(0, 12), min_size=1, max_size=60))
def test_distribution_matches_statistics_module(xs):
    d = distribution(xs)
    assert d.mean == pytest.approx(statistics.fmean(xs), abs=1e-12)
    assert d.median == statistics.median(xs)
    assert d.std == pytest.approx(statistics.pstdev(xs), abs=1e-9)


def test_fixture_stats(cwe_fixture_bytes, capec_fixture_bytes):
    ws = parse_cwe_catalog(cwe_fixture_bytes)
    ps = parse_capec_catalog(capec_fixture_bytes)
    s = catalog_stats(ws, ps)
    assert s.weakness_count == 8 and s.pattern_count == 12
    assert s.le_missing_pct == pytest.approx(100 * 1 / 8)
    assert s.la_missing_pct == pytest.approx(100 * 4 / 12)  # 122, 492, 597, 999
    assert s.ts_missing_pct == pytest.approx(100 * 2 / 12)
    assert s.mi.mean == pytest.approx(statistics.fmean([w.mi_count for w in ws]))
    assert s.to_dict()["weakness_count"] == 8


# real MITRE data (CWE 4.14, bundled)

@pytest.fixture(scope="module")
def cwe414():
    return read_catalog_bytes(CWE_414)


def test_cwe_414_view_699_has_399_weaknesses(cwe414):
    recs = parse_cwe_catalog(cwe414)
    assert len(recs) == 399
    missing = sum(r.likelihood_of_exploit is None for r in recs)
    assert missing == 305


def test_cwe_414_cwe_89(cwe414):
    recs = {r.cwe_id: r for r in parse_cwe_catalog(cwe414, scope="all")}
    assert recs[89].likelihood_of_exploit is OrdinalLikelihood.HIGH
    assert recs[89].related_capec_ids
