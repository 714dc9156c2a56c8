import math

import pytest
from hypothesis import given, settings, strategies as st

from mcp_risk.errors import ScoringError
from mcp_risk.scoring import (
    Band,
    RepoScore,
    assign_band,
    band_distribution,
    format_score_table,
    normalize_scores,
    repo_exposure,
    repo_overall,
    repo_rms,
    score_corpus,
    score_repository,
    scores_from_json,
    scores_to_json,
)

from conftest import profile
from oracles import naive

W = {1: 10.0, 2: 20.0}


def test_exposure_examples():
    assert repo_exposure(profile("r", {1: 2, 2: 1}), W) == 40.0
    assert repo_exposure(profile("r", {}), W) == 0.0
    assert repo_exposure(profile("r", {3: 1}), {3: 33.3}) == 33.3


def test_rms_examples():
    assert repo_rms(profile("r", {1: 2, 2: 1}), W) == pytest.approx(14.1421, abs=1e-4)
    assert repo_rms(profile("r", {1: 3, 4: 5}), {1: 7.5, 4: 7.5}) == pytest.approx(7.5, abs=1e-12)
    assert repo_rms(profile("r", {5: 1}), {5: 83.3}) == pytest.approx(83.3, abs=1e-12)


def test_overall_examples():
    assert repo_overall(profile("r", {1: 2, 2: 1}), W) == pytest.approx(8.5138, abs=1e-3)
    assert repo_overall(profile("r", {5: 1}), {5: 40.0}) == pytest.approx(0.30103 * 40.0, abs=1e-4)
    with pytest.raises(ScoringError):
        repo_overall(profile("r", {}), W)


def test_missing_index_names_cwes():
    with pytest.raises(ScoringError, match="CWE-9"):
        repo_exposure(profile("r", {9: 1}), W)


def test_zero_findings_unscored():
    s = score_repository(profile("r", {}), W)
    assert s.band is Band.UNSCORED and s.rms is None and s.overall is None


def _raw(repo, overall):
    return RepoScore(repo, 1, 0.0, overall, overall)


def test_normalize_e_powers():
    out = normalize_scores([_raw("a", math.e), _raw("b", math.e ** 2), _raw("c", math.e ** 3)])
    assert [s.normalized for s in out] == pytest.approx([0.0, 50.0, 100.0], abs=1e-12)
    assert out[0].normalized == 0.0 and out[2].normalized == 100.0


def test_normalize_single_and_degenerate():
    (s,) = normalize_scores([_raw("a", 5.0)])
    assert s.normalized == 0.0 and s.band is Band.VERY_LOW
    assert {x.normalized for x in normalize_scores([_raw("a", 2.0), _raw("b", 2.0)])} == {0.0}
    with pytest.raises(ScoringError):
        normalize_scores([])


def test_normalize_keeps_unscored():
    out = normalize_scores([_raw("a", 1.5), RepoScore("z", 0, 0.0, None, None), _raw("b", 3.0)])
    assert [s.band for s in out] == [Band.VERY_LOW, Band.UNSCORED, Band.VERY_HIGH]


@pytest.mark.parametrize("x,band", [(0, Band.VERY_LOW), (19.999, Band.VERY_LOW), (20, Band.LOW),
                                    (40, Band.MEDIUM), (47, Band.MEDIUM), (60, Band.HIGH),
                                    (80, Band.VERY_HIGH), (100, Band.VERY_HIGH)])
def test_bands(x, band):
    assert assign_band(x) is band


def test_band_out_of_range():
    with pytest.raises(ScoringError):
        assign_band(100.5)


def test_band_distribution_omits_empty():
    scores = [RepoScore("a", 1, 0, 1, 1, band=Band.MEDIUM), RepoScore("b", 1, 0, 1, 1, band=Band.MEDIUM),
              RepoScore("c", 1, 0, 1, 1, band=Band.HIGH), RepoScore("d", 0, 0, None, None, band=Band.UNSCORED)]
    assert band_distribution(scores) == [("Medium", 2), ("High", 1)]


weights = st.floats(0.5, 100.0, allow_nan=False)


@st.composite
def corpora(draw):
    cwes = draw(st.lists(st.integers(1, 60), min_size=1, max_size=25, unique=True))
    w = {c: draw(weights) for c in cwes}
    n_repos = draw(st.integers(1, 50))
    budget = 500
    profiles = {}
    for i in range(n_repos):
        freqs = {}
        for c in draw(st.lists(st.sampled_from(cwes), min_size=1, max_size=6, unique=True)):
            k = draw(st.integers(1, max(1, min(20, budget))))
            if budget <= 0:
                break
            freqs[c] = k
            budget -= k
        if freqs:
            profiles[f"r{i:02d}"] = profile(f"r{i:02d}", freqs)
    return profiles, w


@settings(max_examples=200, deadline=None)
@given(corpora())
def test_scoring_matches_naive_oracle(corpus):
    profiles, w = corpus
    assert sum(p.total for p in profiles.values()) <= 500
    scores = {s.repo_id: s for s in score_corpus(profiles, w)}
    for rid, p in profiles.items():
        s = scores[rid]
        assert abs(s.exposure - naive.exposure(p.frequencies, w)) <= 1e-9
        assert abs(s.rms - naive.rms(p.frequencies, w)) <= 1e-9
        assert abs(s.overall - naive.overall(p.frequencies, w)) <= 1e-9
        # power-mean inequality
        assert s.rms >= s.exposure / s.n_findings - 1e-9
        assert 0.0 <= s.normalized <= 100.0
        assert s.band.value == naive.band(s.normalized)
    by_overall = sorted(scores, key=lambda r: (scores[r].overall, r))
    by_norm = sorted(scores, key=lambda r: (scores[r].normalized, r))
    assert by_overall == by_norm


def test_score_table_roundtrip():
    scores = score_corpus({"a": profile("a", {1: 2}), "b": profile("b", {2: 1}),
                           "c": profile("c", {})}, W)
    assert scores_from_json(scores_to_json(scores)) == scores
    lines = format_score_table(scores).splitlines()
    assert lines[0] == "repo_id,n_findings,exposure,rms,overall,normalized,band"
    assert lines[3].endswith(",Unscored")
