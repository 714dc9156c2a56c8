"""Repository-level exposure, RMS severity, overall score, normalisation and banding."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ScoringError
from .findings import RepoFindingProfile


class Band(str, enum.Enum):
    VERY_LOW = "VeryLow"
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"
    VERY_HIGH = "VeryHigh"
    UNSCORED = "Unscored"


SCORED_BANDS = (Band.VERY_LOW, Band.LOW, Band.MEDIUM, Band.HIGH, Band.VERY_HIGH)


@dataclass(frozen=True)
class RepoScore:
    repo_id: str
    n_findings: int
    exposure: float
    rms: float | None
    overall: float | None
    ln_overall: float | None = None
    normalized: float | None = None
    band: Band | None = None

    @property
    def scored(self) -> bool:
        return self.n_findings > 0


def _arrays(profile: RepoFindingProfile, risk_indices: Mapping[int, float]):
    missing = sorted(c for c in profile.frequencies if c not in risk_indices)
    if missing:
        raise ScoringError(f"repository {profile.repo_id}: no risk index for "
                           + ", ".join(f"CWE-{c}" for c in missing))
    cwes = sorted(profile.frequencies)
    f = np.array([profile.frequencies[c] for c in cwes], dtype=float)
    w = np.array([risk_indices[c] for c in cwes], dtype=float)
    return f, w


def repo_exposure(profile: RepoFindingProfile, risk_indices: Mapping[int, float]) -> float:
    f, w = _arrays(profile, risk_indices)
    return float(f @ w) if f.size else 0.0


def repo_rms(profile: RepoFindingProfile, risk_indices: Mapping[int, float]) -> float:
    f, w = _arrays(profile, risk_indices)
    if f.sum() == 0:
        raise ScoringError(f"repository {profile.repo_id} has no findings; RMS is undefined")
    return float(np.sqrt((f * w * w).sum() / f.sum()))


def repo_overall(profile: RepoFindingProfile, risk_indices: Mapping[int, float]) -> float:
    return repo_rms(profile, risk_indices) * math.log10(profile.total + 1)


def score_repository(profile: RepoFindingProfile, risk_indices: Mapping[int, float]) -> RepoScore:
    """Raw metrics for one repository; normalisation needs the whole corpus."""
    if profile.total == 0:
        return RepoScore(profile.repo_id, 0, 0.0, None, None, band=Band.UNSCORED)
    rms = repo_rms(profile, risk_indices)
    return RepoScore(
        repo_id=profile.repo_id,
        n_findings=profile.total,
        exposure=repo_exposure(profile, risk_indices),
        rms=rms,
        overall=rms * math.log10(profile.total + 1),
    )


def assign_band(normalized: float) -> Band:
    """Fixed 20-point bands; each lower edge belongs to the upper band, 100 is VeryHigh."""
    if not (0.0 <= normalized <= 100.0):
        raise ScoringError(f"normalized score {normalized!r} outside [0, 100]")
    return SCORED_BANDS[min(int(normalized // 20), 4)]


def normalize_scores(scores: Sequence[RepoScore]) -> list[RepoScore]:
    """Log-transform then min-max scale the overall scores of the scored repositories.

    Repositories without findings pass through with band ``Unscored``. If every
    scored repository shares one overall value the normalised score is 0.
    """
    scored = [s for s in scores if s.scored]
    if not scored:
        raise ScoringError("no scored repositories to normalise")
    bad = [s.repo_id for s in scored if not s.overall or s.overall <= 0]
    if bad:
        raise ScoringError("overall score must be positive for: " + ", ".join(bad))
    logs = {s.repo_id: math.log(s.overall) for s in scored}
    lo, hi = min(logs.values()), max(logs.values())
    out = []
    for s in scores:
        if not s.scored:
            out.append(replace(s, band=Band.UNSCORED))
            continue
        lv = logs[s.repo_id]
        if hi == lo or lv == lo:
            norm = 0.0
        elif lv == hi:
            norm = 100.0
        else:  # rounding can push interior points a hair outside [0, 100]
            norm = min(max(100.0 * (lv - lo) / (hi - lo), 0.0), 100.0)
        out.append(replace(s, ln_overall=lv, normalized=norm, band=assign_band(norm)))
    return out


def score_corpus(profiles: Mapping[str, RepoFindingProfile] | Iterable[RepoFindingProfile],
                 risk_indices: Mapping[int, float]) -> list[RepoScore]:
    """Score and normalise every repository; output is ordered by repo_id."""
    if isinstance(profiles, Mapping):
        profiles = profiles.values()
    raw = sorted((score_repository(p, risk_indices) for p in profiles), key=lambda s: s.repo_id)
    return normalize_scores(raw)


def band_distribution(scores: Iterable[RepoScore]) -> list[tuple[str, int]]:
    """Counts per band in band order, omitting empty bands and unscored repositories."""
    counts = {b: 0 for b in SCORED_BANDS}
    for s in scores:
        if s.band in counts:
            counts[s.band] += 1
    return [(b.value, n) for b, n in counts.items() if n]


SCORE_COLUMNS = ("repo_id", "n_findings", "exposure", "rms", "overall", "normalized", "band")


def _fmt(v) -> str:
    return "" if v is None else repr(v)


def format_score_table(scores: Sequence[RepoScore]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCORE_COLUMNS)
    for s in scores:
        w.writerow([s.repo_id, s.n_findings, _fmt(s.exposure), _fmt(s.rms), _fmt(s.overall),
                    _fmt(s.normalized), s.band.value if s.band else ""])
    return buf.getvalue()


def scores_to_json(scores: Sequence[RepoScore]) -> str:
    docs = []
    for s in scores:
        d = asdict(s)
        d["band"] = s.band.value if s.band else None
        docs.append(d)
    return json.dumps(docs, indent=2, sort_keys=True) + "\n"


def scores_from_json(text: str) -> list[RepoScore]:
    out = []
    for d in json.loads(text):
        d = dict(d)
        d["band"] = Band(d["band"]) if d.get("band") else None
        out.append(RepoScore(**d))
    return out
