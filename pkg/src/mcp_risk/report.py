"""Per-figure data tables derived from pipeline results."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, UsageError
from .findings import RepoFindingProfile, load_profiles
from .scoring import RepoScore, band_distribution, scores_from_json
from .surfaces import (
    CooccurrenceMatrix,
    NAMED_SURFACES,
    SurfaceShares,
    ThreatSurface,
    load_surface_map,
)

REPORT_FORMATS = ("csv", "json")
FIGURES = {
    "fig4": "fig4_cwe_frequency",
    "fig5": "fig5_repo_scatter",
    "fig7": "fig7_surface_shares",
    "fig8": "fig8_band_histogram",
    "fig9": "fig9_cooccurrence",
}


@dataclass
class ReportData:
    risk: dict[int, tuple[str, float]]
    profiles: dict[str, RepoFindingProfile]
    scores: list[RepoScore]
    shares: SurfaceShares | None
    matrix: CooccurrenceMatrix | None
    surface_map: dict[int, ThreatSurface]

    @classmethod
    def from_result(cls, result) -> "ReportData":
        return cls(
            risk={c: (e.name, e.risk_index) for c, e in result.catalog.risk.items()},
            profiles=dict(result.profiles),
            scores=list(result.scores),
            shares=result.shares,
            matrix=result.matrix,
            surface_map=dict(result.surface_map),
        )

    @classmethod
    def from_artifacts(cls, directory: str | Path,
                       surface_map: str | Path | None = None) -> "ReportData":
        """Reload the tables written by ``run_pipeline``."""
        d = Path(directory)

        def text(name: str) -> str:
            try:
                return (d / name).read_text(encoding="utf-8")
            except OSError:
                raise ConfigError(f"missing pipeline artifact: {d / name}") from None

        risk = {int(r["cwe_id"]): (r["name"], float(r["risk_index"]))
                for r in csv.DictReader(io.StringIO(text("risk_index.csv")))}
        profiles = load_profiles(text("profiles.json"))
        profiles = {
            rid: RepoFindingProfile(rid, {c: f for c, f in p.frequencies.items() if c in risk},
                                    p.skipped, p.provenance)
            for rid, p in profiles.items()
        }
        shares = None
        rows = list(csv.DictReader(io.StringIO(text("surface_shares.csv"))))
        if rows:
            shares = SurfaceShares(
                finding_share={ThreatSurface(r["surface"]): float(r["finding_share"]) for r in rows},
                exposure_share={ThreatSurface(r["surface"]): float(r["exposure_share"]) for r in rows},
                findings={ThreatSurface(r["surface"]): int(r["findings"]) for r in rows},
                exposure={ThreatSurface(r["surface"]): float(r["exposure"]) for r in rows},
            )
        matrix = CooccurrenceMatrix.from_dict(json.loads(text("cooccurrence.json")))
        return cls(risk=risk, profiles=profiles, scores=scores_from_json(text("scores.json")),
                   shares=shares, matrix=matrix, surface_map=load_surface_map(surface_map))


def _num(v):
    return "" if v is None else repr(v)


def figure_tables(data: ReportData) -> dict[str, tuple[list[str], list[list]]]:
    """Header and rows for every figure, values left unformatted."""
    scored = [s for s in data.scores if s.scored]
    if not scored:
        raise UsageError("no scored repositories")

    totals: dict[int, int] = {}
    repos: dict[int, int] = {}
    for p in data.profiles.values():
        for c, f in p.frequencies.items():
            totals[c] = totals.get(c, 0) + f
            repos[c] = repos.get(c, 0) + 1
    fig4 = [[c, data.risk.get(c, ("", None))[0],
             data.surface_map.get(c, ThreatSurface.UNMAPPED).value,
             totals[c], repos[c], data.risk.get(c, ("", None))[1]]
            for c in sorted(totals, key=lambda c: (-totals[c], c))]

    fig5 = [[s.repo_id, s.n_findings, s.rms, s.normalized] for s in scored]

    fig7 = []
    if data.shares is not None:
        fig7 = [[s.value, data.shares.finding_share[s], data.shares.exposure_share[s]]
                for s in ThreatSurface]

    fig8 = [list(r) for r in band_distribution(data.scores)]

    fig9 = [[a.value] + [data.matrix.get(a, b) for b in NAMED_SURFACES] for a in NAMED_SURFACES]

    return {
        "fig4": (["cwe_id", "name", "surface", "findings", "repositories", "risk_index"], fig4),
        "fig5": (["repo_id", "n_findings", "rms", "normalized"], fig5),
        "fig7": (["surface", "finding_share", "exposure_share"], fig7),
        "fig8": (["band", "count"], fig8),
        "fig9": (["given"] + [s.value for s in NAMED_SURFACES], fig9),
    }


def emit_report(data: ReportData, out_dir: str | Path, fmt: str = "csv") -> list[Path]:
    """Write one data file per figure and return their paths in figure order."""
    if fmt not in REPORT_FORMATS:
        raise UsageError(f"unknown report format {fmt!r}; expected one of {REPORT_FORMATS}")
    tables = figure_tables(data)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for key, (header, rows) in tables.items():
        path = out / f"{FIGURES[key]}.{fmt}"
        if fmt == "csv":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_num(v) if isinstance(v, float) or v is None else v for v in row])
            path.write_text(buf.getvalue(), encoding="utf-8")
        else:
            docs = [dict(zip(header, row)) for row in rows]
            path.write_text(json.dumps(docs, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        paths.append(path)
    return paths


def read_report_file(path: str | Path) -> list[dict]:
    """Rows of a report file (either format) as dicts of strings or JSON values."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError:
        raise ConfigError(f"missing report file: {path}") from None
    if path.suffix == ".json":
        return json.loads(text)
    return list(csv.DictReader(io.StringIO(text)))


def find_report_files(report_dir: str | Path) -> dict[str, Path]:
    d = Path(report_dir)
    found = {}
    for key, stem in FIGURES.items():
        for fmt in REPORT_FORMATS:
            p = d / f"{stem}.{fmt}"
            if p.is_file():
                found[key] = p
                break
        else:
            raise ConfigError(f"missing report file: {d / (stem + '.csv')}")
    return found
