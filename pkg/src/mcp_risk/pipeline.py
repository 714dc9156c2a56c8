"""End-to-end orchestration: catalog -> findings -> scoring -> surfaces -> artifacts."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import shutil
import tempfile
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping

from . import __version__
from .catalog import (
    CatalogStats,
    CweRiskEntry,
    Discard,
    apply_manual_overrides,
    build_pairs,
    catalog_stats,
    catalog_version,
    compute_cwe_risk_index,
    default_overrides,
    format_risk_table,
    load_overrides,
    parse_capec_catalog,
    parse_cwe_catalog,
    read_catalog_bytes,
)
from .errors import ConfigError
from .findings import (
    DEDUP_MODES,
    FindingList,
    RepoFindingProfile,
    dump_profiles,
    load_category_map,
    load_query_manifest,
    parse_joern_results,
    parse_sarif,
    parse_scanner_output,
    profile_repository,
)
from .scoring import RepoScore, band_distribution, format_score_table, score_corpus, scores_to_json
from .surfaces import (
    ChainLink,
    CooccurrenceMatrix,
    SurfaceShares,
    ThreatSurface,
    chain_report,
    cooccurrence,
    load_surface_map,
    shares_csv,
    surface_shares,
)

log = logging.getLogger(__name__)

SARIF_SUFFIXES = (".sarif", ".sarif.json")
JOERN_SUFFIX = ".joern.jsonl"
SCANNER_SUFFIX = ".scanner.json"

CORE_ARTIFACTS = (
    "risk_index.csv",
    "scores.csv",
    "surface_shares.csv",
    "cooccurrence.csv",
    "band_distribution.csv",
    "skipped.csv",
    "manifest.json",
)


@dataclass
class PipelineConfig:
    cwe_xml: Path | None = None
    capec_xml: Path | None = None
    findings_dir: Path | None = None
    out: Path | None = None
    overrides: Path | None = None
    use_default_overrides: bool = True
    surface_map: Path | None = None
    joern_manifest: Path | None = None
    scanner_map: Path | None = None
    dedup: str = "location"
    render: bool = False
    report_format: str = "csv"
    chain_threshold: float = 85.0
    jobs: int = 1

    _PATHS = ("cwe_xml", "capec_xml", "findings_dir", "out", "overrides",
              "surface_map", "joern_manifest", "scanner_map")

    def __post_init__(self):
        for name in self._PATHS:
            v = getattr(self, name)
            if v is not None and not isinstance(v, Path):
                setattr(self, name, Path(v))

    @classmethod
    def from_file(cls, path: str | Path, **base) -> "PipelineConfig":
        """Load a JSON config; its keys override ``base``. Relative paths resolve
        against the config file's directory."""
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
        merged = dict(base)
        for k, v in doc.items():
            if k in cls._PATHS and v is not None:
                v = (path.parent / v)
            merged[k] = v
        return cls(**merged)

    def validate(self) -> None:
        for name in ("cwe_xml", "capec_xml", "findings_dir", "out"):
            if getattr(self, name) is None:
                raise ConfigError(f"missing required setting --{name.replace('_', '-')}")
        for name in ("cwe_xml", "capec_xml", "overrides", "surface_map",
                     "joern_manifest", "scanner_map"):
            p = getattr(self, name)
            if p is not None and not p.is_file():
                raise ConfigError(f"--{name.replace('_', '-')}: no such file {p}")
        if not self.findings_dir.is_dir():
            raise ConfigError(f"--findings-dir: no such directory {self.findings_dir}")
        if self.dedup not in DEDUP_MODES:
            raise ConfigError(f"--dedup must be one of {DEDUP_MODES}")
        if self.out.exists() and not self.out.is_dir():
            raise ConfigError(f"--out exists and is not a directory: {self.out}")
        parent = self.out if self.out.exists() else self.out.parent
        while not parent.exists():
            parent = parent.parent
        if not os.access(parent, os.W_OK):
            raise ConfigError(f"--out is not creatable: {self.out}")


@dataclass
class CatalogResult:
    risk: dict[int, CweRiskEntry]
    stats: CatalogStats
    discards: list[Discard]
    versions: dict[str, str]

    @property
    def risk_indices(self) -> dict[int, float]:
        return {c: e.risk_index for c, e in self.risk.items()}


@dataclass
class PipelineResult:
    catalog: CatalogResult
    profiles: dict[str, RepoFindingProfile]
    scores: list[RepoScore]
    shares: SurfaceShares
    matrix: CooccurrenceMatrix
    chains: list[ChainLink]
    surface_map: dict[int, ThreatSurface]
    skipped: list[tuple[str, str, int]] = field(default_factory=list)
    artifacts: dict[str, str] = field(default_factory=dict)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def run_catalog(cwe_xml: Path, capec_xml: Path, overrides: Path | None = None,
                use_default_overrides: bool = True) -> CatalogResult:
    cwe_bytes = read_catalog_bytes(cwe_xml)
    capec_bytes = read_catalog_bytes(capec_xml)
    scored_w = parse_cwe_catalog(cwe_bytes, scope="scoring", source=str(cwe_xml))
    eda_w = parse_cwe_catalog(cwe_bytes, scope="software-development", source=str(cwe_xml))
    patterns = parse_capec_catalog(capec_bytes, source=str(capec_xml))
    discards: list[Discard] = []
    pairs = build_pairs(scored_w, patterns, discards=discards)
    if overrides is not None:
        table = load_overrides(overrides)
    elif use_default_overrides:
        # the shipped table targets the MITRE catalogs; rows for absent CWEs are skipped
        known = {w.cwe_id for w in scored_w}
        table = [o for o in default_overrides() if o.cwe_id in known]
    else:
        table = []
    pairs = apply_manual_overrides(pairs, table, scored_w, patterns, discards=discards)
    names = {w.cwe_id: w.name for w in scored_w}
    return CatalogResult(
        risk=compute_cwe_risk_index(pairs, names=names),
        stats=catalog_stats(eda_w, patterns),
        discards=discards,
        versions={"cwe": catalog_version(cwe_bytes), "capec": catalog_version(capec_bytes)},
    )


def _ingest_repo(repo_dir: Path, repo_id: str, manifest, category_map,
                 dedup: str) -> tuple[RepoFindingProfile, Counter]:
    found = FindingList()
    for path in sorted(p for p in repo_dir.rglob("*") if p.is_file()):
        name = path.name.lower()
        src = str(path)
        if name.endswith(SARIF_SUFFIXES):
            batch = parse_sarif(path.read_bytes(), repo_id, source=src)
        elif name.endswith(JOERN_SUFFIX):
            if manifest is None:
                raise ConfigError(f"{src}: Joern results need --joern-manifest")
            batch = parse_joern_results(path.read_bytes(), manifest, repo_id, source=src)
        elif name.endswith(SCANNER_SUFFIX):
            if category_map is None:
                raise ConfigError(f"{src}: scanner output needs --scanner-map")
            batch = parse_scanner_output(path.read_bytes(), category_map, repo_id, source=src)
        else:
            log.info("ignoring unrecognised analyzer output %s", src)
            continue
        found.extend(batch)
        found.skip_reasons.update(batch.skip_reasons)
    # findings kept with cwe_id=None are counted again by profile_repository
    reasons = Counter(found.skip_reasons)
    in_list = sum(f.cwe_id is None for f in found)
    profile = profile_repository(repo_id, found, mode=dedup,
                                 skipped=found.skipped - in_list)
    return profile, reasons


def ingest_findings(findings_dir: Path, *, joern_manifest: Path | None = None,
                    scanner_map: Path | None = None, dedup: str = "location",
                    jobs: int = 1) -> tuple[dict[str, RepoFindingProfile], list[tuple[str, str, int]]]:
    """Profile every ``<findings_dir>/<repo_id>/`` directory; repositories are independent."""
    manifest = load_query_manifest(joern_manifest) if joern_manifest else None
    category_map = load_category_map(scanner_map) if scanner_map else None
    repo_dirs = sorted(p for p in Path(findings_dir).iterdir() if p.is_dir())
    args = [(d, d.name, manifest, category_map, dedup) for d in repo_dirs]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda a: _ingest_repo(*a), args))
    else:
        results = [_ingest_repo(*a) for a in args]
    profiles, skipped = {}, []
    for (profile, reasons) in results:
        profiles[profile.repo_id] = profile
        skipped.extend((profile.repo_id, r, n) for r, n in sorted(reasons.items()))
    return profiles, skipped


def restrict_to_scorable(profiles: Mapping[str, RepoFindingProfile],
                         risk_indices: Mapping[int, float]):
    """Drop CWEs without a risk index, returning trimmed profiles and a skip tally."""
    trimmed, skipped = {}, []
    for rid in sorted(profiles):
        p = profiles[rid]
        keep = {c: f for c, f in p.frequencies.items() if c in risk_indices}
        for c in sorted(set(p.frequencies) - set(keep)):
            skipped.append((rid, f"no risk index for CWE-{c}", p.frequencies[c]))
        trimmed[rid] = RepoFindingProfile(
            repo_id=rid, frequencies=keep, skipped=p.skipped,
            provenance={c: v for c, v in p.provenance.items() if c in keep},
        )
    return trimmed, skipped


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _chains_csv(chains: list[ChainLink]) -> str:
    return _csv([(c.given.value, c.also.value, repr(c.percent), c.narrative) for c in chains],
                ["given", "also", "percent", "narrative"])


def _config_digest(cfg: PipelineConfig) -> tuple[str, dict]:
    inputs = {}
    for name in ("cwe_xml", "capec_xml", "overrides", "surface_map",
                 "joern_manifest", "scanner_map"):
        p = getattr(cfg, name)
        inputs[name] = _sha256(p.read_bytes()) if p is not None else None
    h = hashlib.sha256()
    for p in sorted(q for q in cfg.findings_dir.rglob("*") if q.is_file()):
        h.update(p.relative_to(cfg.findings_dir).as_posix().encode() + b"\0")
        h.update(_sha256(p.read_bytes()).encode())
    inputs["findings_dir"] = h.hexdigest()
    options = {"dedup": cfg.dedup, "use_default_overrides": cfg.use_default_overrides,
               "chain_threshold": cfg.chain_threshold, "report_format": cfg.report_format,
               "render": cfg.render}
    canon = json.dumps({"inputs": inputs, "options": options}, sort_keys=True)
    return _sha256(canon.encode()), {"inputs": inputs, "options": options}


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Run every stage and write the artifacts into ``config.out``.

    Files are staged in a temporary directory next to the output and only moved
    into place once every stage has succeeded, so a failed run leaves no
    partial tables behind.
    """
    config.validate()
    catalog = run_catalog(config.cwe_xml, config.capec_xml, config.overrides,
                          config.use_default_overrides)
    mapping = load_surface_map(config.surface_map)
    profiles, skipped = ingest_findings(
        config.findings_dir, joern_manifest=config.joern_manifest,
        scanner_map=config.scanner_map, dedup=config.dedup, jobs=config.jobs)
    risk_indices = catalog.risk_indices
    scorable, unscorable = restrict_to_scorable(profiles, risk_indices)
    skipped = sorted(skipped + unscorable)

    scores = score_corpus(scorable, risk_indices)
    shares = surface_shares(scorable, risk_indices, mapping)
    matrix = cooccurrence(scorable, mapping)
    chains = chain_report(matrix, config.chain_threshold)
    result = PipelineResult(catalog=catalog, profiles=scorable, scores=scores, shares=shares,
                            matrix=matrix, chains=chains, surface_map=mapping, skipped=skipped)

    files = {
        "risk_index.csv": format_risk_table(catalog.risk),
        "catalog_stats.json": json.dumps(catalog.stats.to_dict(), indent=2, sort_keys=True) + "\n",
        "discarded_pairs.csv": _csv([(d.cwe_id, d.capec_id or "", d.reason)
                                     for d in catalog.discards], ["cwe_id", "capec_id", "reason"]),
        "profiles.json": dump_profiles(profiles),
        "scores.csv": format_score_table(scores),
        "scores.json": scores_to_json(scores),
        "surface_shares.csv": shares_csv(shares),
        "cooccurrence.csv": matrix.grid_csv(),
        "cooccurrence.json": json.dumps(matrix.to_dict(), indent=2, sort_keys=True) + "\n",
        "chains.csv": _chains_csv(chains),
        "band_distribution.csv": _csv(band_distribution(scores), ["band", "count"]),
        "skipped.csv": _csv(skipped, ["repo_id", "reason", "count"]),
    }

    out = config.out
    created_out = not out.exists()
    out.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out))
    try:
        for name, text in files.items():
            (staging / name).write_text(text, encoding="utf-8")
        from .report import ReportData, emit_report
        report_dir = staging / "report"
        emit_report(ReportData.from_result(result), report_dir, fmt=config.report_format)
        if config.render:
            from .charts import render_charts
            render_charts(report_dir, staging / "charts")
        digests = {
            p.relative_to(staging).as_posix(): _sha256(p.read_bytes())
            for p in sorted(staging.rglob("*")) if p.is_file()
        }
        config_hash, config_doc = _config_digest(config)
        import numpy
        manifest = {
            "tool_versions": {"mcp-risk": __version__, "numpy": numpy.__version__},
            "catalog_versions": catalog.versions,
            "config_hash": config_hash,
            "config": config_doc,
            "artifacts": digests,
        }
        (staging / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        for p in sorted(staging.rglob("*")):
            if p.is_file():
                dest = out / p.relative_to(staging)
                dest.parent.mkdir(parents=True, exist_ok=True)
                os.replace(p, dest)
        result.artifacts = dict(digests, **{"manifest.json": _sha256(
            (out / "manifest.json").read_bytes())})
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        if created_out:
            shutil.rmtree(out, ignore_errors=True)
        raise
    shutil.rmtree(staging, ignore_errors=True)
    return result
