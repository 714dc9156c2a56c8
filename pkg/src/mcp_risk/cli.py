"""Command-line entry point: ``mcp-risk <subcommand>``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, MCPRiskError, UsageError


def _write(out: Path, files: dict[str, str]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8")


def _need(args, *names):
    for n in names:
        if getattr(args, n) is None:
            raise ConfigError(f"missing required setting --{n.replace('_', '-')}")


def _tally_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["repo_id", "reason", "count"])
    w.writerows(rows)
    return buf.getvalue()


def cmd_catalog(args) -> int:
    from .catalog import format_risk_table
    from .pipeline import run_catalog, _csv
    _need(args, "cwe_xml", "capec_xml", "out")
    res = run_catalog(args.cwe_xml, args.capec_xml, args.overrides, not args.no_default_overrides)
    _write(args.out, {
        "risk_index.csv": format_risk_table(res.risk),
        "catalog_stats.json": json.dumps(res.stats.to_dict(), indent=2, sort_keys=True) + "\n",
        "discarded_pairs.csv": _csv([(d.cwe_id, d.capec_id or "", d.reason) for d in res.discards],
                                    ["cwe_id", "capec_id", "reason"]),
    })
    print(f"{len(res.risk)} CWEs scored ({res.versions['cwe']}; {res.versions['capec']})")
    return 0


def cmd_ingest(args) -> int:
    from .findings import dump_profiles
    from .pipeline import ingest_findings
    _need(args, "findings_dir", "out")
    if not args.findings_dir.is_dir():
        raise ConfigError(f"--findings-dir: no such directory {args.findings_dir}")
    profiles, skipped = ingest_findings(args.findings_dir, joern_manifest=args.joern_manifest,
                                        scanner_map=args.scanner_map, dedup=args.dedup,
                                        jobs=args.jobs)
    _write(args.out, {"profiles.json": dump_profiles(profiles), "skipped.csv": _tally_csv(skipped)})
    print(f"{len(profiles)} repositories profiled")
    return 0


def _load_scoring_inputs(args):
    from .catalog import read_risk_table
    from .findings import load_profiles
    from .pipeline import restrict_to_scorable
    _need(args, "risk_table", "profiles", "out")
    risk = read_risk_table(args.risk_table)
    try:
        text = args.profiles.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read profiles {args.profiles}: {exc}") from None
    profiles, unscorable = restrict_to_scorable(load_profiles(text), risk)
    return risk, profiles, unscorable


def cmd_score(args) -> int:
    from .pipeline import _csv
    from .scoring import band_distribution, format_score_table, score_corpus, scores_to_json
    risk, profiles, unscorable = _load_scoring_inputs(args)
    scores = score_corpus(profiles, risk)
    _write(args.out, {
        "scores.csv": format_score_table(scores),
        "scores.json": scores_to_json(scores),
        "band_distribution.csv": _csv(band_distribution(scores), ["band", "count"]),
        "unscorable.csv": _tally_csv(unscorable),
    })
    print(f"{sum(s.scored for s in scores)} of {len(scores)} repositories scored")
    return 0


def cmd_surfaces(args) -> int:
    from .pipeline import _chains_csv
    from .surfaces import chain_report, cooccurrence, load_surface_map, shares_csv, surface_shares
    risk, profiles, _ = _load_scoring_inputs(args)
    mapping = load_surface_map(args.surface_map)
    matrix = cooccurrence(profiles, mapping)
    _write(args.out, {
        "surface_shares.csv": shares_csv(surface_shares(profiles, risk, mapping)),
        "cooccurrence.csv": matrix.grid_csv(),
        "cooccurrence.json": json.dumps(matrix.to_dict(), indent=2, sort_keys=True) + "\n",
        "chains.csv": _chains_csv(chain_report(matrix, args.threshold)),
    })
    return 0


def cmd_report(args) -> int:
    from .report import ReportData, emit_report
    _need(args, "artifacts", "out")
    data = ReportData.from_artifacts(args.artifacts, args.surface_map)
    paths = emit_report(data, args.out, fmt=args.format)
    if args.render:
        from .charts import render_charts
        paths += render_charts(args.out, args.out / "charts")
    for p in paths:
        print(p)
    return 0


def cmd_harvest(args) -> int:
    from .harvest import (ReplaySession, SearchClient, filter_repositories,
                          load_exclusion_rules, save_snapshot)
    _need(args, "out")
    if args.replay is None and not args.live:
        raise UsageError("harvest needs --replay FILE or --live")
    session = ReplaySession.from_file(args.replay) if args.replay else None
    client = SearchClient(session=session, sleep=lambda s: None) if session else SearchClient()
    repos = client.search_repositories(args.query, page_limit=args.pages)
    deny = []
    if args.denylist is not None:
        try:
            deny = args.denylist.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise ConfigError(f"cannot read denylist {args.denylist}: {exc}") from None
    kept, excluded = filter_repositories(repos, load_exclusion_rules(args.exclusions), deny)
    save_snapshot(kept, args.out, query=args.query,
                  snapshot_time=repos[0].snapshot_time if repos else None, exclusions=excluded)
    for w in client.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"{len(kept)} repositories kept, {len(excluded)} excluded")
    return 0


def cmd_run(args) -> int:
    from .pipeline import PipelineConfig, run_pipeline
    base = dict(cwe_xml=args.cwe_xml, capec_xml=args.capec_xml, findings_dir=args.findings_dir,
                out=args.out, overrides=args.overrides,
                use_default_overrides=not args.no_default_overrides,
                surface_map=args.surface_map, joern_manifest=args.joern_manifest,
                scanner_map=args.scanner_map, dedup=args.dedup, render=args.render,
                report_format=args.format, chain_threshold=args.threshold, jobs=args.jobs)
    cfg = PipelineConfig.from_file(args.config, **base) if args.config else PipelineConfig(**base)
    result = run_pipeline(cfg)
    scored = sum(s.scored for s in result.scores)
    print(f"{scored} repositories scored; artifacts in {cfg.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mcp-risk", description=__doc__)
    p.add_argument("--version", action="version", version=f"mcp-risk {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def catalog_flags(sp):
        sp.add_argument("--cwe-xml", type=Path)
        sp.add_argument("--capec-xml", type=Path)
        sp.add_argument("--overrides", type=Path, help="override table (csv or json)")
        sp.add_argument("--no-default-overrides", action="store_true",
                        help="do not apply the shipped override table")

    def findings_flags(sp):
        sp.add_argument("--findings-dir", type=Path, help="<dir>/<repo_id>/ analyzer outputs")
        sp.add_argument("--joern-manifest", type=Path)
        sp.add_argument("--scanner-map", type=Path)
        sp.add_argument("--dedup", choices=("location", "cwe-level"), default="location")
        sp.add_argument("--jobs", type=int, default=1)

    def scored_flags(sp):
        sp.add_argument("--risk-table", type=Path, help="risk_index.csv from `catalog`")
        sp.add_argument("--profiles", type=Path, help="profiles.json from `ingest`")

    sp = sub.add_parser("catalog", help="parse catalogs and compute the CWE risk index")
    catalog_flags(sp)
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_catalog)

    sp = sub.add_parser("ingest", help="normalise analyzer outputs into per-repo profiles")
    findings_flags(sp)
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("score", help="score and band repositories")
    scored_flags(sp)
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("surfaces", help="surface shares and co-occurrence")
    scored_flags(sp)
    sp.add_argument("--surface-map", type=Path)
    sp.add_argument("--threshold", type=float, default=85.0)
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_surfaces)

    sp = sub.add_parser("report", help="per-figure data files from pipeline artifacts")
    sp.add_argument("--artifacts", type=Path, help="output directory of `run`")
    sp.add_argument("--surface-map", type=Path)
    sp.add_argument("--format", default="csv")
    sp.add_argument("--render", action="store_true")
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("harvest", help="search for candidate repositories")
    sp.add_argument("--query", default=None)
    sp.add_argument("--pages", type=int, default=10)
    sp.add_argument("--replay", type=Path, help="recorded responses instead of the network")
    sp.add_argument("--live", action="store_true", help="query the live search API")
    sp.add_argument("--exclusions", type=Path)
    sp.add_argument("--denylist", type=Path)
    sp.add_argument("--out", type=Path, help="snapshot manifest path")
    sp.set_defaults(func=cmd_harvest)

    sp = sub.add_parser("run", help="full pipeline")
    catalog_flags(sp)
    findings_flags(sp)
    sp.add_argument("--surface-map", type=Path)
    sp.add_argument("--threshold", type=float, default=85.0)
    sp.add_argument("--format", default="csv")
    sp.add_argument("--render", action="store_true")
    sp.add_argument("--config", type=Path, help="JSON config; its keys override flags")
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_run)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "query", "") is None:
        from .harvest import DEFAULT_QUERY
        args.query = DEFAULT_QUERY
    try:
        return args.func(args)
    except MCPRiskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
