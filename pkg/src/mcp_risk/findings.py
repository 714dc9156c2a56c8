"""Analyzer output ingestion, CWE mapping and per-repository deduplication.

Three input formats are supported: SARIF 2.1.0 (CodeQL), line-delimited JSON
records from the custom Joern query suite, and the JSON report of the MCP
scanner. Each parser returns a :class:`FindingList`, a plain list that also
carries a tally of records that could not be mapped to a CWE.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import posixpath
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ConfigError, ParseError

LINE_BUCKET = 5
DEDUP_MODES = ("location", "cwe-level")

_CWE_TAG = re.compile(r"^external/cwe/cwe-0*(\d+)$", re.IGNORECASE)
_CWE_TEXT = re.compile(r"^(?:cwe[-_ ]?)?0*(\d+)$", re.IGNORECASE)


class Tool(str, enum.Enum):
    CODEQL = "CODEQL"
    JOERN = "JOERN"
    MCP_SCANNER = "MCP_SCANNER"


def normalize_path(path: str) -> str:
    """Repo-relative, forward-slash path with no ``.``/``..`` segments. Case is kept."""
    p = path.replace("\\", "/")
    p = re.sub(r"^file://", "", p)
    p = re.sub(r"^/?[A-Za-z]:/", "", p)
    p = posixpath.normpath("/" + p.lstrip("/"))  # rooting first drops leading '..'
    return p.lstrip("/") or "."


@dataclass(frozen=True, order=True)
class RawFinding:
    repo_id: str
    tool: Tool
    rule_id: str
    cwe_id: int | None
    file_path: str
    start_line: int
    end_line: int
    message: str = ""

    def __post_init__(self):
        if self.start_line < 1 or self.end_line < self.start_line:
            raise ValueError(f"bad line span {self.start_line}-{self.end_line}")


class FindingList(list):
    """A list of :class:`RawFinding` with a tally of skipped input records."""

    def __init__(self, items: Iterable[RawFinding] = (), skipped: Counter | None = None):
        super().__init__(items)
        self.skip_reasons: Counter = skipped if skipped is not None else Counter()

    @property
    def skipped(self) -> int:
        return sum(self.skip_reasons.values())


def _cwe_from_text(value) -> int | None:
    if isinstance(value, int):
        return value if value > 0 else None
    if isinstance(value, str):
        m = _CWE_TEXT.match(value.strip()) or _CWE_TAG.match(value.strip())
        if m and int(m.group(1)) > 0:
            return int(m.group(1))
    return None


def _cwe_from_properties(props) -> int | None:
    if not isinstance(props, dict):
        return None
    for key in ("cwe", "CWE", "cwe_id"):
        if key in props:
            value = props[key]
            if isinstance(value, list):
                value = value[0] if value else None
            cwe = _cwe_from_text(value)
            if cwe:
                return cwe
    for tag in props.get("tags") or ():
        m = _CWE_TAG.match(str(tag))
        if m:
            return int(m.group(1))
    return None


def _sarif_rules(run: dict) -> tuple[list[dict], dict[str, dict]]:
    tool = run.get("tool") or {}
    rules = list((tool.get("driver") or {}).get("rules") or [])
    for ext in tool.get("extensions") or []:
        rules.extend(ext.get("rules") or [])
    by_id = {}
    for r in rules:
        if isinstance(r, dict) and r.get("id") is not None:
            by_id.setdefault(str(r["id"]), r)
    return (tool.get("driver") or {}).get("rules") or [], by_id


def _sarif_location(result: dict, run: dict) -> tuple[str, int, int] | None:
    for loc in result.get("locations") or []:
        phys = (loc or {}).get("physicalLocation") or {}
        art = phys.get("artifactLocation") or {}
        uri = art.get("uri")
        if uri is None and isinstance(art.get("index"), int):
            artifacts = run.get("artifacts") or []
            if 0 <= art["index"] < len(artifacts):
                uri = ((artifacts[art["index"]] or {}).get("location") or {}).get("uri")
        if not uri:
            continue
        region = phys.get("region") or {}
        start = region.get("startLine") or 1
        end = region.get("endLine") or start
        return normalize_path(str(uri)), int(start), max(int(end), int(start))
    return None


def parse_sarif(document: bytes | str, repo_id: str, *, source: str | None = None) -> FindingList:
    """One finding per SARIF result that has a resolvable file location.

    The CWE is read from a ``cwe`` property on the result, then on its rule,
    then from the rule's ``external/cwe/cwe-NNN`` tags (first tag wins when a
    rule lists several). Results without a CWE are returned with
    ``cwe_id=None`` and counted in the skipped tally.
    """
    try:
        doc = json.loads(document)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"not a SARIF document: {exc}", source=source,
                         line=getattr(exc, "lineno", None)) from None
    if not isinstance(doc, dict) or not isinstance(doc.get("runs", None), list):
        raise ParseError("not a SARIF document: top-level 'runs' array missing", source=source)

    out = FindingList()
    for run in doc["runs"]:
        driver_rules, by_id = _sarif_rules(run)
        for result in run.get("results") or []:
            rule = None
            rule_id = result.get("ruleId") or (result.get("rule") or {}).get("id")
            idx = result.get("ruleIndex", (result.get("rule") or {}).get("index"))
            if isinstance(idx, int) and 0 <= idx < len(driver_rules):
                rule = driver_rules[idx]
                rule_id = rule_id or rule.get("id")
            if rule is None and rule_id is not None:
                rule = by_id.get(str(rule_id))
            loc = _sarif_location(result, run)
            if loc is None:
                out.skip_reasons["no location"] += 1
                continue
            cwe = _cwe_from_properties(result.get("properties"))
            if cwe is None and rule is not None:
                cwe = _cwe_from_properties(rule.get("properties"))
            if cwe is None:
                out.skip_reasons["no CWE"] += 1
            msg = result.get("message") or {}
            out.append(RawFinding(
                repo_id=repo_id, tool=Tool.CODEQL, rule_id=str(rule_id or ""), cwe_id=cwe,
                file_path=loc[0], start_line=loc[1], end_line=loc[2],
                message=str(msg.get("text") or msg.get("markdown") or ""),
            ))
    return out


def _two_column_map(text: str, what: str, value_kind) -> dict[str, int]:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].lstrip().startswith("#")]
    if rows and not _cwe_from_text(rows[0][1] if len(rows[0]) > 1 else ""):
        rows = rows[1:]  # header
    out: dict[str, int] = {}
    for n, row in enumerate(rows, start=1):
        if len(row) < 2:
            raise ConfigError(f"{what}: row {n} needs two columns, got {row!r}")
        key, cwe = row[0].strip(), _cwe_from_text(row[1])
        if cwe is None:
            raise ConfigError(f"{what}: row {n} has no CWE id in {row[1]!r}")
        if key in out and out[key] != cwe:
            raise ConfigError(f"{what}: {key!r} maps to both CWE-{out[key]} and CWE-{cwe}")
        out[value_kind(key)] = cwe
    return out


def load_query_manifest(path: str | Path) -> dict[str, int]:
    """Read the ``query_id,cwe_id`` manifest of the Joern query suite."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read query manifest {path}: {exc}") from None
    return _two_column_map(text, f"query manifest {path}", str)


def load_category_map(path: str | Path) -> dict[str, int]:
    """Read the ``category,cwe_id`` table for scanner output categories."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read category map {path}: {exc}") from None
    return _two_column_map(text, f"category map {path}", str)


_JOERN_FIELDS = ("query_id", "filename", "line_number")


def parse_joern_results(document: bytes | str, query_manifest: Mapping[str, int], repo_id: str,
                        *, source: str | None = None) -> FindingList:
    """Map Joern result records to findings through the query manifest.

    Each non-blank line is a JSON object with ``query_id``, ``filename``,
    ``line_number`` and optionally ``snippet``.
    """
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    out = FindingList()
    for n, line in enumerate(document.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed Joern record: {exc.msg}", source=source, line=n) from None
        if not isinstance(rec, dict) or any(rec.get(k) in (None, "") for k in _JOERN_FIELDS):
            raise ParseError(f"Joern record lacks one of {_JOERN_FIELDS}", source=source, line=n)
        try:
            lineno = int(rec["line_number"])
        except (TypeError, ValueError):
            raise ParseError(f"non-integer line_number {rec['line_number']!r}",
                             source=source, line=n) from None
        qid = str(rec["query_id"])
        cwe = query_manifest.get(qid)
        if cwe is None:
            out.skip_reasons["unknown query"] += 1
            continue
        lineno = max(lineno, 1)
        out.append(RawFinding(
            repo_id=repo_id, tool=Tool.JOERN, rule_id=qid, cwe_id=cwe,
            file_path=normalize_path(str(rec["filename"])), start_line=lineno, end_line=lineno,
            message=str(rec.get("snippet") or ""),
        ))
    return out


def parse_scanner_output(document: bytes | str, category_map: Mapping[str, int], repo_id: str,
                         *, source: str | None = None) -> FindingList:
    """Map MCP scanner entries to findings by output category.

    Accepts a JSON list of entries or an object holding them under
    ``findings``. Each entry has ``category``, ``file`` and ``detail``;
    ``line`` is optional and defaults to 1.
    """
    try:
        doc = json.loads(document)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"malformed scanner report: {exc}", source=source,
                         line=getattr(exc, "lineno", None)) from None
    entries = doc.get("findings") if isinstance(doc, dict) else doc
    if not isinstance(entries, list):
        raise ParseError("scanner report must be a list of entries", source=source)
    out = FindingList()
    for n, e in enumerate(entries, start=1):
        if not isinstance(e, dict) or not e.get("category") or not e.get("file"):
            raise ParseError(f"scanner entry {n} lacks category or file", source=source)
        cwe = category_map.get(str(e["category"]))
        if cwe is None:
            out.skip_reasons["unmapped category"] += 1
            continue
        lineno = max(int(e.get("line") or 1), 1)
        out.append(RawFinding(
            repo_id=repo_id, tool=Tool.MCP_SCANNER, rule_id=str(e["category"]), cwe_id=cwe,
            file_path=normalize_path(str(e["file"])), start_line=lineno, end_line=lineno,
            message=str(e.get("detail") or ""),
        ))
    return out


@dataclass
class RepoFindingProfile:
    repo_id: str
    frequencies: dict[int, int] = field(default_factory=dict)
    skipped: int = 0
    provenance: dict[int, list[tuple[str, str, int]]] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.frequencies.values())

    def to_dict(self) -> dict:
        return {
            "repo_id": self.repo_id,
            "frequencies": [{"cwe": c, "count": self.frequencies[c]} for c in sorted(self.frequencies)],
            "total": self.total,
            "skipped": self.skipped,
            "provenance": {str(c): [list(t) for t in self.provenance[c]]
                           for c in sorted(self.provenance)},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RepoFindingProfile":
        try:
            freqs = {int(e["cwe"]): int(e["count"]) for e in doc["frequencies"]}
            prof = cls(
                repo_id=str(doc["repo_id"]),
                frequencies=freqs,
                skipped=int(doc.get("skipped", 0)),
                provenance={int(c): [(str(t), str(f), int(ln)) for t, f, ln in v]
                            for c, v in (doc.get("provenance") or {}).items()},
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed profile document: {exc!r}") from None
        if "total" in doc and int(doc["total"]) != prof.total:
            raise ParseError(f"profile {prof.repo_id}: total {doc['total']} != sum of counts")
        if any(v < 1 for v in freqs.values()):
            raise ParseError(f"profile {prof.repo_id}: frequencies must be positive")
        return prof


def dedup_key(f: RawFinding, mode: str = "location") -> tuple:
    if mode == "cwe-level":
        return (f.repo_id, f.cwe_id)
    return (f.repo_id, f.cwe_id, f.file_path, f.start_line // LINE_BUCKET * LINE_BUCKET)


def profile_repository(repo_id: str, findings: Iterable[RawFinding], *,
                       mode: str = "location", skipped: int = 0) -> RepoFindingProfile:
    """Build one repository's profile; findings of other repositories are ignored."""
    if mode not in DEDUP_MODES:
        raise ConfigError(f"unknown dedup mode {mode!r}; expected one of {DEDUP_MODES}")
    keys: dict[int, set] = defaultdict(set)
    prov: dict[int, set] = defaultdict(set)
    for f in findings:
        if f.repo_id != repo_id:
            continue
        if f.cwe_id is None:
            skipped += 1
            continue
        keys[f.cwe_id].add(dedup_key(f, mode))
        prov[f.cwe_id].add((f.tool.value, f.file_path, f.start_line))
    return RepoFindingProfile(
        repo_id=repo_id,
        frequencies={c: len(keys[c]) for c in sorted(keys)},
        skipped=skipped,
        provenance={c: sorted(prov[c]) for c in sorted(prov)},
    )


def normalize_and_dedup(findings: Iterable[RawFinding], *, mode: str = "location",
                        skipped: Mapping[str, int] | None = None) -> dict[str, RepoFindingProfile]:
    """Group findings by repository and count distinct dedup keys per CWE.

    In ``location`` mode the key is (repo, CWE, file, 5-line bucket), so the
    same weakness reported by two analyzers at the same spot counts once while
    distinct locations keep counting. ``cwe-level`` collapses every CWE to a
    single occurrence per repository. ``skipped`` adds parse-time tallies per
    repository to the profiles.
    """
    if mode not in DEDUP_MODES:
        raise ConfigError(f"unknown dedup mode {mode!r}; expected one of {DEDUP_MODES}")
    by_repo: dict[str, list[RawFinding]] = defaultdict(list)
    for f in findings:
        by_repo[f.repo_id].append(f)
    skipped = skipped or {}
    repos = sorted(set(by_repo) | set(skipped))
    return {r: profile_repository(r, by_repo.get(r, ()), mode=mode, skipped=skipped.get(r, 0))
            for r in repos}


def dump_profiles(profiles: Mapping[str, RepoFindingProfile]) -> str:
    docs = [profiles[r].to_dict() for r in sorted(profiles)]
    return json.dumps(docs, indent=2, sort_keys=True) + "\n"


def load_profiles(text: str) -> dict[str, RepoFindingProfile]:
    try:
        docs = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"profiles document is not JSON: {exc}") from None
    if not isinstance(docs, list):
        raise ParseError("profiles document must be a list")
    profiles = [RepoFindingProfile.from_dict(d) for d in docs]
    return {p.repo_id: p for p in profiles}
