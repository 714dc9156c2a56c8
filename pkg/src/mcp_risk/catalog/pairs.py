"""CWE-CAPEC pair construction, likelihood imputation and manual completion."""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from ..errors import ConfigError
from .model import AttackPatternRecord, CweCapecPair, Discard, Flag, WeaknessRecord

log = logging.getLogger(__name__)

OVERRIDE_COLUMNS = ("cwe_id", "le", "la", "mi", "cc", "ts", "capec_ids", "note")


@dataclass(frozen=True)
class ManualOverride:
    """One row of the override table.

    A factor left as None is taken from the catalogs (with the usual pairwise
    imputation). ``capec_ids`` of None means "use the CWE's own catalog links";
    an empty tuple means the row is scored without any attack pattern.
    """

    cwe_id: int
    le: int | None = None
    la: int | None = None
    mi: int | None = None
    cc: int | None = None
    ts: int | None = None
    capec_ids: tuple[int, ...] | None = None
    note: str = ""

    def __post_init__(self):
        for name, lo, hi in (("le", 1, 3), ("la", 1, 3), ("ts", 1, 5)):
            v = getattr(self, name)
            if v is not None and not lo <= v <= hi:
                raise ConfigError(f"override CWE-{self.cwe_id}: {name}={v} outside {lo}..{hi}")
        for name in ("mi", "cc"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(f"override CWE-{self.cwe_id}: {name}={v} must be >= 1")


def _opt_int(value, column: str, row_no: int) -> int | None:
    if value is None:
        return None
    if isinstance(value, int):
        return value
    value = str(value).strip()
    if not value:
        return None
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"override row {row_no}: {column}={value!r} is not an integer") from None


def _capec_list(value, row_no: int) -> tuple[int, ...] | None:
    if value is None:
        return None
    if isinstance(value, list):
        return tuple(int(v) for v in value)
    text = str(value).strip()
    if not text:
        return None
    if text.lower() in {"-", "---", "none"}:
        return ()
    ids = re.findall(r"\d+", text)
    if not ids:
        raise ConfigError(f"override row {row_no}: cannot read capec_ids {value!r}")
    return tuple(int(i) for i in ids)


def _override_from_row(row: dict, row_no: int) -> ManualOverride:
    cwe = _opt_int(re.sub(r"(?i)^cwe-", "", str(row.get("cwe_id") or "")), "cwe_id", row_no)
    if cwe is None:
        raise ConfigError(f"override row {row_no}: missing cwe_id")
    return ManualOverride(
        cwe_id=cwe,
        le=_opt_int(row.get("le"), "le", row_no),
        la=_opt_int(row.get("la"), "la", row_no),
        mi=_opt_int(row.get("mi"), "mi", row_no),
        cc=_opt_int(row.get("cc"), "cc", row_no),
        ts=_opt_int(row.get("ts"), "ts", row_no),
        capec_ids=_capec_list(row.get("capec_ids"), row_no),
        note=str(row.get("note") or ""),
    )


def parse_overrides(text: str, *, fmt: str = "csv") -> list[ManualOverride]:
    """Parse an override table given as CSV (header row required) or a JSON list."""
    if fmt == "json":
        try:
            rows = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"override table is not valid JSON: {exc}") from None
        if not isinstance(rows, list):
            raise ConfigError("JSON override table must be a list of objects")
    elif fmt == "csv":
        reader = csv.DictReader(io.StringIO(text))
        missing = set(OVERRIDE_COLUMNS[:1]) - set(reader.fieldnames or ())
        if missing:
            raise ConfigError(f"override table lacks columns {sorted(missing)}")
        rows = list(reader)
    else:
        raise ConfigError(f"unknown override table format {fmt!r}")
    overrides = [_override_from_row(r, i) for i, r in enumerate(rows, start=1)]
    seen = set()
    for o in overrides:
        if o.cwe_id in seen:
            raise ConfigError(f"override table lists CWE-{o.cwe_id} twice")
        seen.add(o.cwe_id)
    return overrides


def load_overrides(path: str | Path) -> list[ManualOverride]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read override table {path}: {exc}") from None
    return parse_overrides(text, fmt="json" if path.suffix.lower() == ".json" else "csv")


def default_overrides() -> list[ManualOverride]:
    """The shipped manual completion table for CWE-36, 186, 639, 863 and 212."""
    text = resources.files("mcp_risk").joinpath("data/manual_overrides.csv").read_text("utf-8")
    return parse_overrides(text)


def _links(weaknesses: Sequence[WeaknessRecord],
           patterns: Sequence[AttackPatternRecord]) -> dict[int, set[int]]:
    by_cwe = {w.cwe_id: set(w.related_capec_ids) for w in weaknesses}
    for p in patterns:
        for cwe in p.related_cwe_ids:
            if cwe in by_cwe:
                by_cwe[cwe].add(p.capec_id)
    return by_cwe


def _make_pair(w: WeaknessRecord, capec_id: int | None, p: AttackPatternRecord | None,
               o: ManualOverride | None) -> CweCapecPair | Discard:
    flags: set[Flag] = set()
    le = o.le if o and o.le is not None else w.likelihood_of_exploit
    la = o.la if o and o.la is not None else (p.likelihood_of_attack if p else None)
    ts = o.ts if o and o.ts is not None else (p.typical_severity if p else None)
    mi = o.mi if o and o.mi is not None else w.mi_count
    cc = o.cc if o and o.cc is not None else w.cc_count

    if le is None and la is None:
        return Discard(w.cwe_id, capec_id, "both likelihoods missing")
    if le is None:
        le = la
        flags.add(Flag.LE_FROM_LA)
    elif la is None:
        la = le
        flags.add(Flag.LA_FROM_LE)
    if ts is None:
        return Discard(w.cwe_id, capec_id, "typical severity missing")
    if mi == 0:
        return Discard(w.cwe_id, capec_id, "no modes of introduction")
    if cc == 0:
        return Discard(w.cwe_id, capec_id, "no common consequences")
    if o is not None:
        flags.add(Flag.MANUAL_OVERRIDE)
    return CweCapecPair(cwe_id=w.cwe_id, capec_id=capec_id, la=int(la), le=int(le),
                        mi=mi, cc=cc, ts=int(ts), flags=frozenset(flags))


def _record(discards: list[Discard] | None, d: Discard) -> None:
    log.debug("discarded CWE-%s/CAPEC-%s: %s", d.cwe_id, d.capec_id, d.reason)
    if discards is not None:
        discards.append(d)


def build_pairs(weaknesses: Sequence[WeaknessRecord], patterns: Sequence[AttackPatternRecord],
                *, discards: list[Discard] | None = None) -> list[CweCapecPair]:
    """Join the catalogs into fully populated scoring pairs.

    Links are the union of both catalogs' cross references. A missing
    likelihood is filled from the other likelihood of the same pair; pairs
    that still lack a factor are dropped and appended to ``discards``.
    """
    pat = {p.capec_id: p for p in patterns}
    out: list[CweCapecPair] = []
    links = _links(weaknesses, patterns)
    for w in sorted(weaknesses, key=lambda r: r.cwe_id):
        capecs = sorted(links[w.cwe_id])
        if not capecs:
            _record(discards, Discard(w.cwe_id, None, "no linked attack pattern"))
            continue
        for capec_id in capecs:
            p = pat.get(capec_id)
            if p is None:
                _record(discards, Discard(w.cwe_id, capec_id, "attack pattern not in catalog"))
                continue
            made = _make_pair(w, capec_id, p, None)
            if isinstance(made, Discard):
                _record(discards, made)
            else:
                out.append(made)
    n_dropped = len(discards) if discards is not None else "?"
    log.info("built %d CWE-CAPEC pairs (%s discarded)", len(out), n_dropped)
    return out


def apply_manual_overrides(pairs: Iterable[CweCapecPair], overrides: Sequence[ManualOverride],
                           weaknesses: Sequence[WeaknessRecord],
                           patterns: Sequence[AttackPatternRecord],
                           *, discards: list[Discard] | None = None) -> list[CweCapecPair]:
    """Replace the pairs of every overridden CWE with manually completed ones."""
    pairs = list(pairs)
    if not overrides:
        return pairs
    wmap = {w.cwe_id: w for w in weaknesses}
    absent = sorted(o.cwe_id for o in overrides if o.cwe_id not in wmap)
    if absent:
        raise ConfigError("override table references CWEs absent from the catalog: "
                          + ", ".join(f"CWE-{c}" for c in absent))
    pat = {p.capec_id: p for p in patterns}
    links = _links(weaknesses, patterns)
    touched = {o.cwe_id for o in overrides}
    out = [p for p in pairs if p.cwe_id not in touched]
    for o in overrides:
        w = wmap[o.cwe_id]
        capecs = sorted(links[w.cwe_id]) if o.capec_ids is None else list(o.capec_ids)
        for capec_id in capecs or [None]:
            made = _make_pair(w, capec_id, pat.get(capec_id) if capec_id else None, o)
            if isinstance(made, Discard):
                _record(discards, made)
            else:
                out.append(made)
    out.sort(key=lambda p: (p.cwe_id, p.capec_id or 0))
    return out
