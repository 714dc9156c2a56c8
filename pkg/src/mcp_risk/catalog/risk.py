"""Per-CWE Risk Index and its delimited-text table."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping

from ..errors import ConfigError, ScoringError
from .model import CweCapecPair, CweRiskEntry

RISK_TABLE_COLUMNS = ("cwe_id", "name", "raw_risk", "risk_index", "imputation_flags")


def compute_cwe_risk_index(pairs: Iterable[CweCapecPair], *,
                           names: Mapping[int, str] | None = None) -> dict[int, CweRiskEntry]:
    """Aggregate pairs per CWE (worst pair wins) and scale to the catalog maximum.

    The index is ``100 * raw / max_raw``; it is a ratio, so zero is never
    reached and the top CWE sits at exactly 100.0.
    """
    grouped: dict[int, list[CweCapecPair]] = defaultdict(list)
    for p in pairs:
        grouped[p.cwe_id].append(p)
    if not grouped:
        raise ScoringError("no scorable CWE: the pair table is empty")
    raw = {cwe: max(p.raw_risk for p in ps) for cwe, ps in grouped.items()}
    top = max(raw.values())
    names = names or {}
    return {
        cwe: CweRiskEntry(
            cwe_id=cwe,
            pairs=tuple(sorted(grouped[cwe], key=lambda p: p.capec_id or 0)),
            raw_risk=raw[cwe],
            risk_index=100.0 * raw[cwe] / top,
            name=names.get(cwe, ""),
        )
        for cwe in sorted(grouped)
    }


def format_risk_table(entries: Mapping[int, CweRiskEntry]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RISK_TABLE_COLUMNS)
    for cwe in sorted(entries):
        e = entries[cwe]
        writer.writerow([cwe, e.name, e.raw_risk, repr(e.risk_index),
                         ";".join(sorted(f.value for f in e.flags))])
    return buf.getvalue()


def read_risk_table(path: str | Path) -> dict[int, float]:
    """Load ``cwe_id -> risk_index`` from a table written by :func:`format_risk_table`."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read risk table {path}: {exc}") from None
    reader = csv.DictReader(io.StringIO(text))
    if not reader.fieldnames or not {"cwe_id", "risk_index"} <= set(reader.fieldnames):
        raise ConfigError(f"{path} is not a risk-index table")
    return {int(row["cwe_id"]): float(row["risk_index"]) for row in reader}
