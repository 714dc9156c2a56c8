"""Exploratory statistics over the raw (pre-imputation) catalogs."""

from __future__ import annotations

from collections import Counter
from typing import Sequence

import numpy as np

from .model import (
    AttackPatternRecord,
    CatalogStats,
    Distribution,
    OrdinalLikelihood,
    OrdinalSeverity,
    WeaknessRecord,
)


def _pct(part: int, whole: int) -> float:
    return 100.0 * part / whole if whole else 0.0


def distribution(counts: Sequence[int]) -> Distribution:
    """Mean, median, population standard deviation and histogram of integer counts."""
    if not counts:
        return Distribution(mean=0.0, median=0.0, std=0.0, histogram={})
    arr = np.asarray(counts, dtype=float)
    return Distribution(
        mean=float(arr.mean()),
        median=float(np.median(arr)),
        std=float(arr.std()),
        histogram=dict(sorted(Counter(int(c) for c in counts).items())),
    )


def _labels(values, enum_cls) -> dict[str, int]:
    counts = Counter(v.label if v is not None else "Missing" for v in values)
    order = [m.label for m in enum_cls] + ["Missing"]
    return {k: counts.get(k, 0) for k in order}


def catalog_stats(weaknesses: Sequence[WeaknessRecord], patterns: Sequence[AttackPatternRecord],
                  *, top_k: int = 5) -> CatalogStats:
    """Coverage and breadth statistics of both catalogs.

    Distributions run over every record, zero counts included. Consequence
    breadth is reported twice: per consequence entry (the CC scoring factor)
    and per individual impact label.
    """
    n_w, n_p = len(weaknesses), len(patterns)
    impacts = Counter(i for w in weaknesses for c in w.consequence_entries for i in c.impacts)
    return CatalogStats(
        weakness_count=n_w,
        pattern_count=n_p,
        le_missing_pct=_pct(sum(w.likelihood_of_exploit is None for w in weaknesses), n_w),
        la_missing_pct=_pct(sum(p.likelihood_of_attack is None for p in patterns), n_p),
        ts_missing_pct=_pct(sum(p.typical_severity is None for p in patterns), n_p),
        le_distribution=_labels((w.likelihood_of_exploit for w in weaknesses), OrdinalLikelihood),
        la_distribution=_labels((p.likelihood_of_attack for p in patterns), OrdinalLikelihood),
        ts_distribution=_labels((p.typical_severity for p in patterns), OrdinalSeverity),
        mi=distribution([w.mi_count for w in weaknesses]),
        cc=distribution([w.cc_count for w in weaknesses]),
        impacts=distribution([w.impact_count for w in weaknesses]),
        impact_label_total=sum(impacts.values()),
        impact_label_unique=len(impacts),
        top_impacts=sorted(impacts.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k],
    )
