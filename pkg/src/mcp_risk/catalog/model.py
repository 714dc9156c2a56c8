"""Value types for the CWE/CAPEC catalogs and the scored pair table."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class OrdinalLikelihood(enum.IntEnum):
    """Likelihood of exploit (CWE) / likelihood of attack (CAPEC)."""

    LOW = 1
    MEDIUM = 2
    HIGH = 3

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def from_label(cls, text: str | None) -> "OrdinalLikelihood | None":
        """Map a catalog label to its ordinal; ``Unknown`` and blanks map to None."""
        if text is None:
            return None
        key = text.strip().upper()
        if not key or key == "UNKNOWN":
            return None
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unrecognised likelihood label {text!r}") from None


class OrdinalSeverity(enum.IntEnum):
    VERY_LOW = 1
    LOW = 2
    MEDIUM = 3
    HIGH = 4
    VERY_HIGH = 5

    @property
    def label(self) -> str:
        return self.name.replace("_", " ").title()

    @classmethod
    def from_label(cls, text: str | None) -> "OrdinalSeverity | None":
        if text is None:
            return None
        key = "_".join(text.strip().upper().split())
        if not key or key == "UNKNOWN":
            return None
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unrecognised severity label {text!r}") from None


@dataclass(frozen=True)
class Consequence:
    scopes: tuple[str, ...]
    impacts: tuple[str, ...]


@dataclass(frozen=True)
class WeaknessRecord:
    cwe_id: int
    name: str
    likelihood_of_exploit: OrdinalLikelihood | None = None
    modes_of_introduction: tuple[str, ...] = ()
    consequence_entries: tuple[Consequence, ...] = ()
    related_capec_ids: tuple[int, ...] = ()
    status: str = ""

    @property
    def mi_count(self) -> int:
        return len(self.modes_of_introduction)

    @property
    def cc_count(self) -> int:
        """Number of consequence entries (blocks); the CC factor of the risk formula."""
        return len(self.consequence_entries)

    @property
    def impact_count(self) -> int:
        """Number of individual impact labels across all consequence entries."""
        return sum(len(c.impacts) for c in self.consequence_entries)


@dataclass(frozen=True)
class AttackPatternRecord:
    capec_id: int
    name: str
    likelihood_of_attack: OrdinalLikelihood | None = None
    typical_severity: OrdinalSeverity | None = None
    related_cwe_ids: tuple[int, ...] = ()
    status: str = ""

    @property
    def deprecated(self) -> bool:
        return self.status == "Deprecated" or self.name.startswith("DEPRECATED")


class Flag(str, enum.Enum):
    LE_FROM_LA = "LE_FROM_LA"
    LA_FROM_LE = "LA_FROM_LE"
    MANUAL_OVERRIDE = "MANUAL_OVERRIDE"


@dataclass(frozen=True)
class CweCapecPair:
    """One fully populated (CWE, CAPEC) scoring row.

    ``capec_id`` is None only for manually completed rows that have no
    attack pattern at all (every factor supplied by the override table).
    """

    cwe_id: int
    capec_id: int | None
    la: int
    le: int
    mi: int
    cc: int
    ts: int
    flags: frozenset[Flag] = frozenset()

    def __post_init__(self):
        if not (1 <= self.la <= 3 and 1 <= self.le <= 3):
            raise ValueError(f"likelihood factors out of range: la={self.la} le={self.le}")
        if not 1 <= self.ts <= 5:
            raise ValueError(f"typical severity out of range: {self.ts}")
        if self.mi < 1 or self.cc < 1:
            raise ValueError(f"breadth factors must be >= 1: mi={self.mi} cc={self.cc}")

    @property
    def likelihood(self) -> int:
        return self.la * self.le * self.mi

    @property
    def impact(self) -> int:
        return self.ts * self.cc

    @property
    def raw_risk(self) -> int:
        return self.likelihood * self.impact


@dataclass(frozen=True)
class Discard:
    cwe_id: int
    capec_id: int | None
    reason: str


@dataclass(frozen=True)
class CweRiskEntry:
    cwe_id: int
    pairs: tuple[CweCapecPair, ...]
    raw_risk: int
    risk_index: float
    name: str = ""

    @property
    def flags(self) -> frozenset[Flag]:
        out: set[Flag] = set()
        for p in self.pairs:
            out |= p.flags
        return frozenset(out)


@dataclass
class Distribution:
    mean: float
    median: float
    std: float
    histogram: dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "median": self.median,
            "std": self.std,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
        }


@dataclass
class CatalogStats:
    weakness_count: int
    pattern_count: int
    le_missing_pct: float
    la_missing_pct: float
    ts_missing_pct: float
    le_distribution: dict[str, int]
    la_distribution: dict[str, int]
    ts_distribution: dict[str, int]
    mi: Distribution
    cc: Distribution
    impacts: Distribution
    impact_label_total: int
    impact_label_unique: int
    top_impacts: list[tuple[str, int]]

    def to_dict(self) -> dict:
        return {
            "weakness_count": self.weakness_count,
            "pattern_count": self.pattern_count,
            "missing_pct": {
                "likelihood_of_exploit": self.le_missing_pct,
                "likelihood_of_attack": self.la_missing_pct,
                "typical_severity": self.ts_missing_pct,
            },
            "likelihood_of_exploit": self.le_distribution,
            "likelihood_of_attack": self.la_distribution,
            "typical_severity": self.ts_distribution,
            "modes_of_introduction": self.mi.to_dict(),
            "consequence_entries": self.cc.to_dict(),
            "impact_labels": self.impacts.to_dict(),
            "impact_label_total": self.impact_label_total,
            "impact_label_unique": self.impact_label_unique,
            "top_impacts": [{"impact": k, "count": v} for k, v in self.top_impacts],
        }
