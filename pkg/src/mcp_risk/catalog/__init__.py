"""CWE and CAPEC catalog ingestion, pair scoring and the per-CWE Risk Index."""

from .model import (
    AttackPatternRecord,
    CatalogStats,
    Consequence,
    CweCapecPair,
    CweRiskEntry,
    Discard,
    Distribution,
    Flag,
    OrdinalLikelihood,
    OrdinalSeverity,
    WeaknessRecord,
)
from .pairs import (
    ManualOverride,
    apply_manual_overrides,
    build_pairs,
    default_overrides,
    load_overrides,
    parse_overrides,
)
from .risk import compute_cwe_risk_index, format_risk_table, read_risk_table
from .stats import catalog_stats
from .xmlparse import (
    CWE_SCOPES,
    catalog_version,
    parse_capec_catalog,
    parse_cwe_catalog,
    read_catalog_bytes,
)

__all__ = [
    "AttackPatternRecord", "CatalogStats", "Consequence", "CweCapecPair", "CweRiskEntry",
    "Discard", "Distribution", "Flag", "OrdinalLikelihood", "OrdinalSeverity",
    "WeaknessRecord", "ManualOverride", "apply_manual_overrides", "build_pairs",
    "default_overrides", "load_overrides", "parse_overrides", "compute_cwe_risk_index",
    "format_risk_table", "read_risk_table", "catalog_stats", "CWE_SCOPES",
    "catalog_version", "parse_capec_catalog", "parse_cwe_catalog", "read_catalog_bytes",
]
