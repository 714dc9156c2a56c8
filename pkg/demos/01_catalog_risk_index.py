# %% [markdown]
# # From MITRE catalogs to a per-CWE risk index
#
# Every CWE gets a 0-100 index from the worst of its CWE-CAPEC pairs:
# likelihood (LA x LE x MI) times impact (TS x CC), scaled to the catalog maximum.
# This walk-through uses the small fixture catalogs so every number can be checked by hand.
# Pass real catalogs as argv[1] and argv[2] to run it on MITRE data instead.

# %%
import sys

from _paths import CAPEC_XML, CWE_XML
from mcp_risk.catalog import (
    apply_manual_overrides, build_pairs, compute_cwe_risk_index, default_overrides,
    parse_capec_catalog, parse_cwe_catalog, read_catalog_bytes,
)

cwe_path, capec_path = (sys.argv[1:3] if len(sys.argv) > 2 else (CWE_XML, CAPEC_XML))
weaknesses = parse_cwe_catalog(read_catalog_bytes(cwe_path), scope="scoring")
patterns = parse_capec_catalog(read_catalog_bytes(capec_path))
print(f"{len(weaknesses)} weaknesses in scoring scope, {len(patterns)} attack patterns")

# %% [markdown]
# Pairs come from the union of both catalogs' cross references. A missing
# likelihood is borrowed from the other side of the pair and flagged.

# %%
discards = []
pairs = build_pairs(weaknesses, patterns, discards=discards)
for p in pairs:
    flags = ",".join(sorted(f.value for f in p.flags)) or "-"
    print(f"CWE-{p.cwe_id:<5} CAPEC-{p.capec_id:<4} L={p.likelihood:<2} I={p.impact:<2} raw={p.raw_risk:<4} {flags}")
for d in discards:
    print(f"dropped CWE-{d.cwe_id} / CAPEC-{d.capec_id}: {d.reason}")

# %% [markdown]
# The shipped override table completes CWEs the catalogs leave unscorable.
# Rows for CWEs the catalog lacks are skipped here, as the pipeline does.

# %%
known = {w.cwe_id for w in weaknesses}
table = [o for o in default_overrides() if o.cwe_id in known]
pairs = apply_manual_overrides(pairs, table, weaknesses, patterns)
index = compute_cwe_risk_index(pairs, names={w.cwe_id: w.name for w in weaknesses})
for e in sorted(index.values(), key=lambda e: -e.risk_index):
    print(f"CWE-{e.cwe_id:<5} {e.risk_index:6.1f}  {e.name[:60]}")
