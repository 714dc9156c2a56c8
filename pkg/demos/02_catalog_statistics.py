# %% [markdown]
# # How complete are the catalogs?
#
# Exploratory statistics over the Software Development view of the bundled
# CWE 4.14 release: missing likelihoods, modes of introduction, consequences.

# %%
from _paths import CWE_414
from mcp_risk.catalog import catalog_stats, parse_cwe_catalog, read_catalog_bytes

weaknesses = parse_cwe_catalog(read_catalog_bytes(CWE_414))
stats = catalog_stats(weaknesses, [])
print(f"weaknesses: {stats.weakness_count}")
print(f"LE missing: {stats.le_missing_pct:.1f}%  {stats.le_distribution}")

# %% [markdown]
# Two ways to count consequences: consequence blocks (what the risk formula
# uses) and individual impact labels.

# %%
for label, d in [("modes of introduction", stats.mi), ("consequence blocks", stats.cc),
                 ("impact labels", stats.impacts)]:
    print(f"{label:>22}: mean {d.mean:.3f}  median {d.median}  std {d.std:.3f}")
print("most common impacts:", stats.top_impacts)
