# %% [markdown]
# # Findings, profiles and repository scores
#
# Three analyzers report on the same code. Findings are normalised to
# (repo, CWE, file, line) and deduplicated in 5-line buckets, so a weakness two
# tools both flag counts once.

# %%
import numpy as np

from _paths import FIX
from mcp_risk.findings import (
    load_query_manifest, normalize_and_dedup, parse_joern_results, parse_sarif,
)
from mcp_risk.scoring import band_distribution, score_corpus

alpha = FIX / "corpus" / "alpha"
found = list(parse_sarif((alpha / "codeql.sarif").read_bytes(), "alpha"))
found += parse_joern_results((alpha / "alpha.joern.jsonl").read_bytes(),
                             load_query_manifest(FIX / "joern_manifest.csv"), "alpha")
for f in found:
    print(f.tool.value, f.cwe_id, f"{f.file_path}:{f.start_line}")
print("profile:", normalize_and_dedup(found)["alpha"].frequencies)

# %% [markdown]
# Scores need only a risk index per CWE. Exposure sums weights, RMS rewards
# severe findings, and the overall score grows with log10 of the volume.

# %%
from mcp_risk.findings import RepoFindingProfile

rng = np.random.default_rng(7)
index = {c: float(w) for c, w in zip(range(1, 21), rng.uniform(1, 100, 20))}
profiles = {
    f"repo{i}": RepoFindingProfile(f"repo{i}", {int(c): int(k) for c, k in
                                                zip(rng.choice(20, 4, replace=False) + 1,
                                                    rng.integers(1, 30, 4))})
    for i in range(8)
}
for s in score_corpus(profiles, index):
    print(f"{s.repo_id}: N={s.n_findings:<3} rms={s.rms:6.2f} overall={s.overall:7.2f} "
          f"norm={s.normalized:6.2f} {s.band.value}")
print(band_distribution(score_corpus(profiles, index)))
