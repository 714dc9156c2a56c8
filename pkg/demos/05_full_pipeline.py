# %% [markdown]
# # The whole pipeline on the bundled six-repository corpus
#
# Same as `mcp-risk run ... --render`. Artifacts land in a temporary
# directory unless a path is given as argv[1].

# %%
import sys
import tempfile
from pathlib import Path

from _paths import CAPEC_XML, CWE_XML, FIX
from mcp_risk.pipeline import PipelineConfig, run_pipeline

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp()) / "mcp-risk"
result = run_pipeline(PipelineConfig(
    cwe_xml=CWE_XML, capec_xml=CAPEC_XML, findings_dir=FIX / "corpus", out=out,
    joern_manifest=FIX / "joern_manifest.csv", scanner_map=FIX / "scanner_map.csv", render=True,
))
for s in result.scores:
    print(s.repo_id, s.band.value, "" if s.normalized is None else f"{s.normalized:.1f}")
print("skipped:", result.skipped)
print("\n".join(sorted(result.artifacts)))
print("written to", out)
