# %% [markdown]
# # Building a repository snapshot
#
# Replays recorded search responses (including a rate-limit response), applies
# the shipped exclusion rules and writes a snapshot manifest. Swap the replay
# session for `SearchClient()` with `MCP_RISK_TOKEN` set to query live.

# %%
import tempfile
from pathlib import Path

from _paths import FIX
from mcp_risk.harvest import (
    ReplaySession, SearchClient, filter_repositories, load_exclusion_rules,
    load_snapshot, save_snapshot,
)

session = ReplaySession.from_file(FIX / "harvest" / "rate_limited.json")
client = SearchClient(session=session, per_page=2, sleep=lambda s: print(f"(backing off {s}s)"))
repos = client.search_repositories(page_limit=5)
kept, excluded = filter_repositories(repos, load_exclusion_rules())
for r in kept:
    print(f"keep {r.full_name} ({r.stars} stars)")
for e in excluded:
    print(f"drop {e.full_name}: {e.reason}")

path = save_snapshot(kept, Path(tempfile.mkdtemp()) / "snapshot.json", exclusions=excluded)
assert load_snapshot(path).repositories == kept
print("snapshot:", path)
