# %% [markdown]
# # Threat surfaces and how they co-occur
#
# Each CWE maps to one MCP surface (Tool, Resource, Prompt, Protocol) or to
# Unmapped. Shares say where findings and exposure concentrate; the
# conditional co-occurrence grid says which weaknesses travel together.

# %%
from mcp_risk.findings import RepoFindingProfile
from mcp_risk.surfaces import NAMED_SURFACES, chain_report, cooccurrence, surface_shares

index = {78: 66.7, 89: 50.0, 22: 62.5, 200: 5.6, 79: 41.7, 862: 25.0, 306: 11.1}
profiles = [
    RepoFindingProfile("a", {78: 3, 862: 1, 22: 1}),
    RepoFindingProfile("b", {862: 2, 200: 1}),
    RepoFindingProfile("c", {79: 1, 22: 2, 306: 1}),
    RepoFindingProfile("d", {89: 1, 306: 2}),
]
shares = surface_shares(profiles, index)
for name, n, e, fs, es in shares.rows():
    print(f"{name:>9}: {fs:5.1f}% of findings, {es:5.1f}% of exposure")

# %%
m = cooccurrence(profiles)
print("given \\ also " + " ".join(f"{s.value:>9}" for s in NAMED_SURFACES))
for a in NAMED_SURFACES:
    cells = [m.get(a, b) for b in NAMED_SURFACES]
    print(f"{a.value:>12} " + " ".join("        -" if v is None else f"{v:9.0f}" for v in cells))
for link in chain_report(m, 75):
    print(f"{link.given.value} -> {link.also.value}: {link.percent:.0f}%  {link.narrative}")
