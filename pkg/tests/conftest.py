"""Shared fixtures and the per-criterion acceptance summary."""

from __future__ import annotations

import os
from pathlib import Path

import pytest

from mcp_risk.findings import RepoFindingProfile

HERE = Path(__file__).parent
FIXTURES = HERE / "fixtures"
DATA = HERE / "data"
REPO_ROOT = HERE.parent

CWE_FIXTURE = FIXTURES / "catalogs" / "cwe_fixture.xml"
CAPEC_FIXTURE = FIXTURES / "catalogs" / "capec_fixture.xml"
CWE_414 = DATA / "cwec_v4.14.xml.xz"


def pinned_dir() -> Path:
    return Path(os.environ.get("MCP_RISK_PINNED_DIR", REPO_ROOT / "data" / "pinned"))


def find_pinned(stem: str) -> Path | None:
    for suffix in (".xml", ".xml.zip", ".xml.xz", ".xml.gz"):
        p = pinned_dir() / f"{stem}{suffix}"
        if p.is_file():
            return p
    return None


def profile(repo_id: str, freqs: dict[int, int]) -> RepoFindingProfile:
    return RepoFindingProfile(repo_id=repo_id, frequencies=dict(freqs))


def pipeline_args(out: Path, *extra: str) -> list[str]:
    return [
        "run",
        "--cwe-xml", str(CWE_FIXTURE),
        "--capec-xml", str(CAPEC_FIXTURE),
        "--findings-dir", str(FIXTURES / "corpus"),
        "--joern-manifest", str(FIXTURES / "joern_manifest.csv"),
        "--scanner-map", str(FIXTURES / "scanner_map.csv"),
        "--out", str(out),
        *extra,
    ]


@pytest.fixture(scope="session")
def cwe_fixture_bytes() -> bytes:
    return CWE_FIXTURE.read_bytes()


@pytest.fixture(scope="session")
def capec_fixture_bytes() -> bytes:
    return CAPEC_FIXTURE.read_bytes()


# acceptance summary: one line per criterion number

_results: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = getattr(report, "_criterion", None)
    if crit is None:
        return
    num, title = crit
    entry = _results.setdefault(num, {"title": title, "passed": True, "n": 0, "failed": []})
    entry["n"] += 1
    if report.outcome != "passed":
        entry["passed"] = False
        entry["failed"].append(report.nodeid.split("::")[-1])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep._criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_results):
        e = _results[num]
        status = "PASS" if e["passed"] else "FAIL"
        extra = "" if e["passed"] else f"  (failing: {', '.join(e['failed'])})"
        tr.write_line(f"criterion {num:>2} {status}  {e['title']}{extra}")
