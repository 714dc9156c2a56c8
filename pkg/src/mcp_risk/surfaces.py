"""CWE to MCP threat-surface mapping, surface shares and conditional co-occurrence."""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ConfigError, ScoringError
from .findings import RepoFindingProfile


class ThreatSurface(str, enum.Enum):
    TOOL = "Tool"
    RESOURCE = "Resource"
    PROMPT = "Prompt"
    PROTOCOL = "Protocol"
    UNMAPPED = "Unmapped"


NAMED_SURFACES = (ThreatSurface.TOOL, ThreatSurface.RESOURCE,
                  ThreatSurface.PROMPT, ThreatSurface.PROTOCOL)

CHAIN_NARRATIVES: dict[tuple[ThreatSurface, ThreatSurface], str] = {
    (ThreatSurface.TOOL, ThreatSurface.PROTOCOL):
        "Chain 1: weak access control puts injectable tool handlers within reach",
    (ThreatSurface.TOOL, ThreatSurface.RESOURCE):
        "Chain 1: a reachable tool handler becomes a path to server-held data",
    (ThreatSurface.RESOURCE, ThreatSurface.PROTOCOL):
        "Chain 2: leaky or misconfigured resources sit behind missing access checks",
    (ThreatSurface.PROTOCOL, ThreatSurface.RESOURCE):
        "Chain 2: protocol gaps widen what an attacker can read, resources decide its value",
    (ThreatSurface.PROMPT, ThreatSurface.RESOURCE):
        "Chain 3: injected instructions drive the server to disclose protected resources",
    (ThreatSurface.PROMPT, ThreatSurface.PROTOCOL):
        "Chain 3: confused-deputy input lands where boundaries are already weak",
    (ThreatSurface.PROMPT, ThreatSurface.TOOL):
        "Chain 4: manipulated input triggers tool execution under the server's authority",
}


def _read_surface_map(text: str, source: str) -> dict[int, ThreatSurface]:
    out: dict[int, ThreatSurface] = {}
    reader = csv.DictReader(io.StringIO(text))
    if not reader.fieldnames or not {"cwe_id", "surface"} <= set(reader.fieldnames):
        raise ConfigError(f"{source}: surface map needs columns cwe_id,surface")
    for n, row in enumerate(reader, start=2):
        try:
            cwe = int(str(row["cwe_id"]).upper().removeprefix("CWE-"))
            surface = ThreatSurface(row["surface"].strip())
        except (ValueError, AttributeError):
            raise ConfigError(f"{source}: bad row {n}: {row!r}") from None
        if surface is ThreatSurface.UNMAPPED:
            raise ConfigError(f"{source}: row {n} maps CWE-{cwe} to Unmapped explicitly")
        if cwe in out and out[cwe] is not surface:
            raise ConfigError(f"{source}: CWE-{cwe} mapped to two surfaces")
        out[cwe] = surface
    return out


def default_surface_map() -> dict[int, ThreatSurface]:
    text = resources.files("mcp_risk").joinpath("data/surface_map.csv").read_text("utf-8")
    return _read_surface_map(text, "surface_map.csv")


def load_surface_map(path: str | Path | None = None) -> dict[int, ThreatSurface]:
    if path is None:
        return default_surface_map()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read surface map {path}: {exc}") from None
    return _read_surface_map(text, str(path))


def map_cwe_to_surface(cwe_id: int,
                       mapping: Mapping[int, ThreatSurface] | None = None) -> ThreatSurface:
    mapping = default_surface_map() if mapping is None else mapping
    return mapping.get(cwe_id, ThreatSurface.UNMAPPED)


@dataclass
class SurfaceShares:
    """Percent of findings and of exposure per surface (Unmapped included)."""

    finding_share: dict[ThreatSurface, float]
    exposure_share: dict[ThreatSurface, float]
    findings: dict[ThreatSurface, int] = field(default_factory=dict)
    exposure: dict[ThreatSurface, float] = field(default_factory=dict)

    def rows(self) -> list[tuple[str, int, float, float, float]]:
        return [(s.value, self.findings[s], self.exposure[s],
                 self.finding_share[s], self.exposure_share[s]) for s in ThreatSurface]


def _profiles(profiles) -> list[RepoFindingProfile]:
    if isinstance(profiles, Mapping):
        profiles = profiles.values()
    return sorted(profiles, key=lambda p: p.repo_id)


def surface_shares(profiles: Mapping[str, RepoFindingProfile] | Iterable[RepoFindingProfile],
                   risk_indices: Mapping[int, float],
                   mapping: Mapping[int, ThreatSurface] | None = None) -> SurfaceShares:
    """Corpus-wide shares: each finding counts once, exposure weights it by its risk index."""
    mapping = default_surface_map() if mapping is None else mapping
    counts = {s: 0 for s in ThreatSurface}
    expo = {s: 0.0 for s in ThreatSurface}
    for p in _profiles(profiles):
        for cwe, f in sorted(p.frequencies.items()):
            if cwe not in risk_indices:
                raise ScoringError(f"repository {p.repo_id}: no risk index for CWE-{cwe}")
            s = mapping.get(cwe, ThreatSurface.UNMAPPED)
            counts[s] += f
            expo[s] += f * risk_indices[cwe]
    n_total, e_total = sum(counts.values()), sum(expo.values())
    if n_total == 0:
        raise ScoringError("surface shares need at least one finding")
    return SurfaceShares(
        finding_share={s: 100.0 * counts[s] / n_total for s in ThreatSurface},
        exposure_share={s: (100.0 * expo[s] / e_total if e_total else 0.0) for s in ThreatSurface},
        findings=counts,
        exposure=expo,
    )


@dataclass
class CooccurrenceMatrix:
    """``cells[(A, B)]`` = percent of repositories having A that also have B.

    A cell is None when no repository has A.
    """

    cells: dict[tuple[ThreatSurface, ThreatSurface], float | None]
    support: dict[ThreatSurface, int]

    def get(self, a: ThreatSurface, b: ThreatSurface) -> float | None:
        return self.cells.get((a, b))

    def to_dict(self) -> dict:
        return {
            "surfaces": [s.value for s in NAMED_SURFACES],
            "support": {s.value: self.support.get(s, 0) for s in NAMED_SURFACES},
            "cells": [[self.cells.get((a, b)) for b in NAMED_SURFACES] for a in NAMED_SURFACES],
        }

    def grid_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["given"] + [s.value for s in NAMED_SURFACES])
        for a in NAMED_SURFACES:
            row = [a.value]
            for b in NAMED_SURFACES:
                v = self.cells.get((a, b))
                row.append("" if v is None else repr(v))
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_dict(cls, doc: dict) -> "CooccurrenceMatrix":
        order = [ThreatSurface(s) for s in doc["surfaces"]]
        cells = {(a, b): doc["cells"][i][j]
                 for i, a in enumerate(order) for j, b in enumerate(order)}
        support = {ThreatSurface(k): int(v) for k, v in doc["support"].items()}
        return cls(cells=cells, support=support)


def repo_surfaces(profile: RepoFindingProfile,
                  mapping: Mapping[int, ThreatSurface]) -> set[ThreatSurface]:
    return {mapping.get(c, ThreatSurface.UNMAPPED) for c, f in profile.frequencies.items() if f > 0}


def cooccurrence(profiles: Mapping[str, RepoFindingProfile] | Iterable[RepoFindingProfile],
                 mapping: Mapping[int, ThreatSurface] | None = None) -> CooccurrenceMatrix:
    mapping = default_surface_map() if mapping is None else mapping
    present = [repo_surfaces(p, mapping) for p in _profiles(profiles)]
    support = {a: sum(a in s for s in present) for a in NAMED_SURFACES}
    cells: dict[tuple[ThreatSurface, ThreatSurface], float | None] = {}
    for a in NAMED_SURFACES:
        for b in NAMED_SURFACES:
            both = sum(a in s and b in s for s in present)
            cells[(a, b)] = 100.0 * both / support[a] if support[a] else None
    return CooccurrenceMatrix(cells=cells, support=support)


@dataclass(frozen=True)
class ChainLink:
    given: ThreatSurface
    also: ThreatSurface
    percent: float
    narrative: str = ""


def chain_report(matrix: CooccurrenceMatrix, threshold: float) -> list[ChainLink]:
    """Off-diagonal cells at or above ``threshold``, strongest first."""
    links = [
        ChainLink(a, b, v, CHAIN_NARRATIVES.get((a, b), ""))
        for (a, b), v in matrix.cells.items()
        if a is not b and v is not None and v >= threshold
    ]
    order = {s: i for i, s in enumerate(NAMED_SURFACES)}
    links.sort(key=lambda c: (-c.percent, order[c.given], order[c.also]))
    return links


def shares_csv(shares: SurfaceShares) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["surface", "findings", "exposure", "finding_share", "exposure_share"])
    for surface, n, e, fs, es in shares.rows():
        w.writerow([surface, n, repr(e), repr(fs), repr(es)])
    return buf.getvalue()


def shares_to_json(shares: SurfaceShares) -> str:
    return json.dumps([
        {"surface": s, "findings": n, "exposure": e, "finding_share": fs, "exposure_share": es}
        for s, n, e, fs, es in shares.rows()
    ], indent=2) + "\n"
