"""Readers for the MITRE CWE (schema 6/7) and CAPEC (schema 3) XML catalogs.

Element names are matched on their local part so that any minor schema
namespace revision parses the same way. Optional fields stay ``None`` or empty;
nothing is defaulted here.
"""

from __future__ import annotations

import gzip
import io
import lzma
import zipfile
import xml.etree.ElementTree as ET
from pathlib import Path

from ..errors import IntegrityError, ParseError
from .model import (
    AttackPatternRecord,
    Consequence,
    OrdinalLikelihood,
    OrdinalSeverity,
    WeaknessRecord,
)

SOFTWARE_DEVELOPMENT_VIEW = 699
HARDWARE_DESIGN_VIEW = 1194

CWE_SCOPES = ("software-development", "scoring", "all")


def read_catalog_bytes(path: str | Path) -> bytes:
    """Read a catalog file, transparently unpacking ``.zip``, ``.xz`` and ``.gz``."""
    path = Path(path)
    raw = path.read_bytes()
    suffix = path.suffix.lower()
    if suffix == ".zip":
        with zipfile.ZipFile(io.BytesIO(raw)) as zf:
            names = [n for n in zf.namelist() if n.lower().endswith(".xml")]
            if len(names) != 1:
                raise ParseError("zip archive must hold exactly one .xml member", source=str(path))
            return zf.read(names[0])
    if suffix == ".xz":
        return lzma.decompress(raw)
    if suffix == ".gz":
        return gzip.decompress(raw)
    return raw


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _children(elem: ET.Element, name: str) -> list[ET.Element]:
    return [c for c in elem if _local(c.tag) == name]


def _child(elem: ET.Element, name: str) -> ET.Element | None:
    for c in elem:
        if _local(c.tag) == name:
            return c
    return None


def _grandchildren(elem: ET.Element, outer: str, inner: str) -> list[ET.Element]:
    box = _child(elem, outer)
    return [] if box is None else _children(box, inner)


def _text(elem: ET.Element | None) -> str | None:
    if elem is None or elem.text is None:
        return None
    return elem.text.strip() or None


def _parse_root(data: bytes, source: str | None, expected: str) -> ET.Element:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, column = exc.position
        raise ParseError(f"malformed XML: {exc.msg}",
                         source=source, line=line, column=column) from None
    if _local(root.tag) != expected:
        raise ParseError(f"expected <{expected}> root element, found <{_local(root.tag)}>",
                         source=source)
    return root


def _int_attr(elem: ET.Element, attr: str, source: str | None) -> int:
    value = elem.get(attr)
    try:
        number = int(value)
    except (TypeError, ValueError):
        raise ParseError(f"<{_local(elem.tag)}> has non-integer {attr}={value!r}",
                         source=source) from None
    if number <= 0:
        raise ParseError(f"<{_local(elem.tag)}> has non-positive {attr}={number}", source=source)
    return number


def _dedup(ids: list[int]) -> tuple[int, ...]:
    return tuple(dict.fromkeys(ids))


def catalog_version(data: bytes) -> str:
    """Return the ``Name Version`` of a catalog document without full record parsing."""
    for _event, elem in ET.iterparse(io.BytesIO(data), events=("start",)):
        return f"{elem.get('Name', '?')} {elem.get('Version', '?')}"
    return "? ?"


def _view_members(root: ET.Element, view_id: int) -> set[int] | None:
    """Weakness ids reachable from ``view_id`` through its member categories.

    Returns None when the document does not define the view.
    """
    views = [v for v in _grandchildren(root, "Views", "View") if v.get("ID") == str(view_id)]
    if not views:
        return None
    direct = {int(m.get("CWE_ID")) for v in views
              for m in _grandchildren(v, "Members", "Has_Member") if m.get("CWE_ID")}
    members = set(direct)
    for cat in _grandchildren(root, "Categories", "Category"):
        if int(cat.get("ID", 0)) not in direct:
            continue
        for m in _grandchildren(cat, "Relationships", "Has_Member"):
            if m.get("View_ID") == str(view_id) and m.get("CWE_ID"):
                members.add(int(m.get("CWE_ID")))
    return members


def _weakness(elem: ET.Element, source: str | None) -> WeaknessRecord:
    cwe_id = _int_attr(elem, "ID", source)
    try:
        le = OrdinalLikelihood.from_label(_text(_child(elem, "Likelihood_Of_Exploit")))
    except ValueError as exc:
        raise ParseError(f"CWE-{cwe_id}: {exc}", source=source) from None
    modes = tuple(
        _text(_child(intro, "Phase")) or ""
        for intro in _grandchildren(elem, "Modes_Of_Introduction", "Introduction")
    )
    consequences = tuple(
        Consequence(
            scopes=tuple(t for t in (_text(s) for s in _children(c, "Scope")) if t),
            impacts=tuple(t for t in (_text(i) for i in _children(c, "Impact")) if t),
        )
        for c in _grandchildren(elem, "Common_Consequences", "Consequence")
    )
    capecs = [_int_attr(r, "CAPEC_ID", source)
              for r in _grandchildren(elem, "Related_Attack_Patterns", "Related_Attack_Pattern")]
    return WeaknessRecord(
        cwe_id=cwe_id,
        name=elem.get("Name", ""),
        likelihood_of_exploit=le,
        modes_of_introduction=modes,
        consequence_entries=consequences,
        related_capec_ids=_dedup(capecs),
        status=elem.get("Status", ""),
    )


def parse_cwe_catalog(data: bytes, *, scope: str = "software-development",
                      source: str | None = None) -> list[WeaknessRecord]:
    """Parse a CWE catalog into one record per ``<Weakness>`` in ``scope``.

    ``software-development`` keeps the members of the Software Development view
    (699) and is the population the catalog statistics describe. ``scoring``
    keeps every non-deprecated weakness except hardware-only entries, so that
    class-level CWEs (which never appear in view 699) can still receive a risk
    index. ``all`` keeps everything. When a document defines no views, every
    weakness is in every scope.
    """
    if scope not in CWE_SCOPES:
        raise ValueError(f"unknown CWE scope {scope!r}; expected one of {CWE_SCOPES}")
    root = _parse_root(data, source, "Weakness_Catalog")
    records: list[WeaknessRecord] = []
    seen: set[int] = set()
    for elem in _grandchildren(root, "Weaknesses", "Weakness"):
        rec = _weakness(elem, source)
        if rec.cwe_id in seen:
            raise IntegrityError(f"duplicate weakness CWE-{rec.cwe_id}", source=source)
        seen.add(rec.cwe_id)
        records.append(rec)

    if scope == "all":
        return records
    software = _view_members(root, SOFTWARE_DEVELOPMENT_VIEW)
    if scope == "software-development":
        if software is None:
            return records
        return [r for r in records if r.cwe_id in software]
    hardware = _view_members(root, HARDWARE_DESIGN_VIEW) or set()
    software = software or set()
    return [
        r for r in records
        if r.status != "Deprecated" and not (r.cwe_id in hardware and r.cwe_id not in software)
    ]


def _pattern(elem: ET.Element, source: str | None) -> AttackPatternRecord:
    capec_id = _int_attr(elem, "ID", source)
    try:
        la = OrdinalLikelihood.from_label(_text(_child(elem, "Likelihood_Of_Attack")))
        ts = OrdinalSeverity.from_label(_text(_child(elem, "Typical_Severity")))
    except ValueError as exc:
        raise ParseError(f"CAPEC-{capec_id}: {exc}", source=source) from None
    cwes = [_int_attr(r, "CWE_ID", source)
            for r in _grandchildren(elem, "Related_Weaknesses", "Related_Weakness")]
    return AttackPatternRecord(
        capec_id=capec_id,
        name=elem.get("Name", ""),
        likelihood_of_attack=la,
        typical_severity=ts,
        related_cwe_ids=_dedup(cwes),
        status=elem.get("Status", ""),
    )


def parse_capec_catalog(data: bytes, *, source: str | None = None) -> list[AttackPatternRecord]:
    """Parse a CAPEC catalog; deprecated patterns are kept with their names verbatim."""
    root = _parse_root(data, source, "Attack_Pattern_Catalog")
    records: list[AttackPatternRecord] = []
    seen: set[int] = set()
    for elem in _grandchildren(root, "Attack_Patterns", "Attack_Pattern"):
        rec = _pattern(elem, source)
        if rec.capec_id in seen:
            raise IntegrityError(f"duplicate attack pattern CAPEC-{rec.capec_id}", source=source)
        seen.add(rec.capec_id)
        records.append(rec)
    return records
