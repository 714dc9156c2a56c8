"""Repository search client, inclusion filters and snapshot manifests.

Network access goes through a ``requests``-compatible session. Tests and
offline runs use :class:`ReplaySession`, which plays back recorded
responses in order.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import (
    AuthError,
    ConfigError,
    HarvestError,
    RateLimitError,
    ResponseError,
    SnapshotError,
    SnapshotSchemaError,
)

log = logging.getLogger(__name__)

DEFAULT_QUERY = "mcp server stars:>100 pushed:>2025-01-01 language:Python"
SEARCH_URL = "https://api.github.com/search/repositories"
TOKEN_ENV = "MCP_RISK_TOKEN"
SNAPSHOT_SCHEMA = "mcp-risk/snapshot/1"


def _parse_time(value: str | None) -> datetime | None:
    if value is None:
        return None
    return datetime.fromisoformat(value.replace("Z", "+00:00"))


def _iso(value: datetime | None) -> str | None:
    if value is None:
        return None
    return value.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class RepoMetadata:
    full_name: str
    stars: int
    description: str | None
    url: str
    language: str
    updated_at: datetime
    snapshot_time: datetime

    @classmethod
    def from_search_item(cls, item: dict, snapshot_time: datetime) -> "RepoMetadata":
        try:
            return cls(
                full_name=str(item["full_name"]),
                stars=int(item["stargazers_count"]),
                description=item.get("description"),
                url=str(item.get("html_url") or item["url"]),
                language=str(item.get("language") or ""),
                updated_at=_parse_time(item["updated_at"]),
                snapshot_time=snapshot_time,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ResponseError(f"malformed search item: {exc!r}") from None

    def to_dict(self) -> dict:
        return {
            "full_name": self.full_name,
            "stars": self.stars,
            "description": self.description,
            "url": self.url,
            "language": self.language,
            "updated_at": _iso(self.updated_at),
            "snapshot_time": _iso(self.snapshot_time),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RepoMetadata":
        return cls(
            full_name=str(d["full_name"]),
            stars=int(d["stars"]),
            description=d["description"],
            url=str(d["url"]),
            language=str(d["language"]),
            updated_at=_parse_time(d["updated_at"]),
            snapshot_time=_parse_time(d["snapshot_time"]),
        )


class _Response:
    def __init__(self, status_code: int, headers: dict, body):
        self.status_code = status_code
        self.headers = headers
        self._body = body
        self.text = body if isinstance(body, str) else json.dumps(body)

    def json(self):
        if isinstance(self._body, str):
            return json.loads(self._body)
        return self._body


class ReplaySession:
    """Plays back a recorded list of ``{status, headers, body}`` responses."""

    def __init__(self, responses: Sequence[dict]):
        self._responses = list(responses)
        self.requests: list[dict] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplaySession":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load recorded responses {path}: {exc}") from None
        return cls(doc["responses"] if isinstance(doc, dict) else doc)

    def get(self, url, params=None, headers=None, timeout=None):
        self.requests.append({"url": url, "params": dict(params or {})})
        if not self._responses:
            raise HarvestError("replay exhausted: more requests than recorded responses")
        r = self._responses.pop(0)
        return _Response(int(r.get("status", 200)), dict(r.get("headers") or {}), r.get("body"))


class SearchClient:
    """Paginated repository search with exponential backoff on rate limiting."""

    def __init__(self, token: str | None = None, *, session=None, base_url: str = SEARCH_URL,
                 per_page: int = 100, max_retries: int = 5, backoff: float = 2.0,
                 sleep: Callable[[float], None] = time.sleep,
                 clock: Callable[[], datetime] | None = None):
        self.token = token if token is not None else os.environ.get(TOKEN_ENV)
        if session is None:
            import requests
            session = requests.Session()
        self.session = session
        self.base_url = base_url
        self.per_page = per_page
        self.max_retries = max_retries
        self.backoff = backoff
        self.sleep = sleep
        self.clock = clock or (lambda: datetime.now(timezone.utc))
        self.warnings: list[str] = []

    def _headers(self) -> dict:
        h = {"Accept": "application/vnd.github+json"}
        if self.token:
            h["Authorization"] = f"Bearer {self.token}"
        return h

    def _rate_limited(self, resp) -> bool:
        if resp.status_code == 429:
            return True
        return resp.status_code == 403 and (
            str(resp.headers.get("X-RateLimit-Remaining", "")) == "0"
            or "Retry-After" in resp.headers
            or "rate limit" in resp.text.lower()
        )

    def _get_page(self, query: str, page: int) -> dict:
        params = {"q": query, "sort": "stars", "order": "desc",
                  "per_page": self.per_page, "page": page}
        for attempt in range(self.max_retries + 1):
            resp = self.session.get(self.base_url, params=params, headers=self._headers(),
                                    timeout=30)
            if resp.status_code == 401:
                raise AuthError(f"search API rejected credentials (set {TOKEN_ENV})")
            if self._rate_limited(resp):
                if attempt == self.max_retries:
                    raise RateLimitError(f"rate limit persisted after {attempt} retries")
                wait = self.backoff * 2 ** attempt
                retry_after = resp.headers.get("Retry-After")
                if retry_after and str(retry_after).isdigit():
                    wait = max(wait, float(retry_after))
                log.warning("rate limited on page %d; sleeping %.1fs", page, wait)
                self.sleep(wait)
                continue
            if resp.status_code != 200:
                raise ResponseError(f"search API returned HTTP {resp.status_code}")
            try:
                body = resp.json()
            except ValueError as exc:
                raise ResponseError(f"search response is not JSON: {exc}") from None
            if not isinstance(body, dict) or not isinstance(body.get("items"), list):
                raise ResponseError("search response lacks an 'items' list")
            return body
        raise RateLimitError("rate limit retries exhausted")  # pragma: no cover

    def search_repositories(self, query: str = DEFAULT_QUERY,
                            page_limit: int = 10) -> list[RepoMetadata]:
        """Follow pagination up to ``page_limit`` and return results by stars, descending.

        A failure after at least one good page yields the partial list and a
        warning; authentication and rate-limit exhaustion always raise.
        """
        snapshot_time = self.clock()
        repos: dict[str, RepoMetadata] = {}
        for page in range(1, page_limit + 1):
            try:
                body = self._get_page(query, page)
            except (AuthError, RateLimitError):
                raise
            except HarvestError as exc:
                if not repos:
                    raise
                msg = f"page {page} failed ({exc}); returning {len(repos)} results"
                log.warning(msg)
                self.warnings.append(msg)
                break
            for item in body["items"]:
                rec = RepoMetadata.from_search_item(item, snapshot_time)
                repos.setdefault(rec.full_name, rec)
            if len(body["items"]) < self.per_page:
                break
        return sorted(repos.values(), key=lambda r: (-r.stars, r.full_name))


@dataclass(frozen=True)
class ExclusionRule:
    pattern: str
    reason: str

    def matches(self, repo: RepoMetadata) -> bool:
        rx = re.compile(self.pattern, re.IGNORECASE)
        return bool(rx.search(repo.full_name) or rx.search(repo.description or ""))


@dataclass(frozen=True)
class Exclusion:
    full_name: str
    reason: str


def load_exclusion_rules(path: str | Path | None = None) -> list[ExclusionRule]:
    """Read ``pattern,reason`` rows; the default file ships with the package."""
    if path is None:
        text = resources.files("mcp_risk").joinpath("data/exclusion_rules.csv").read_text("utf-8")
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read exclusion rules {path}: {exc}") from None
    rules = []
    for row in csv.DictReader(io.StringIO(text)):
        try:
            re.compile(row["pattern"])
        except re.error as exc:
            raise ConfigError(f"bad exclusion pattern {row['pattern']!r}: {exc}") from None
        rules.append(ExclusionRule(row["pattern"], row["reason"]))
    return rules


def filter_repositories(repos: Iterable[RepoMetadata], rules: Sequence[ExclusionRule],
                        denylist: Iterable[str] = ()) -> tuple[list[RepoMetadata], list[Exclusion]]:
    """Drop denylisted repositories and those matching a rule; the first match is logged."""
    deny = {d.strip().lower() for d in denylist if d.strip()}
    kept, log_ = [], []
    for r in repos:
        if r.full_name.lower() in deny:
            log_.append(Exclusion(r.full_name, "denylist"))
            continue
        hit = next((rule for rule in rules if rule.matches(r)), None)
        if hit is not None:
            log_.append(Exclusion(r.full_name, hit.reason))
        else:
            kept.append(r)
    log_.sort(key=lambda e: e.full_name)
    return kept, log_


@dataclass
class Snapshot:
    query: str
    snapshot_time: datetime
    repositories: list[RepoMetadata] = field(default_factory=list)
    exclusions: list[Exclusion] = field(default_factory=list)


def save_snapshot(repos: Sequence[RepoMetadata], path: str | Path, *, query: str = DEFAULT_QUERY,
                  snapshot_time: datetime | None = None,
                  exclusions: Sequence[Exclusion] = ()) -> Path:
    if snapshot_time is None:
        snapshot_time = repos[0].snapshot_time if repos else datetime.now(timezone.utc)
    names = [r.full_name for r in repos]
    if len(set(names)) != len(names):
        raise SnapshotError("duplicate full_name in snapshot")
    doc = {
        "schema": SNAPSHOT_SCHEMA,
        "query": query,
        "snapshot_time": _iso(snapshot_time),
        "count": len(repos),
        "repositories": [r.to_dict() for r in repos],
        "exclusions": [{"full_name": e.full_name, "reason": e.reason} for e in exclusions],
    }
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_snapshot(path: str | Path) -> Snapshot:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SnapshotError(f"cannot read snapshot {path}: {exc}") from None
    try:
        doc = json.loads(text)
        if doc.get("schema") != SNAPSHOT_SCHEMA:
            raise SnapshotSchemaError(f"{path}: unexpected schema {doc.get('schema')!r}")
        repos = [RepoMetadata.from_dict(r) for r in doc["repositories"]]
        if len(repos) != doc["count"]:
            raise SnapshotSchemaError(f"{path}: count {doc['count']} != {len(repos)} records")
        return Snapshot(
            query=doc["query"],
            snapshot_time=_parse_time(doc["snapshot_time"]),
            repositories=repos,
            exclusions=[Exclusion(e["full_name"], e["reason"]) for e in doc.get("exclusions", [])],
        )
    except SnapshotSchemaError:
        raise
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError) as exc:
        raise SnapshotSchemaError(f"{path}: not a valid snapshot manifest ({exc!r})") from None
