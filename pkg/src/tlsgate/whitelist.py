"""The per-domain whitelist: entries, host matching, persistence.

Each entry maps a registrable domain name to a policy level, an error
handling mechanism, the subscription source, and an optional expiry.
Request hosts match an entry when they equal its domain or end with
``"." + domain`` (label-boundary suffix), longest domain winning.
"""

from __future__ import annotations

import enum
import json
import os
import re
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Union

from .errors import (
    DomainNotFoundError,
    DuplicateDomainError,
    HeaderParseError,
    NormalizationError,
    StoreFormatError,
)
from .policy import PolicyLevel

SUBSCRIPTION_HEADER = "strict-transport-security-config"
STORE_SCHEMA_VERSION = 1

_DOMAIN_CHARS = re.compile(r"[a-z0-9.-]+\Z")
_MAX_AGE_VALUE = re.compile(r"\A\d+\Z")


def now_ts() -> float:
    """Current wall-clock time in seconds; module-level so tests can freeze it."""
    return time.time()


class ErrorHandling(enum.Enum):
    BLOCKING = "blocking"
    ACTIVE_WARNING = "active_warning"

    @classmethod
    def parse(cls, text: str) -> "ErrorHandling":
        try:
            return cls(text.strip().lower().replace("-", "_"))
        except ValueError:
            raise ValueError(f"unknown error handling: {text!r}") from None


class SubscriptionSource(enum.Enum):
    CLIENT_SIDE = "client"
    SERVER_HEADER = "header"


@dataclass(frozen=True)
class DomainEntry:
    domain: str
    level: PolicyLevel
    handling: ErrorHandling
    source: SubscriptionSource
    added_at: float
    expires_at: Optional[float] = None

    def __post_init__(self) -> None:
        if self.source is SubscriptionSource.SERVER_HEADER and self.handling is not ErrorHandling.BLOCKING:
            raise ValueError("header-subscribed entries must use blocking error handling")
        if self.expires_at is not None and self.expires_at <= self.added_at:
            raise ValueError("expires_at must be later than added_at")

    def expired(self, now: float) -> bool:
        return self.expires_at is not None and self.expires_at <= now

    def to_record(self) -> dict:
        record = {
            "domain": self.domain,
            "level": self.level.value,
            "handling": self.handling.value,
            "source": self.source.value,
            "added_at": self.added_at,
        }
        if self.expires_at is not None:
            record["expires_at"] = self.expires_at
        return record


@dataclass(frozen=True)
class HeaderDirective:
    """Parsed form of the subscription header value."""

    present: bool
    max_age_seconds: Optional[int] = None

    def __post_init__(self) -> None:
        if self.max_age_seconds is not None and not self.present:
            raise ValueError("max_age_seconds requires present=True")


def normalize_domain(value: str) -> str:
    """Folds user or URL input into a bare lowercase domain name.

    Strips whitespace, scheme, port, path/query/fragment and a trailing dot.
    The result must be at least two dot-separated labels drawn from
    ``[a-z0-9.-]``.
    """
    text = value.strip().lower()
    if "://" in text:
        text = text.split("://", 1)[1]
    for separator in ("/", "?", "#"):
        text = text.split(separator, 1)[0]
    text = text.split(":", 1)[0]
    text = text.rstrip(".")
    if not text:
        raise NormalizationError(f"no host in {value!r}")
    if not _DOMAIN_CHARS.match(text):
        raise NormalizationError(f"invalid characters in {value!r}")
    labels = text.split(".")
    if any(not label for label in labels):
        raise NormalizationError(f"empty label in {value!r}")
    if len(labels) < 2:
        raise NormalizationError(f"{value!r} is a single label, need at least two")
    return text


def parse_subscription_header(value: str) -> HeaderDirective:
    """Parses the raw header field value into a directive.

    The name-only form (empty or whitespace value) is valid. Directives
    are semicolon-separated and case-insensitive; unknown ones are
    ignored. ``max-age`` takes a non-negative integer, optionally quoted.
    """
    max_age: Optional[int] = None
    seen_max_age = False
    for part in value.split(";"):
        part = part.strip()
        if not part:
            continue
        name, _, raw = part.partition("=")
        if name.strip().lower() != "max-age":
            continue
        if seen_max_age:
            raise HeaderParseError("duplicate max-age directive")
        seen_max_age = True
        raw = raw.strip()
        if len(raw) >= 2 and raw[0] == '"' and raw[-1] == '"':
            raw = raw[1:-1]
        if not _MAX_AGE_VALUE.match(raw):
            raise HeaderParseError(f"malformed max-age value: {raw!r}")
        max_age = int(raw)
    return HeaderDirective(present=True, max_age_seconds=max_age)


class WhitelistStore:
    """Domain -> entry map with a monotone revision counter.

    Mutations are serialized by an internal lock and each successful
    content change bumps the revision by exactly one, so API clients can
    detect staleness optimistically.
    """

    def __init__(self, entries: Iterable[DomainEntry] = (), revision: int = 0):
        self._entries: dict[str, DomainEntry] = {}
        for entry in entries:
            if entry.domain in self._entries:
                raise DuplicateDomainError(f"duplicate domain {entry.domain!r}")
            self._entries[entry.domain] = entry
        self._revision = revision
        self._lock = threading.RLock()

    @property
    def revision(self) -> int:
        with self._lock:
            return self._revision

    def entries(self) -> tuple[DomainEntry, ...]:
        with self._lock:
            return tuple(self._entries[d] for d in sorted(self._entries))

    def get(self, domain: str) -> Optional[DomainEntry]:
        with self._lock:
            return self._entries.get(domain)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def __contains__(self, domain: str) -> bool:
        with self._lock:
            return domain in self._entries

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WhitelistStore):
            return NotImplemented
        with self._lock:
            mine = dict(self._entries), self._revision
        with other._lock:
            theirs = dict(other._entries), other._revision
        return mine == theirs

    def add_client_side(
        self,
        domain: str,
        handling: ErrorHandling = ErrorHandling.ACTIVE_WARNING,
        now: Optional[float] = None,
    ) -> DomainEntry:
        """Inserts a user-supplied domain at the strict level."""
        name = normalize_domain(domain)
        entry = DomainEntry(
            domain=name,
            level=PolicyLevel.STRICT,
            handling=handling,
            source=SubscriptionSource.CLIENT_SIDE,
            added_at=now_ts() if now is None else now,
        )
        with self._lock:
            if name in self._entries:
                raise DuplicateDomainError(
                    f"{name!r} is already whitelisted; remove it before re-adding"
                )
            self._entries[name] = entry
            self._revision += 1
        return entry

    def subscribe_from_header(
        self, host: str, directive: HeaderDirective, now: Optional[float] = None
    ) -> Optional[DomainEntry]:
        """Adds a server-advertised domain: strict level, blocking handling.

        Returns None and leaves the store unchanged when the domain is
        already present (no-duplicate rule) or when the directive expires
        immediately (max-age of zero).
        """
        if not directive.present:
            raise ValueError("directive is not present")
        name = normalize_domain(host)
        moment = now_ts() if now is None else now
        if directive.max_age_seconds == 0:
            return None
        expires = None if directive.max_age_seconds is None else moment + directive.max_age_seconds
        entry = DomainEntry(
            domain=name,
            level=PolicyLevel.STRICT,
            handling=ErrorHandling.BLOCKING,
            source=SubscriptionSource.SERVER_HEADER,
            added_at=moment,
            expires_at=expires,
        )
        with self._lock:
            if name in self._entries:
                return None
            self._entries[name] = entry
            self._revision += 1
        return entry

    def lookup(self, host: str) -> Optional[DomainEntry]:
        """Finds the entry whose domain equals the host or is a dot-boundary
        suffix of it; the longest matching domain wins."""
        name = normalize_domain(host)
        labels = name.split(".")
        with self._lock:
            for start in range(len(labels) - 1):
                candidate = ".".join(labels[start:])
                entry = self._entries.get(candidate)
                if entry is not None:
                    return entry
        return None

    def relax(self, domain: str) -> DomainEntry:
        """Sets the entry's level to default, touching nothing else."""
        name = normalize_domain(domain)
        with self._lock:
            entry = self._entries.get(name)
            if entry is None:
                raise DomainNotFoundError(f"{name!r} is not whitelisted")
            relaxed = replace(entry, level=PolicyLevel.DEFAULT)
            self._entries[name] = relaxed
            self._revision += 1
        return relaxed

    def remove(self, domain: str) -> DomainEntry:
        name = normalize_domain(domain)
        with self._lock:
            entry = self._entries.pop(name, None)
            if entry is None:
                raise DomainNotFoundError(f"{name!r} is not whitelisted")
            self._revision += 1
        return entry

    def purge_expired(self, now: Optional[float] = None) -> list[str]:
        """Removes entries whose expiry has passed; expiry is inclusive."""
        moment = now_ts() if now is None else now
        with self._lock:
            expired = [d for d, e in self._entries.items() if e.expired(moment)]
            for domain in expired:
                del self._entries[domain]
            if expired:
                self._revision += 1
        return expired

    def to_document(self) -> dict:
        """Canonical document form: entries sorted by domain."""
        with self._lock:
            return {
                "schema_version": STORE_SCHEMA_VERSION,
                "revision": self._revision,
                "entries": [e.to_record() for e in self.entries()],
            }


def _entry_from_record(record: dict, label: str) -> DomainEntry:
    try:
        domain = normalize_domain(record["domain"])
        level = PolicyLevel(record["level"])
        handling = ErrorHandling(record["handling"])
        source = SubscriptionSource(record["source"])
        added_at = float(record["added_at"])
        expires_raw = record.get("expires_at")
        expires_at = None if expires_raw is None else float(expires_raw)
        return DomainEntry(
            domain=domain,
            level=level,
            handling=handling,
            source=source,
            added_at=added_at,
            expires_at=expires_at,
        )
    except (KeyError, TypeError, ValueError, NormalizationError) as exc:
        raise StoreFormatError(f"{label}: {exc}") from exc


def store_from_document(document: dict) -> WhitelistStore:
    if not isinstance(document, dict):
        raise StoreFormatError("store document must be an object")
    version = document.get("schema_version")
    if version != STORE_SCHEMA_VERSION:
        raise StoreFormatError(f"unsupported schema_version: {version!r}")
    records = document.get("entries")
    if not isinstance(records, list):
        raise StoreFormatError("store document needs an 'entries' list")
    entries = []
    seen: set[str] = set()
    for index, record in enumerate(records):
        label = f"entry {index}"
        if isinstance(record, dict) and "domain" in record:
            label = f"entry {index} ({record['domain']})"
        if not isinstance(record, dict):
            raise StoreFormatError(f"{label}: expected an object")
        entry = _entry_from_record(record, label)
        if entry.domain in seen:
            raise StoreFormatError(f"{label}: duplicate domain {entry.domain!r}")
        seen.add(entry.domain)
        entries.append(entry)
    revision = document.get("revision", 0)
    if not isinstance(revision, int) or revision < 0:
        raise StoreFormatError(f"bad revision: {revision!r}")
    return WhitelistStore(entries, revision=revision)


def canonical_json(document: dict) -> str:
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def save_store(store: WhitelistStore, path: Union[str, Path]) -> None:
    """Writes the canonical document atomically (temp file + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = canonical_json(store.to_document())
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(payload, encoding="utf-8")
    os.replace(tmp, path)


def load_store(path: Union[str, Path]) -> WhitelistStore:
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise StoreFormatError(f"cannot read store {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise StoreFormatError(f"store {path} is not valid JSON: {exc}") from exc
    return store_from_document(document)
