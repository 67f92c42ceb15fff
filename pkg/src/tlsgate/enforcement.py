"""Request pipeline: policy decision, header subscription, error handling.

Mirrors the three observers of the browser mechanism. Before a request,
the whitelist decides which policy the handshake must honor; after a
successful response, the subscription header may add the domain; on a
version or ciphersuite mismatch the whitelisted domain gets a blocking
or active-warning decision, the latter carrying a single-use bypass
token that relaxes exactly that domain ("Restore Defaults").
"""

from __future__ import annotations

import enum
import logging
import secrets
import threading
import uuid
from abc import ABC, abstractmethod
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union
from urllib.parse import urlsplit

from .errors import (
    EventStateError,
    HeaderParseError,
    NormalizationError,
    TokenReplayError,
    TransportUnreachableError,
    UnknownTokenError,
)
from .handshake import (
    AttackerModel,
    ClientAborted,
    ClientBehavior,
    DefaultFallback,
    Established,
    FailureAlert,
    PolicyEnforced,
    ServerConfig,
    SessionTranscript,
    run_session,
)
from .model import SuiteCatalog, TlsVersion, default_catalog
from .policy import PolicyLevel, PolicySpec, spec_of
from .whitelist import (
    SUBSCRIPTION_HEADER,
    DomainEntry,
    ErrorHandling,
    WhitelistStore,
    normalize_domain,
    now_ts,
    parse_subscription_header,
)

logger = logging.getLogger(__name__)

EVENT_REGISTRY_CAPACITY = 1024


class ErrorKind(enum.Enum):
    """The two mismatch errors the mechanism intercepts, with the
    browser's canonical code strings."""

    UNSUPPORTED_VERSION = "SSL_ERROR_UNSUPPORTED_VERSION"
    NO_CIPHER_OVERLAP = "SSL_ERROR_NO_CYPHER_OVERLAP"

    @property
    def code(self) -> str:
        return self.value


class EventStatus(enum.Enum):
    PENDING = "pending"
    BYPASSED = "bypassed"
    CLOSED = "closed"
    BLOCKED = "blocked"


@dataclass
class BypassToken:
    """Single-use credential backing one "Restore Defaults" click."""

    value: str
    domain: str
    created_at: float
    used: bool = False


@dataclass
class WarningEvent:
    id: str
    url: str
    domain: str
    kind: ErrorKind
    handling: ErrorHandling
    status: EventStatus
    created_at: float
    token: Optional[BypassToken] = None

    def payload(self) -> dict:
        """Structured document consumed by the gateway renderer and dashboard."""
        doc = {
            "event_id": self.id,
            "domain": self.domain,
            "url": self.url,
            "error_code": self.kind.code,
            "handling": self.handling.value,
            "status": self.status.value,
        }
        if self.token is not None and not self.token.used:
            doc["bypass_token"] = self.token.value
        return doc


@dataclass(frozen=True)
class DefaultError:
    """Non-whitelisted host: the generic failure passes through untouched."""


@dataclass(frozen=True)
class BlockPage:
    domain: str
    kind: ErrorKind
    event: WarningEvent


@dataclass(frozen=True)
class WarnPage:
    domain: str
    kind: ErrorKind
    token: BypassToken
    event: WarningEvent


ErrorDecision = Union[DefaultError, BlockPage, WarnPage]


@dataclass(frozen=True)
class RetryDirective:
    """Tells the caller to re-issue the request, now under the default policy."""

    domain: str
    new_level: PolicyLevel
    retry_url: str


class EventRegistry:
    """Bounded in-memory registry of warning events.

    Non-pending events are evicted FIFO past capacity; token consumption
    is atomic so two concurrent bypasses of one token cannot both win.
    """

    def __init__(self, capacity: int = EVENT_REGISTRY_CAPACITY):
        self._capacity = capacity
        self._events: "OrderedDict[str, WarningEvent]" = OrderedDict()
        self._event_by_token: dict[str, str] = {}
        self._lock = threading.RLock()

    def _evict(self) -> None:
        while len(self._events) > self._capacity:
            victim_id = None
            for event_id, event in self._events.items():
                if event.status is not EventStatus.PENDING:
                    victim_id = event_id
                    break
            if victim_id is None:
                victim_id = next(iter(self._events))
            victim = self._events.pop(victim_id)
            if victim.token is not None:
                self._event_by_token.pop(victim.token.value, None)

    def _record(self, event: WarningEvent) -> WarningEvent:
        with self._lock:
            self._events[event.id] = event
            if event.token is not None:
                self._event_by_token[event.token.value] = event.id
            self._evict()
        return event

    def record_blocked(self, url: str, domain: str, kind: ErrorKind, now: float) -> WarningEvent:
        return self._record(
            WarningEvent(
                id=uuid.uuid4().hex,
                url=url,
                domain=domain,
                kind=kind,
                handling=ErrorHandling.BLOCKING,
                status=EventStatus.BLOCKED,
                created_at=now,
            )
        )

    def record_pending(self, url: str, domain: str, kind: ErrorKind, now: float) -> WarningEvent:
        token = BypassToken(value=secrets.token_urlsafe(16), domain=domain, created_at=now)
        return self._record(
            WarningEvent(
                id=uuid.uuid4().hex,
                url=url,
                domain=domain,
                kind=kind,
                handling=ErrorHandling.ACTIVE_WARNING,
                status=EventStatus.PENDING,
                created_at=now,
                token=token,
            )
        )

    def get(self, event_id: str) -> Optional[WarningEvent]:
        with self._lock:
            return self._events.get(event_id)

    def events(self, status: Optional[EventStatus] = None) -> list[WarningEvent]:
        with self._lock:
            found = list(self._events.values())
        if status is None:
            return found
        return [e for e in found if e.status is status]

    def consume_token(self, token_value: str) -> WarningEvent:
        """Atomically marks the token used and its event bypassed."""
        with self._lock:
            event_id = self._event_by_token.get(token_value)
            if event_id is None:
                raise UnknownTokenError("unknown bypass token")
            event = self._events[event_id]
            assert event.token is not None
            if event.token.used:
                raise TokenReplayError("bypass token already consumed")
            if event.status is not EventStatus.PENDING:
                raise EventStateError(f"event is {event.status.value}, not pending")
            event.token.used = True
            event.status = EventStatus.BYPASSED
            return event

    def close(self, event_id: str) -> WarningEvent:
        """Closes a pending event and invalidates its token; no policy change."""
        with self._lock:
            event = self._events.get(event_id)
            if event is None:
                raise EventStateError(f"unknown event {event_id!r}")
            if event.status is not EventStatus.PENDING:
                raise EventStateError(f"event is {event.status.value}, not pending")
            event.status = EventStatus.CLOSED
            if event.token is not None:
                event.token.used = True
            return event


# --- observer 1: pre-request policy decision -------------------------------


def host_of(url: str) -> str:
    """Extracts and normalizes the host component of a URL."""
    text = url.strip()
    target = text if "://" in text else f"https://{text}"
    parts = urlsplit(target)
    if not parts.netloc:
        raise NormalizationError(f"no host in url {url!r}")
    return normalize_domain(parts.netloc)


@dataclass(frozen=True)
class PolicyDecision:
    level: PolicyLevel
    spec: PolicySpec
    matched_domain: Optional[str]


def decide_policy(
    store: WhitelistStore,
    url: str,
    now: Optional[float] = None,
    catalog: Optional[SuiteCatalog] = None,
) -> PolicyDecision:
    """Chooses the spec to enforce for this request, expiring stale entries
    first. Carries no state between requests: a miss always yields the
    default policy."""
    catalog = catalog or default_catalog()
    moment = now_ts() if now is None else now
    host = host_of(url)
    store.purge_expired(moment)
    entry = store.lookup(host)
    if entry is None:
        return PolicyDecision(
            level=PolicyLevel.DEFAULT,
            spec=spec_of(PolicyLevel.DEFAULT, catalog),
            matched_domain=None,
        )
    return PolicyDecision(
        level=entry.level,
        spec=spec_of(entry.level, catalog),
        matched_domain=entry.domain,
    )


# --- observer 2: response-header subscription -------------------------------


def observe_response_headers(
    store: WhitelistStore,
    url: str,
    headers: Mapping[str, str],
    now: Optional[float] = None,
) -> Optional[DomainEntry]:
    """Subscribes the host when the response carries the mechanism's header.

    Callers invoke this only for responses received over an established
    session (trust on first use). Parse failures are logged and treated
    as an absent header.
    """
    value = None
    for name, raw in headers.items():
        if name.lower() == SUBSCRIPTION_HEADER:
            value = raw
            break
    if value is None:
        return None
    try:
        directive = parse_subscription_header(value)
    except HeaderParseError as exc:
        logger.warning("ignoring malformed subscription header from %s: %s", url, exc)
        return None
    host = host_of(url)
    return store.subscribe_from_header(host, directive, now=now)


# --- observer 3: handshake-error interception -------------------------------


def classify_handshake_error(transcript: SessionTranscript) -> Optional[ErrorKind]:
    """Maps the transcript's terminal event onto one of the two canonical
    error codes.

    Aborts that do not name a specific mismatch (dropped connections,
    exhausted retries, generic failures) classify as the version error:
    version negotiation could not complete, and silently degrading is
    exactly the hazard under test.
    """
    terminal = transcript.terminal
    if terminal is None:
        raise ValueError("transcript is not terminal")
    if isinstance(terminal, Established):
        return None
    if isinstance(terminal, FailureAlert):
        if terminal.reason == "no_common_suite":
            return ErrorKind.NO_CIPHER_OVERLAP
        return ErrorKind.UNSUPPORTED_VERSION
    assert isinstance(terminal, ClientAborted)
    if terminal.reason == "suite_not_offered":
        return ErrorKind.NO_CIPHER_OVERLAP
    return ErrorKind.UNSUPPORTED_VERSION


def on_error(
    store: WhitelistStore,
    registry: EventRegistry,
    url: str,
    kind: ErrorKind,
    now: Optional[float] = None,
) -> ErrorDecision:
    """Chooses block/warn/default for a failed handshake and records the event."""
    moment = now_ts() if now is None else now
    entry = store.lookup(host_of(url))
    if entry is None:
        return DefaultError()
    if entry.handling is ErrorHandling.BLOCKING:
        event = registry.record_blocked(url, entry.domain, kind, moment)
        return BlockPage(domain=entry.domain, kind=kind, event=event)
    event = registry.record_pending(url, entry.domain, kind, moment)
    assert event.token is not None
    return WarnPage(domain=entry.domain, kind=kind, token=event.token, event=event)


def bypass(store: WhitelistStore, registry: EventRegistry, token_value: str) -> RetryDirective:
    """One-click "Restore Defaults": consume the token, relax the domain,
    and direct the caller to retry the original request."""
    event = registry.consume_token(token_value)
    store.relax(event.domain)
    return RetryDirective(
        domain=event.domain, new_level=PolicyLevel.DEFAULT, retry_url=event.url
    )


def close_event(registry: EventRegistry, event_id: str) -> WarningEvent:
    """The "Close" button: dismisses the warning without any policy change."""
    return registry.close(event_id)


# --- transports and the fetch pipeline --------------------------------------


@dataclass
class TransportSession:
    transcript: SessionTranscript
    response_headers: dict[str, str] = field(default_factory=dict)


class TransportAdapter(ABC):
    """Performs the handshake for a host under a client behavior."""

    @abstractmethod
    def handshake(self, host: str, behavior: ClientBehavior) -> TransportSession:
        raise NotImplementedError


@dataclass(frozen=True)
class HostScenario:
    """Simulated peer for one host: its server config, the in-path
    attacker, and the response headers it would send on success."""

    server: ServerConfig
    attacker: AttackerModel
    response_headers: Mapping[str, str] = field(default_factory=dict)


class SimulatedTransport(TransportAdapter):
    """In-process transport backed by the handshake simulator.

    Hosts map to scenarios; the entry under ``"*"`` catches every other
    host. Unknown hosts without a catch-all are unreachable.
    """

    def __init__(self, catalog: SuiteCatalog, scenarios: Mapping[str, HostScenario]):
        self._catalog = catalog
        self._scenarios = dict(scenarios)

    def scenario_for(self, host: str) -> HostScenario:
        scenario = self._scenarios.get(host) or self._scenarios.get("*")
        if scenario is None:
            raise TransportUnreachableError(f"no scenario maps host {host!r}")
        return scenario

    def handshake(self, host: str, behavior: ClientBehavior) -> TransportSession:
        scenario = self.scenario_for(host)
        transcript = run_session(behavior, scenario.server, scenario.attacker, self._catalog)
        headers = dict(scenario.response_headers) if transcript.established else {}
        return TransportSession(transcript=transcript, response_headers=headers)


@dataclass(frozen=True)
class FetchSuccess:
    url: str
    version: TlsVersion
    suite_id: int
    suite_name: str
    level: PolicyLevel
    matched_domain: Optional[str]
    subscribed_domain: Optional[str]
    response_headers: dict[str, str]


@dataclass(frozen=True)
class FetchBlocked:
    event: WarningEvent


@dataclass(frozen=True)
class FetchWarned:
    event: WarningEvent


@dataclass(frozen=True)
class FetchFailed:
    reason: str


FetchResult = Union[FetchSuccess, FetchBlocked, FetchWarned, FetchFailed]


def fetch(
    store: WhitelistStore,
    registry: EventRegistry,
    url: str,
    transport: TransportAdapter,
    now: Optional[float] = None,
    catalog: Optional[SuiteCatalog] = None,
) -> FetchResult:
    """Full pipeline for one request.

    Policy decision, handshake under the chosen spec, then either header
    observation on success or error classification and handling on
    failure. A fetch never changes an existing entry's level; only an
    explicit bypass does.
    """
    catalog = catalog or default_catalog()
    moment = now_ts() if now is None else now
    decision = decide_policy(store, url, now=moment, catalog=catalog)
    behavior: ClientBehavior
    if decision.level is PolicyLevel.STRICT:
        behavior = PolicyEnforced(spec=decision.spec)
    else:
        behavior = DefaultFallback(spec=decision.spec)

    host = host_of(url)
    try:
        session = transport.handshake(host, behavior)
    except TransportUnreachableError as exc:
        logger.info("transport unreachable for %s: %s", url, exc)
        return FetchFailed(reason="transport")

    established = session.transcript.established
    if established is not None:
        subscribed = observe_response_headers(store, url, session.response_headers, now=moment)
        suite = catalog.by_id(established.suite)
        return FetchSuccess(
            url=url,
            version=established.version,
            suite_id=established.suite,
            suite_name=suite.name if suite else f"0x{established.suite:04X}",
            level=decision.level,
            matched_domain=decision.matched_domain,
            subscribed_domain=subscribed.domain if subscribed else None,
            response_headers=dict(session.response_headers),
        )

    kind = classify_handshake_error(session.transcript)
    assert kind is not None
    outcome = on_error(store, registry, url, kind, now=moment)
    if isinstance(outcome, BlockPage):
        return FetchBlocked(event=outcome.event)
    if isinstance(outcome, WarnPage):
        return FetchWarned(event=outcome.event)
    return FetchFailed(reason=kind.code)
