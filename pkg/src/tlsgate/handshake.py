"""Parameter-level handshake state machine with attacker models.

A session runs hello exchanges between a client behavior and a server
config while an in-path attacker may rewrite or drop the client hello.
Nothing cryptographic happens here: negotiation is modeled at the
version/suite parameter level, which is the layer the enforcement
mechanism acts on. Attacker rewrites therefore succeed unconditionally;
any defense has to come from the client refusing the outcome.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

from .model import CipherSuite, SuiteCatalog, TlsVersion, max_common_version
from .policy import OfferedParams, PolicyLevel, PolicySpec, is_compliant, offer_of


@dataclass(frozen=True)
class ClientHello:
    """The negotiation-relevant fields of a client hello.

    ``legacy_max_version`` is the pre-1.3 "maximum supported version"
    field; when TLS 1.3 is offered the true version list travels in the
    supported_versions extension and the legacy field is pinned to 1.2.
    """

    legacy_max_version: TlsVersion
    suites: tuple[int, ...]
    supported_versions: Optional[tuple[TlsVersion, ...]] = None

    def offered_versions(self) -> tuple[TlsVersion, ...]:
        """Versions the receiver may select, descending.

        Without the supported_versions extension the legacy field means
        "anything up to this", so every version at or below it is offered.
        """
        if self.supported_versions is not None:
            return tuple(sorted(self.supported_versions, reverse=True))
        return tuple(
            sorted((v for v in TlsVersion if v <= self.legacy_max_version), reverse=True)
        )


@dataclass(frozen=True)
class ServerHello:
    selected_version: TlsVersion
    selected_suite: int


class SelectionRule(enum.Enum):
    SERVER_PREFERENCE = "server_preference"
    CLIENT_PREFERENCE = "client_preference"


@dataclass(frozen=True)
class ServerConfig:
    versions: frozenset[TlsVersion]
    suites: tuple[int, ...]
    selection_rule: SelectionRule = SelectionRule.SERVER_PREFERENCE

    def __post_init__(self) -> None:
        if not self.versions:
            raise ValueError("server must support at least one version")
        if not self.suites:
            raise ValueError("server must support at least one suite")


# --- attacker models -------------------------------------------------------


@dataclass(frozen=True)
class NoAttacker:
    pass


@dataclass(frozen=True)
class FragmentationRollback:
    """Record-fragmentation trick: the server parses the mangled hello as
    offering at most TLS 1.0. Modeled by its effect on the perceived hello."""


@dataclass(frozen=True)
class HandshakeFailureInjection:
    """Drops the first ``fail_count`` handshake attempts, provoking the
    client's downgrade dance; later attempts pass through untouched."""

    fail_count: int

    def __post_init__(self) -> None:
        if self.fail_count < 1:
            raise ValueError("fail_count must be >= 1")


@dataclass(frozen=True)
class ParameterTamper:
    """Forges the hello so the server perceives exactly the target
    parameters; transcript authentication is assumed circumvented."""

    target_version: TlsVersion
    target_suite: Optional[int] = None


AttackerModel = Union[NoAttacker, FragmentationRollback, HandshakeFailureInjection, ParameterTamper]


@dataclass(frozen=True)
class PassThrough:
    pass


@dataclass(frozen=True)
class PerceivedHello:
    hello: ClientHello
    description: str


@dataclass(frozen=True)
class DropConnection:
    description: str


AttackEffect = Union[PassThrough, PerceivedHello, DropConnection]


# --- client behaviors ------------------------------------------------------


@dataclass(frozen=True)
class PolicyEnforced:
    """Refuses any selection outside its spec and never retries lower."""

    spec: PolicySpec


@dataclass(frozen=True)
class DefaultFallback:
    """Browser-like behavior: on failure, lowers the offered maximum one
    version step and retries (the downgrade dance)."""

    spec: PolicySpec

    def __post_init__(self) -> None:
        if self.spec.level is not PolicyLevel.DEFAULT:
            raise ValueError("downgrade dance is only meaningful for the default policy")


ClientBehavior = Union[PolicyEnforced, DefaultFallback]


# --- transcript events -----------------------------------------------------


@dataclass(frozen=True)
class HelloSent:
    hello: ClientHello


@dataclass(frozen=True)
class AttackerTransformed:
    description: str


@dataclass(frozen=True)
class HelloReceived:
    hello: ServerHello


@dataclass(frozen=True)
class FailureAlert:
    reason: str


@dataclass(frozen=True)
class ClientAborted:
    reason: str


@dataclass(frozen=True)
class RetryStarted:
    new_max_version: TlsVersion


@dataclass(frozen=True)
class Established:
    version: TlsVersion
    suite: int


SessionEvent = Union[
    HelloSent,
    AttackerTransformed,
    HelloReceived,
    FailureAlert,
    ClientAborted,
    RetryStarted,
    Established,
]

@dataclass
class SessionTranscript:
    """Ordered record of one session; ends with exactly one terminal event.

    Established and ClientAborted are always terminal; a FailureAlert is
    terminal only when nothing follows it (the client had no further say).
    """

    events: list[SessionEvent] = field(default_factory=list)

    def append(self, event: SessionEvent) -> None:
        self.events.append(event)

    @property
    def terminal(self) -> Optional[SessionEvent]:
        if self.events and isinstance(self.events[-1], (Established, ClientAborted, FailureAlert)):
            return self.events[-1]
        return None

    @property
    def established(self) -> Optional[Established]:
        last = self.terminal
        return last if isinstance(last, Established) else None

    def retries(self) -> list[RetryStarted]:
        return [e for e in self.events if isinstance(e, RetryStarted)]

    def to_records(self) -> list[dict]:
        return [event_record(e) for e in self.events]


def event_record(event: SessionEvent) -> dict:
    """Machine-readable form of one transcript event."""
    if isinstance(event, HelloSent):
        return {
            "event": "hello_sent",
            "legacy_max_version": event.hello.legacy_max_version.label,
            "supported_versions": (
                None
                if event.hello.supported_versions is None
                else [v.label for v in event.hello.supported_versions]
            ),
            "suites": [f"0x{s:04X}" for s in event.hello.suites],
        }
    if isinstance(event, AttackerTransformed):
        return {"event": "attacker_transformed", "description": event.description}
    if isinstance(event, HelloReceived):
        return {
            "event": "hello_received",
            "selected_version": event.hello.selected_version.label,
            "selected_suite": f"0x{event.hello.selected_suite:04X}",
        }
    if isinstance(event, FailureAlert):
        return {"event": "failure_alert", "reason": event.reason}
    if isinstance(event, ClientAborted):
        return {"event": "client_aborted", "reason": event.reason}
    if isinstance(event, RetryStarted):
        return {"event": "retry_started", "new_max_version": event.new_max_version.label}
    if isinstance(event, Established):
        return {
            "event": "established",
            "version": event.version.label,
            "suite": f"0x{event.suite:04X}",
        }
    raise TypeError(f"unknown event type: {event!r}")


def format_event(event: SessionEvent) -> str:
    """One-line human form of a transcript event."""
    record = event_record(event)
    kind = record.pop("event")
    parts = " ".join(f"{k}={v}" for k, v in record.items() if v is not None)
    return f"{kind} {parts}".strip()


# --- operations ------------------------------------------------------------


def build_client_hello(offer: OfferedParams) -> ClientHello:
    """Constructs the honest hello for an offer.

    With TLS 1.3 in the offer the full version list goes into
    supported_versions and the legacy field reads 1.2; otherwise the
    legacy field carries the true maximum and no extension is sent.
    """
    if not offer.versions or not offer.suites:
        raise ValueError("offer must contain at least one version and one suite")
    versions = tuple(sorted(offer.versions, reverse=True))
    suite_ids = tuple(s.id for s in offer.suites)
    if TlsVersion.TLS1_3 in versions:
        return ClientHello(
            legacy_max_version=TlsVersion.TLS1_2,
            suites=suite_ids,
            supported_versions=versions,
        )
    return ClientHello(legacy_max_version=versions[0], suites=suite_ids)


def apply_attacker(model: AttackerModel, hello: ClientHello, attempt_index: int) -> AttackEffect:
    """What the server perceives on this attempt, given the attacker."""
    if attempt_index < 1:
        raise ValueError("attempt_index counts from 1")
    if isinstance(model, NoAttacker):
        return PassThrough()
    if isinstance(model, FragmentationRollback):
        perceived = ClientHello(
            legacy_max_version=TlsVersion.TLS1_0,
            suites=hello.suites,
            supported_versions=None,
        )
        return PerceivedHello(
            hello=perceived,
            description="fragmented hello reparsed with maximum version TLS1.0",
        )
    if isinstance(model, HandshakeFailureInjection):
        if attempt_index <= model.fail_count:
            return DropConnection(description=f"connection dropped (attempt {attempt_index})")
        return PassThrough()
    if isinstance(model, ParameterTamper):
        suites = hello.suites if model.target_suite is None else (model.target_suite,)
        perceived = ClientHello(
            legacy_max_version=min(model.target_version, TlsVersion.TLS1_2),
            suites=suites,
            supported_versions=(model.target_version,),
        )
        detail = f"offer rewritten to version {model.target_version.label}"
        if model.target_suite is not None:
            detail += f", suite 0x{model.target_suite:04X}"
        return PerceivedHello(hello=perceived, description=detail)
    raise TypeError(f"unknown attacker model: {model!r}")


def server_select(
    config: ServerConfig, perceived: ClientHello, catalog: SuiteCatalog
) -> Union[ServerHello, FailureAlert]:
    """Server's decision: highest common version, then the first shared
    suite usable at it, ordered by the configured preference side."""
    version = max_common_version(perceived.offered_versions(), config.versions)
    if version is None:
        return FailureAlert(reason="no_common_version")
    if config.selection_rule is SelectionRule.SERVER_PREFERENCE:
        ordered = config.suites
        other = set(perceived.suites)
    else:
        ordered = perceived.suites
        other = set(config.suites)
    for suite_id in ordered:
        if suite_id not in other:
            continue
        suite = catalog.by_id(suite_id)
        if suite is not None and suite.usable_at(version):
            return ServerHello(selected_version=version, selected_suite=suite_id)
    return FailureAlert(reason="no_common_suite")


@dataclass(frozen=True)
class Accept:
    pass


@dataclass(frozen=True)
class Abort:
    reason: str


def client_validate(
    behavior: ClientBehavior, hello: ServerHello, catalog: SuiteCatalog
) -> Union[Accept, Abort]:
    """Accepts iff the server's selection complies with the behavior's spec."""
    spec = behavior.spec
    if hello.selected_version not in spec.allowed_versions:
        return Abort(reason="version_not_offered")
    suite = catalog.by_id(hello.selected_suite)
    if suite is None or not is_compliant(spec, hello.selected_version, suite):
        return Abort(reason="suite_not_offered")
    return Accept()


def _offer_at_cap(spec: PolicySpec, cap: TlsVersion) -> OfferedParams:
    capped = PolicySpec(
        level=spec.level,
        allowed_versions=tuple(v for v in spec.allowed_versions if v <= cap),
        allowed_suites=spec.allowed_suites,
    )
    return offer_of(capped)


def run_session(
    behavior: ClientBehavior,
    server: ServerConfig,
    attacker: AttackerModel,
    catalog: SuiteCatalog,
) -> SessionTranscript:
    """Runs handshake attempts until a terminal outcome.

    A policy-enforced client makes exactly one attempt and aborts on any
    failure. A default-fallback client answers failures by lowering its
    version cap one step and retrying, until it establishes, the server's
    selection is rejected, or the TLS 1.0 floor is exhausted.
    """
    transcript = SessionTranscript()
    spec = behavior.spec
    cap = spec.max_version
    floor = spec.min_version
    attempt = 1

    def handle_failure() -> bool:
        """Returns True when a retry was scheduled."""
        nonlocal cap
        if isinstance(behavior, PolicyEnforced):
            transcript.append(ClientAborted(reason="handshake_failed"))
            return False
        if cap <= floor:
            transcript.append(ClientAborted(reason="exhausted"))
            return False
        lower = cap.step_down()
        while lower is not None and lower not in spec.allowed_versions and lower >= floor:
            lower = lower.step_down()
        if lower is None or lower < floor:
            transcript.append(ClientAborted(reason="exhausted"))
            return False
        cap = lower
        transcript.append(RetryStarted(new_max_version=cap))
        return True

    while True:
        offer = _offer_at_cap(spec, cap)
        if not offer.suites:
            # No suite usable under the current cap: nothing to offer.
            transcript.append(FailureAlert(reason="no_usable_suite"))
            if handle_failure():
                continue
            return transcript
        hello = build_client_hello(offer)
        transcript.append(HelloSent(hello=hello))
        effect = apply_attacker(attacker, hello, attempt)
        attempt += 1

        if isinstance(effect, DropConnection):
            transcript.append(AttackerTransformed(description=effect.description))
            transcript.append(FailureAlert(reason="connection_dropped"))
            if handle_failure():
                continue
            return transcript

        perceived = hello
        if isinstance(effect, PerceivedHello):
            transcript.append(AttackerTransformed(description=effect.description))
            perceived = effect.hello

        outcome = server_select(server, perceived, catalog)
        if isinstance(outcome, FailureAlert):
            transcript.append(outcome)
            if handle_failure():
                continue
            return transcript

        transcript.append(HelloReceived(hello=outcome))
        verdict = client_validate(behavior, outcome, catalog)
        if isinstance(verdict, Abort):
            transcript.append(ClientAborted(reason=verdict.reason))
            return transcript
        transcript.append(
            Established(version=outcome.selected_version, suite=outcome.selected_suite)
        )
        return transcript
