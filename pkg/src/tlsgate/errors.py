"""Exception types shared across the package."""


class TlsGateError(Exception):
    """Base class for all tlsgate domain errors."""


class CatalogError(TlsGateError):
    """Malformed or inconsistent ciphersuite catalog."""


class PolicyConfigError(TlsGateError):
    """A policy level cannot be realized against the given catalog."""


class NormalizationError(TlsGateError):
    """Input cannot be normalized into a registrable domain name."""


class DuplicateDomainError(TlsGateError):
    """Domain is already whitelisted; remove the existing record first."""


class DomainNotFoundError(TlsGateError):
    """Domain is not present in the whitelist."""


class HeaderParseError(TlsGateError):
    """Subscription header value is malformed."""


class StoreFormatError(TlsGateError):
    """Persisted whitelist document is malformed or has the wrong schema."""


class UnknownTokenError(TlsGateError):
    """Bypass token does not exist in the event registry."""


class TokenReplayError(TlsGateError):
    """Bypass token has already been consumed or invalidated."""


class EventStateError(TlsGateError):
    """Warning event is not in the state the operation requires."""


class ScenarioError(TlsGateError):
    """Scenario file is malformed or references unknown entities."""


class TransportUnreachableError(TlsGateError):
    """Transport adapter has no route to the requested host."""
