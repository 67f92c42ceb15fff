"""Policy levels and the concrete version/suite constraints they imply.

Two levels exist: ``strict`` permits only TLS 1.3 with suites that are both
forward secret and AEAD; ``default`` permits every catalog suite on any of
the four versions, which is what lets a client fall back to legacy servers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import PolicyConfigError
from .model import CipherSuite, SecurityClass, SuiteCatalog, TlsVersion, classify_suite


class PolicyLevel(enum.Enum):
    STRICT = "strict"
    DEFAULT = "default"

    @classmethod
    def parse(cls, text: str) -> "PolicyLevel":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown policy level: {text!r}") from None


@dataclass(frozen=True)
class PolicySpec:
    """Concrete constraints for one level: versions and suites, both in
    descending preference order."""

    level: PolicyLevel
    allowed_versions: tuple[TlsVersion, ...]
    allowed_suites: tuple[CipherSuite, ...]

    def __post_init__(self) -> None:
        if not self.allowed_versions:
            raise PolicyConfigError("policy spec must allow at least one version")
        if not self.allowed_suites:
            raise PolicyConfigError("policy spec must allow at least one suite")

    @property
    def min_version(self) -> TlsVersion:
        return min(self.allowed_versions)

    @property
    def max_version(self) -> TlsVersion:
        return max(self.allowed_versions)


@dataclass(frozen=True)
class OfferedParams:
    """What a client hello will carry: versions descending, suites by preference."""

    versions: tuple[TlsVersion, ...]
    suites: tuple[CipherSuite, ...]


def spec_of(level: PolicyLevel, catalog: SuiteCatalog) -> PolicySpec:
    """Expands a policy level into its version set and suite list.

    Suite order follows catalog order. Raises PolicyConfigError when the
    catalog has no strong TLS 1.3 suite, which would leave the strict
    policy with nothing to offer.
    """
    if level is PolicyLevel.STRICT:
        suites = tuple(
            s
            for s in catalog
            if s.min_version is TlsVersion.TLS1_3 and classify_suite(s) is SecurityClass.STRONG
        )
        if not suites:
            raise PolicyConfigError("catalog has no strong TLS 1.3 suite; strict policy is empty")
        return PolicySpec(level=level, allowed_versions=(TlsVersion.TLS1_3,), allowed_suites=suites)
    return PolicySpec(
        level=level,
        allowed_versions=(
            TlsVersion.TLS1_3,
            TlsVersion.TLS1_2,
            TlsVersion.TLS1_1,
            TlsVersion.TLS1_0,
        ),
        allowed_suites=catalog.suites,
    )


def is_compliant(spec: PolicySpec, version: TlsVersion, suite: CipherSuite) -> bool:
    """True iff the negotiated (version, suite) pair is permitted by the spec."""
    return (
        version in spec.allowed_versions
        and suite in spec.allowed_suites
        and suite.usable_at(version)
    )


def offer_of(spec: PolicySpec) -> OfferedParams:
    """Builds the offer a client hello is constructed from.

    Versions are sorted descending; suites keep spec order but drop any
    suite that is unusable at every allowed version.
    """
    versions = tuple(sorted(spec.allowed_versions, reverse=True))
    suites = tuple(
        s for s in spec.allowed_suites if any(s.usable_at(v) for v in versions)
    )
    return OfferedParams(versions=versions, suites=suites)
