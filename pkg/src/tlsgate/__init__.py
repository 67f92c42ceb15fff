"""Fine-grained TLS policy enforcement for sensitive domains.

A whitelist assigns per-domain policy levels (strict or default); the
enforcement pipeline refuses downgraded handshakes for whitelisted
domains instead of silently falling back, surfacing a blocking page or
an active warning with a one-click "Restore Defaults" bypass.
"""

from .errors import TlsGateError
from .model import (
    CipherSuite,
    SecurityClass,
    SuiteCatalog,
    TlsVersion,
    classify_suite,
    default_catalog,
    load_catalog,
    max_common_version,
    parse_catalog,
)
from .policy import PolicyLevel, PolicySpec, OfferedParams, is_compliant, offer_of, spec_of
from .whitelist import (
    SUBSCRIPTION_HEADER,
    DomainEntry,
    ErrorHandling,
    HeaderDirective,
    SubscriptionSource,
    WhitelistStore,
    load_store,
    normalize_domain,
    parse_subscription_header,
    save_store,
)

__version__ = "0.1.0"

__all__ = [
    "CipherSuite",
    "DomainEntry",
    "ErrorHandling",
    "HeaderDirective",
    "OfferedParams",
    "PolicyLevel",
    "PolicySpec",
    "SecurityClass",
    "SubscriptionSource",
    "SuiteCatalog",
    "SUBSCRIPTION_HEADER",
    "TlsGateError",
    "TlsVersion",
    "WhitelistStore",
    "classify_suite",
    "default_catalog",
    "is_compliant",
    "load_catalog",
    "load_store",
    "max_common_version",
    "normalize_domain",
    "offer_of",
    "parse_catalog",
    "parse_subscription_header",
    "save_store",
    "spec_of",
    "__version__",
]
