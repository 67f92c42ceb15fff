"""Best-effort live transport: maps a policy spec onto the host TLS stack.

Thin by design and excluded from the acceptance suite; real negotiation
depends on the peer and on what OpenSSL permits locally. Unknown
negotiated suites are synthesized with flags inferred from their name so
compliance checking stays meaningful.
"""

from __future__ import annotations

import http.client
import socket
import ssl
from typing import Optional

from .enforcement import TransportAdapter, TransportSession
from .handshake import (
    ClientBehavior,
    ClientAborted,
    Established,
    FailureAlert,
    HelloReceived,
    HelloSent,
    ServerHello,
    SessionTranscript,
    build_client_hello,
    client_validate,
    Accept,
)
from .model import CipherSuite, SuiteCatalog, TlsVersion
from .policy import offer_of

_SSL_VERSION = {
    TlsVersion.TLS1_0: ssl.TLSVersion.TLSv1,
    TlsVersion.TLS1_1: ssl.TLSVersion.TLSv1_1,
    TlsVersion.TLS1_2: ssl.TLSVersion.TLSv1_2,
    TlsVersion.TLS1_3: ssl.TLSVersion.TLSv1_3,
}

_VERSION_NAMES = {
    "TLSv1": TlsVersion.TLS1_0,
    "TLSv1.1": TlsVersion.TLS1_1,
    "TLSv1.2": TlsVersion.TLS1_2,
    "TLSv1.3": TlsVersion.TLS1_3,
}


def _synthesize_suite(name: str, version: TlsVersion) -> CipherSuite:
    upper = name.upper()
    fs = version is TlsVersion.TLS1_3 or "ECDHE" in upper or "DHE" in upper
    ae = any(tag in upper for tag in ("GCM", "CHACHA20", "POLY1305", "CCM"))
    return CipherSuite(
        id=0xFFFF,
        name=name,
        min_version=version,
        max_version=version,
        forward_secret=fs,
        authenticated_encryption=ae,
    )


class LiveTransport(TransportAdapter):
    """Connects to host:443 with version bounds drawn from the spec."""

    def __init__(self, catalog: SuiteCatalog, timeout: float = 10.0, port: int = 443):
        self._catalog = catalog
        self._timeout = timeout
        self._port = port

    def _context(self, behavior: ClientBehavior) -> ssl.SSLContext:
        spec = behavior.spec
        context = ssl.create_default_context()
        context.minimum_version = _SSL_VERSION[spec.min_version]
        context.maximum_version = _SSL_VERSION[spec.max_version]
        return context

    def handshake(self, host: str, behavior: ClientBehavior) -> TransportSession:
        transcript = SessionTranscript()
        transcript.append(HelloSent(hello=build_client_hello(offer_of(behavior.spec))))
        headers: dict[str, str] = {}
        try:
            with socket.create_connection((host, self._port), timeout=self._timeout) as raw:
                with self._context(behavior).wrap_socket(raw, server_hostname=host) as tls:
                    version = _VERSION_NAMES.get(tls.version() or "", TlsVersion.TLS1_2)
                    cipher_info = tls.cipher()
                    cipher_name = cipher_info[0] if cipher_info else "UNKNOWN"
                    suite = self._catalog.by_name(cipher_name) or _synthesize_suite(
                        cipher_name, version
                    )
                    hello = ServerHello(selected_version=version, selected_suite=suite.id)
                    transcript.append(HelloReceived(hello=hello))
                    verdict = _validate_live(behavior, version, suite, self._catalog)
                    if verdict is not None:
                        transcript.append(ClientAborted(reason=verdict))
                        return TransportSession(transcript=transcript)
                    headers = _head_request(tls, host)
                    transcript.append(Established(version=version, suite=suite.id))
        except ssl.SSLError as exc:
            transcript.append(FailureAlert(reason=f"ssl:{exc.reason or 'error'}"))
            transcript.append(ClientAborted(reason="handshake_failed"))
        except OSError as exc:
            transcript.append(FailureAlert(reason=f"io:{exc}"))
            transcript.append(ClientAborted(reason="handshake_failed"))
        return TransportSession(transcript=transcript, response_headers=headers)


def _validate_live(
    behavior: ClientBehavior,
    version: TlsVersion,
    suite: CipherSuite,
    catalog: SuiteCatalog,
) -> Optional[str]:
    """Returns an abort reason, or None when the selection is acceptable."""
    spec = behavior.spec
    if version not in spec.allowed_versions:
        return "version_not_offered"
    if catalog.by_id(suite.id) == suite:
        verdict = client_validate(behavior, ServerHello(version, suite.id), catalog)
        return None if isinstance(verdict, Accept) else verdict.reason
    # Suite outside our catalog: accept under the default policy, require
    # strong flags under strict.
    if spec.level.value == "strict" and not (
        suite.forward_secret and suite.authenticated_encryption
    ):
        return "suite_not_offered"
    return None


def _head_request(tls: ssl.SSLSocket, host: str) -> dict[str, str]:
    """Issues a HEAD request on the established socket to collect headers."""
    try:
        connection = http.client.HTTPConnection(host)
        connection.sock = tls
        connection.request("HEAD", "/", headers={"Host": host})
        response = connection.getresponse()
        collected = {name.lower(): value for name, value in response.getheaders()}
        response.close()
        return collected
    except (OSError, http.client.HTTPException):
        return {}
