from __future__ import annotations

import pytest

from tlsgate.model import CipherSuite, SuiteCatalog, TlsVersion, default_catalog


@pytest.fixture(scope="session")
def shipped_catalog() -> SuiteCatalog:
    return default_catalog()


def make_test_catalog() -> SuiteCatalog:
    """Six synthetic suites spanning all four FS/AE quadrants and both
    version eras; small enough for exhaustive sweeps."""
    return SuiteCatalog(
        [
            CipherSuite(0x0001, "T13_STRONG_A", TlsVersion.TLS1_3, TlsVersion.TLS1_3, True, True),
            CipherSuite(0x0002, "T13_STRONG_B", TlsVersion.TLS1_3, TlsVersion.TLS1_3, True, True),
            CipherSuite(0x0003, "T12_FS_AEAD", TlsVersion.TLS1_2, TlsVersion.TLS1_2, True, True),
            CipherSuite(0x0004, "LEGACY_FS_CBC", TlsVersion.TLS1_0, TlsVersion.TLS1_2, True, False),
            CipherSuite(0x0005, "T12_STATIC_AEAD", TlsVersion.TLS1_2, TlsVersion.TLS1_2, False, True),
            CipherSuite(0x0006, "LEGACY_STATIC_CBC", TlsVersion.TLS1_0, TlsVersion.TLS1_2, False, False),
        ]
    )


@pytest.fixture(scope="session")
def test_catalog() -> SuiteCatalog:
    return make_test_catalog()


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    verdict = "PASS" if report.passed else "FAIL"
    print(f"\nACCEPTANCE {verdict}: {name}")
