"""Protocol versions and ciphersuites with their security classification.

This is the vocabulary every other layer speaks: four negotiable protocol
versions with a total order, and ciphersuites annotated with forward secrecy
and authenticated encryption so they can be classified Strong or Weak.
"""

from __future__ import annotations

import enum
import functools
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

from .errors import CatalogError

DEFAULT_CATALOG_RESOURCE = "default_catalog.json"


class TlsVersion(enum.IntEnum):
    """Negotiable protocol versions, ordered oldest to newest.

    Values are the wire code points, which makes the chronological order
    also the numeric order.
    """

    TLS1_0 = 0x0301
    TLS1_1 = 0x0302
    TLS1_2 = 0x0303
    TLS1_3 = 0x0304

    @property
    def label(self) -> str:
        """Dotted display form, e.g. ``"1.2"``."""
        return f"1.{self.value - 0x0301}"

    @classmethod
    def parse(cls, text: str) -> "TlsVersion":
        """Accepts ``"1.2"``, ``"TLS1.2"``, ``"TLS1_2"`` or ``"tls1.2"``."""
        key = text.strip().upper().replace("TLS", "").replace("_", ".").lstrip(".")
        for version in cls:
            if version.label == key:
                return version
        raise ValueError(f"unknown TLS version: {text!r}")

    def step_down(self) -> Optional["TlsVersion"]:
        """Next lower version, or None at the TLS 1.0 floor."""
        if self is TlsVersion.TLS1_0:
            return None
        return TlsVersion(self.value - 1)

    def __str__(self) -> str:
        return f"TLS{self.label}"


class SecurityClass(enum.Enum):
    STRONG = "strong"
    WEAK = "weak"


@dataclass(frozen=True)
class CipherSuite:
    """A named suite with its usable version range and security flags.

    ``forward_secret`` marks ephemeral key exchanges; ``authenticated_encryption``
    marks AEAD constructions (CBC MAC-then-encrypt suites are not AE).
    """

    id: int
    name: str
    min_version: TlsVersion
    max_version: TlsVersion
    forward_secret: bool
    authenticated_encryption: bool

    def __post_init__(self) -> None:
        if not 0 <= self.id <= 0xFFFF:
            raise CatalogError(f"suite {self.name!r}: id {self.id:#x} is not a 16-bit code point")
        if self.min_version > self.max_version:
            raise CatalogError(
                f"suite {self.name!r}: min_version {self.min_version} exceeds "
                f"max_version {self.max_version}"
            )
        if self.min_version is TlsVersion.TLS1_3 and not (
            self.forward_secret and self.authenticated_encryption
        ):
            raise CatalogError(
                f"suite {self.name!r}: TLS 1.3 suites must be forward secret and AEAD"
            )

    def usable_at(self, version: TlsVersion) -> bool:
        return self.min_version <= version <= self.max_version

    @property
    def hex_id(self) -> str:
        return f"0x{self.id:04X}"


def classify_suite(suite: CipherSuite) -> SecurityClass:
    """Strong means the suite provides both forward secrecy and AEAD."""
    if suite.forward_secret and suite.authenticated_encryption:
        return SecurityClass.STRONG
    return SecurityClass.WEAK


def max_common_version(
    client: Iterable[TlsVersion], server: Iterable[TlsVersion]
) -> Optional[TlsVersion]:
    """Maximum element of the intersection, or None when disjoint."""
    common = set(client) & set(server)
    return max(common) if common else None


class SuiteCatalog:
    """Ordered, duplicate-free collection of ciphersuites with id/name lookup."""

    def __init__(self, suites: Iterable[CipherSuite]):
        self._suites = tuple(suites)
        if not self._suites:
            raise CatalogError("catalog must contain at least one suite")
        self._by_id: dict[int, CipherSuite] = {}
        self._by_name: dict[str, CipherSuite] = {}
        for suite in self._suites:
            if suite.id in self._by_id:
                raise CatalogError(f"duplicate suite id {suite.hex_id} ({suite.name!r})")
            if suite.name in self._by_name:
                raise CatalogError(f"duplicate suite name {suite.name!r}")
            self._by_id[suite.id] = suite
            self._by_name[suite.name] = suite

    @property
    def suites(self) -> tuple[CipherSuite, ...]:
        return self._suites

    def by_id(self, suite_id: int) -> Optional[CipherSuite]:
        return self._by_id.get(suite_id)

    def by_name(self, name: str) -> Optional[CipherSuite]:
        return self._by_name.get(name)

    def ids(self) -> tuple[int, ...]:
        return tuple(s.id for s in self._suites)

    def __iter__(self) -> Iterator[CipherSuite]:
        return iter(self._suites)

    def __len__(self) -> int:
        return len(self._suites)

    def __contains__(self, suite: CipherSuite) -> bool:
        return self._by_id.get(suite.id) == suite


def _parse_version_field(entry_label: str, record: dict, field: str) -> TlsVersion:
    try:
        return TlsVersion.parse(str(record[field]))
    except (KeyError, ValueError) as exc:
        raise CatalogError(f"{entry_label}: bad {field}: {exc}") from exc


def parse_catalog(document: dict) -> SuiteCatalog:
    """Builds a catalog from a parsed catalog document, preserving order."""
    if not isinstance(document, dict) or "suites" not in document:
        raise CatalogError("catalog document must be an object with a 'suites' list")
    records = document["suites"]
    if not isinstance(records, list) or not records:
        raise CatalogError("catalog 'suites' must be a non-empty list")
    suites = []
    for index, record in enumerate(records):
        label = f"suite entry {index}"
        if not isinstance(record, dict):
            raise CatalogError(f"{label}: expected an object")
        if "name" in record:
            label = f"suite entry {index} ({record['name']})"
        try:
            raw_id = record["id"]
            suite_id = int(raw_id, 16) if isinstance(raw_id, str) else int(raw_id)
        except (KeyError, TypeError, ValueError) as exc:
            raise CatalogError(f"{label}: bad id: {exc}") from exc
        try:
            name = record["name"]
            fs = bool(record["fs"])
            ae = bool(record["ae"])
        except KeyError as exc:
            raise CatalogError(f"{label}: missing field {exc}") from exc
        suites.append(
            CipherSuite(
                id=suite_id,
                name=str(name),
                min_version=_parse_version_field(label, record, "min_version"),
                max_version=_parse_version_field(label, record, "max_version"),
                forward_secret=fs,
                authenticated_encryption=ae,
            )
        )
    return SuiteCatalog(suites)


def load_catalog(source: Union[str, Path]) -> SuiteCatalog:
    """Loads a catalog from a JSON file on disk."""
    path = Path(source)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise CatalogError(f"cannot read catalog {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CatalogError(f"catalog {path} is not valid JSON: {exc}") from exc
    return parse_catalog(document)


@functools.lru_cache(maxsize=1)
def default_catalog() -> SuiteCatalog:
    """The shipped 15-suite catalog (3 TLS 1.3 suites + 12 legacy suites)."""
    data = resources.files(__package__).joinpath("data", DEFAULT_CATALOG_RESOURCE)
    return parse_catalog(json.loads(data.read_text(encoding="utf-8")))
