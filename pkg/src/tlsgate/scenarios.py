"""Scenario files: named simulated peers for the CLI and gateway.

A scenario names a host, the server's negotiable parameters, the in-path
attacker, and optional response headers. The shipped set includes the
classic rollback attack, a downgrade-dance server, a legacy-only server,
and a header-subscribing host.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Union

from .enforcement import HostScenario, SimulatedTransport
from .errors import NormalizationError, ScenarioError
from .handshake import (
    AttackerModel,
    FragmentationRollback,
    HandshakeFailureInjection,
    NoAttacker,
    ParameterTamper,
    SelectionRule,
    ServerConfig,
)
from .model import SuiteCatalog, TlsVersion
from .whitelist import normalize_domain

DEFAULT_SCENARIOS_RESOURCE = "default_scenarios.json"


@dataclass(frozen=True)
class Scenario:
    name: str
    host: str
    server: ServerConfig
    attacker: AttackerModel
    response_headers: Mapping[str, str] = field(default_factory=dict)

    def host_scenario(self) -> HostScenario:
        return HostScenario(
            server=self.server, attacker=self.attacker, response_headers=self.response_headers
        )


def parse_attacker(text: str) -> AttackerModel:
    """Parses the CLI attacker syntax.

    Forms: ``none``, ``fragmentation``, ``failure:N``,
    ``tamper:VERSION[:SUITE_HEX]``.
    """
    parts = text.strip().lower().split(":")
    kind = parts[0]
    if kind in ("none", "noattacker"):
        return NoAttacker()
    if kind in ("fragmentation", "fragmentation_rollback", "rollback"):
        return FragmentationRollback()
    if kind in ("failure", "handshake_failure_injection"):
        if len(parts) != 2:
            raise ValueError("failure attacker needs a count, e.g. failure:3")
        return HandshakeFailureInjection(fail_count=int(parts[1]))
    if kind in ("tamper", "parameter_tamper"):
        if len(parts) < 2:
            raise ValueError("tamper attacker needs a version, e.g. tamper:1.0")
        version = TlsVersion.parse(parts[1])
        suite = int(parts[2], 16) if len(parts) > 2 else None
        return ParameterTamper(target_version=version, target_suite=suite)
    raise ValueError(f"unknown attacker: {text!r}")


def _attacker_from_record(record: dict, label: str) -> AttackerModel:
    kind = record.get("kind")
    try:
        if kind == "none":
            return NoAttacker()
        if kind == "fragmentation_rollback":
            return FragmentationRollback()
        if kind == "handshake_failure_injection":
            return HandshakeFailureInjection(fail_count=int(record["fail_count"]))
        if kind == "parameter_tamper":
            raw_suite = record.get("target_suite")
            suite = None if raw_suite is None else int(str(raw_suite), 16)
            return ParameterTamper(
                target_version=TlsVersion.parse(record["target_version"]),
                target_suite=suite,
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"{label}: bad attacker: {exc}") from exc
    raise ScenarioError(f"{label}: unknown attacker kind {kind!r}")


def _server_from_record(record: dict, catalog: SuiteCatalog, label: str) -> ServerConfig:
    try:
        versions = frozenset(TlsVersion.parse(v) for v in record["versions"])
        raw_suites = record["suites"]
        if raw_suites == "*":
            suites = catalog.ids()
        else:
            suites = []
            for item in raw_suites:
                if isinstance(item, str) and not item.lower().startswith("0x"):
                    suite = catalog.by_name(item)
                    if suite is None:
                        raise ValueError(f"unknown suite name {item!r}")
                    suites.append(suite.id)
                else:
                    suites.append(int(str(item), 16))
            suites = tuple(suites)
        rule = SelectionRule(record.get("selection_rule", "server_preference"))
        return ServerConfig(versions=versions, suites=tuple(suites), selection_rule=rule)
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"{label}: bad server config: {exc}") from exc


def parse_scenarios(document: dict, catalog: SuiteCatalog) -> dict[str, Scenario]:
    """Parses a scenario document; names must be unique and hosts normalize."""
    if not isinstance(document, dict) or not isinstance(document.get("scenarios"), list):
        raise ScenarioError("scenario document must be an object with a 'scenarios' list")
    scenarios: dict[str, Scenario] = {}
    for index, record in enumerate(document["scenarios"]):
        label = f"scenario {index}"
        if not isinstance(record, dict):
            raise ScenarioError(f"{label}: expected an object")
        name = record.get("name")
        if not name or not isinstance(name, str):
            raise ScenarioError(f"{label}: missing name")
        label = f"scenario {name!r}"
        if name in scenarios:
            raise ScenarioError(f"{label}: duplicate name")
        raw_host = record.get("host", "")
        if raw_host == "*":
            host = "*"
        else:
            try:
                host = normalize_domain(raw_host)
            except NormalizationError as exc:
                raise ScenarioError(f"{label}: bad host: {exc}") from exc
        headers = record.get("response_headers", {})
        if not isinstance(headers, dict):
            raise ScenarioError(f"{label}: response_headers must be an object")
        scenarios[name] = Scenario(
            name=name,
            host=host,
            server=_server_from_record(record.get("server", {}), catalog, label),
            attacker=_attacker_from_record(record.get("attacker", {}), label),
            response_headers=dict(headers),
        )
    if not scenarios:
        raise ScenarioError("scenario document defines no scenarios")
    return scenarios


def load_scenarios(source: Union[str, Path], catalog: SuiteCatalog) -> dict[str, Scenario]:
    path = Path(source)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file {path} is not valid JSON: {exc}") from exc
    return parse_scenarios(document, catalog)


def default_scenarios(catalog: SuiteCatalog) -> dict[str, Scenario]:
    data = resources.files(__package__).joinpath("data", DEFAULT_SCENARIOS_RESOURCE)
    return parse_scenarios(json.loads(data.read_text(encoding="utf-8")), catalog)


def scenario_transport(
    scenarios: Mapping[str, Scenario], catalog: SuiteCatalog
) -> SimulatedTransport:
    """Builds the host-keyed simulated transport from named scenarios."""
    by_host: dict[str, HostScenario] = {}
    for scenario in scenarios.values():
        by_host[scenario.host] = scenario.host_scenario()
    return SimulatedTransport(catalog, by_host)
