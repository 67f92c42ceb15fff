"""Command line interface: whitelist management, fetching, simulation, serving.

Exit codes: 0 success, 1 domain error (duplicate, not found, blocked or
failed fetch, prevented handshake), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

from filelock import FileLock

from . import __version__
from .enforcement import (
    EventRegistry,
    FetchBlocked,
    FetchFailed,
    FetchSuccess,
    FetchWarned,
    fetch,
)
from .errors import TlsGateError
from .gateway import GatewayConfig, serve
from .handshake import DefaultFallback, PolicyEnforced, format_event, run_session
from .model import SuiteCatalog, default_catalog, load_catalog
from .policy import PolicyLevel, spec_of
from .scenarios import default_scenarios, load_scenarios, parse_attacker, scenario_transport
from .whitelist import (
    ErrorHandling,
    WhitelistStore,
    canonical_json,
    load_store,
    save_store,
    store_from_document,
)

DEFAULT_STORE = "tlsgate-store.json"

EXIT_OK = 0
EXIT_DOMAIN_ERROR = 1
EXIT_USAGE = 2


def _store_path(args: argparse.Namespace) -> Path:
    if args.store:
        return Path(args.store)
    return Path(os.environ.get("TLSGATE_STORE", DEFAULT_STORE))


def _catalog(args: argparse.Namespace) -> SuiteCatalog:
    path = args.catalog or os.environ.get("TLSGATE_CATALOG")
    return load_catalog(path) if path else default_catalog()


def _lock_for(path: Path) -> FileLock:
    return FileLock(str(path) + ".lock")


def _load_or_new(path: Path) -> WhitelistStore:
    return load_store(path) if path.exists() else WhitelistStore()


def _print_entry(entry) -> None:
    expiry = "" if entry.expires_at is None else f"  expires_at={entry.expires_at:.0f}"
    print(
        f"{entry.domain}  level={entry.level.value}  handling={entry.handling.value}"
        f"  source={entry.source.value}{expiry}"
    )


def _cmd_add(args: argparse.Namespace) -> int:
    path = _store_path(args)
    with _lock_for(path):
        store = _load_or_new(path)
        handling = ErrorHandling.parse(args.handling)
        entry = store.add_client_side(args.domain, handling=handling)
        save_store(store, path)
    _print_entry(entry)
    return EXIT_OK


def _cmd_rm(args: argparse.Namespace) -> int:
    path = _store_path(args)
    with _lock_for(path):
        store = _load_or_new(path)
        entry = store.remove(args.domain)
        save_store(store, path)
    print(f"removed {entry.domain}")
    return EXIT_OK


def _cmd_ls(args: argparse.Namespace) -> int:
    path = _store_path(args)
    with _lock_for(path):
        store = _load_or_new(path)
    if args.json:
        print(json.dumps(store.to_document(), indent=2, sort_keys=True))
        return EXIT_OK
    entries = store.entries()
    if not entries:
        print("(whitelist is empty)")
        return EXIT_OK
    for entry in entries:
        _print_entry(entry)
    return EXIT_OK


def _cmd_relax(args: argparse.Namespace) -> int:
    path = _store_path(args)
    with _lock_for(path):
        store = _load_or_new(path)
        entry = store.relax(args.domain)
        save_store(store, path)
    _print_entry(entry)
    return EXIT_OK


def _transport(args: argparse.Namespace, catalog: SuiteCatalog):
    if getattr(args, "live", False):
        from .livenet import LiveTransport

        print("note: live transport trusts the first connection for header subscriptions (TOFU)")
        return LiveTransport(catalog)
    if getattr(args, "scenario_file", None):
        scenarios = load_scenarios(args.scenario_file, catalog)
    else:
        scenarios = default_scenarios(catalog)
    return scenario_transport(scenarios, catalog)


def _cmd_fetch(args: argparse.Namespace) -> int:
    catalog = _catalog(args)
    path = _store_path(args)
    transport = _transport(args, catalog)
    with _lock_for(path):
        store = _load_or_new(path)
        registry = EventRegistry()
        result = fetch(store, registry, args.url, transport, catalog=catalog)
        save_store(store, path)
    if isinstance(result, FetchSuccess):
        print(
            f"success url={result.url} version={result.version.label} "
            f"suite={result.suite_name} level={result.level.value}"
        )
        if result.subscribed_domain:
            print(f"subscribed {result.subscribed_domain} via response header")
        return EXIT_OK
    if isinstance(result, FetchBlocked):
        print(f"blocked domain={result.event.domain} error={result.event.kind.code}")
        return EXIT_DOMAIN_ERROR
    if isinstance(result, FetchWarned):
        payload = result.event.payload()
        print(
            f"warning domain={result.event.domain} error={result.event.kind.code} "
            f"bypass_token={payload.get('bypass_token', '')}"
        )
        print("use 'tlsgate relax <domain>' to restore defaults for this domain")
        return EXIT_DOMAIN_ERROR
    print(f"failed reason={result.reason}")
    return EXIT_DOMAIN_ERROR


def _cmd_simulate(args: argparse.Namespace) -> int:
    catalog = _catalog(args)
    if args.scenario_file:
        scenarios = load_scenarios(args.scenario_file, catalog)
    else:
        scenarios = default_scenarios(catalog)
    scenario = scenarios.get(args.scenario)
    if scenario is None:
        known = ", ".join(sorted(scenarios))
        print(f"unknown scenario {args.scenario!r}; available: {known}", file=sys.stderr)
        return EXIT_USAGE
    attacker = scenario.attacker if args.attacker is None else parse_attacker(args.attacker)
    level = PolicyLevel.parse(args.policy)
    spec = spec_of(level, catalog)
    behavior = PolicyEnforced(spec=spec) if level is PolicyLevel.STRICT else DefaultFallback(spec=spec)
    transcript = run_session(behavior, scenario.server, attacker, catalog)
    if args.json:
        for record in transcript.to_records():
            print(json.dumps(record))
    else:
        for event in transcript.events:
            print(format_event(event))
    return EXIT_OK if transcript.established else EXIT_DOMAIN_ERROR


def _cmd_serve(args: argparse.Namespace) -> int:
    host, _, port = args.listen.rpartition(":")
    if not host or not port.isdigit():
        print(f"bad --listen value {args.listen!r}, expected host:port", file=sys.stderr)
        return EXIT_USAGE
    config = GatewayConfig(
        listen_host=host,
        listen_port=int(port),
        store_path=_store_path(args),
        catalog_path=Path(args.catalog) if args.catalog else None,
        scenario_path=Path(args.scenario_file) if args.scenario_file else None,
        transport_mode="live" if args.live else "simulated",
        assets_path=Path(args.assets) if args.assets else None,
    )
    serve(config)
    return EXIT_OK


def _cmd_export(args: argparse.Namespace) -> int:
    path = _store_path(args)
    with _lock_for(path):
        store = _load_or_new(path)
    payload = canonical_json(store.to_document())
    if args.path == "-":
        sys.stdout.write(payload)
    else:
        Path(args.path).write_text(payload, encoding="utf-8")
        print(f"exported {len(store)} entries to {args.path}")
    return EXIT_OK


def _cmd_import(args: argparse.Namespace) -> int:
    if args.path == "-":
        document = json.load(sys.stdin)
    else:
        document = json.loads(Path(args.path).read_text(encoding="utf-8"))
    store = store_from_document(document)
    path = _store_path(args)
    with _lock_for(path):
        save_store(store, path)
    print(f"imported {len(store)} entries")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tlsgate",
        description="Per-domain TLS policy enforcement: whitelist, fetch, simulate, serve.",
    )
    parser.add_argument("--version", action="version", version=f"tlsgate {__version__}")
    parser.add_argument("--store", help=f"whitelist store path (env TLSGATE_STORE, default {DEFAULT_STORE})")
    parser.add_argument("--catalog", help="ciphersuite catalog path (env TLSGATE_CATALOG)")
    commands = parser.add_subparsers(dest="command", required=True)

    add = commands.add_parser("add", help="whitelist a domain at the strict level")
    add.add_argument("domain")
    add.add_argument(
        "--handling",
        default="active_warning",
        choices=["blocking", "active_warning", "active-warning"],
        help="error handling mechanism (default: active_warning)",
    )
    add.set_defaults(handler=_cmd_add)

    rm = commands.add_parser("rm", help="remove a whitelisted domain")
    rm.add_argument("domain")
    rm.set_defaults(handler=_cmd_rm)

    ls = commands.add_parser("ls", help="list whitelist entries")
    ls.add_argument("--json", action="store_true")
    ls.set_defaults(handler=_cmd_ls)

    relax = commands.add_parser("relax", help="set a domain's policy level to default")
    relax.add_argument("domain")
    relax.set_defaults(handler=_cmd_relax)

    fetch_cmd = commands.add_parser("fetch", help="fetch a URL through the enforcement pipeline")
    fetch_cmd.add_argument("url")
    fetch_cmd.add_argument("--scenario-file", help="scenario file for the simulated transport")
    fetch_cmd.add_argument("--live", action="store_true", help="use the live network transport")
    fetch_cmd.set_defaults(handler=_cmd_fetch)

    simulate = commands.add_parser("simulate", help="run one handshake scenario and print the transcript")
    simulate.add_argument("--scenario", required=True, help="scenario name, e.g. fig2")
    simulate.add_argument("--policy", default="default", choices=["strict", "default"])
    simulate.add_argument(
        "--attacker",
        help="override the scenario's attacker: none | fragmentation | failure:N | tamper:VER[:SUITE]",
    )
    simulate.add_argument("--scenario-file", help="scenario file (defaults to the shipped set)")
    simulate.add_argument("--json", action="store_true", help="one JSON record per event")
    simulate.set_defaults(handler=_cmd_simulate)

    serve_cmd = commands.add_parser("serve", help="run the local gateway service")
    serve_cmd.add_argument("--listen", default="127.0.0.1:8632", help="host:port (default 127.0.0.1:8632)")
    serve_cmd.add_argument("--live", action="store_true", help="use the live network transport")
    serve_cmd.add_argument("--scenario-file", help="scenario file for the simulated transport")
    serve_cmd.add_argument("--assets", help="dashboard bundle directory served at /ui")
    serve_cmd.set_defaults(handler=_cmd_serve)

    export = commands.add_parser("export", help="write the canonical store document")
    export.add_argument("path", help="output path, or - for stdout")
    export.set_defaults(handler=_cmd_export)

    import_cmd = commands.add_parser("import", help="replace the store from a document")
    import_cmd.add_argument("path", help="input path, or - for stdin")
    import_cmd.set_defaults(handler=_cmd_import)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except TlsGateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
