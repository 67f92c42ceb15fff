"""Local HTTP gateway: management API, fetch-through, interstitial pages.

The gateway is an explicit fetch-through service: clients ask it to
fetch a URL and it enforces the whitelist policy on the outbound
handshake. Blocking violations render a block page; active warnings
render a click-through page whose "Restore Defaults" button consumes a
single-use bypass token.
"""

from __future__ import annotations

import html
import json
import logging
import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import HTMLResponse, JSONResponse, RedirectResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import __version__
from .enforcement import (
    EventRegistry,
    EventStatus,
    FetchBlocked,
    FetchFailed,
    FetchSuccess,
    FetchWarned,
    TransportAdapter,
    WarningEvent,
    bypass,
    close_event,
    fetch,
)
from .errors import (
    DomainNotFoundError,
    DuplicateDomainError,
    EventStateError,
    NormalizationError,
    ScenarioError,
    TokenReplayError,
    UnknownTokenError,
)
from .model import SuiteCatalog, default_catalog, load_catalog
from .scenarios import default_scenarios, load_scenarios, scenario_transport
from .whitelist import ErrorHandling, WhitelistStore, load_store, save_store

logger = logging.getLogger(__name__)


@dataclass
class GatewayConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8632
    store_path: Path = Path("tlsgate-store.json")
    catalog_path: Optional[Path] = None
    scenario_path: Optional[Path] = None
    transport_mode: str = "simulated"
    assets_path: Optional[Path] = None

    def __post_init__(self) -> None:
        if not 1 <= self.listen_port <= 65535:
            raise ValueError(f"port out of range: {self.listen_port}")
        if self.transport_mode not in ("simulated", "live"):
            raise ValueError(f"unknown transport mode: {self.transport_mode!r}")
        self.store_path = Path(self.store_path)
        if self.catalog_path is not None:
            self.catalog_path = Path(self.catalog_path)
            if not self.catalog_path.exists():
                raise ValueError(f"catalog not found: {self.catalog_path}")
        if self.scenario_path is not None:
            self.scenario_path = Path(self.scenario_path)
            if not self.scenario_path.exists():
                raise ValueError(f"scenario file not found: {self.scenario_path}")
        if self.assets_path is not None:
            self.assets_path = Path(self.assets_path)


class AddDomainBody(BaseModel):
    domain: str
    handling: Optional[str] = None


class BypassBody(BaseModel):
    token: str


class GatewayState:
    """Everything the route handlers share, with save-through persistence."""

    def __init__(self, config: GatewayConfig):
        self.config = config
        self.catalog: SuiteCatalog = (
            load_catalog(config.catalog_path) if config.catalog_path else default_catalog()
        )
        self.store = (
            load_store(config.store_path) if config.store_path.exists() else WhitelistStore()
        )
        self.registry = EventRegistry()
        self.transport = self._build_transport()
        self._save_lock = threading.Lock()

    def _build_transport(self) -> TransportAdapter:
        if self.config.transport_mode == "live":
            from .livenet import LiveTransport

            logger.warning(
                "live transport: header subscriptions trust the first connection (TOFU)"
            )
            return LiveTransport(self.catalog)
        if self.config.scenario_path:
            scenarios = load_scenarios(self.config.scenario_path, self.catalog)
        else:
            scenarios = default_scenarios(self.catalog)
        return scenario_transport(scenarios, self.catalog)

    def persist(self) -> None:
        with self._save_lock:
            save_store(self.store, self.config.store_path)


def _entry_json(entry) -> dict:
    return entry.to_record()


def _error(status: int, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail=message)


_PAGE_TEMPLATE = """<!doctype html>
<html>
<head><meta charset="utf-8"><title>{title}</title>
<style>
 body {{ font-family: system-ui, sans-serif; max-width: 42rem; margin: 4rem auto; padding: 0 1rem; }}
 .card {{ border: 1px solid #c33; border-radius: 8px; padding: 1.5rem; background: #fff6f6; }}
 code {{ background: #eee; padding: 0 0.3rem; }}
 button {{ font-size: 1rem; padding: 0.4rem 1rem; margin-right: 0.6rem; }}
</style></head>
<body>
<div class="card">
<h1>{title}</h1>
<p>{message}</p>
<p>Domain: <code>{domain}</code><br>Error: <code>{code}</code></p>
{actions}
</div>
<script id="tlsgate-event" type="application/json">{payload}</script>
{script}
</body></html>"""

_WARN_ACTIONS = """<p>
<button id="restore-defaults">Restore Defaults</button>
<button id="close-warning">Close</button>
</p>
<p id="outcome"></p>"""

_WARN_SCRIPT = """<script>
(function () {
  var payload = JSON.parse(document.getElementById("tlsgate-event").textContent);
  var outcome = document.getElementById("outcome");
  document.getElementById("restore-defaults").addEventListener("click", function () {
    fetch("/api/events/" + payload.event_id + "/bypass", {
      method: "POST",
      headers: {"content-type": "application/json"},
      body: JSON.stringify({token: payload.bypass_token}),
    }).then(function (r) {
      if (r.ok) {
        r.json().then(function (body) {
          window.location = "/fetch?url=" + encodeURIComponent(body.retry_url);
        });
      } else {
        outcome.textContent = "Bypass failed (" + r.status + ")";
      }
    });
  });
  document.getElementById("close-warning").addEventListener("click", function () {
    fetch("/api/events/" + payload.event_id + "/close", {method: "POST"}).then(function () {
      outcome.textContent = "Warning dismissed. The strict policy stays in force.";
    });
  });
})();
</script>"""


def _render_event_page(event: WarningEvent, blocking: bool) -> str:
    payload = event.payload()
    if blocking:
        title = "Connection blocked"
        message = (
            "This domain is whitelisted for the strict TLS policy with blocking "
            "error handling, and the server response violated the policy. "
            "The connection was not established."
        )
        actions = ""
        script = ""
    else:
        title = "Security warning"
        message = (
            "This domain is whitelisted for the strict TLS policy, and the server "
            "response violated the policy. You may restore the default policy for "
            "this domain only, or close this warning."
        )
        actions = _WARN_ACTIONS
        script = _WARN_SCRIPT
    return _PAGE_TEMPLATE.format(
        title=title,
        message=message,
        domain=html.escape(event.domain),
        code=html.escape(event.kind.code),
        payload=json.dumps(payload),
        actions=actions,
        script=script,
    )


def create_app(config: GatewayConfig) -> FastAPI:
    state = GatewayState(config)

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        yield
        state.persist()

    app = FastAPI(title="tlsgate gateway", version=__version__, lifespan=lifespan)
    app.state.gateway = state

    @app.get("/api/health")
    def health() -> dict:
        return {"version": __version__, "transport_mode": config.transport_mode}

    @app.get("/api/whitelist")
    def whitelist_index() -> dict:
        return {
            "revision": state.store.revision,
            "entries": [_entry_json(e) for e in state.store.entries()],
        }

    @app.post("/api/whitelist", status_code=201)
    def whitelist_add(body: AddDomainBody) -> dict:
        try:
            handling = (
                ErrorHandling.ACTIVE_WARNING
                if body.handling is None
                else ErrorHandling.parse(body.handling)
            )
            entry = state.store.add_client_side(body.domain, handling=handling)
        except (NormalizationError, ValueError) as exc:
            raise _error(422, str(exc))
        except DuplicateDomainError as exc:
            raise _error(409, str(exc))
        state.persist()
        return _entry_json(entry)

    @app.delete("/api/whitelist/{domain}", status_code=204)
    def whitelist_remove(domain: str) -> Response:
        try:
            state.store.remove(domain)
        except (DomainNotFoundError, NormalizationError) as exc:
            raise _error(404, str(exc))
        state.persist()
        return Response(status_code=204)

    @app.post("/api/whitelist/{domain}/relax")
    def whitelist_relax(domain: str) -> dict:
        try:
            entry = state.store.relax(domain)
        except (DomainNotFoundError, NormalizationError) as exc:
            raise _error(404, str(exc))
        state.persist()
        return _entry_json(entry)

    @app.get("/api/events")
    def events_index(status: Optional[str] = Query(default=None)) -> dict:
        wanted: Optional[EventStatus] = None
        if status is not None:
            try:
                wanted = EventStatus(status.lower())
            except ValueError:
                raise _error(422, f"unknown status {status!r}")
        return {"events": [e.payload() for e in state.registry.events(wanted)]}

    @app.post("/api/events/{event_id}/bypass")
    def events_bypass(event_id: str, body: BypassBody) -> dict:
        event = state.registry.get(event_id)
        if event is None or event.token is None or event.token.value != body.token:
            raise _error(404, "unknown event or token")
        try:
            directive = bypass(state.store, state.registry, body.token)
        except (UnknownTokenError, DomainNotFoundError) as exc:
            raise _error(404, str(exc))
        except (TokenReplayError, EventStateError) as exc:
            raise _error(409, str(exc))
        state.persist()
        return {
            "retry_url": directive.retry_url,
            "domain": directive.domain,
            "new_level": directive.new_level.value,
        }

    @app.post("/api/events/{event_id}/close")
    def events_close(event_id: str) -> dict:
        if state.registry.get(event_id) is None:
            raise _error(404, f"unknown event {event_id!r}")
        try:
            event = close_event(state.registry, event_id)
        except EventStateError as exc:
            raise _error(409, str(exc))
        return event.payload()

    @app.get("/fetch")
    def fetch_through(request: Request, url: str = Query(...)) -> Response:
        try:
            result = fetch(state.store, state.registry, url, state.transport, catalog=state.catalog)
        except NormalizationError as exc:
            raise _error(422, str(exc))
        state.persist()
        wants_json = "application/json" in request.headers.get("accept", "")
        if isinstance(result, FetchSuccess):
            return JSONResponse(
                {
                    "outcome": "success",
                    "url": result.url,
                    "version": result.version.label,
                    "suite": result.suite_name,
                    "suite_id": f"0x{result.suite_id:04X}",
                    "level": result.level.value,
                    "matched_domain": result.matched_domain,
                    "subscribed_domain": result.subscribed_domain,
                }
            )
        if isinstance(result, FetchBlocked):
            if wants_json:
                return JSONResponse(
                    {"outcome": "blocked", **result.event.payload()}, status_code=451
                )
            return HTMLResponse(_render_event_page(result.event, blocking=True), status_code=451)
        if isinstance(result, FetchWarned):
            if wants_json:
                return JSONResponse(
                    {"outcome": "warned", **result.event.payload()}, status_code=409
                )
            return HTMLResponse(_render_event_page(result.event, blocking=False), status_code=409)
        assert isinstance(result, FetchFailed)
        return JSONResponse({"outcome": "failed", "reason": result.reason}, status_code=502)

    assets = config.assets_path
    if assets and assets.is_dir():
        app.mount("/ui", StaticFiles(directory=str(assets), html=True), name="ui")

        @app.get("/", include_in_schema=False)
        def index() -> RedirectResponse:
            return RedirectResponse(url="/ui/")

    return app


def serve(config: GatewayConfig) -> None:
    """Runs the gateway until interrupted; flushes the store on shutdown."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.listen_host, port=config.listen_port, log_level="info")
