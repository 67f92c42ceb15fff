// Page wiring: polls the gateway every two seconds and dispatches button
// clicks to API calls. All state lives on the server; reloading the page
// reproduces it exactly.

import { ApiError, GatewayClient } from "./api.js";
import { SnapshotReconciler, entryView, warningCard } from "./state.js";
import { renderBanner, renderCards, renderWhitelistRows } from "./render.js";

const POLL_INTERVAL_MS = 2000;

const client = new GatewayClient("");
const reconciler = new SnapshotReconciler();
const inFlight = new Set<string>();

function element<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (found === null) throw new Error(`missing element #${id}`);
  return found as T;
}

function showBanner(message: string | null): void {
  element<HTMLDivElement>("banner").innerHTML = renderBanner(message);
}

async function refresh(): Promise<void> {
  try {
    const snapshot = await client.whitelist();
    if (reconciler.accept(snapshot)) {
      const now = Date.now() / 1000;
      element<HTMLTableSectionElement>("whitelist-body").innerHTML = renderWhitelistRows(
        snapshot.entries.map((entry) => entryView(entry, now)),
      );
    }
    const events = await client.events();
    const cards = events
      .filter((event) => event.status === "pending" || event.status === "blocked")
      .map(warningCard);
    element<HTMLDivElement>("cards").innerHTML = renderCards(cards);
    showBanner(null);
  } catch (error) {
    showBanner(error instanceof Error ? `Gateway unreachable: ${error.message}` : "Gateway unreachable");
  }
}

// Exactly-once guard: a second click while the first call is in flight is
// ignored; the server's single-use token enforces it end to end anyway.
async function once(key: string, action: () => Promise<void>): Promise<void> {
  if (inFlight.has(key)) return;
  inFlight.add(key);
  try {
    await action();
  } catch (error) {
    if (error instanceof ApiError && error.status === 409) {
      showBanner("Already handled.");
    } else {
      showBanner(error instanceof Error ? error.message : "Request failed");
    }
  } finally {
    inFlight.delete(key);
  }
  await refresh();
}

async function restoreDefaults(eventId: string): Promise<void> {
  const pending = await client.events("pending");
  const event = pending.find((candidate) => candidate.event_id === eventId);
  if (event === undefined || event.bypass_token === undefined) {
    showBanner("Already handled.");
    return;
  }
  const directive = await client.bypassEvent(eventId, event.bypass_token);
  const retry = await client.fetchUrl(directive.retry_url);
  showBanner(
    retry.status === 200
      ? `Restored defaults for ${directive.domain}; retry succeeded.`
      : `Restored defaults for ${directive.domain}; retry returned ${retry.status}.`,
  );
}

function wireActions(): void {
  document.body.addEventListener("click", (click) => {
    const target = click.target;
    if (!(target instanceof HTMLElement)) return;
    const action = target.dataset.action;
    if (action === undefined) return;
    const domain = target.dataset.domain;
    const eventId = target.dataset.event;
    if (action === "relax" && domain !== undefined) {
      void once(`relax:${domain}`, async () => {
        await client.relaxDomain(domain);
      });
    } else if (action === "remove" && domain !== undefined) {
      void once(`remove:${domain}`, async () => {
        await client.removeDomain(domain);
      });
    } else if (action === "restore" && eventId !== undefined) {
      void once(`restore:${eventId}`, () => restoreDefaults(eventId));
    } else if (action === "close" && eventId !== undefined) {
      void once(`close:${eventId}`, async () => {
        await client.closeEvent(eventId);
      });
    }
  });

  element<HTMLFormElement>("add-form").addEventListener("submit", (submit) => {
    submit.preventDefault();
    const domainInput = element<HTMLInputElement>("add-domain");
    const handlingSelect = element<HTMLSelectElement>("add-handling");
    const domain = domainInput.value.trim();
    if (domain === "") return;
    void once(`add:${domain}`, async () => {
      await client.addDomain(domain, handlingSelect.value as "blocking" | "active_warning");
      domainInput.value = "";
    });
  });
}

wireActions();
void refresh();
setInterval(() => void refresh(), POLL_INTERVAL_MS);
