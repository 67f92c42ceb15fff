// Typed client for the gateway's JSON API. The dashboard performs no
// policy logic of its own: every state change goes through these calls.

export type PolicyLevel = "strict" | "default";
export type Handling = "blocking" | "active_warning";
export type EventStatus = "pending" | "bypassed" | "closed" | "blocked";

export interface EntryRecord {
  domain: string;
  level: PolicyLevel;
  handling: Handling;
  source: "client" | "header";
  added_at: number;
  expires_at?: number;
}

export interface WhitelistSnapshot {
  revision: number;
  entries: EntryRecord[];
}

export interface EventPayload {
  event_id: string;
  domain: string;
  url: string;
  error_code: string;
  handling: Handling;
  status: EventStatus;
  bypass_token?: string;
}

export interface BypassResult {
  retry_url: string;
  domain: string;
  new_level: PolicyLevel;
}

export interface FetchOutcome {
  status: number;
  body: Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseJson(response: Response): Promise<Record<string, unknown>> {
  const text = await response.text();
  if (!text) return {};
  try {
    return JSON.parse(text) as Record<string, unknown>;
  } catch {
    return { raw: text };
  }
}

export class GatewayClient {
  constructor(private readonly base: string = "") {}

  private async request(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<Record<string, unknown>> {
    const response = await fetch(this.base + path, {
      method,
      headers: body === undefined
        ? { accept: "application/json" }
        : { accept: "application/json", "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await parseJson(response);
    if (!response.ok) {
      const detail = typeof payload.detail === "string" ? payload.detail : response.statusText;
      throw new ApiError(response.status, detail);
    }
    return payload;
  }

  async health(): Promise<{ version: string; transport_mode: string }> {
    return (await this.request("GET", "/api/health")) as unknown as {
      version: string;
      transport_mode: string;
    };
  }

  async whitelist(): Promise<WhitelistSnapshot> {
    return (await this.request("GET", "/api/whitelist")) as unknown as WhitelistSnapshot;
  }

  async addDomain(domain: string, handling?: Handling): Promise<EntryRecord> {
    const body = handling === undefined ? { domain } : { domain, handling };
    return (await this.request("POST", "/api/whitelist", body)) as unknown as EntryRecord;
  }

  async removeDomain(domain: string): Promise<void> {
    await this.request("DELETE", `/api/whitelist/${encodeURIComponent(domain)}`);
  }

  async relaxDomain(domain: string): Promise<EntryRecord> {
    return (await this.request(
      "POST",
      `/api/whitelist/${encodeURIComponent(domain)}/relax`,
    )) as unknown as EntryRecord;
  }

  async events(status?: EventStatus): Promise<EventPayload[]> {
    const query = status === undefined ? "" : `?status=${status}`;
    const payload = await this.request("GET", `/api/events${query}`);
    return (payload.events ?? []) as EventPayload[];
  }

  async bypassEvent(eventId: string, token: string): Promise<BypassResult> {
    return (await this.request(
      "POST",
      `/api/events/${encodeURIComponent(eventId)}/bypass`,
      { token },
    )) as unknown as BypassResult;
  }

  async closeEvent(eventId: string): Promise<EventPayload> {
    return (await this.request(
      "POST",
      `/api/events/${encodeURIComponent(eventId)}/close`,
    )) as unknown as EventPayload;
  }

  // Fetch-through is allowed to answer 409/451; those are outcomes, not errors.
  async fetchUrl(url: string): Promise<FetchOutcome> {
    const response = await fetch(`${this.base}/fetch?url=${encodeURIComponent(url)}`, {
      headers: { accept: "application/json" },
    });
    return { status: response.status, body: await parseJson(response) };
  }
}
