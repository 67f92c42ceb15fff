// Pure view-model logic: display fields, warning cards, and snapshot
// reconciliation by store revision (stale poll responses are discarded).

import type { EntryRecord, EventPayload, WhitelistSnapshot } from "./api.js";

export interface EntryView {
  domain: string;
  level: string;
  handling: string;
  source: string;
  age: string;
  expiry: string | null;
}

export interface WarningCard {
  eventId: string;
  domain: string;
  url: string;
  errorCode: string;
  status: string;
  canRestore: boolean;
  token: string | null;
}

export function relativeAge(addedAt: number, now: number): string {
  const seconds = Math.max(0, Math.floor(now - addedAt));
  if (seconds < 60) return `${seconds}s ago`;
  if (seconds < 3600) return `${Math.floor(seconds / 60)}m ago`;
  if (seconds < 86400) return `${Math.floor(seconds / 3600)}h ago`;
  return `${Math.floor(seconds / 86400)}d ago`;
}

export function expiryCountdown(expiresAt: number | undefined, now: number): string | null {
  if (expiresAt === undefined) return null;
  const seconds = Math.floor(expiresAt - now);
  if (seconds <= 0) return "expired";
  if (seconds < 60) return `expires in ${seconds}s`;
  if (seconds < 3600) return `expires in ${Math.floor(seconds / 60)}m`;
  return `expires in ${Math.floor(seconds / 3600)}h`;
}

export function entryView(entry: EntryRecord, now: number): EntryView {
  return {
    domain: entry.domain,
    level: entry.level,
    handling: entry.handling,
    source: entry.source,
    age: relativeAge(entry.added_at, now),
    expiry: expiryCountdown(entry.expires_at, now),
  };
}

// Restore Defaults is offered only while a bypass token exists (pending
// active warnings); blocked events render with no actions at all.
export function warningCard(event: EventPayload): WarningCard {
  return {
    eventId: event.event_id,
    domain: event.domain,
    url: event.url,
    errorCode: event.error_code,
    status: event.status,
    canRestore: event.status === "pending" && typeof event.bypass_token === "string",
    token: event.bypass_token ?? null,
  };
}

export class SnapshotReconciler {
  private revision = -1;

  /** Accepts a snapshot only when it is at least as new as the last one. */
  accept(snapshot: WhitelistSnapshot): boolean {
    if (snapshot.revision < this.revision) return false;
    this.revision = snapshot.revision;
    return true;
  }

  get currentRevision(): number {
    return this.revision;
  }
}
