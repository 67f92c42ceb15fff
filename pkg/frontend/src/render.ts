// HTML builders. Pure string functions so rendering is testable without a
// browser; main.ts assigns the results into the page.

import type { EntryView, WarningCard } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

export function renderWhitelistRows(views: EntryView[]): string {
  if (views.length === 0) {
    return '<tr><td colspan="6" class="empty">No whitelisted domains yet. Add one above.</td></tr>';
  }
  return views
    .map((view) => {
      const expiry = view.expiry === null ? "" : ` <span class="expiry">${escapeHtml(view.expiry)}</span>`;
      return (
        "<tr>" +
        `<td>${escapeHtml(view.domain)}</td>` +
        `<td><span class="badge level-${escapeHtml(view.level)}">${escapeHtml(view.level)}</span></td>` +
        `<td><span class="badge handling-${escapeHtml(view.handling)}">${escapeHtml(view.handling)}</span></td>` +
        `<td>${escapeHtml(view.source)}</td>` +
        `<td>${escapeHtml(view.age)}${expiry}</td>` +
        "<td>" +
        `<button data-action="relax" data-domain="${escapeHtml(view.domain)}">relax</button> ` +
        `<button data-action="remove" data-domain="${escapeHtml(view.domain)}">remove</button>` +
        "</td>" +
        "</tr>"
      );
    })
    .join("");
}

export function renderCards(cards: WarningCard[]): string {
  if (cards.length === 0) {
    return '<p class="empty">No pending warnings.</p>';
  }
  return cards
    .map((card) => {
      const actions = card.canRestore
        ? `<button data-action="restore" data-event="${escapeHtml(card.eventId)}">Restore Defaults</button> ` +
          `<button data-action="close" data-event="${escapeHtml(card.eventId)}">Close</button>`
        : "";
      return (
        `<div class="card status-${escapeHtml(card.status)}" data-card="${escapeHtml(card.eventId)}">` +
        `<div class="card-domain">${escapeHtml(card.domain)}</div>` +
        `<div class="card-url">${escapeHtml(card.url)}</div>` +
        `<div class="card-code">${escapeHtml(card.errorCode)}</div>` +
        `<div class="card-status">${escapeHtml(card.status)}</div>` +
        `<div class="card-actions">${actions}</div>` +
        "</div>"
      );
    })
    .join("");
}

export function renderBanner(message: string | null): string {
  if (message === null) return "";
  return `<div class="banner">${escapeHtml(message)}</div>`;
}
