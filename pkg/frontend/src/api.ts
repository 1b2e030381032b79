/** Thin fetch wrappers over the read-only JSON endpoints. */

import type { EditionListDoc, RankingDoc } from "./types.js";

export function rankingUrl(
  edition: string, subject: string, indicator: string, covariate: string | null,
): string {
  const params = new URLSearchParams({ edition, subject, indicator });
  params.set("covariate", covariate ?? "none");
  return `/api/rankings?${params.toString()}`;
}

async function getJson<T>(url: string): Promise<T> {
  const response = await fetch(url);
  if (!response.ok) {
    throw new Error(`GET ${url} failed with status ${response.status}`);
  }
  return response.json() as Promise<T>;
}

export function fetchEditions(): Promise<EditionListDoc> {
  return getJson("/api/editions");
}

export function fetchRanking(
  edition: string, subject: string, indicator: string, covariate: string | null,
): Promise<RankingDoc> {
  return getJson(rankingUrl(edition, subject, indicator, covariate));
}

/**
 * Ticket counter for discarding stale responses. Issue a ticket before
 * each request; apply the response only if the ticket is still the
 * newest, so a slow earlier request can never overwrite a later view.
 */
export class StaleGate {
  private latest = 0;

  issue(): number {
    return ++this.latest;
  }

  isCurrent(ticket: number): boolean {
    return ticket === this.latest;
  }
}
