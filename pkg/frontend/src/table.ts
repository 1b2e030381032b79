/** Sortable ranking table with interval bars and rank-movement arrows. */

import type { RankingDoc, RankingEntryDoc } from "./types.js";
import type { SortColumn, SortDirection, ViewState } from "./state.js";

function compareStrings(a: string, b: string): number {
  return a < b ? -1 : a > b ? 1 : 0;
}

// unadjusted tables carry no movement; sort those rows to the front
function deltaKey(entry: RankingEntryDoc): number {
  return entry.delta_rank ?? Number.NEGATIVE_INFINITY;
}

/**
 * Comparator for a heading click. Country is a two-key sort, country
 * first and indicator value second with the best value first within
 * each country; flipping the direction flips only the country key.
 * Every order ends with the institution id so ties are deterministic.
 */
export function rowComparator(
  column: SortColumn, direction: SortDirection,
): (a: RankingEntryDoc, b: RankingEntryDoc) => number {
  const sign = direction === "asc" ? 1 : -1;
  return (a, b) => {
    let diff = 0;
    switch (column) {
      case "rank":
        diff = sign * (a.rank - b.rank);
        break;
      case "name":
        diff = sign * compareStrings(a.name, b.name);
        break;
      case "country":
        diff = sign * compareStrings(a.country, b.country)
          || b.probability - a.probability;
        break;
      case "papers":
        diff = sign * (a.n_papers - b.n_papers);
        break;
      case "value":
        diff = sign * (a.probability - b.probability);
        break;
      case "delta":
        diff = sign * (deltaKey(a) - deltaKey(b));
        break;
    }
    return diff || compareStrings(a.institution_id, b.institution_id);
  };
}

/** Case-insensitive name filter; an empty query keeps every row. */
export function filterRows(rows: RankingEntryDoc[], query: string): RankingEntryDoc[] {
  const needle = query.trim().toLowerCase();
  if (!needle) return rows;
  return rows.filter((row) => row.name.toLowerCase().includes(needle));
}

/** Rows in display order for a view state: filtered, then sorted. */
export function visibleRows(doc: RankingDoc, state: ViewState): RankingEntryDoc[] {
  let rows = doc.entries.slice();
  if (state.significantOnly) rows = rows.filter((r) => r.significant_vs_mean);
  rows = filterRows(rows, state.search);
  rows.sort(rowComparator(state.sort.column, state.sort.direction));
  return rows;
}

export interface TableHandlers {
  onSort(column: SortColumn): void;
  onToggleSelect(institutionId: string): void;
}

const HEADINGS: Array<[SortColumn, string]> = [
  ["rank", "Rank"],
  ["name", "Institution"],
  ["country", "Country"],
  ["papers", "Papers"],
  ["value", "Value"],
  ["delta", "Δ"],
];

function deltaCell(entry: RankingEntryDoc): HTMLElement {
  const cell = document.createElement("td");
  cell.className = "delta";
  const delta = entry.delta_rank;
  if (delta === null) return cell;
  if (delta > 0) {
    cell.innerHTML = `<span class="delta-up">▲ +${delta}</span>`;
  } else if (delta < 0) {
    cell.innerHTML = `<span class="delta-down">▼ ${delta}</span>`;
  } else {
    cell.textContent = "0";
  }
  return cell;
}

/** Bar for the quick interval over a shared [lo, hi] domain, with a tick
    at the reference rate ("the short line in the middle" of the track). */
function intervalBar(entry: RankingEntryDoc, lo: number, hi: number, reference: number): HTMLElement {
  const cell = document.createElement("td");
  cell.className = "value-cell";
  const span = hi - lo || 1;
  const pct = (x: number) => `${(100 * (x - lo)) / span}%`;
  const track = document.createElement("div");
  track.className = "bar-track";
  const range = document.createElement("div");
  range.className = "bar-range";
  range.style.left = pct(entry.interval_goldstein.lower);
  range.style.width = `${(100 * (entry.interval_goldstein.upper - entry.interval_goldstein.lower)) / span}%`;
  const tick = document.createElement("div");
  tick.className = "bar-tick";
  tick.style.left = pct(reference);
  const dot = document.createElement("div");
  dot.className = "bar-dot";
  dot.style.left = pct(entry.probability);
  track.append(range, tick, dot);
  const label = document.createElement("span");
  label.className = "value-label";
  label.textContent = entry.probability.toFixed(3);
  cell.append(label, track);
  return cell;
}

export function renderTable(
  container: HTMLElement, doc: RankingDoc, state: ViewState, handlers: TableHandlers,
): void {
  const rows = visibleRows(doc, state);
  const lo = Math.min(...doc.entries.map((e) => e.interval_goldstein.lower), doc.reference_probability);
  const hi = Math.max(...doc.entries.map((e) => e.interval_goldstein.upper), doc.reference_probability);

  const table = document.createElement("table");
  table.className = "ranking-table";
  const head = table.createTHead().insertRow();
  for (const [column, label] of HEADINGS) {
    const th = document.createElement("th");
    th.textContent = label;
    if (state.sort.column === column) {
      th.textContent += state.sort.direction === "asc" ? " ↑" : " ↓";
      th.classList.add("sorted");
    }
    th.addEventListener("click", () => handlers.onSort(column));
    head.appendChild(th);
  }

  const body = table.createTBody();
  for (const entry of rows) {
    const tr = body.insertRow();
    tr.dataset.id = entry.institution_id;
    if (state.selection.includes(entry.institution_id)) tr.classList.add("selected");
    if (entry.significant_vs_mean) tr.classList.add("significant");
    tr.insertCell().textContent = String(entry.rank);
    tr.insertCell().textContent = entry.name;
    tr.insertCell().textContent = entry.country;
    tr.insertCell().textContent = String(entry.n_papers);
    tr.appendChild(intervalBar(entry, lo, hi, doc.reference_probability));
    tr.appendChild(deltaCell(entry));
    tr.addEventListener("click", () => handlers.onToggleSelect(entry.institution_id));
  }

  const empty = document.createElement("p");
  empty.className = "table-empty";
  empty.textContent = rows.length === 0 ? "No institutions match." : "";

  container.replaceChildren(table, empty);
}
