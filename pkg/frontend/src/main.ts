/** Application shell: state, URL sync, data loading, and rendering. */

import { StaleGate, fetchEditions, fetchRanking } from "./api.js";
import { renderCompare } from "./compare.js";
import { DEFAULT_TILE_TEMPLATE, renderMap } from "./map.js";
import {
  ViewState,
  decodeState,
  defaultState,
  encodeState,
  withSubject,
} from "./state.js";
import type { SortColumn } from "./state.js";
import { renderTable } from "./table.js";
import type { EditionListDoc, EditionSummaryDoc, RankingDoc } from "./types.js";

// a fresh click on these sorts descending first: the interesting end on top
const DESC_FIRST: SortColumn[] = ["papers", "value", "delta"];

// deployments with their own tile server set this global before the module loads
const TILE_TEMPLATE: string =
  (globalThis as { INSTRANK_TILE_TEMPLATE?: string }).INSTRANK_TILE_TEMPLATE ??
  DEFAULT_TILE_TEMPLATE;

let state: ViewState = decodeState(location.search.slice(1));
let editions: EditionListDoc = { editions: [] };
let ranking: RankingDoc | null = null;
let loadError: string | null = null;
const gate = new StaleGate();

function currentEdition(): EditionSummaryDoc | null {
  return editions.editions.find((e) => e.edition_id === state.edition) ?? null;
}

/** Snap edition, subject, indicator, and covariate to available values. */
function coerceState(): void {
  const byId = editions.editions.find((e) => e.edition_id === state.edition);
  const edition = byId ?? editions.editions[0];
  if (!edition) return;
  state.edition = edition.edition_id;
  if (!edition.subjects.includes(state.subject)) state.subject = edition.subjects[0] ?? "";
  if (!edition.indicators.includes(state.indicator)) {
    state.indicator = edition.indicators[0] ?? "";
  }
  if (state.covariate !== null && !edition.covariates.includes(state.covariate)) {
    state.covariate = null;
  }
}

function syncUrl(): void {
  const query = encodeState(state);
  history.replaceState(null, "", query ? `?${query}` : location.pathname);
}

function setState(patch: Partial<ViewState>, { reload = false } = {}): void {
  state = { ...state, ...patch };
  syncUrl();
  if (reload) {
    void loadRanking();
  } else {
    render();
  }
}

async function loadRanking(): Promise<void> {
  const ticket = gate.issue();
  render();
  try {
    const doc = await fetchRanking(state.edition, state.subject, state.indicator,
                                   state.covariate);
    if (!gate.isCurrent(ticket)) return;
    ranking = doc;
    loadError = null;
  } catch (error) {
    if (!gate.isCurrent(ticket)) return;
    ranking = null;
    loadError = error instanceof Error ? error.message : String(error);
  }
  render();
}

function toggleSelect(institutionId: string): void {
  const selection = state.selection.includes(institutionId)
    ? state.selection.filter((id) => id !== institutionId)
    : [...state.selection, institutionId];
  setState({ selection });
}

function option(value: string, label: string, selected: boolean): HTMLOptionElement {
  const el = document.createElement("option");
  el.value = value;
  el.textContent = label;
  el.selected = selected;
  return el;
}

function select(id: string, values: Array<[string, string]>, current: string,
                onChange: (value: string) => void): HTMLElement {
  const wrap = document.createElement("label");
  wrap.className = "control";
  wrap.textContent = id;
  const sel = document.createElement("select");
  for (const [value, label] of values) sel.appendChild(option(value, label, value === current));
  sel.addEventListener("change", () => onChange(sel.value));
  wrap.appendChild(sel);
  return wrap;
}

function renderToolbar(container: HTMLElement): void {
  const edition = currentEdition();
  const parts: HTMLElement[] = [];

  parts.push(select("edition",
    editions.editions.map((e) => [e.edition_id, e.edition_id]),
    state.edition,
    (value) => {
      state.edition = value;
      coerceState();
      setState({}, { reload: true });
    }));

  if (edition) {
    parts.push(select("subject",
      edition.subjects.map((s) => [s, s]),
      state.subject,
      (value) => {
        state = withSubject(state, value);
        setState({}, { reload: true });
      }));
    parts.push(select("indicator",
      edition.indicators.map((i) => [i, i.replace("_", " ")]),
      state.indicator,
      (value) => setState({ indicator: value }, { reload: true })));
    parts.push(select("adjusted for",
      [["", "none"], ...edition.covariates.map((c): [string, string] => [c, c])],
      state.covariate ?? "",
      (value) => setState({ covariate: value || null }, { reload: true })));
  }

  const sig = document.createElement("label");
  sig.className = "control control-checkbox";
  const box = document.createElement("input");
  box.type = "checkbox";
  box.checked = state.significantOnly;
  box.addEventListener("change", () => setState({ significantOnly: box.checked }));
  sig.append(box, document.createTextNode("significant only"));
  parts.push(sig);

  const search = document.createElement("label");
  search.className = "control control-search";
  const input = document.createElement("input");
  input.type = "search";
  input.placeholder = "Search institutions";
  input.value = state.search;
  input.addEventListener("input", () => setState({ search: input.value }));
  search.appendChild(input);
  parts.push(search);

  container.replaceChildren(...parts);
}

function onSort(column: SortColumn): void {
  if (state.sort.column === column) {
    const direction = state.sort.direction === "asc" ? "desc" : "asc";
    setState({ sort: { column, direction } });
  } else {
    const direction = DESC_FIRST.includes(column) ? "desc" : "asc";
    setState({ sort: { column, direction } });
  }
}

function render(): void {
  renderToolbar(document.getElementById("toolbar")!);

  renderMap(
    document.getElementById("map")!,
    ranking,
    state,
    {
      onViewportChange: (viewport) => setState({ viewport }),
      onToggleSelect: toggleSelect,
      onRegionSelect: (ids) => {
        const added = ids.filter((id) => !state.selection.includes(id));
        setState({ selection: [...state.selection, ...added] });
      },
    },
    TILE_TEMPLATE,
  );

  renderCompare(document.getElementById("compare")!, ranking, state.selection, {
    onClear: () => setState({ selection: [] }),
    onRemove: toggleSelect,
  });

  const tableBox = document.getElementById("table")!;
  if (ranking) {
    renderTable(tableBox, ranking, state, { onSort, onToggleSelect: toggleSelect });
  } else {
    const note = document.createElement("p");
    note.className = "table-empty";
    note.textContent = loadError ? `Could not load the table: ${loadError}` : "Loading…";
    tableBox.replaceChildren(note);
  }
}

async function init(): Promise<void> {
  try {
    editions = await fetchEditions();
  } catch (error) {
    const note = document.createElement("p");
    note.className = "table-empty";
    note.textContent = `Could not reach the API: ${error instanceof Error ? error.message : error}`;
    document.getElementById("table")!.replaceChildren(note);
    return;
  }
  coerceState();
  syncUrl();
  await loadRanking();
}

window.addEventListener("popstate", () => {
  state = decodeState(location.search.slice(1));
  coerceState();
  void loadRanking();
});
window.addEventListener("resize", render);

void init();

export { defaultState };
