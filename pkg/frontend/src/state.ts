/**
 * The complete view state, encodable to a query string so that a
 * shared URL reproduces the exact view on load.
 */

export type SortDirection = "asc" | "desc";
export type SortColumn = "rank" | "name" | "country" | "papers" | "value" | "delta";

export interface Viewport {
  lat: number;
  lon: number;
  zoom: number;
}

export interface ViewState {
  edition: string;
  subject: string;
  indicator: string;
  covariate: string | null;
  significantOnly: boolean;
  /** ordered; institution ids contain no commas */
  selection: string[];
  sort: { column: SortColumn; direction: SortDirection };
  search: string;
  viewport: Viewport;
}

export const DEFAULT_VIEWPORT: Viewport = { lat: 30, lon: 10, zoom: 2 };

const SORT_COLUMNS: readonly SortColumn[] = [
  "rank", "name", "country", "papers", "value", "delta",
];

export function defaultState(): ViewState {
  return {
    edition: "",
    subject: "",
    indicator: "",
    covariate: null,
    significantOnly: false,
    selection: [],
    sort: { column: "rank", direction: "asc" },
    search: "",
    viewport: { ...DEFAULT_VIEWPORT },
  };
}

/**
 * Encode only what differs from the defaults, so a fresh view is the
 * bare path. Numbers go through template interpolation, which in JS
 * prints the shortest digit string that parses back to the same double,
 * so the round trip is exact.
 */
export function encodeState(state: ViewState): string {
  const params = new URLSearchParams();
  if (state.edition) params.set("ed", state.edition);
  if (state.subject) params.set("sub", state.subject);
  if (state.indicator) params.set("ind", state.indicator);
  if (state.covariate !== null) params.set("cov", state.covariate);
  if (state.significantOnly) params.set("sig", "1");
  if (state.selection.length > 0) params.set("sel", state.selection.join(","));
  if (state.sort.column !== "rank" || state.sort.direction !== "asc") {
    params.set("sort", `${state.sort.column}.${state.sort.direction}`);
  }
  if (state.search) params.set("q", state.search);
  const v = state.viewport;
  if (v.lat !== DEFAULT_VIEWPORT.lat || v.lon !== DEFAULT_VIEWPORT.lon
      || v.zoom !== DEFAULT_VIEWPORT.zoom) {
    params.set("view", `${v.lat},${v.lon},${v.zoom}`);
  }
  return params.toString();
}

/** Tolerant inverse of encodeState: anything malformed falls back to a default. */
export function decodeState(query: string): ViewState {
  const params = new URLSearchParams(query);
  const state = defaultState();
  state.edition = params.get("ed") ?? "";
  state.subject = params.get("sub") ?? "";
  state.indicator = params.get("ind") ?? "";
  state.covariate = params.get("cov");
  state.significantOnly = params.get("sig") === "1";
  const sel = params.get("sel");
  if (sel) state.selection = sel.split(",").filter((s) => s.length > 0);
  const sort = params.get("sort");
  if (sort) {
    const [column, direction] = sort.split(".");
    if (SORT_COLUMNS.includes(column as SortColumn)
        && (direction === "asc" || direction === "desc")) {
      state.sort = { column: column as SortColumn, direction };
    }
  }
  state.search = params.get("q") ?? "";
  const view = params.get("view");
  if (view) {
    const parts = view.split(",").map(Number);
    if (parts.length === 3 && parts.every(Number.isFinite)) {
      state.viewport = { lat: parts[0], lon: parts[1], zoom: parts[2] };
    }
  }
  return state;
}

/** Switching subject keeps selection, sort, search, and the viewport. */
export function withSubject(state: ViewState, subject: string): ViewState {
  return { ...state, subject };
}
