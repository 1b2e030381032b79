/** The "Your selection" panel: side-by-side intervals and pair verdicts. */

import type { IntervalDoc, RankingDoc, RankingEntryDoc } from "./types.js";

/** True when two probability-scale intervals share no point. Endpoints
    come straight from the API; touching endpoints count as overlap. */
export function intervalsDisjoint(a: IntervalDoc, b: IntervalDoc): boolean {
  return a.upper < b.lower || b.upper < a.lower;
}

export interface PairVerdict {
  a: string;
  b: string;
  distinct: boolean;
}

/** Every unordered pair among the selected entries, flagged when the
    quick intervals are disjoint (a 5%-level pairwise difference). */
export function pairVerdicts(entries: RankingEntryDoc[]): PairVerdict[] {
  const verdicts: PairVerdict[] = [];
  for (let i = 0; i < entries.length; i++) {
    for (let j = i + 1; j < entries.length; j++) {
      verdicts.push({
        a: entries[i].institution_id,
        b: entries[j].institution_id,
        distinct: intervalsDisjoint(
          entries[i].interval_goldstein, entries[j].interval_goldstein,
        ),
      });
    }
  }
  return verdicts;
}

export interface CompareHandlers {
  onClear(): void;
  onRemove(institutionId: string): void;
}

function intervalRow(entry: RankingEntryDoc, lo: number, hi: number, reference: number,
                     onRemove: () => void): HTMLElement {
  const row = document.createElement("div");
  row.className = "compare-row";
  const name = document.createElement("span");
  name.className = "compare-name";
  name.textContent = `${entry.rank}. ${entry.name}`;
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
  track.append(range, tick);
  const remove = document.createElement("button");
  remove.className = "compare-remove";
  remove.textContent = "×";
  remove.title = "Remove from selection";
  remove.addEventListener("click", onRemove);
  row.append(name, track, remove);
  return row;
}

/**
 * Render the panel for the current selection. Ids missing from the
 * current table (for example after a subject switch) stay selected but
 * are listed as absent rather than compared.
 */
export function renderCompare(
  container: HTMLElement,
  doc: RankingDoc | null,
  selection: string[],
  handlers: CompareHandlers,
): void {
  const heading = document.createElement("h2");
  heading.textContent = "Your selection";
  if (selection.length === 0 || doc === null) {
    const hint = document.createElement("p");
    hint.className = "compare-hint";
    hint.textContent = "Click institutions, or shift-drag a map region, to compare them.";
    container.replaceChildren(heading, hint);
    return;
  }

  const byId = new Map(doc.entries.map((e) => [e.institution_id, e]));
  const present = selection.filter((id) => byId.has(id)).map((id) => byId.get(id)!);
  const absent = selection.filter((id) => !byId.has(id));

  const lo = Math.min(...present.map((e) => e.interval_goldstein.lower), doc.reference_probability);
  const hi = Math.max(...present.map((e) => e.interval_goldstein.upper), doc.reference_probability);

  const rows = document.createElement("div");
  rows.className = "compare-rows";
  for (const entry of present) {
    rows.appendChild(intervalRow(entry, lo, hi, doc.reference_probability,
                                 () => handlers.onRemove(entry.institution_id)));
  }

  const verdictList = document.createElement("ul");
  verdictList.className = "compare-verdicts";
  for (const verdict of pairVerdicts(present)) {
    if (!verdict.distinct) continue;
    const item = document.createElement("li");
    const a = byId.get(verdict.a)!;
    const b = byId.get(verdict.b)!;
    item.textContent = `${a.name} and ${b.name} differ at the 5% level`;
    verdictList.appendChild(item);
  }

  const parts: HTMLElement[] = [heading, rows];
  if (verdictList.childElementCount > 0) parts.push(verdictList);
  if (absent.length > 0) {
    const note = document.createElement("p");
    note.className = "compare-absent";
    note.textContent = `Not in this table: ${absent.join(", ")}`;
    parts.push(note);
  }
  const clear = document.createElement("button");
  clear.className = "compare-clear";
  clear.textContent = "Clear";
  clear.addEventListener("click", handlers.onClear);
  parts.push(clear);
  container.replaceChildren(...parts);
}
