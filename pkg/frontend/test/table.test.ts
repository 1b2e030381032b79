import { describe, expect, it } from "vitest";

import { defaultState } from "../src/state.js";
import { filterRows, rowComparator, visibleRows } from "../src/table.js";
import type { IntervalDoc, RankingDoc, RankingEntryDoc } from "../src/types.js";

function interval(center: number, halfWidth: number): IntervalDoc {
  return {
    center,
    lower: center - halfWidth,
    upper: center + halfWidth,
    multiplier: 1.39,
    scale: "probability",
  };
}

function entry(
  id: string, name: string, country: string, papers: number,
  probability: number, rank: number, delta: number | null, significant = true,
): RankingEntryDoc {
  return {
    institution_id: id,
    name,
    country,
    n_papers: papers,
    latitude: 50 + rank,
    longitude: 8 - rank,
    logit_center: Math.log(probability / (1 - probability)),
    u_mode: 0.1 * rank,
    u_se: 0.05,
    probability,
    interval_goldstein: interval(probability, 0.012),
    interval_95: interval(probability, 0.017),
    rank,
    delta_rank: delta,
    significant_vs_mean: significant,
  };
}

// mimics one adjusted table from the API: ties in country, papers, and value
const DOC: RankingDoc = {
  subject: "CHEM",
  indicator: "best_paper",
  covariate: "gdp",
  reference_probability: 0.15,
  entries: [
    entry("I-AA", "Aalto University", "FI", 2100, 0.210, 1, 2),
    entry("I-BB", "Basel Institute", "CH", 3200, 0.195, 2, -1, false),
    entry("I-CC", "Caltech", "US", 2100, 0.182, 3, 0),
    entry("I-DD", "Delft University", "NL", 5400, 0.182, 4, 3),
    entry("I-EE", "ETH Zurich", "CH", 6100, 0.160, 5, -2, false),
    entry("I-FF", "Fudan University", "CN", 5400, 0.140, 6, 1),
    entry("I-GG", "Ghent University", "BE", 1800, 0.128, 7, -3),
    entry("I-HH", "Harbin Institute", "CN", 2900, 0.112, 8, 0, false),
  ],
};

function ids(rows: RankingEntryDoc[]): string[] {
  return rows.map((r) => r.institution_id);
}

// independent re-derivation of each order from the raw payload
function referenceSort(keys: (e: RankingEntryDoc) => Array<string | number>): string[] {
  return DOC.entries
    .map((e) => ({ id: e.institution_id, key: keys(e) }))
    .sort((a, b) => {
      for (let i = 0; i < a.key.length; i++) {
        if (a.key[i] < b.key[i]) return -1;
        if (a.key[i] > b.key[i]) return 1;
      }
      return 0;
    })
    .map((x) => x.id);
}

describe("sort orders match a reference sort of the payload", () => {
  const sorted = (column: Parameters<typeof rowComparator>[0], direction: "asc" | "desc") =>
    ids(DOC.entries.slice().sort(rowComparator(column, direction)));

  it("value descending puts the top performer first", () => {
    expect(sorted("value", "desc")).toEqual(
      referenceSort((e) => [-e.probability, e.institution_id]),
    );
    expect(sorted("value", "desc")[0]).toBe("I-AA");
  });

  it("value ascending puts the weakest first", () => {
    expect(sorted("value", "asc")).toEqual(
      referenceSort((e) => [e.probability, e.institution_id]),
    );
  });

  it("rank both ways", () => {
    expect(sorted("rank", "asc")).toEqual(referenceSort((e) => [e.rank]));
    expect(sorted("rank", "desc")).toEqual(referenceSort((e) => [-e.rank]));
  });

  it("name both ways", () => {
    expect(sorted("name", "asc")).toEqual(referenceSort((e) => [e.name, e.institution_id]));
    expect(sorted("name", "desc")).toEqual(
      referenceSort((e) => [e.name, e.institution_id]).reverse(),
    );
  });

  it("papers both ways with the id breaking ties", () => {
    expect(sorted("papers", "asc")).toEqual(
      referenceSort((e) => [e.n_papers, e.institution_id]),
    );
    expect(sorted("papers", "desc")).toEqual(
      referenceSort((e) => [-e.n_papers, e.institution_id]),
    );
  });

  it("delta both ways", () => {
    expect(sorted("delta", "asc")).toEqual(
      referenceSort((e) => [e.delta_rank!, e.institution_id]),
    );
    expect(sorted("delta", "desc")).toEqual(
      referenceSort((e) => [-e.delta_rank!, e.institution_id]),
    );
  });

  it("country sorts by country first and indicator value second", () => {
    expect(sorted("country", "asc")).toEqual(
      referenceSort((e) => [e.country, -e.probability, e.institution_id]),
    );
    // both CH institutions stay value-ordered inside their group
    const asc = sorted("country", "asc");
    expect(asc.indexOf("I-BB")).toBeLessThan(asc.indexOf("I-EE"));
  });

  it("flipping the country direction flips only the country key", () => {
    const desc = sorted("country", "desc");
    expect(desc).toEqual(
      referenceSort((e) => [e.country, -e.probability, e.institution_id]).sort((a, b) => {
        const ca = DOC.entries.find((e) => e.institution_id === a)!.country;
        const cb = DOC.entries.find((e) => e.institution_id === b)!.country;
        return ca < cb ? 1 : ca > cb ? -1 : 0;
      }),
    );
    expect(desc.indexOf("I-BB")).toBeLessThan(desc.indexOf("I-EE"));
  });
});

describe("search filter", () => {
  it("matches names case-insensitively", () => {
    expect(ids(filterRows(DOC.entries, "university"))).toEqual(["I-AA", "I-DD", "I-FF", "I-GG"]);
  });

  it("returns an empty list when nothing matches", () => {
    expect(filterRows(DOC.entries, "zzz nowhere")).toEqual([]);
  });

  it("keeps every row for a blank query", () => {
    expect(filterRows(DOC.entries, "  ")).toHaveLength(DOC.entries.length);
  });
});

describe("visible rows", () => {
  it("applies the significance filter before sorting", () => {
    const state = defaultState();
    state.significantOnly = true;
    state.sort = { column: "value", direction: "desc" };
    const rows = visibleRows(DOC, state);
    expect(rows.every((r) => r.significant_vs_mean)).toBe(true);
    expect(ids(rows)).toEqual(["I-AA", "I-CC", "I-DD", "I-FF", "I-GG"]);
  });

  it("search and filter compose", () => {
    const state = defaultState();
    state.significantOnly = true;
    state.search = "university";
    expect(ids(visibleRows(DOC, state))).toEqual(["I-AA", "I-DD", "I-FF", "I-GG"]);
  });
});
