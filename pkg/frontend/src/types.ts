/**
 * JSON documents served by the rankings API, field for field.
 *
 * The explorer computes no statistics of its own: every number shown
 * on screen is one of these fields, and pairwise verdicts come from
 * the interval endpoints stored here.
 */

export interface IntervalDoc {
  center: number;
  lower: number;
  upper: number;
  multiplier: number;
  scale: "logit" | "probability";
}

export interface RankingEntryDoc {
  institution_id: string;
  name: string;
  country: string;
  n_papers: number;
  latitude: number | null;
  longitude: number | null;
  logit_center: number;
  u_mode: number;
  u_se: number;
  probability: number;
  interval_goldstein: IntervalDoc;
  interval_95: IntervalDoc;
  rank: number;
  delta_rank: number | null;
  significant_vs_mean: boolean;
}

export interface RankingDoc {
  subject: string;
  indicator: string;
  covariate: string | null;
  reference_probability: number;
  entries: RankingEntryDoc[];
}

export interface EditionSummaryDoc {
  edition_id: string;
  publication_window: [number, number];
  citation_cutoff: string;
  created_at: string;
  checksum: string;
  subjects: string[];
  indicators: string[];
  covariates: string[];
}

export interface EditionListDoc {
  editions: EditionSummaryDoc[];
}
