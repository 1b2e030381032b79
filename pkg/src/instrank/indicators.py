"""Percentile indicators over subject-year paper populations.

Papers are ranked ascending by citations within their population; the
percentile of the paper at ascending rank k out of n is 100*(k-1)/n,
and the top decile is everything at or above the 90th percentile. Ties
on citations are broken by journal prestige (descending SJR2), then by
paper id, so every population has a strict total order and results are
independent of input order.

Journal quartiles are per subject: journals sorted descending by SJR,
the top ceil(0.25*m) form the first quartile.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

from .errors import UndefinedInputError, ValidationError
from .records import JournalRecord, PaperRecord

__all__ = [
    "PercentileAssignment",
    "JournalQuartileTable",
    "assign_percentiles",
    "top_decile_members",
    "build_journal_quartiles",
    "aggregate_institution_counts",
    "assignments_to_text",
]


@dataclass(frozen=True)
class PercentileAssignment:
    """A paper's ascending rank and percentile within its population."""

    paper_id: str
    percentile: float
    ascending_rank: int
    population_size: int

    def __post_init__(self):
        if not (1 <= self.ascending_rank <= self.population_size):
            raise ValidationError("ascending_rank must lie in 1..population_size")

    @property
    def top_decile(self) -> bool:
        # integer form of percentile >= 90, immune to float rounding
        return 10 * (self.ascending_rank - 1) >= 9 * self.population_size


@dataclass(frozen=True)
class JournalQuartileTable:
    """Per subject, the set of journal ids in the first SJR quartile."""

    first_quartile: dict[str, frozenset[str]]

    def is_first_quartile(self, subject_area: str, journal_id: str) -> bool:
        return journal_id in self.first_quartile.get(subject_area, frozenset())


def _sjr2_lookup(journals) -> dict[str, float]:
    # missing SJR2 ranks lowest in the tie-break
    table = {}
    for j in journals:
        table[(j.journal_id, j.subject_area)] = j.sjr2 if j.sjr2 is not None else 0.0
    return table


def assign_percentiles(population, journals) -> list[PercentileAssignment]:
    """Percentile ranks for one subject-year population of papers.

    Ascending citations; ties by descending SJR2 of the paper's journal
    (missing SJR2 counts as 0), then ascending paper id. Percentile is
    100*(k-1)/n for ascending rank k of n.
    """
    papers = list(population)
    if not papers:
        raise ValidationError("population must be nonempty")
    subjects = {p.subject_area for p in papers}
    years = {p.pub_year for p in papers}
    if len(subjects) > 1 or len(years) > 1:
        raise ValidationError("population must share one subject area and year")

    sjr2 = _sjr2_lookup(journals)
    subject = papers[0].subject_area
    ordered = sorted(
        papers,
        key=lambda p: (p.citations, -sjr2.get((p.journal_id, subject), 0.0), p.paper_id),
    )
    n = len(ordered)
    return [
        PercentileAssignment(p.paper_id, 100.0 * (k - 1) / n, k, n)
        for k, p in enumerate(ordered, start=1)
    ]


def top_decile_members(assignments) -> set[str]:
    """Paper ids at or above the 90th percentile."""
    return {a.paper_id for a in assignments if a.top_decile}


def build_journal_quartiles(journals) -> JournalQuartileTable:
    """First-quartile journal sets per subject.

    Journals without an SJR value are not quartile candidates. Within a
    subject the top ceil(0.25*m) journals by descending SJR (ties by
    ascending journal id) form the first quartile.
    """
    by_subject: dict[str, list[JournalRecord]] = defaultdict(list)
    for j in journals:
        if j.sjr is not None:
            by_subject[j.subject_area].append(j)

    table = {}
    for subject, members in by_subject.items():
        members.sort(key=lambda j: (-j.sjr, j.journal_id))
        take = math.ceil(0.25 * len(members))
        table[subject] = frozenset(j.journal_id for j in members[:take])
    return JournalQuartileTable(first_quartile=table)


def aggregate_institution_counts(
    papers,
    assignments,
    quartiles: JournalQuartileTable,
    institution_id: str,
    subject_area: str,
) -> tuple[int, int, int]:
    """Full-counting success totals for one institution in one subject.

    Every institution listed on a paper is credited with the whole
    paper. Returns (n_trials, n_success_best_paper, n_success_best_journal)
    over all years pooled. Raises for an institution with no attributed
    papers in the subject.
    """
    decile_ids = top_decile_members(assignments)
    n_trials = n_bp = n_bj = 0
    for p in papers:
        if p.subject_area != subject_area or institution_id not in p.institution_ids:
            continue
        n_trials += 1
        if p.paper_id in decile_ids:
            n_bp += 1
        if quartiles.is_first_quartile(subject_area, p.journal_id):
            n_bj += 1
    if n_trials == 0:
        raise UndefinedInputError(
            f"institution {institution_id!r} has no papers in subject {subject_area!r}"
        )
    return n_trials, n_bp, n_bj


def assignments_to_text(assignments) -> str:
    """Tab-delimited audit dump of percentile assignments."""
    lines = ["paper_id\tascending_rank\tpopulation_size\tpercentile\ttop_decile"]
    for a in sorted(assignments, key=lambda a: a.ascending_rank):
        lines.append(
            f"{a.paper_id}\t{a.ascending_rank}\t{a.population_size}"
            f"\t{a.percentile:.6g}\t{int(a.top_decile)}"
        )
    return "\n".join(lines) + "\n"
