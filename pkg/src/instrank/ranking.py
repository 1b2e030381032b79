"""Ranking products built from a fit and its cluster estimates.

Each institution's indicator probability is logistic(beta0 + u_mode):
the model intercept plus the institution's shrunken effect, with any
covariate held at its standardized zero point so institutions are
compared as if they shared the same covariate value. Intervals use the
1.39 multiplier (pairwise overlap calibrated near a 5% test) and the
conventional 1.96; overlap verdicts are taken on the logit scale with
closed intervals, which is equivalent on any monotone transform of the
endpoints.

Rank movement between the covariate-adjusted and unadjusted tables
(delta) is computed over the full common institution set before any
significance filtering, so filtered views keep their deltas.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from scipy.special import expit, logit

from .errors import UndefinedInputError, ValidationError
from .glmm import EBEstimate, FitResult
from .inference import (
    CONVENTIONAL_MULTIPLIER,
    GOLDSTEIN_MULTIPLIER,
    IntervalEstimate,
    confidence_interval,
)

__all__ = [
    "RankingEntry",
    "RankingTable",
    "build_ranking",
    "delta_rank",
    "pairwise_compare",
    "significance_filter",
    "predict_curve",
    "curve_to_text",
]


@dataclass(frozen=True)
class RankingEntry:
    """One institution's row in a ranking table."""

    institution_id: str
    name: str
    country: str
    n_papers: int
    latitude: float | None
    longitude: float | None
    logit_center: float
    u_mode: float
    u_se: float
    probability: float
    interval_goldstein: IntervalEstimate
    interval_95: IntervalEstimate
    rank: int
    significant_vs_mean: bool
    delta_rank: int | None = None

    @property
    def logit_goldstein_lower(self) -> float:
        return self.logit_center - GOLDSTEIN_MULTIPLIER * self.u_se

    @property
    def logit_goldstein_upper(self) -> float:
        return self.logit_center + GOLDSTEIN_MULTIPLIER * self.u_se

    def to_dict(self) -> dict:
        return {
            "institution_id": self.institution_id,
            "name": self.name,
            "country": self.country,
            "n_papers": self.n_papers,
            "latitude": self.latitude,
            "longitude": self.longitude,
            "logit_center": self.logit_center,
            "u_mode": self.u_mode,
            "u_se": self.u_se,
            "probability": self.probability,
            "interval_goldstein": self.interval_goldstein.to_dict(),
            "interval_95": self.interval_95.to_dict(),
            "rank": self.rank,
            "delta_rank": self.delta_rank,
            "significant_vs_mean": self.significant_vs_mean,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RankingEntry":
        return cls(
            institution_id=doc["institution_id"],
            name=doc["name"],
            country=doc["country"],
            n_papers=int(doc["n_papers"]),
            latitude=doc.get("latitude"),
            longitude=doc.get("longitude"),
            logit_center=float(doc["logit_center"]),
            u_mode=float(doc["u_mode"]),
            u_se=float(doc["u_se"]),
            probability=float(doc["probability"]),
            interval_goldstein=IntervalEstimate(**doc["interval_goldstein"]),
            interval_95=IntervalEstimate(**doc["interval_95"]),
            rank=int(doc["rank"]),
            delta_rank=None if doc.get("delta_rank") is None else int(doc["delta_rank"]),
            significant_vs_mean=bool(doc["significant_vs_mean"]),
        )


@dataclass(frozen=True)
class RankingTable:
    """A complete ranking for one (subject, indicator, covariate) choice."""

    subject_area: str
    indicator: str
    covariate: str | None
    reference_probability: float
    entries: tuple[RankingEntry, ...]

    def __post_init__(self):
        if not (0.0 < self.reference_probability < 1.0):
            raise ValidationError("reference_probability must lie in (0, 1)")
        object.__setattr__(self, "entries", tuple(self.entries))

    @property
    def reference_logit(self) -> float:
        return float(logit(self.reference_probability))

    def entry(self, institution_id: str) -> RankingEntry:
        for e in self.entries:
            if e.institution_id == institution_id:
                return e
        raise UndefinedInputError(f"no entry for institution {institution_id!r}")

    def institution_ids(self) -> set[str]:
        return {e.institution_id for e in self.entries}

    def restrict(self, institution_ids) -> "RankingTable":
        """Re-ranked table over a subset of institutions.

        Used to put the unadjusted table on the same institution set as
        a covariate model before computing rank movement.
        """
        keep = set(institution_ids)
        missing = keep - self.institution_ids()
        if missing:
            raise ValidationError(f"unknown institutions: {sorted(missing)}")
        kept = [e for e in self.entries if e.institution_id in keep]
        kept.sort(key=lambda e: (-e.probability, e.institution_id))
        entries = tuple(
            replace(e, rank=i, delta_rank=None) for i, e in enumerate(kept, start=1)
        )
        return replace(self, entries=entries)

    def to_dict(self) -> dict:
        return {
            "subject": self.subject_area,
            "indicator": self.indicator,
            "covariate": self.covariate,
            "reference_probability": self.reference_probability,
            "entries": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RankingTable":
        return cls(
            subject_area=doc["subject"],
            indicator=doc["indicator"],
            covariate=doc.get("covariate"),
            reference_probability=float(doc["reference_probability"]),
            entries=tuple(RankingEntry.from_dict(e) for e in doc["entries"]),
        )


def build_ranking(
    fit: FitResult,
    eb_list: list[EBEstimate],
    metadata: dict[str, dict],
    *,
    subject_area: str,
    indicator: str,
    covariate: str | None = None,
) -> RankingTable:
    """Rank institutions by logistic(beta0 + u_mode), descending.

    ``metadata`` maps institution ids to display fields (name, country,
    n_papers, latitude, longitude); missing fields degrade to defaults.
    Ties in probability break by ascending institution id. An entry is
    flagged significant against the mean when its 1.39 interval excludes
    the reference, which on the logit scale is |u_mode| > 1.39 * u_se.
    """
    if not eb_list:
        raise ValidationError("eb_list must be nonempty")
    beta0 = float(fit.beta[0])
    ordered = sorted(eb_list, key=lambda e: (-expit(beta0 + e.u_mode), e.institution_id))

    entries = []
    for rank, eb in enumerate(ordered, start=1):
        meta = metadata.get(eb.institution_id, {})
        center = beta0 + eb.u_mode
        entries.append(RankingEntry(
            institution_id=eb.institution_id,
            name=str(meta.get("name", eb.institution_id)),
            country=str(meta.get("country", "")),
            n_papers=int(meta.get("n_papers", 0)),
            latitude=meta.get("latitude"),
            longitude=meta.get("longitude"),
            logit_center=float(center),
            u_mode=float(eb.u_mode),
            u_se=float(eb.u_se),
            probability=float(expit(center)),
            interval_goldstein=confidence_interval(
                center, eb.u_se, GOLDSTEIN_MULTIPLIER, "probability"),
            interval_95=confidence_interval(
                center, eb.u_se, CONVENTIONAL_MULTIPLIER, "probability"),
            rank=rank,
            significant_vs_mean=abs(eb.u_mode) > GOLDSTEIN_MULTIPLIER * eb.u_se,
        ))
    return RankingTable(
        subject_area=subject_area,
        indicator=indicator,
        covariate=covariate,
        reference_probability=float(expit(beta0)),
        entries=tuple(entries),
    )


def delta_rank(adjusted: RankingTable, unadjusted: RankingTable) -> RankingTable:
    """Annotate the adjusted table with rank movement vs the unadjusted one.

    delta = unadjusted rank - adjusted rank, so positive means the
    institution moved up once the covariate is accounted for. Both
    tables must cover exactly the same institutions; restrict() the
    wider one first.
    """
    a_ids, u_ids = adjusted.institution_ids(), unadjusted.institution_ids()
    if a_ids != u_ids:
        only_a = sorted(a_ids - u_ids)
        only_u = sorted(u_ids - a_ids)
        raise ValidationError(
            f"institution sets differ: only adjusted {only_a}, only unadjusted {only_u}"
        )
    u_rank = {e.institution_id: e.rank for e in unadjusted.entries}
    entries = tuple(
        replace(e, delta_rank=u_rank[e.institution_id] - e.rank)
        for e in adjusted.entries
    )
    return replace(adjusted, entries=entries)


def pairwise_compare(entry_a: RankingEntry, entry_b: RankingEntry) -> str:
    """Closed-interval overlap verdict on the logit scale.

    Returns "a_higher", "b_higher", or "indistinguishable". Touching
    endpoints count as overlap.
    """
    if entry_a.logit_goldstein_lower > entry_b.logit_goldstein_upper:
        return "a_higher"
    if entry_b.logit_goldstein_lower > entry_a.logit_goldstein_upper:
        return "b_higher"
    return "indistinguishable"


def significance_filter(table: RankingTable) -> RankingTable:
    """Entries flagged significant against the mean, order and deltas intact.

    Ranks and delta-rank values keep the numbers they had in the full
    table; this is a display subset, not a re-ranking.
    """
    return replace(
        table,
        entries=tuple(e for e in table.entries if e.significant_vs_mean),
    )


def _covariate_column(columns) -> int:
    candidates = [
        i for i, name in enumerate(columns)
        if name != "intercept" and not name.startswith("subject[")
    ]
    if len(candidates) != 1:
        raise ValidationError(
            f"expected exactly one covariate column, found {len(candidates)}"
        )
    return candidates[0]


def predict_curve(
    overall_fit: FitResult,
    covariate_raw_grid,
    subject_area: str,
    standardization: tuple[float, float],
    reference_subject: str,
) -> list[tuple[float, float]]:
    """Predicted rate along a raw covariate grid for one subject.

    Uses the pooled fit's subject main effect and interaction slope with
    the cluster effect excluded:
    rate = logistic(beta0 + main + (slope + interaction) * z(raw)).
    """
    columns = list(overall_fit.columns)
    if "intercept" not in columns:
        raise ValidationError("overall fit must include an intercept column")
    cov_idx = _covariate_column(columns)
    cov_name = columns[cov_idx]
    main_name = f"subject[{subject_area}]"
    inter_name = f"{main_name}*{cov_name}"

    if main_name in columns:
        main = float(overall_fit.beta[columns.index(main_name)])
        inter = float(overall_fit.beta[columns.index(inter_name)])
    elif subject_area == reference_subject:
        main = inter = 0.0
    else:
        raise UndefinedInputError(f"subject {subject_area!r} not in the fit")

    beta0 = float(overall_fit.beta[columns.index("intercept")])
    slope = float(overall_fit.beta[cov_idx])
    mean, sd = standardization
    if sd <= 0:
        raise ValidationError("standardization sd must be positive")

    curve = []
    for raw in covariate_raw_grid:
        z = (float(raw) - mean) / sd
        curve.append((float(raw), float(expit(beta0 + main + (slope + inter) * z))))
    return curve


def curve_to_text(points_by_subject: dict[str, list[tuple[float, float]]]) -> str:
    """Delimited export of prediction curves: raw_value, subject, predicted_rate."""
    lines = ["raw_value\tsubject\tpredicted_rate"]
    for subject in sorted(points_by_subject):
        for raw, rate in points_by_subject[subject]:
            lines.append(f"{raw:.10g}\t{subject}\t{rate:.10g}")
    return "\n".join(lines) + "\n"
