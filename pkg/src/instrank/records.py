"""Plain data records shared across the pipeline stages.

Everything here is an immutable value object: loaded once, validated on
construction, then passed between the ingest, indicator, model, and
ranking stages without further mutation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ValidationError

INDICATORS = ("best_paper", "best_journal")

#: canonical covariate keys; the first is institution-level, the rest country-level
COVARIATE_KEYS = ("international_collaboration", "corruption", "residents", "gdp")
COUNTRY_COVARIATE_KEYS = ("corruption", "residents", "gdp")


@dataclass(frozen=True)
class PaperRecord:
    """One publication with its affiliations and citation count."""

    paper_id: str
    subject_area: str
    pub_year: int
    citations: int
    journal_id: str
    institution_ids: frozenset[str]
    country_codes: frozenset[str]

    def __post_init__(self):
        if self.citations < 0:
            raise ValidationError(f"paper {self.paper_id!r}: citations must be >= 0")
        if not self.institution_ids:
            raise ValidationError(f"paper {self.paper_id!r}: no affiliated institutions")
        if not self.country_codes:
            raise ValidationError(f"paper {self.paper_id!r}: no affiliation countries")


@dataclass(frozen=True)
class JournalRecord:
    """A journal with its prestige scores; either score may be unknown."""

    journal_id: str
    subject_area: str
    sjr: float | None = None
    sjr2: float | None = None

    def __post_init__(self):
        if self.sjr is not None and self.sjr <= 0:
            raise ValidationError(f"journal {self.journal_id!r}: sjr must be positive")
        if self.sjr2 is not None and self.sjr2 <= 0:
            raise ValidationError(f"journal {self.journal_id!r}: sjr2 must be positive")


@dataclass(frozen=True)
class InstitutionRecord:
    institution_id: str
    name: str
    country_code: str
    latitude: float
    longitude: float

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValidationError(f"institution {self.institution_id!r}: latitude out of range")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValidationError(f"institution {self.institution_id!r}: longitude out of range")


@dataclass(frozen=True)
class CountryCovariates:
    """Country-level context variables joined onto institutions."""

    country_code: str
    corruption_index: float
    residents: float  # millions
    gdp_per_capita: float  # international dollars

    def __post_init__(self):
        if not 0.0 <= self.corruption_index <= 100.0:
            raise ValidationError(
                f"country {self.country_code!r}: corruption_index {self.corruption_index} "
                "outside [0, 100]"
            )
        if self.residents <= 0:
            raise ValidationError(f"country {self.country_code!r}: residents must be positive")
        if self.gdp_per_capita <= 0:
            raise ValidationError(f"country {self.country_code!r}: gdp_per_capita must be positive")

    def value(self, key: str) -> float:
        return {
            "corruption": self.corruption_index,
            "residents": self.residents,
            "gdp": self.gdp_per_capita,
        }[key]


@dataclass(frozen=True)
class ClusterObservation:
    """Per-institution binomial observation feeding the mixed model.

    ``covariates`` maps covariate key to the raw (unstandardized) value;
    a missing value is stored as None and excludes the institution from
    that covariate's model only.
    """

    institution_id: str
    n_trials: int
    n_success: int
    covariates: dict[str, float | None] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValidationError(f"{self.institution_id!r}: n_trials must be >= 1")
        if not 0 <= self.n_success <= self.n_trials:
            raise ValidationError(
                f"{self.institution_id!r}: n_success {self.n_success} outside "
                f"[0, {self.n_trials}]"
            )


@dataclass(frozen=True)
class SubjectDataset:
    """All retained observations of one subject area for one indicator.

    ``covariate_standardization`` holds the (mean, sd) per covariate used
    to map raw values onto the model scale. The parameters are computed
    over the whole retained dataset of an edition, not per subject, so a
    single subject's standardized column need not have mean 0.
    """

    subject_area: str
    indicator: str
    observations: tuple[ClusterObservation, ...]
    covariate_standardization: dict[str, tuple[float, float]]

    def __post_init__(self):
        if self.indicator not in INDICATORS:
            raise ValidationError(f"unknown indicator {self.indicator!r}")

    def standardized_covariate(self, key: str):
        """Standardized covariate values aligned with observations (None where missing)."""
        mean, sd = self.covariate_standardization[key]
        out = []
        for obs in self.observations:
            raw = obs.covariates.get(key)
            out.append(None if raw is None else (raw - mean) / sd)
        return out
