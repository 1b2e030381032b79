"""End-to-end orchestration: inputs to stored edition.

For every retained subject and requested indicator the pipeline fits
the no-covariate model plus one model per requested covariate, turns
each fit into a ranking table (covariate models annotated with rank
movement against the unadjusted table restricted to the same
institutions), fits the pooled cross-subject models with subject
dummies and interactions, and emits the model-summary report, the
covariate correlation matrix, and per-subject prediction curves.

Model fits are dispatched to a thread pool and merged in deterministic
key order; the same config, inputs, and seed always produce an edition
with the same checksum. Nothing is stored unless every stage succeeds.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from .errors import (
    DesignError,
    FitNonConvergenceError,
    InputError,
    NumericError,
    ValidationError,
)
from .glmm import FitSpec, build_dummy_design, eb_estimates, fit_model
from .inference import format_summary_text, model_summary
from .ingest import (
    MIN_INSTITUTIONS_PER_SUBJECT,
    MIN_PAPERS_PER_INSTITUTION,
    build_datasets_from_aggregated,
    build_subject_datasets,
    load_aggregated,
    load_country_covariates,
    load_institutions,
    load_journals,
    load_papers,
)
from .persistence import Edition, EditionStore
from .ranking import build_ranking, delta_rank, predict_curve
from .records import COVARIATE_KEYS, INDICATORS, SubjectDataset

__all__ = ["PipelineConfig", "run_pipeline"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    """Declarative pipeline description; flags override fields."""

    edition_id: str
    store_root: str
    publication_window: tuple[int, int] = (2005, 2009)
    citation_cutoff: str = ""
    papers: str | None = None
    journals: str | None = None
    institutions: str | None = None
    covariates_file: str | None = None
    aggregated: str | None = None
    indicators: tuple[str, ...] = INDICATORS
    covariates: tuple[str, ...] = COVARIATE_KEYS
    quadrature_nodes: int = 8
    tolerance: float = 1e-6
    min_papers: int = MIN_PAPERS_PER_INSTITUTION
    min_institutions: int = MIN_INSTITUTIONS_PER_SUBJECT
    workers: int = 4
    curve_points: int = 41

    def __post_init__(self):
        object.__setattr__(self, "indicators", tuple(self.indicators))
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(self, "publication_window",
                           tuple(int(v) for v in self.publication_window))

    def validate(self):
        for ind in self.indicators:
            if ind not in INDICATORS:
                raise ValidationError(
                    f"unknown indicator {ind!r}; valid: {list(INDICATORS)}")
        for cov in self.covariates:
            if cov not in COVARIATE_KEYS:
                raise ValidationError(
                    f"unknown covariate {cov!r}; valid: {list(COVARIATE_KEYS)}")
        if not self.indicators:
            raise ValidationError("at least one indicator is required")
        if self.aggregated is None and self.papers is None:
            raise ValidationError("either paper-level or aggregated input is required")
        if self.papers is not None:
            for name in ("journals", "institutions", "covariates_file"):
                if getattr(self, name) is None:
                    raise ValidationError(f"paper-level input requires {name}")
        if self.quadrature_nodes < 1:
            raise ValidationError("quadrature_nodes must be >= 1")
        if self.tolerance <= 0:
            raise ValidationError("tolerance must be positive")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        if self.curve_points < 2:
            raise ValidationError("curve_points must be >= 2")

    @classmethod
    def from_yaml(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, dict):
            raise ValidationError("config file must hold a mapping")
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        if "edition_id" not in raw or "store_root" not in raw:
            raise ValidationError("config requires edition_id and store_root")
        return cls(**raw)

    def with_overrides(self, **overrides) -> "PipelineConfig":
        changed = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **changed) if changed else self


def _null_spec(dataset: SubjectDataset, config) -> FitSpec:
    n = len(dataset.observations)
    return FitSpec(dataset.observations, np.ones((n, 1)), ("intercept",),
                   quadrature_nodes=config.quadrature_nodes,
                   tolerance=config.tolerance)


def _covariate_spec(dataset: SubjectDataset, covariate: str, config) -> FitSpec | None:
    """Single-subject design (intercept, z) over clusters with the covariate."""
    if covariate not in dataset.covariate_standardization:
        return None
    values = dataset.standardized_covariate(covariate)
    kept = [(o, z) for o, z in zip(dataset.observations, values) if z is not None]
    if len(kept) < 3:
        return None
    obs = tuple(o for o, _ in kept)
    z = np.array([v for _, v in kept])
    if np.ptp(z) == 0.0:
        return None
    design = np.column_stack([np.ones(len(obs)), z])
    return FitSpec(obs, design, ("intercept", covariate),
                   quadrature_nodes=config.quadrature_nodes,
                   tolerance=config.tolerance)


def _overall_spec(datasets, covariate, config) -> FitSpec | None:
    labeled, zvals = [], []
    for dataset in datasets:
        if covariate is not None:
            if covariate not in dataset.covariate_standardization:
                return None
            values = dataset.standardized_covariate(covariate)
        else:
            values = [0.0] * len(dataset.observations)
        for obs, z in zip(dataset.observations, values):
            if covariate is not None and z is None:
                continue
            labeled.append((dataset.subject_area, obs))
            zvals.append(z)
    subjects = {s for s, _ in labeled}
    if len(subjects) < 2:
        return None
    try:
        return build_dummy_design(
            labeled,
            zvals if covariate is not None else None,
            covariate_name=covariate or "x",
            quadrature_nodes=config.quadrature_nodes,
            tolerance=config.tolerance,
        )
    except DesignError:
        return None


def _correlations(rows: list[dict], keys) -> dict:
    """Pairwise-complete Pearson correlations over raw covariate rows."""
    keys = [k for k in keys
            if sum(1 for r in rows if r.get(k) is not None) >= 2]
    n_mat = [[0] * len(keys) for _ in keys]
    r_mat = [[None] * len(keys) for _ in keys]
    for i, a in enumerate(keys):
        for j, b in enumerate(keys):
            pairs = [(r[a], r[b]) for r in rows
                     if r.get(a) is not None and r.get(b) is not None]
            n_mat[i][j] = len(pairs)
            if len(pairs) < 2:
                continue
            xs = np.array([p[0] for p in pairs])
            ys = np.array([p[1] for p in pairs])
            if xs.std() == 0.0 or ys.std() == 0.0:
                continue
            r_mat[i][j] = float(np.corrcoef(xs, ys)[0, 1])
    return {"covariates": keys, "n": n_mat, "r": r_mat}


def _validate_tables(rankings) -> list[str]:
    problems = []
    for key, table in sorted(rankings.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2] or "")):
        ranks = sorted(e.rank for e in table.entries)
        if ranks != list(range(1, len(table.entries) + 1)):
            problems.append(f"{key}: ranks are not a permutation")
        for e in table.entries:
            if not (e.interval_goldstein.lower <= e.probability <= e.interval_goldstein.upper):
                problems.append(f"{key}: probability outside interval for {e.institution_id}")
                break
        deltas = [e.delta_rank for e in table.entries]
        if key[2] is not None and any(d is not None for d in deltas):
            if sum(d for d in deltas if d is not None) != 0:
                problems.append(f"{key}: delta ranks do not sum to 0")
    return problems


def _load_datasets(config: PipelineConfig):
    institutions = (load_institutions(config.institutions)
                    if config.institutions else [])
    covariates = (load_country_covariates(config.covariates_file)
                  if config.covariates_file else [])
    datasets_by_indicator = {}
    if config.papers is not None:
        papers = load_papers(config.papers)
        journals = load_journals(config.journals)
        for indicator in config.indicators:
            datasets_by_indicator[indicator] = build_subject_datasets(
                papers, journals, institutions, covariates, indicator,
                min_papers=config.min_papers,
                min_institutions=config.min_institutions,
            )
    else:
        rows = load_aggregated(config.aggregated)
        for indicator in config.indicators:
            datasets_by_indicator[indicator] = build_datasets_from_aggregated(
                rows, institutions, covariates, indicator,
                min_papers=config.min_papers,
                min_institutions=config.min_institutions,
            )
    return datasets_by_indicator, institutions


def run_pipeline(config: PipelineConfig) -> tuple[int, dict | None]:
    """Run every stage and store one edition. Returns (exit status, handle).

    Status 0 means every fit converged and every table passed
    validation; any failure leaves the store untouched and returns 1.
    """
    config.validate()
    try:
        return 0, _run(config)
    except (InputError, ValidationError, DesignError, NumericError,
            FitNonConvergenceError, OSError) as exc:
        logger.error("pipeline failed: %s", exc)
        return 1, None


def _run(config: PipelineConfig) -> dict:
    datasets_by_indicator, institutions = _load_datasets(config)
    inst_meta = {
        i.institution_id: {
            "name": i.name, "country": i.country_code,
            "latitude": i.latitude, "longitude": i.longitude,
        }
        for i in institutions
    }

    # deterministic job list: per-subject models then pooled models
    jobs = {}
    for indicator in config.indicators:
        for dataset in datasets_by_indicator[indicator]:
            subject = dataset.subject_area
            jobs[(indicator, subject, None)] = (_null_spec(dataset, config), True)
            for covariate in config.covariates:
                spec = _covariate_spec(dataset, covariate, config)
                if spec is None:
                    logger.warning("skipping %s/%s/%s: covariate unavailable",
                                   indicator, subject, covariate)
                    continue
                jobs[(indicator, subject, covariate)] = (spec, True)
        overall_null = _overall_spec(datasets_by_indicator[indicator], None, config)
        if overall_null is not None:
            jobs[(indicator, "overall", None)] = (overall_null, False)
            for covariate in config.covariates:
                spec = _overall_spec(datasets_by_indicator[indicator], covariate, config)
                if spec is not None:
                    jobs[(indicator, "overall", covariate)] = (spec, False)

    def run_job(item):
        key, (spec, want_eb) = item
        fit = fit_model(spec)
        eb = eb_estimates(spec, fit) if want_eb else None
        return key, fit, eb

    results = {}
    items = sorted(jobs.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2] or ""))
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            for key, fit, eb in pool.map(run_job, items):
                results[key] = (fit, eb)
    else:
        for item in items:
            key, fit, eb = run_job(item)
            results[key] = (fit, eb)

    fits = {(scope, indicator, covariate): fit
            for (indicator, scope, covariate), (fit, _) in results.items()}

    rankings = {}
    datasets_store = {}
    for indicator in config.indicators:
        for dataset in datasets_by_indicator[indicator]:
            subject = dataset.subject_area
            datasets_store[(subject, indicator)] = dataset
            metadata = {}
            for obs in dataset.observations:
                meta = dict(inst_meta.get(obs.institution_id, {}))
                meta.setdefault("name", obs.institution_id)
                meta.setdefault("country", "")
                meta["n_papers"] = obs.n_trials
                metadata[obs.institution_id] = meta

            null_fit, null_eb = results[(indicator, subject, None)]
            null_table = build_ranking(
                null_fit, null_eb, metadata,
                subject_area=subject, indicator=indicator, covariate=None)
            rankings[(subject, indicator, None)] = null_table

            for covariate in config.covariates:
                key = (indicator, subject, covariate)
                if key not in results:
                    continue
                cov_fit, cov_eb = results[key]
                adjusted = build_ranking(
                    cov_fit, cov_eb, metadata,
                    subject_area=subject, indicator=indicator, covariate=covariate)
                baseline = null_table.restrict(adjusted.institution_ids())
                rankings[(subject, indicator, covariate)] = delta_rank(adjusted, baseline)

    reports = {}
    curves = {}
    for indicator in config.indicators:
        datasets = datasets_by_indicator[indicator]
        model_fits = {}
        if (indicator, "overall", None) in results:
            model_fits["M0"] = results[(indicator, "overall", None)][0]
        for covariate in config.covariates:
            if (indicator, "overall", covariate) in results:
                model_fits[covariate] = results[(indicator, "overall", covariate)][0]
        if model_fits:
            summary = model_summary(model_fits, null_model=next(iter(model_fits)))
            reports[(indicator, "summary")] = summary
            reports[(indicator, "summary_text")] = format_summary_text(summary)

        unique_rows = {}
        for dataset in datasets:
            for obs in dataset.observations:
                unique_rows.setdefault(obs.institution_id, obs.covariates)
        reports[(indicator, "correlations")] = _correlations(
            list(unique_rows.values()), COVARIATE_KEYS)

        subjects = sorted(d.subject_area for d in datasets)
        if not subjects:
            continue
        reference_subject = subjects[0]
        for covariate in config.covariates:
            key = (indicator, "overall", covariate)
            if key not in results:
                continue
            overall_fit = results[key][0]
            params = None
            raws = []
            for dataset in datasets:
                params = dataset.covariate_standardization.get(covariate, params)
                for obs in dataset.observations:
                    value = obs.covariates.get(covariate)
                    if value is not None:
                        raws.append(value)
            if params is None or not raws:
                continue
            grid = np.linspace(min(raws), max(raws), config.curve_points)
            curve_doc = {"indicator": indicator, "covariate": covariate,
                         "standardization": list(params), "subjects": {}}
            for subject in subjects:
                points = predict_curve(overall_fit, grid, subject, params,
                                       reference_subject)
                curve_doc["subjects"][subject] = [[raw, rate] for raw, rate in points]
            curves[(indicator, covariate)] = curve_doc

    problems = _validate_tables(rankings)
    unconverged = [key for key, (fit, _) in results.items() if not fit.converged]
    if unconverged:
        problems.append(f"fits did not converge: {sorted(unconverged)}")
    if problems:
        raise ValidationError("; ".join(problems))

    subjects_union = sorted({
        dataset.subject_area
        for indicator in config.indicators
        for dataset in datasets_by_indicator[indicator]
    })
    edition = Edition(
        edition_id=config.edition_id,
        publication_window=config.publication_window,
        citation_cutoff=config.citation_cutoff,
        subjects=tuple(subjects_union),
    )
    store = EditionStore(Path(config.store_root))
    handle = store.store_edition(
        edition, datasets_store, fits, rankings, reports=reports, curves=curves,
        created_at=datetime.now(timezone.utc).isoformat(),
    )
    logger.info("stored edition %s with checksum %s",
                handle["edition_id"], handle["checksum"])
    return handle
