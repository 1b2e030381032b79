"""Synthetic data generators: model-level clusters and file-level fixtures.

Two layers. ``simulate_clusters`` draws binomial clusters straight from
the random-intercept model for estimator checks; its defaults are the
published full-scale estimates used as ground truth (intercept -2.03,
slope 0.53, cluster variance 0.28). ``generate_fixture`` writes a small
but structurally complete set of input files in the ingest schema:
papers with multi-institution and multi-country affiliations, journals
with prestige scores (some missing), institutions with coordinates,
country covariates with one country deliberately absent, and a
pre-aggregated counts file derived from the same papers. Everything is
reproducible from the seed.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import ValidationError
from .glmm import FitSpec
from .records import ClusterObservation

__all__ = [
    "TRUE_INTERCEPT",
    "TRUE_SLOPE",
    "TRUE_VARIANCE",
    "simulate_clusters",
    "FixtureParams",
    "generate_fixture",
]

#: published full-scale estimates used as simulation ground truth
TRUE_INTERCEPT = -2.03
TRUE_SLOPE = 0.53
TRUE_VARIANCE = 0.28


def simulate_clusters(
    n_clusters: int,
    *,
    beta0: float = TRUE_INTERCEPT,
    beta1: float = TRUE_SLOPE,
    sigma2: float = TRUE_VARIANCE,
    n_range: tuple[int, int] = (500, 3000),
    seed: int = 0,
    with_covariate: bool = True,
    quadrature_nodes: int = 8,
) -> tuple[FitSpec, dict]:
    """Draw clusters from the model and return (FitSpec, truth).

    Covariate values are standard normal; cluster sizes uniform over
    ``n_range`` inclusive. With ``with_covariate`` false the design is
    intercept-only and beta1 is ignored.
    """
    if n_clusters < 1:
        raise ValidationError("n_clusters must be >= 1")
    lo, hi = n_range
    if not (1 <= lo <= hi):
        raise ValidationError("n_range must satisfy 1 <= lo <= hi")
    if sigma2 < 0:
        raise ValidationError("sigma2 must be >= 0")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n_clusters) if with_covariate else np.zeros(n_clusters)
    u = rng.normal(0.0, math.sqrt(sigma2), n_clusters) if sigma2 > 0 else np.zeros(n_clusters)
    n = rng.integers(lo, hi + 1, n_clusters)
    eta = beta0 + (beta1 * x if with_covariate else 0.0) + u
    y = rng.binomial(n, expit(eta))

    observations = tuple(
        ClusterObservation(f"SIM{i:05d}", int(n[i]), int(y[i]),
                           {"x": float(x[i])} if with_covariate else {})
        for i in range(n_clusters)
    )
    if with_covariate:
        design = np.column_stack([np.ones(n_clusters), x])
        columns = ("intercept", "x")
    else:
        design = np.ones((n_clusters, 1))
        columns = ("intercept",)
    spec = FitSpec(observations, design, columns, quadrature_nodes=quadrature_nodes)
    truth = {"beta0": beta0, "sigma2": sigma2, "u": u, "x": x}
    if with_covariate:
        truth["beta1"] = beta1
    return spec, truth


@dataclass(frozen=True)
class FixtureParams:
    """Shape of the generated file fixture."""

    seed: int = 20050101
    subjects: tuple[str, ...] = ("CHEM", "MATH", "PHYS")
    n_institutions: int = 72
    participation: float = 0.88          # chance an institution publishes in a subject
    papers_range: tuple[int, int] = (510, 660)
    small_institutions: int = 3          # get < 500 papers in the first subject
    years: tuple[int, int] = (2005, 2009)
    journals_per_subject: int = 40
    dual_affiliation_rate: float = 0.05  # second institution on a paper
    foreign_coauthor_rate: float = 0.12  # extra country without a second institution
    beta0: float = TRUE_INTERCEPT
    beta_gdp: float = TRUE_SLOPE         # excellence gradient along log GDP
    sigma2: float = TRUE_VARIANCE
    countries: tuple[tuple[str, float, float, float], ...] = field(
        default=(
            # code, corruption score, residents (millions), gdp per capita
            ("AT", 75.0, 8.9, 48600.0),
            ("BR", 38.0, 212.0, 8900.0),
            ("CH", 86.0, 8.6, 81900.0),
            ("CN", 42.0, 1402.0, 10500.0),
            ("DE", 80.0, 83.2, 46200.0),
            ("DK", 90.0, 5.8, 60200.0),
            ("ES", 62.0, 47.3, 27000.0),
            ("IN", 40.0, 1380.0, 1900.0),
            ("JP", 74.0, 125.8, 40100.0),
            ("US", 69.0, 331.0, 63500.0),
            ("VE", 19.0, 28.4, 3700.0),
            ("ZZ", 55.0, 10.0, 20000.0),  # covariate row withheld on purpose
        )
    )
    covariate_gap_country: str = "ZZ"


def _institution_rows(params: FixtureParams, rng) -> list[dict]:
    rows = []
    n_countries = len(params.countries)
    for i in range(params.n_institutions):
        code, *_ = params.countries[i % n_countries]
        rows.append({
            "institution_id": f"INST{i:03d}",
            "name": f"Institute {i:03d}",
            "country": code,
            "lat": round(float(rng.uniform(-55.0, 65.0)), 4),
            "lon": round(float(rng.uniform(-120.0, 140.0)), 4),
        })
    return rows


def _journal_rows(params: FixtureParams, rng) -> list[dict]:
    rows = []
    for subject in params.subjects:
        for j in range(params.journals_per_subject):
            sjr = float(np.round(rng.lognormal(0.0, 0.8), 3))
            sjr2 = float(np.round(rng.lognormal(0.0, 0.8), 3))
            row = {
                "journal_id": f"J-{subject}-{j:03d}",
                "subject": subject,
                "sjr": sjr,
                "sjr2": sjr2,
            }
            # a handful of journals lack prestige scores
            if j % 17 == 13:
                row["sjr"] = ""
            if j % 13 == 11:
                row["sjr2"] = ""
            rows.append(row)
    return rows


def generate_fixture(output_dir, params: FixtureParams = FixtureParams()) -> dict:
    """Write the five input files and return their paths with summary counts.

    Excellence propensity per institution follows the cluster model with
    log GDP per capita as the covariate, so covariate-adjusted rankings
    on the fixture have signal to find. Citations are drawn from a
    low/high mixture so top-decile membership tracks the propensity;
    high-propensity papers also prefer prestigious journals.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(params.seed)

    institutions = _institution_rows(params, rng)
    journals = _journal_rows(params, rng)
    country_gdp = {code: gdp for code, _, _, gdp in params.countries}

    log_gdp = np.log([country_gdp[i["country"]] for i in institutions])
    z_gdp = (log_gdp - log_gdp.mean()) / log_gdp.std(ddof=1)
    u = rng.normal(0.0, math.sqrt(params.sigma2), len(institutions))
    propensity = expit(params.beta0 + params.beta_gdp * z_gdp + u)

    # journals sorted by prestige per subject, for the quality-biased draw
    journals_by_subject: dict[str, list[dict]] = {}
    for row in journals:
        journals_by_subject.setdefault(row["subject"], []).append(row)
    for subject_rows in journals_by_subject.values():
        subject_rows.sort(key=lambda r: -(r["sjr"] if r["sjr"] != "" else 0.0))

    year_lo, year_hi = params.years
    paper_rows = []
    paper_serial = 0
    for subj_idx, subject in enumerate(params.subjects):
        subject_journals = journals_by_subject[subject]
        n_journals = len(subject_journals)
        for inst_idx, inst in enumerate(institutions):
            active = rng.random() < params.participation or inst_idx % 9 == subj_idx
            if not active:
                continue
            small = subj_idx == 0 and inst_idx < params.small_institutions
            lo, hi = params.papers_range
            count = int(rng.integers(100, 500)) if small else int(rng.integers(lo, hi + 1))

            excellent = rng.random(count) < propensity[inst_idx]
            years = rng.integers(year_lo, year_hi + 1, count)
            # prestigious journals are drawn with geometric preference;
            # excellent papers search the top of the list harder
            ranks_hi = rng.geometric(0.15, count) - 1
            ranks_lo = rng.geometric(0.05, count) - 1
            jranks = np.where(excellent, ranks_hi, ranks_lo) % n_journals
            cits_hi = rng.poisson(60.0, count)
            cits_lo = rng.poisson(3.0, count)
            citations = np.where(excellent, cits_hi + 15, cits_lo)

            second_inst = rng.random(count) < params.dual_affiliation_rate
            partner_idx = rng.integers(0, len(institutions), count)
            foreign = rng.random(count) < params.foreign_coauthor_rate
            foreign_country = rng.integers(0, len(params.countries), count)

            for p in range(count):
                inst_ids = {inst["institution_id"]}
                countries = {inst["country"]}
                if second_inst[p]:
                    partner = institutions[int(partner_idx[p])]
                    if partner["institution_id"] != inst["institution_id"]:
                        inst_ids.add(partner["institution_id"])
                        countries.add(partner["country"])
                if foreign[p]:
                    countries.add(params.countries[int(foreign_country[p])][0])
                paper_rows.append({
                    "paper_id": f"P{paper_serial:07d}",
                    "subject": subject,
                    "year": int(years[p]),
                    "citations": int(citations[p]),
                    "journal_id": subject_journals[int(jranks[p])]["journal_id"],
                    "institutions": ";".join(sorted(inst_ids)),
                    "countries": ";".join(sorted(countries)),
                })
                paper_serial += 1

    covariate_rows = [
        {"country": code, "corruption": corruption,
         "residents_millions": residents, "gdp_per_capita": gdp}
        for code, corruption, residents, gdp in params.countries
        if code != params.covariate_gap_country
    ]

    aggregated_rows = _aggregate(paper_rows, journals)

    paths = {
        "papers": out / "papers.csv",
        "journals": out / "journals.csv",
        "institutions": out / "institutions.csv",
        "covariates": out / "covariates.csv",
        "aggregated": out / "aggregated.csv",
    }
    _write_csv(paths["papers"],
               ("paper_id", "subject", "year", "citations", "journal_id",
                "institutions", "countries"), paper_rows)
    _write_csv(paths["journals"], ("journal_id", "subject", "sjr", "sjr2"), journals)
    _write_csv(paths["institutions"],
               ("institution_id", "name", "country", "lat", "lon"), institutions)
    _write_csv(paths["covariates"],
               ("country", "corruption", "residents_millions", "gdp_per_capita"),
               covariate_rows)
    _write_csv(paths["aggregated"],
               ("institution_id", "subject", "n_trials", "n_success_bp",
                "n_success_bj"), aggregated_rows)

    return {
        "paths": {k: str(v) for k, v in paths.items()},
        "n_papers": len(paper_rows),
        "n_institutions": len(institutions),
        "n_journals": len(journals),
        "subjects": list(params.subjects),
        "seed": params.seed,
    }


def _aggregate(paper_rows, journal_rows) -> list[dict]:
    """Aggregate the generated papers with the production indicator code."""
    from .indicators import (
        assign_percentiles,
        build_journal_quartiles,
        top_decile_members,
    )
    from .records import JournalRecord, PaperRecord

    papers = [
        PaperRecord(
            paper_id=r["paper_id"], subject_area=r["subject"], pub_year=r["year"],
            citations=r["citations"], journal_id=r["journal_id"],
            institution_ids=frozenset(r["institutions"].split(";")),
            country_codes=frozenset(r["countries"].split(";")),
        )
        for r in paper_rows
    ]
    journals = [
        JournalRecord(
            r["journal_id"], r["subject"],
            None if r["sjr"] == "" else float(r["sjr"]),
            None if r["sjr2"] == "" else float(r["sjr2"]),
        )
        for r in journal_rows
    ]
    quartiles = build_journal_quartiles(journals)

    populations: dict[tuple[str, int], list] = {}
    for p in papers:
        populations.setdefault((p.subject_area, p.pub_year), []).append(p)
    decile_by_subject: dict[str, set[str]] = {}
    for (subject, _year), population in sorted(populations.items()):
        members = top_decile_members(assign_percentiles(population, journals))
        decile_by_subject.setdefault(subject, set()).update(members)

    counts: dict[tuple[str, str], list[int]] = {}
    for p in papers:
        bp = p.paper_id in decile_by_subject[p.subject_area]
        bj = quartiles.is_first_quartile(p.subject_area, p.journal_id)
        for inst_id in p.institution_ids:
            row = counts.setdefault((inst_id, p.subject_area), [0, 0, 0])
            row[0] += 1
            row[1] += int(bp)
            row[2] += int(bj)

    return [
        {"institution_id": inst_id, "subject": subject,
         "n_trials": n, "n_success_bp": bp, "n_success_bj": bj}
        for (inst_id, subject), (n, bp, bj) in sorted(counts.items())
    ]


def _write_csv(path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row[c] for c in columns])
