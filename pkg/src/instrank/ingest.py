"""Input loading, covariate joins, and model-ready dataset assembly.

Loaders accept a file path or an open text stream, require a header
row, and report malformed rows with their 1-based line number. Dataset
assembly applies the inclusion thresholds (>= 500 papers per
institution-subject, >= 50 institutions per subject), joins the
institution- and country-level covariates, and records the pooled
z-transform parameters used to standardize them.

Institutions whose country has no covariate data are kept with missing
country covariates and a logged warning; covariate-specific models drop
them later, so the unadjusted model keeps every qualifying institution.
"""
from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict

from .errors import (
    DegenerateCovariateError,
    ParseError,
    UndefinedInputError,
    ValidationError,
)
from .indicators import (
    assign_percentiles,
    build_journal_quartiles,
    top_decile_members,
)
from .records import (
    COUNTRY_COVARIATE_KEYS,
    COVARIATE_KEYS,
    INDICATORS,
    ClusterObservation,
    CountryCovariates,
    InstitutionRecord,
    JournalRecord,
    PaperRecord,
    SubjectDataset,
)

__all__ = [
    "MIN_PAPERS_PER_INSTITUTION",
    "MIN_INSTITUTIONS_PER_SUBJECT",
    "load_papers",
    "load_journals",
    "load_institutions",
    "load_country_covariates",
    "load_aggregated",
    "compute_international_collaboration",
    "z_transform",
    "build_subject_datasets",
    "build_datasets_from_aggregated",
]

logger = logging.getLogger(__name__)

#: institution-subject pairs below this paper count are excluded
MIN_PAPERS_PER_INSTITUTION = 500
#: subjects with fewer qualifying institutions are excluded
MIN_INSTITUTIONS_PER_SUBJECT = 50

PAPER_COLUMNS = ("paper_id", "subject", "year", "citations", "journal_id",
                 "institutions", "countries")
JOURNAL_COLUMNS = ("journal_id", "subject", "sjr", "sjr2")
INSTITUTION_COLUMNS = ("institution_id", "name", "country", "lat", "lon")
COVARIATE_COLUMNS = ("country", "corruption", "residents_millions", "gdp_per_capita")
AGGREGATED_COLUMNS = ("institution_id", "subject", "n_trials", "n_success_bp",
                      "n_success_bj")


def _rows(source, expected_columns):
    """Yield (line_no, row dict) from a path or open stream, checking the header."""
    if hasattr(source, "read"):
        yield from _rows_from_stream(source, expected_columns)
    else:
        with open(source, encoding="utf-8", newline="") as fh:
            yield from _rows_from_stream(fh, expected_columns)


def _rows_from_stream(stream, expected_columns):
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input, header row required", line_no=1) from None
    header = [h.strip() for h in header]
    if header != list(expected_columns):
        raise ParseError(
            f"expected header {','.join(expected_columns)!r}, got {','.join(header)!r}",
            line_no=1,
        )
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(expected_columns):
            raise ParseError(
                f"expected {len(expected_columns)} fields, got {len(row)}", line_no
            )
        yield line_no, dict(zip(expected_columns, (cell.strip() for cell in row)))


def _parse_int(text, field, line_no):
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"{field} must be an integer, got {text!r}", line_no) from None


def _parse_float(text, field, line_no):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{field} must be a number, got {text!r}", line_no) from None
    if not math.isfinite(value):
        raise ParseError(f"{field} must be finite, got {text!r}", line_no)
    return value


def _split_ids(text):
    return frozenset(part.strip() for part in text.split(";") if part.strip())


def load_papers(source) -> list[PaperRecord]:
    """Paper-level rows. Duplicate paper ids within a subject-year are rejected."""
    papers = []
    seen: set[tuple[str, str, int]] = set()
    for line_no, row in _rows(source, PAPER_COLUMNS):
        try:
            record = PaperRecord(
                paper_id=row["paper_id"],
                subject_area=row["subject"],
                pub_year=_parse_int(row["year"], "year", line_no),
                citations=_parse_int(row["citations"], "citations", line_no),
                journal_id=row["journal_id"],
                institution_ids=_split_ids(row["institutions"]),
                country_codes=_split_ids(row["countries"]),
            )
        except ValidationError as exc:
            raise ParseError(str(exc), line_no) from None
        key = (record.paper_id, record.subject_area, record.pub_year)
        if key in seen:
            raise ValidationError(
                f"duplicate paper {record.paper_id!r} in "
                f"{record.subject_area!r}/{record.pub_year}"
            )
        seen.add(key)
        papers.append(record)
    return papers


def load_journals(source) -> list[JournalRecord]:
    """Journal prestige rows; empty sjr/sjr2 cells mean the value is unknown."""
    journals = []
    seen = set()
    for line_no, row in _rows(source, JOURNAL_COLUMNS):
        sjr = _parse_float(row["sjr"], "sjr", line_no) if row["sjr"] else None
        sjr2 = _parse_float(row["sjr2"], "sjr2", line_no) if row["sjr2"] else None
        try:
            record = JournalRecord(row["journal_id"], row["subject"], sjr, sjr2)
        except ValidationError as exc:
            raise ParseError(str(exc), line_no) from None
        key = (record.journal_id, record.subject_area)
        if key in seen:
            raise ValidationError(f"duplicate journal {key!r}")
        seen.add(key)
        journals.append(record)
    return journals


def load_institutions(source) -> list[InstitutionRecord]:
    institutions = []
    seen = set()
    for line_no, row in _rows(source, INSTITUTION_COLUMNS):
        try:
            record = InstitutionRecord(
                institution_id=row["institution_id"],
                name=row["name"],
                country_code=row["country"],
                latitude=_parse_float(row["lat"], "lat", line_no),
                longitude=_parse_float(row["lon"], "lon", line_no),
            )
        except ValidationError as exc:
            raise ParseError(str(exc), line_no) from None
        if record.institution_id in seen:
            raise ValidationError(f"duplicate institution {record.institution_id!r}")
        seen.add(record.institution_id)
        institutions.append(record)
    return institutions


def load_country_covariates(source) -> list[CountryCovariates]:
    covariates = []
    seen = set()
    for line_no, row in _rows(source, COVARIATE_COLUMNS):
        try:
            record = CountryCovariates(
                country_code=row["country"],
                corruption_index=_parse_float(row["corruption"], "corruption", line_no),
                residents=_parse_float(row["residents_millions"], "residents_millions",
                                       line_no),
                gdp_per_capita=_parse_float(row["gdp_per_capita"], "gdp_per_capita",
                                            line_no),
            )
        except ValidationError as exc:
            raise ParseError(str(exc), line_no) from None
        if record.country_code in seen:
            raise ValidationError(f"duplicate country {record.country_code!r}")
        seen.add(record.country_code)
        covariates.append(record)
    return covariates


def load_aggregated(source) -> list[dict]:
    """Pre-aggregated per-institution counts, an alternative to paper rows."""
    rows = []
    seen = set()
    for line_no, row in _rows(source, AGGREGATED_COLUMNS):
        n = _parse_int(row["n_trials"], "n_trials", line_no)
        bp = _parse_int(row["n_success_bp"], "n_success_bp", line_no)
        bj = _parse_int(row["n_success_bj"], "n_success_bj", line_no)
        if n < 1:
            raise ParseError("n_trials must be >= 1", line_no)
        if not (0 <= bp <= n and 0 <= bj <= n):
            raise ParseError("success counts must lie in [0, n_trials]", line_no)
        key = (row["institution_id"], row["subject"])
        if key in seen:
            raise ValidationError(f"duplicate aggregated row {key!r}")
        seen.add(key)
        rows.append({
            "institution_id": row["institution_id"],
            "subject": row["subject"],
            "n_trials": n,
            "n_success_bp": bp,
            "n_success_bj": bj,
        })
    return rows


def compute_international_collaboration(papers, institution_id: str) -> float:
    """Share of an institution's papers with affiliations from > 1 country."""
    attributed = multi = 0
    for p in papers:
        if institution_id in p.institution_ids:
            attributed += 1
            if len(p.country_codes) > 1:
                multi += 1
    if attributed == 0:
        raise UndefinedInputError(f"institution {institution_id!r} has no papers")
    return multi / attributed


def z_transform(values):
    """Standardize to mean 0, sd 1 with the sample (n-1) denominator.

    Returns (standardized list, mean, sd); (mean, sd) let raw covariate
    values be mapped onto model scale later.
    """
    vals = [float(v) for v in values]
    n = len(vals)
    if n < 2:
        raise ValidationError("z_transform needs at least 2 values")
    mean = sum(vals) / n
    var = sum((v - mean) ** 2 for v in vals) / (n - 1)
    if var == 0.0:
        raise DegenerateCovariateError("constant column cannot be standardized")
    sd = math.sqrt(var)
    return [(v - mean) / sd for v in vals], mean, sd


def _standardization_params(raw_rows) -> dict[str, tuple[float, float]]:
    """Pooled (mean, sd) per covariate over all rows where it is present.

    Covariates missing everywhere are left out; constant columns raise.
    """
    params = {}
    for key in COVARIATE_KEYS:
        present = [row[key] for row in raw_rows if row[key] is not None]
        if len(present) < 2:
            continue
        try:
            _, mean, sd = z_transform(present)
        except DegenerateCovariateError:
            raise DegenerateCovariateError(
                f"covariate {key!r} is constant over the retained dataset"
            ) from None
        params[key] = (mean, sd)
    return params


def _assemble_datasets(counted, covariate_rows, indicator, min_institutions):
    """Shared tail of both dataset builders.

    ``counted`` maps subject -> list of (institution_id, n_trials, n_success);
    ``covariate_rows`` maps institution_id -> raw covariate dict.
    """
    retained_subjects = {
        subject: rows
        for subject, rows in counted.items()
        if len(rows) >= min_institutions
    }
    for subject in sorted(set(counted) - set(retained_subjects)):
        logger.warning(
            "subject %s dropped: %d qualifying institutions < %d",
            subject, len(counted[subject]), min_institutions,
        )
    pooled = [
        covariate_rows[inst_id]
        for subject in sorted(retained_subjects)
        for inst_id, _, _ in retained_subjects[subject]
    ]
    params = _standardization_params(pooled) if pooled else {}

    datasets = []
    for subject in sorted(retained_subjects):
        observations = tuple(
            ClusterObservation(
                institution_id=inst_id,
                n_trials=n,
                n_success=success,
                covariates=dict(covariate_rows[inst_id]),
            )
            for inst_id, n, success in sorted(retained_subjects[subject])
        )
        datasets.append(
            SubjectDataset(
                subject_area=subject,
                indicator=indicator,
                observations=observations,
                covariate_standardization=dict(params),
            )
        )
    return datasets


def _country_covariate_row(institution, covariate_by_country):
    row = dict.fromkeys(COUNTRY_COVARIATE_KEYS)
    if institution is None:
        return row, "unknown institution"
    entry = covariate_by_country.get(institution.country_code)
    if entry is None:
        return row, f"country {institution.country_code!r} has no covariate data"
    for key in COUNTRY_COVARIATE_KEYS:
        row[key] = entry.value(key)
    return row, None


def build_subject_datasets(
    papers,
    journals,
    institutions,
    covariates,
    indicator: str,
    *,
    min_papers: int = MIN_PAPERS_PER_INSTITUTION,
    min_institutions: int = MIN_INSTITUTIONS_PER_SUBJECT,
) -> list[SubjectDataset]:
    """Model-ready datasets from paper-level rows, one per retained subject.

    Percentile assignments are computed per subject-year population and
    first-quartile journal sets per subject; each institution is
    credited with every attributed paper (full counting). Institutions
    below ``min_papers`` in a subject are excluded, then subjects with
    fewer than ``min_institutions`` qualifying institutions.
    """
    if indicator not in INDICATORS:
        raise ValidationError(f"unknown indicator {indicator!r}")
    papers = list(papers)
    journals = list(journals)
    quartiles = build_journal_quartiles(journals)
    institution_by_id = {i.institution_id: i for i in institutions}
    covariate_by_country = {c.country_code: c for c in covariates}

    by_population = defaultdict(list)
    for p in papers:
        by_population[(p.subject_area, p.pub_year)].append(p)

    # top-decile paper ids per subject, pooled over that subject's years
    decile_by_subject: dict[str, set[str]] = defaultdict(set)
    for (subject, _year), population in sorted(by_population.items()):
        assignments = assign_percentiles(population, journals)
        decile_by_subject[subject] |= top_decile_members(assignments)

    counts = defaultdict(lambda: [0, 0, 0])  # (subject, inst) -> [n, bp, bj]
    for p in papers:
        is_bp = p.paper_id in decile_by_subject[p.subject_area]
        is_bj = quartiles.is_first_quartile(p.subject_area, p.journal_id)
        for inst_id in p.institution_ids:
            row = counts[(p.subject_area, inst_id)]
            row[0] += 1
            row[1] += int(is_bp)
            row[2] += int(is_bj)

    success_index = 1 if indicator == "best_paper" else 2
    counted = defaultdict(list)
    qualifying_institutions = set()
    for (subject, inst_id), (n, bp, bj) in counts.items():
        if n < min_papers:
            continue
        counted[subject].append((inst_id, n, (bp, bj)[success_index - 1]))
        qualifying_institutions.add(inst_id)

    covariate_rows = {}
    for inst_id in sorted(qualifying_institutions):
        row, problem = _country_covariate_row(
            institution_by_id.get(inst_id), covariate_by_country
        )
        if problem is not None:
            logger.warning(
                "institution %s: %s; country covariates left missing",
                inst_id, problem,
            )
        row["international_collaboration"] = compute_international_collaboration(
            papers, inst_id
        )
        covariate_rows[inst_id] = row

    return _assemble_datasets(counted, covariate_rows, indicator, min_institutions)


def build_datasets_from_aggregated(
    rows,
    institutions,
    covariates,
    indicator: str,
    *,
    min_papers: int = MIN_PAPERS_PER_INSTITUTION,
    min_institutions: int = MIN_INSTITUTIONS_PER_SUBJECT,
) -> list[SubjectDataset]:
    """Model-ready datasets from pre-aggregated counts.

    The collaboration covariate cannot be recovered from aggregated
    rows, so it is missing throughout and covariate models on it are
    unavailable on this path.
    """
    if indicator not in INDICATORS:
        raise ValidationError(f"unknown indicator {indicator!r}")
    institution_by_id = {i.institution_id: i for i in institutions}
    covariate_by_country = {c.country_code: c for c in covariates}
    success_key = "n_success_bp" if indicator == "best_paper" else "n_success_bj"

    counted = defaultdict(list)
    qualifying_institutions = set()
    for row in rows:
        if row["n_trials"] < min_papers:
            continue
        counted[row["subject"]].append(
            (row["institution_id"], row["n_trials"], row[success_key])
        )
        qualifying_institutions.add(row["institution_id"])

    covariate_rows = {}
    for inst_id in sorted(qualifying_institutions):
        cov_row, problem = _country_covariate_row(
            institution_by_id.get(inst_id), covariate_by_country
        )
        if problem is not None:
            logger.warning(
                "institution %s: %s; country covariates left missing",
                inst_id, problem,
            )
        cov_row["international_collaboration"] = None
        covariate_rows[inst_id] = cov_row

    return _assemble_datasets(counted, covariate_rows, indicator, min_institutions)
