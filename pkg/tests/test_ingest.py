"""Loaders, covariate transforms, and dataset assembly."""
import io
import logging
import math

import pytest

from instrank.errors import (
    DegenerateCovariateError,
    ParseError,
    UndefinedInputError,
    ValidationError,
)
from instrank.ingest import (
    build_datasets_from_aggregated,
    build_subject_datasets,
    compute_international_collaboration,
    load_aggregated,
    load_country_covariates,
    load_institutions,
    load_journals,
    load_papers,
    z_transform,
)
from instrank.records import (
    CountryCovariates,
    InstitutionRecord,
    JournalRecord,
    PaperRecord,
)


def stream(*lines):
    return io.StringIO("\n".join(lines) + "\n")


class TestLoadPapers:
    HEADER = "paper_id,subject,year,citations,journal_id,institutions,countries"

    def test_three_row_file(self):
        papers = load_papers(stream(
            self.HEADER,
            "P1,S,2005,4,J1,IA,US",
            "P2,S,2005,0,J1,IA;IB,US;DE",
            "P3,T,2006,12,J2,IB,DE",
        ))
        assert len(papers) == 3
        assert papers[1].institution_ids == frozenset({"IA", "IB"})
        assert papers[1].country_codes == frozenset({"US", "DE"})
        assert papers[2].citations == 12

    def test_negative_citations_reports_line(self):
        with pytest.raises(ParseError) as exc:
            load_papers(stream(self.HEADER, "P1,S,2005,-1,J1,IA,US"))
        assert exc.value.line_no == 2

    def test_non_numeric_citations_reports_line(self):
        with pytest.raises(ParseError) as exc:
            load_papers(stream(self.HEADER,
                               "P1,S,2005,3,J1,IA,US",
                               "P2,S,2005,many,J1,IA,US"))
        assert exc.value.line_no == 3

    def test_duplicate_paper_id_rejected(self):
        with pytest.raises(ValidationError, match="P1"):
            load_papers(stream(self.HEADER,
                               "P1,S,2005,3,J1,IA,US",
                               "P1,S,2005,5,J2,IB,DE"))

    def test_same_id_in_other_subject_allowed(self):
        papers = load_papers(stream(self.HEADER,
                                    "P1,S,2005,3,J1,IA,US",
                                    "P1,T,2005,3,J1,IA,US"))
        assert len(papers) == 2

    def test_header_mismatch_is_line_one(self):
        with pytest.raises(ParseError) as exc:
            load_papers(stream("id,subject,year", "P1,S,2005"))
        assert exc.value.line_no == 1

    def test_blank_lines_skipped(self):
        papers = load_papers(stream(self.HEADER, "", "P1,S,2005,3,J1,IA,US", ""))
        assert len(papers) == 1

    def test_path_input(self, tmp_path):
        target = tmp_path / "papers.csv"
        target.write_text(self.HEADER + "\nP1,S,2005,3,J1,IA,US\n")
        assert len(load_papers(target)) == 1


class TestOtherLoaders:
    def test_journals_missing_prestige_cells(self):
        journals = load_journals(stream("journal_id,subject,sjr,sjr2",
                                        "J1,S,2.5,1.25",
                                        "J2,S,,0.5",
                                        "J3,S,1.0,"))
        assert journals[1].sjr is None
        assert journals[2].sjr2 is None

    def test_duplicate_journal_subject_rejected(self):
        with pytest.raises(ValidationError):
            load_journals(stream("journal_id,subject,sjr,sjr2",
                                 "J1,S,2.5,1.0", "J1,S,3.0,1.0"))

    def test_institutions(self):
        rows = load_institutions(stream("institution_id,name,country,lat,lon",
                                        "IA,Alpha University,US,42.3,-71.1"))
        assert rows[0].latitude == pytest.approx(42.3)

    def test_covariate_bounds(self):
        rows = load_country_covariates(stream(
            "country,corruption,residents_millions,gdp_per_capita",
            "AA,19,5.4,479",
            "BB,85,0.3,90000",
        ))
        assert rows[0].corruption_index == 19.0
        assert rows[0].gdp_per_capita == 479.0

    def test_corruption_out_of_range_rejected(self):
        with pytest.raises(ParseError) as exc:
            load_country_covariates(stream(
                "country,corruption,residents_millions,gdp_per_capita",
                "AA,101,5.4,479"))
        assert exc.value.line_no == 2

    def test_aggregated_success_bounds(self):
        with pytest.raises(ParseError):
            load_aggregated(stream(
                "institution_id,subject,n_trials,n_success_bp,n_success_bj",
                "IA,S,10,11,0"))

    def test_aggregated_ok(self):
        rows = load_aggregated(stream(
            "institution_id,subject,n_trials,n_success_bp,n_success_bj",
            "IA,S,700,41,120"))
        assert rows[0]["n_trials"] == 700


def paper(pid, insts, countries, subject="S", year=2005, citations=1, journal="J1"):
    return PaperRecord(pid, subject, year, citations, journal,
                       frozenset(insts), frozenset(countries))


class TestCollaboration:
    def test_all_domestic_is_zero(self):
        papers = [paper(f"P{i}", ["IA"], ["US"]) for i in range(4)]
        assert compute_international_collaboration(papers, "IA") == 0.0

    def test_seven_of_twenty(self):
        papers = [
            paper(f"P{i:02d}", ["IA"], ["US", "DE"] if i < 7 else ["US"])
            for i in range(20)
        ]
        assert compute_international_collaboration(papers, "IA") == pytest.approx(0.35)

    def test_all_international_is_one(self):
        papers = [paper(f"P{i}", ["IA", "IB"], ["US", "FR"]) for i in range(3)]
        assert compute_international_collaboration(papers, "IA") == 1.0

    def test_no_papers_is_undefined(self):
        with pytest.raises(UndefinedInputError):
            compute_international_collaboration([paper("P1", ["IB"], ["US"])], "IA")


class TestZTransform:
    def test_symmetric_triple(self):
        out, mean, sd = z_transform([1, 2, 3])
        assert out == [-1.0, 0.0, 1.0]
        assert (mean, sd) == (2.0, 1.0)

    def test_sample_denominator(self):
        _, _, sd = z_transform([0.0, 4.0])
        # n-1 denominator: variance 8, not 4
        assert sd == pytest.approx(math.sqrt(8.0))

    def test_idempotent(self):
        values = [3.1, -0.4, 2.2, 8.9, 0.0]
        once, _, _ = z_transform(values)
        twice, mean, sd = z_transform(once)
        assert abs(mean) < 1e-12 and abs(sd - 1.0) < 1e-12
        assert all(abs(a - b) < 1e-12 for a, b in zip(once, twice))

    def test_constant_rejected(self):
        with pytest.raises(DegenerateCovariateError):
            z_transform([5.0, 5.0, 5.0])

    def test_short_input_rejected(self):
        with pytest.raises(ValidationError):
            z_transform([5.0])


def small_corpus():
    """Two subjects; one institution under the paper floor, one under-sized subject."""
    papers = [paper(f"P{i:02d}", ["IA"], ["AA"], citations=i) for i in range(1, 6)]
    papers.append(paper("P06", ["IA", "IB"], ["AA", "BB"], citations=6))
    papers += [paper(f"P{i:02d}", ["IB"], ["BB"], citations=i) for i in range(7, 13)]
    papers += [
        paper("P13", ["IC"], ["XX"], citations=13, journal="JQ"),
        paper("P14", ["IC"], ["XX"], citations=14),
        paper("P15", ["IC"], ["XX"], citations=15),
        paper("P16", ["IC"], ["XX"], citations=16),
        paper("P17", ["IC"], ["XX"], citations=29),
        paper("P18", ["IC"], ["XX"], citations=30),
    ]
    papers += [paper(f"P{i}", ["ID"], ["AA"], citations=i) for i in (19, 20)]
    papers += [paper(f"T{i}", ["IA"], ["AA"], subject="T", citations=i)
               for i in range(1, 6)]
    journals = [JournalRecord("J1", "S", 1.0, 1.0), JournalRecord("JQ", "S", 5.0, 1.0),
                JournalRecord("J1", "T", 1.0, 1.0)]
    institutions = [
        InstitutionRecord("IA", "Alpha", "AA", 10.0, 10.0),
        InstitutionRecord("IB", "Beta", "BB", 20.0, 20.0),
        InstitutionRecord("IC", "Gamma", "XX", 30.0, 30.0),
        InstitutionRecord("ID", "Delta", "AA", 40.0, 40.0),
    ]
    covariates = [CountryCovariates("AA", 19.0, 5.4, 479.0),
                  CountryCovariates("BB", 85.0, 0.3, 52000.0)]
    return papers, journals, institutions, covariates


class TestBuildSubjectDatasets:
    def build(self, caplog, indicator="best_paper"):
        papers, journals, institutions, covariates = small_corpus()
        with caplog.at_level(logging.WARNING, logger="instrank.ingest"):
            return build_subject_datasets(papers, journals, institutions,
                                          covariates, indicator,
                                          min_papers=5, min_institutions=2)

    def test_thresholds_and_counts(self, caplog):
        datasets = self.build(caplog)
        assert [d.subject_area for d in datasets] == ["S"]
        ds = datasets[0]
        ids = [o.institution_id for o in ds.observations]
        assert ids == ["IA", "IB", "IC"]  # ID under 5 papers, subject T dropped
        assert [o.n_trials for o in ds.observations] == [6, 7, 6]
        # top decile of the 20-paper S/2005 population is the 2 highest cited
        assert [o.n_success for o in ds.observations] == [0, 0, 2]
        messages = " ".join(r.message for r in caplog.records)
        assert "subject T dropped" in messages

    def test_best_journal_counts(self, caplog):
        ds = self.build(caplog, indicator="best_journal")[0]
        # JQ is the only first-quartile journal; IC holds the one JQ paper
        assert [o.n_success for o in ds.observations] == [0, 0, 1]

    def test_missing_country_kept_with_warning(self, caplog):
        ds = self.build(caplog)[0]
        gamma = ds.observations[2]
        assert gamma.institution_id == "IC"
        assert gamma.covariates["corruption"] is None
        assert gamma.covariates["gdp"] is None
        assert any("covariates left missing" in r.message for r in caplog.records)

    def test_collaboration_pooled_over_subjects(self, caplog):
        ds = self.build(caplog)[0]
        by_id = {o.institution_id: o.covariates["international_collaboration"]
                 for o in ds.observations}
        # IA has 11 attributed papers in total, one of them multi-country
        assert by_id["IA"] == pytest.approx(1 / 11)
        assert by_id["IB"] == pytest.approx(1 / 7)
        assert by_id["IC"] == 0.0

    def test_standardization_over_present_values(self, caplog):
        ds = self.build(caplog)[0]
        mean, sd = ds.covariate_standardization["corruption"]
        assert mean == pytest.approx(52.0)
        assert sd == pytest.approx(math.sqrt((33.0 ** 2) * 2))
        std = ds.standardized_covariate("corruption")
        assert std[2] is None
        present = [v for v in std if v is not None]
        assert sum(present) == pytest.approx(0.0, abs=1e-12)

    def test_unknown_indicator_rejected(self):
        papers, journals, institutions, covariates = small_corpus()
        with pytest.raises(ValidationError):
            build_subject_datasets(papers, journals, institutions, covariates,
                                   "h_index", min_papers=5, min_institutions=2)


class TestAggregatedRoute:
    def test_matches_paper_route_on_fixture(self, fixture_dir):
        papers = load_papers(fixture_dir / "papers.csv")
        journals = load_journals(fixture_dir / "journals.csv")
        institutions = load_institutions(fixture_dir / "institutions.csv")
        covariates = load_country_covariates(fixture_dir / "covariates.csv")
        rows = load_aggregated(fixture_dir / "aggregated.csv")

        for indicator in ("best_paper", "best_journal"):
            from_papers = build_subject_datasets(
                papers, journals, institutions, covariates, indicator)
            from_rows = build_datasets_from_aggregated(
                rows, institutions, covariates, indicator)
            assert [d.subject_area for d in from_papers] == \
                [d.subject_area for d in from_rows]
            for a, b in zip(from_papers, from_rows):
                assert [(o.institution_id, o.n_trials, o.n_success)
                        for o in a.observations] == \
                    [(o.institution_id, o.n_trials, o.n_success)
                     for o in b.observations]
                # collaboration is unrecoverable from aggregated rows
                assert all(o.covariates["international_collaboration"] is None
                           for o in b.observations)
                for key in ("corruption", "residents", "gdp"):
                    assert a.covariate_standardization[key] == \
                        pytest.approx(b.covariate_standardization[key])
                assert key_present(a, "international_collaboration")
                assert not key_present(b, "international_collaboration")


def key_present(dataset, key):
    return key in dataset.covariate_standardization
