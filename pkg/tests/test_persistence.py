"""Edition store: canonical bytes, atomic writes, isolation, integrity."""
import json
import math

import numpy as np
import pytest

from instrank.errors import ConflictError, NotFoundError, ValidationError
from instrank.glmm import EBEstimate, FitResult
from instrank.persistence import Edition, EditionStore, canonical_json
from instrank.ranking import build_ranking
from instrank.records import ClusterObservation, SubjectDataset


class TestCanonicalJson:
    def test_sorted_compact_newline(self):
        assert canonical_json({"b": 1, "a": [1, 2]}) == b'{"a":[1,2],"b":1}\n'

    def test_byte_stability_across_key_order(self):
        assert canonical_json({"x": 1, "y": 2}) == canonical_json({"y": 2, "x": 1})

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            canonical_json({"v": math.nan})


class TestEdition:
    def test_bad_ids_rejected(self):
        for bad in ("", "a/b", ".hidden"):
            with pytest.raises(ValidationError):
                Edition(bad, (2005, 2009), "2010-06", ("S",))

    def test_window_order_enforced(self):
        with pytest.raises(ValidationError):
            Edition("ed", (2009, 2005), "2010-06", ("S",))

    def test_dict_shape(self):
        doc = Edition("ed", (2005, 2009), "2010-06", ("S", "T")).to_dict()
        assert doc == {"edition_id": "ed",
                       "publication_window": [2005, 2009],
                       "citation_cutoff": "2010-06",
                       "subjects": ["S", "T"]}


def tiny_fit(beta0=-2.0, sigma2=0.3, nan_covariance=False):
    cov = np.full((2, 2), math.nan) if nan_covariance else np.eye(2) * 0.01
    return FitResult(
        beta=np.array([beta0]), sigma2_u=sigma2, covariance=cov,
        log_likelihood=-321.0, converged=True, n_clusters=3, n_papers=1800,
        columns=("intercept",), gradient_norm=0.0, quadrature_nodes=8,
        boundary=False, message="synthetic",
    )


def tiny_pieces(nan_covariance=False):
    observations = tuple(
        ClusterObservation(f"I{k}", 600, 60 + 5 * k,
                           {"gdp": 30000.0 + 1000 * k})
        for k in range(3)
    )
    dataset = SubjectDataset("S", "best_paper", observations,
                             {"gdp": (31000.0, 1000.0)})
    fit = tiny_fit(nan_covariance=nan_covariance)
    eb = [EBEstimate(f"I{k}", 0.1 * k - 0.1, 0.05) for k in range(3)]
    table = build_ranking(fit, eb, {}, subject_area="S", indicator="best_paper")
    edition = Edition("ed-a", (2005, 2009), "2010-06", ("S",))
    return edition, {("S", "best_paper"): dataset}, \
        {("S", "best_paper", None): fit}, {("S", "best_paper", None): table}


def store_tiny(root, edition_id="ed-a", created_at="", **kw):
    edition, datasets, fits, rankings = tiny_pieces(**kw)
    edition = Edition(edition_id, edition.publication_window,
                      edition.citation_cutoff, edition.subjects)
    store = EditionStore(root)
    handle = store.store_edition(
        edition, datasets, fits, rankings,
        reports={("best_paper", "summary"): {"models": []},
                 ("best_paper", "summary_text"): "model\tsigma2\n"},
        curves={("best_paper", "gdp"): {"subjects": {"S": [[30000.0, 0.1]]}}},
        created_at=created_at,
    )
    return store, handle, rankings[("S", "best_paper", None)]


class TestRoundTrip:
    def test_ranking_bytes_are_canonical(self, tmp_path):
        store, handle, table = store_tiny(tmp_path / "store")
        raw = store.ranking_bytes("ed-a", "S", "best_paper")
        assert raw == canonical_json(table.to_dict())
        assert store.load_ranking("ed-a", "S", "best_paper") == table

    def test_fit_and_dataset_docs(self, tmp_path):
        store, _, _ = store_tiny(tmp_path / "store")
        fit = store.load_fit("ed-a", "S", "best_paper")
        assert fit.log_likelihood == -321.0
        assert fit.columns == ("intercept",)
        doc = store.load_dataset_doc("ed-a", "S", "best_paper")
        assert doc["subject"] == "S"
        assert len(doc["observations"]) == 3

    def test_reports_text_and_json(self, tmp_path):
        store, _, _ = store_tiny(tmp_path / "store")
        assert store.load_report("ed-a", "best_paper", "summary") == {"models": []}
        text = store.load_report("ed-a", "best_paper", "summary_text")
        assert isinstance(text, str) and text.startswith("model\t")

    def test_curves_and_catalog(self, tmp_path):
        store, _, _ = store_tiny(tmp_path / "store")
        curves = store.load_curves("ed-a", "best_paper", "gdp")
        assert curves["subjects"]["S"] == [[30000.0, 0.1]]
        catalog = store.catalog("ed-a")
        assert {len(catalog[k]) for k in
                ("datasets", "fits", "rankings", "reports", "curves")} == {1, 1, 1, 2, 1}

    def test_summary_and_handle_agree(self, tmp_path):
        store, handle, _ = store_tiny(tmp_path / "store", created_at="2026-01-01")
        summary = store.edition_summary("ed-a")
        assert summary["checksum"] == handle["checksum"]
        assert summary["created_at"] == "2026-01-01"
        assert summary["subjects"] == ["S"]
        assert store.ranking_keys("ed-a") == [
            {"subject": "S", "indicator": "best_paper", "covariate": None}]


class TestWriteDiscipline:
    def test_duplicate_edition_conflicts(self, tmp_path):
        store, _, _ = store_tiny(tmp_path / "store")
        edition, datasets, fits, rankings = tiny_pieces()
        with pytest.raises(ConflictError):
            store.store_edition(edition, datasets, fits, rankings)

    def test_ranking_without_backing_dataset(self, tmp_path):
        edition, datasets, fits, rankings = tiny_pieces()
        table = rankings[("S", "best_paper", None)]
        store = EditionStore(tmp_path / "store")
        with pytest.raises(ValidationError, match="backing dataset"):
            store.store_edition(edition, {}, fits,
                                {("S", "best_paper", None): table})

    def test_failed_store_leaves_nothing(self, tmp_path):
        root = tmp_path / "store"
        store = EditionStore(root)
        edition, datasets, fits, rankings = tiny_pieces(nan_covariance=True)
        with pytest.raises(ValueError):
            store.store_edition(edition, datasets, fits, rankings)
        assert not (root / "ed-a").exists()
        assert not list(root.glob(".stage-*"))
        assert store.list_editions() == []
        # the same id can be stored cleanly afterwards
        store_ok = store_tiny(root)[0]
        assert store_ok.verify("ed-a")

    def test_second_edition_leaves_first_untouched(self, tmp_path):
        root = tmp_path / "store"
        store, handle_a, _ = store_tiny(root)
        before = store.ranking_bytes("ed-a", "S", "best_paper")
        store_tiny(root, edition_id="ed-b")
        assert store.ranking_bytes("ed-a", "S", "best_paper") == before
        assert store.checksum("ed-a") == handle_a["checksum"]
        assert store.verify("ed-a") and store.verify("ed-b")
        assert [e["edition_id"] for e in store.list_editions()] == ["ed-a", "ed-b"]

    def test_created_at_outside_checksum(self, tmp_path):
        _, handle_a, _ = store_tiny(tmp_path / "a", created_at="2026-01-01")
        _, handle_b, _ = store_tiny(tmp_path / "b", created_at="2031-12-31")
        assert handle_a["checksum"] == handle_b["checksum"]


class TestIntegrity:
    def test_verify_detects_tampering(self, tmp_path):
        root = tmp_path / "store"
        store, _, _ = store_tiny(root)
        assert store.verify("ed-a")
        target = next((root / "ed-a" / "rankings").glob("*.json"))
        payload = bytearray(target.read_bytes())
        payload[len(payload) // 2] ^= 0xFF
        target.write_bytes(bytes(payload))
        assert not store.verify("ed-a")

    def test_missing_keys_list_alternatives(self, tmp_path):
        store, _, _ = store_tiny(tmp_path / "store")
        with pytest.raises(NotFoundError, match="best_paper"):
            store.ranking_bytes("ed-a", "UNKNOWN", "best_paper")
        with pytest.raises(NotFoundError, match="ed-a"):
            store.catalog("ed-zzz")
        with pytest.raises(NotFoundError):
            store.load_report("ed-a", "best_paper", "no_such_kind")

    def test_empty_store_lists_nothing(self, tmp_path):
        assert EditionStore(tmp_path / "fresh").list_editions() == []


def test_stored_edition_fixture_is_consistent(stored_edition):
    """The session-wide pipeline output passes its own integrity check."""
    store = EditionStore(stored_edition["store_root"])
    edition_id = stored_edition["handle"]["edition_id"]
    assert store.verify(edition_id)
    keys = store.ranking_keys(edition_id)
    assert len(keys) >= 2
    for key in keys:
        raw = store.ranking_bytes(edition_id, key["subject"], key["indicator"],
                                  key["covariate"])
        doc = json.loads(raw)
        assert canonical_json(doc) == raw
