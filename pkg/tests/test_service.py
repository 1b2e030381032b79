"""HTTP API over a stored edition, checked against the store directly."""
import json

import pytest
from fastapi.testclient import TestClient

from instrank.persistence import EditionStore, canonical_json
from instrank.service import create_app

pytestmark = pytest.mark.usefixtures("stored_edition")


@pytest.fixture(scope="module")
def store(stored_edition):
    return EditionStore(stored_edition["store_root"])


@pytest.fixture(scope="module")
def edition_id(stored_edition):
    return stored_edition["handle"]["edition_id"]


@pytest.fixture(scope="module")
def client(stored_edition, tmp_path_factory):
    # point static at an empty location so only the API is mounted
    missing = tmp_path_factory.mktemp("no-static") / "absent"
    app = create_app(stored_edition["store_root"], static_dir=missing)
    with TestClient(app) as c:
        yield c


class TestEditions:
    def test_single_edition_summary(self, client, store, edition_id):
        body = client.get("/api/editions").json()
        assert [e["edition_id"] for e in body["editions"]] == [edition_id]
        summary = body["editions"][0]
        assert summary["checksum"] == store.checksum(edition_id)
        assert len(summary["subjects"]) == 3
        assert summary["indicators"] == ["best_journal", "best_paper"]
        assert summary["covariates"] == sorted(
            ["corruption", "gdp", "international_collaboration", "residents"])
        assert summary["publication_window"] == [2005, 2009]


class TestRankings:
    def test_bytes_equal_store(self, client, store, edition_id):
        key = store.ranking_keys(edition_id)[0]
        resp = client.get("/api/rankings", params={
            "edition": edition_id, "subject": key["subject"],
            "indicator": key["indicator"], "covariate": key["covariate"] or ""})
        assert resp.status_code == 200
        assert resp.content == store.ranking_bytes(
            edition_id, key["subject"], key["indicator"], key["covariate"])
        assert resp.headers["X-Edition-Checksum"] == store.checksum(edition_id)
        assert resp.headers["ETag"] == f'"{store.checksum(edition_id)}"'

    def test_none_spelling_equivalent_to_omitted(self, client, store, edition_id):
        subject = store.edition_summary(edition_id)["subjects"][0]
        base = {"edition": edition_id, "subject": subject,
                "indicator": "best_paper"}
        omitted = client.get("/api/rankings", params=base)
        spelled = client.get("/api/rankings", params={**base, "covariate": "none"})
        assert omitted.content == spelled.content

    def test_entries_sorted_and_intervals_nested(self, client, store, edition_id):
        subject = store.edition_summary(edition_id)["subjects"][0]
        doc = client.get("/api/rankings", params={
            "edition": edition_id, "subject": subject,
            "indicator": "best_paper"}).json()
        ranks = [e["rank"] for e in doc["entries"]]
        assert ranks == list(range(1, len(ranks) + 1))
        probs = [e["probability"] for e in doc["entries"]]
        assert probs == sorted(probs, reverse=True)
        for e in doc["entries"]:
            g, w = e["interval_goldstein"], e["interval_95"]
            assert w["lower"] <= g["lower"] <= g["upper"] <= w["upper"]

    def test_unadjusted_table_has_no_deltas(self, client, store, edition_id):
        subject = store.edition_summary(edition_id)["subjects"][0]
        doc = client.get("/api/rankings", params={
            "edition": edition_id, "subject": subject,
            "indicator": "best_paper"}).json()
        assert all(e["delta_rank"] is None for e in doc["entries"])

    def test_adjusted_table_has_deltas(self, client, store, edition_id):
        subject = store.edition_summary(edition_id)["subjects"][0]
        doc = client.get("/api/rankings", params={
            "edition": edition_id, "subject": subject,
            "indicator": "best_paper", "covariate": "gdp"}).json()
        assert all(isinstance(e["delta_rank"], int) for e in doc["entries"])
        assert sum(e["delta_rank"] for e in doc["entries"]) == 0

    def test_unknown_key_is_404_with_alternatives(self, client, edition_id):
        resp = client.get("/api/rankings", params={
            "edition": edition_id, "subject": "NOPE", "indicator": "best_paper"})
        assert resp.status_code == 404
        assert "available" in resp.json()["detail"]

    def test_unknown_edition_is_404(self, client):
        resp = client.get("/api/rankings", params={
            "edition": "ed-missing", "subject": "S", "indicator": "best_paper"})
        assert resp.status_code == 404


class TestInstitutions:
    def test_rows_match_ranking_entries(self, client, store, edition_id):
        subjects = store.edition_summary(edition_id)["subjects"]
        table = store.load_ranking(edition_id, subjects[0], "best_paper")
        target = table.entries[0].institution_id
        body = client.get(f"/api/institutions/{target}",
                          params={"edition": edition_id}).json()
        assert body["institution_id"] == target
        assert body["name"] == table.entries[0].name
        assert body["latitude"] is not None
        by_key = {(r["subject"], r["indicator"]): r for r in body["subjects"]}
        for (subject, indicator), row in by_key.items():
            entry = store.load_ranking(edition_id, subject, indicator).entry(target)
            assert row["rank"] == entry.rank
            assert row["probability"] == entry.probability
            assert row["interval_goldstein"] == entry.interval_goldstein.to_dict()
            assert row["significant_vs_mean"] == entry.significant_vs_mean
        keys = [(r["subject"], r["indicator"]) for r in body["subjects"]]
        assert keys == sorted(keys)

    def test_covariate_view_carries_deltas(self, client, store, edition_id):
        subjects = store.edition_summary(edition_id)["subjects"]
        table = store.load_ranking(edition_id, subjects[0], "best_paper", "gdp")
        target = table.entries[0].institution_id
        body = client.get(f"/api/institutions/{target}",
                          params={"edition": edition_id, "covariate": "gdp"}).json()
        assert all(r["covariate"] == "gdp" for r in body["subjects"])
        assert any(r["delta_rank"] is not None for r in body["subjects"])

    def test_unknown_institution_404(self, client, edition_id):
        resp = client.get("/api/institutions/I-NOPE",
                          params={"edition": edition_id})
        assert resp.status_code == 404

    def test_body_is_canonical_json(self, client, store, edition_id):
        subjects = store.edition_summary(edition_id)["subjects"]
        table = store.load_ranking(edition_id, subjects[0], "best_paper")
        target = table.entries[-1].institution_id
        resp = client.get(f"/api/institutions/{target}",
                          params={"edition": edition_id})
        assert resp.content == canonical_json(json.loads(resp.content))


class TestStaticMount:
    def test_serves_bundle_when_present(self, stored_edition, tmp_path):
        static = tmp_path / "dist"
        static.mkdir()
        (static / "index.html").write_text("<!doctype html><title>x</title>")
        app = create_app(stored_edition["store_root"], static_dir=static)
        with TestClient(app) as c:
            assert "<title>x</title>" in c.get("/").text
            assert c.get("/api/editions").status_code == 200

    def test_no_bundle_no_root_route(self, client):
        assert client.get("/").status_code == 404
