"""Read-only HTTP API over a store of editions.

The service is a pass-through: ranking documents are returned as the
exact bytes on disk, so clients (and tests) can rely on byte-level
equality with the stored edition. Every response carries the edition
checksum for caching; CORS is open because the data is public.

Endpoints:
  GET /api/editions                 edition summaries with available keys
  GET /api/rankings                 one ranking document (query-keyed)
  GET /api/institutions/{id}        cross-subject summary for one institution

A built web client is served from / when a static bundle directory is
configured (or the bundled default exists).
"""
from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import NotFoundError
from .persistence import EditionStore

__all__ = ["create_app", "DEFAULT_STATIC_DIR"]

#: where the web client's build lands, relative to the repo root
DEFAULT_STATIC_DIR = Path(__file__).resolve().parents[2] / "frontend" / "dist"


class EditionSummary(BaseModel):
    edition_id: str
    publication_window: tuple[int, int]
    citation_cutoff: str
    created_at: str
    checksum: str
    subjects: list[str]
    indicators: list[str]
    covariates: list[str]


class EditionList(BaseModel):
    editions: list[EditionSummary]


def _summary(store: EditionStore, entry: dict) -> EditionSummary:
    keys = store.ranking_keys(entry["edition_id"])
    return EditionSummary(
        edition_id=entry["edition_id"],
        publication_window=tuple(entry["publication_window"]),
        citation_cutoff=entry.get("citation_cutoff", ""),
        created_at=entry.get("created_at", ""),
        checksum=entry["checksum"],
        subjects=list(entry.get("subjects", [])),
        indicators=sorted({k["indicator"] for k in keys}),
        covariates=sorted({k["covariate"] for k in keys if k["covariate"]}),
    )


def create_app(store_root, static_dir=None) -> FastAPI:
    """Application factory bound to one store root."""
    store = EditionStore(store_root)
    app = FastAPI(title="instrank service", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["GET"],
        allow_headers=["*"],
    )

    @app.get("/api/editions", response_model=EditionList)
    def list_editions():
        return EditionList(
            editions=[_summary(store, e) for e in store.list_editions()]
        )

    @app.get("/api/rankings")
    def get_ranking(
        edition: str = Query(...),
        subject: str = Query(...),
        indicator: str = Query(...),
        covariate: str | None = Query(None),
    ):
        if covariate in (None, "", "none"):
            covariate = None
        try:
            payload = store.ranking_bytes(edition, subject, indicator, covariate)
            checksum = store.checksum(edition)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        return Response(
            content=payload,
            media_type="application/json",
            headers={"ETag": f'"{checksum}"', "X-Edition-Checksum": checksum},
        )

    @app.get("/api/institutions/{institution_id}")
    def get_institution(
        institution_id: str,
        edition: str = Query(...),
        covariate: str | None = Query(None),
    ):
        if covariate in (None, "", "none"):
            covariate = None
        try:
            checksum = store.checksum(edition)
            keys = store.ranking_keys(edition)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None

        rows = []
        identity = None
        for key in keys:
            if key["covariate"] != covariate:
                continue
            table = store.load_ranking(edition, key["subject"], key["indicator"],
                                       key["covariate"])
            for entry in table.entries:
                if entry.institution_id != institution_id:
                    continue
                if identity is None:
                    identity = {
                        "name": entry.name, "country": entry.country,
                        "latitude": entry.latitude, "longitude": entry.longitude,
                    }
                rows.append({
                    "subject": key["subject"],
                    "indicator": key["indicator"],
                    "covariate": key["covariate"],
                    "rank": entry.rank,
                    "n_entries": len(table.entries),
                    "n_papers": entry.n_papers,
                    "probability": entry.probability,
                    "reference_probability": table.reference_probability,
                    "interval_goldstein": entry.interval_goldstein.to_dict(),
                    "interval_95": entry.interval_95.to_dict(),
                    "delta_rank": entry.delta_rank,
                    "significant_vs_mean": entry.significant_vs_mean,
                })
        if not rows:
            raise HTTPException(
                status_code=404,
                detail=f"institution {institution_id!r} not found in edition "
                       f"{edition!r} (covariate {covariate!r})",
            )
        rows.sort(key=lambda r: (r["subject"], r["indicator"]))
        return Response(
            content=_json_bytes({
                "institution_id": institution_id,
                "edition": edition,
                "covariate": covariate,
                **identity,
                "subjects": rows,
            }),
            media_type="application/json",
            headers={"ETag": f'"{checksum}"', "X-Edition-Checksum": checksum},
        )

    static = Path(static_dir) if static_dir is not None else DEFAULT_STATIC_DIR
    if static.is_dir():
        app.mount("/", StaticFiles(directory=str(static), html=True), name="static")
    return app


def _json_bytes(doc) -> bytes:
    from .persistence import canonical_json
    return canonical_json(doc)
