"""Versioned on-disk storage of editions and everything the service reads.

An edition is a directory of JSON documents under the store root, named
by its edition id, with a catalog in edition.json mapping logical keys
(subject, indicator, covariate) to relative paths. A manifest at the
store root lists editions with their checksums and creation times.

Writes are atomic at edition granularity: content is staged in a
temporary directory and renamed into place, so readers only ever see
complete editions. Editions are append-only; storing an existing id is
a conflict. The edition checksum is a SHA-256 over the sorted (path,
file digest) pairs of the edition directory; creation time lives only
in the manifest so identical content always yields identical checksums.
"""
from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .errors import ConflictError, NotFoundError, ValidationError
from .glmm import FitResult
from .ranking import RankingTable
from .records import SubjectDataset

__all__ = ["Edition", "EditionStore", "canonical_json"]


def canonical_json(doc) -> bytes:
    """Stable serialization: sorted keys, no whitespace, no NaN, newline end."""
    return (json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)
            + "\n").encode("utf-8")


@dataclass(frozen=True)
class Edition:
    """Identity of one data vintage: id, publication window, cutoff, subjects."""

    edition_id: str
    publication_window: tuple[int, int]
    citation_cutoff: str
    subjects: tuple[str, ...]

    def __post_init__(self):
        if not self.edition_id or "/" in self.edition_id or self.edition_id.startswith("."):
            raise ValidationError(f"bad edition id {self.edition_id!r}")
        start, end = self.publication_window
        if start > end:
            raise ValidationError("publication window start must be <= end")
        object.__setattr__(self, "publication_window", (int(start), int(end)))
        object.__setattr__(self, "subjects", tuple(self.subjects))

    def to_dict(self) -> dict:
        return {
            "edition_id": self.edition_id,
            "publication_window": list(self.publication_window),
            "citation_cutoff": self.citation_cutoff,
            "subjects": list(self.subjects),
        }


def _safe_name(*parts) -> str:
    out = []
    for part in parts:
        text = "none" if part is None else str(part)
        out.append("".join(c if c.isalnum() or c in "-_" else "-" for c in text))
    return "__".join(out)


def _dataset_doc(dataset: SubjectDataset) -> dict:
    return {
        "subject": dataset.subject_area,
        "indicator": dataset.indicator,
        "covariate_standardization": {
            k: [m, s] for k, (m, s) in dataset.covariate_standardization.items()
        },
        "observations": [
            {
                "institution_id": o.institution_id,
                "n_trials": o.n_trials,
                "n_success": o.n_success,
                "covariates": o.covariates,
            }
            for o in dataset.observations
        ],
    }


class EditionStore:
    """Directory-tree store with a manifest; one writer, many readers."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.json"

    def _manifest(self) -> dict:
        if not self.manifest_path.exists():
            return {"editions": []}
        with open(self.manifest_path, encoding="utf-8") as fh:
            return json.load(fh)

    def _write_manifest(self, manifest: dict):
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".manifest-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(canonical_json(manifest))
            os.replace(tmp, self.manifest_path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def list_editions(self) -> list[dict]:
        return list(self._manifest()["editions"])

    def edition_dir(self, edition_id: str) -> Path:
        return self.root / edition_id

    # -- writing ---------------------------------------------------------

    def store_edition(
        self,
        edition: Edition,
        datasets: dict,
        fits: dict,
        rankings: dict,
        reports: dict | None = None,
        curves: dict | None = None,
        created_at: str = "",
    ) -> dict:
        """Write one complete edition atomically and register it.

        ``datasets`` is keyed by (subject, indicator); ``fits`` by
        (scope, indicator, covariate) where scope is a subject or
        "overall"; ``rankings`` by (subject, indicator, covariate).
        ``reports`` maps (indicator, kind) to a JSON document or text;
        ``curves`` maps (indicator, covariate) to a JSON document.
        Returns {edition_id, path, checksum}.
        """
        if any(e["edition_id"] == edition.edition_id for e in self._manifest()["editions"]):
            raise ConflictError(f"edition {edition.edition_id!r} already stored")
        final_dir = self.edition_dir(edition.edition_id)
        if final_dir.exists():
            raise ConflictError(f"edition directory {final_dir} already exists")
        for key, table in rankings.items():
            subject, indicator, covariate = key
            if (subject, indicator) not in datasets:
                raise ValidationError(f"ranking {key} has no backing dataset")

        tmp_dir = Path(tempfile.mkdtemp(dir=self.root, prefix=f".stage-{os.getpid()}-"))
        try:
            catalog = {"datasets": [], "fits": [], "rankings": [], "reports": [],
                       "curves": []}

            def put(subdir, name, payload: bytes) -> str:
                rel = f"{subdir}/{name}"
                path = tmp_dir / subdir / name
                path.parent.mkdir(parents=True, exist_ok=True)
                with open(path, "wb") as fh:
                    fh.write(payload)
                return rel

            for (subject, indicator), dataset in sorted(datasets.items()):
                rel = put("datasets", _safe_name(subject, indicator) + ".json",
                          canonical_json(_dataset_doc(dataset)))
                catalog["datasets"].append(
                    {"subject": subject, "indicator": indicator, "path": rel})

            for (scope, indicator, covariate), fit in sorted(
                    fits.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2] or "")):
                rel = put("fits", _safe_name(scope, indicator, covariate) + ".json",
                          canonical_json(fit.to_dict()))
                catalog["fits"].append({"scope": scope, "indicator": indicator,
                                        "covariate": covariate, "path": rel})

            for (subject, indicator, covariate), table in sorted(
                    rankings.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2] or "")):
                rel = put("rankings", _safe_name(subject, indicator, covariate) + ".json",
                          canonical_json(table.to_dict()))
                catalog["rankings"].append({"subject": subject, "indicator": indicator,
                                            "covariate": covariate, "path": rel})

            for (indicator, kind), doc in sorted((reports or {}).items()):
                if isinstance(doc, str):
                    rel = put("reports", _safe_name(indicator, kind) + ".txt",
                              doc.encode("utf-8"))
                else:
                    rel = put("reports", _safe_name(indicator, kind) + ".json",
                              canonical_json(doc))
                catalog["reports"].append({"indicator": indicator, "kind": kind,
                                           "path": rel})

            for (indicator, covariate), doc in sorted(
                    (curves or {}).items(), key=lambda kv: (kv[0][0], kv[0][1] or "")):
                rel = put("curves", _safe_name(indicator, covariate) + ".json",
                          canonical_json(doc))
                catalog["curves"].append({"indicator": indicator, "covariate": covariate,
                                          "path": rel})

            doc = edition.to_dict()
            doc["catalog"] = catalog
            put(".", "edition.json", canonical_json(doc))

            checksum = _tree_checksum(tmp_dir)
            os.rename(tmp_dir, final_dir)
        except BaseException:
            shutil.rmtree(tmp_dir, ignore_errors=True)
            raise

        manifest = self._manifest()
        manifest["editions"].append({
            "edition_id": edition.edition_id,
            "publication_window": list(edition.publication_window),
            "citation_cutoff": edition.citation_cutoff,
            "subjects": list(edition.subjects),
            "created_at": created_at,
            "checksum": checksum,
        })
        manifest["editions"].sort(key=lambda e: e["edition_id"])
        self._write_manifest(manifest)
        return {"edition_id": edition.edition_id, "path": str(final_dir),
                "checksum": checksum}

    # -- reading ---------------------------------------------------------

    def _edition_doc(self, edition_id: str) -> dict:
        path = self.edition_dir(edition_id) / "edition.json"
        if not path.exists():
            known = [e["edition_id"] for e in self.list_editions()]
            raise NotFoundError(f"no edition {edition_id!r}; stored editions: {known}")
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    def edition_summary(self, edition_id: str) -> dict:
        for entry in self.list_editions():
            if entry["edition_id"] == edition_id:
                return dict(entry)
        raise NotFoundError(f"no edition {edition_id!r}")

    def catalog(self, edition_id: str) -> dict:
        return self._edition_doc(edition_id)["catalog"]

    def _find(self, edition_id, section, match: dict) -> str:
        rows = self.catalog(edition_id)[section]
        for row in rows:
            if all(row.get(k) == v for k, v in match.items()):
                return row["path"]
        available = [{k: row.get(k) for k in match} for row in rows]
        raise NotFoundError(
            f"no {section} entry for {match} in edition {edition_id!r}; "
            f"available: {available}"
        )

    def _read(self, edition_id: str, rel_path: str) -> bytes:
        with open(self.edition_dir(edition_id) / rel_path, "rb") as fh:
            return fh.read()

    def ranking_bytes(self, edition_id, subject, indicator, covariate=None) -> bytes:
        rel = self._find(edition_id, "rankings",
                         {"subject": subject, "indicator": indicator,
                          "covariate": covariate})
        return self._read(edition_id, rel)

    def load_ranking(self, edition_id, subject, indicator, covariate=None) -> RankingTable:
        doc = json.loads(self.ranking_bytes(edition_id, subject, indicator, covariate))
        return RankingTable.from_dict(doc)

    def ranking_keys(self, edition_id: str) -> list[dict]:
        return [
            {"subject": r["subject"], "indicator": r["indicator"],
             "covariate": r["covariate"]}
            for r in self.catalog(edition_id)["rankings"]
        ]

    def load_fit(self, edition_id, scope, indicator, covariate=None) -> FitResult:
        rel = self._find(edition_id, "fits",
                         {"scope": scope, "indicator": indicator, "covariate": covariate})
        return FitResult.from_dict(json.loads(self._read(edition_id, rel)))

    def load_dataset_doc(self, edition_id, subject, indicator) -> dict:
        rel = self._find(edition_id, "datasets",
                         {"subject": subject, "indicator": indicator})
        return json.loads(self._read(edition_id, rel))

    def load_report(self, edition_id, indicator, kind):
        rel = self._find(edition_id, "reports", {"indicator": indicator, "kind": kind})
        payload = self._read(edition_id, rel)
        if rel.endswith(".txt"):
            return payload.decode("utf-8")
        return json.loads(payload)

    def load_curves(self, edition_id, indicator, covariate) -> dict:
        rel = self._find(edition_id, "curves",
                         {"indicator": indicator, "covariate": covariate})
        return json.loads(self._read(edition_id, rel))

    def checksum(self, edition_id: str) -> str:
        return self.edition_summary(edition_id)["checksum"]

    def verify(self, edition_id: str) -> bool:
        """Recompute the tree checksum and compare against the manifest."""
        stored = self.checksum(edition_id)
        return _tree_checksum(self.edition_dir(edition_id)) == stored


def _tree_checksum(root: Path) -> str:
    digest = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        rel = path.relative_to(root).as_posix()
        digest.update(rel.encode("utf-8"))
        digest.update(b"\0")
        with open(path, "rb") as fh:
            digest.update(hashlib.sha256(fh.read()).digest())
        digest.update(b"\0")
    return digest.hexdigest()
