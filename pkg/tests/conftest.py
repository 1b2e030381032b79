"""Session-wide fixtures: one synthetic input set, one stored edition.

The pipeline run is expensive relative to everything else, so the
stored edition is built once and shared by the persistence, service,
CLI, and acceptance tests. Tests that need a second run (determinism)
run the pipeline themselves into a fresh store.
"""
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from instrank.pipeline import PipelineConfig, run_pipeline
from instrank.simulate import FixtureParams, generate_fixture

EDITION_ID = "ed-2005-2009"


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("fixture")
    generate_fixture(out, FixtureParams())
    return out


@pytest.fixture(scope="session")
def make_config(fixture_dir):
    """Factory for pipeline configs over the shared synthetic inputs."""
    def make(store_root, edition_id=EDITION_ID, **overrides) -> PipelineConfig:
        kwargs = dict(
            edition_id=edition_id,
            store_root=str(store_root),
            papers=str(fixture_dir / "papers.csv"),
            journals=str(fixture_dir / "journals.csv"),
            institutions=str(fixture_dir / "institutions.csv"),
            covariates_file=str(fixture_dir / "covariates.csv"),
        )
        kwargs.update(overrides)
        return PipelineConfig(**kwargs)
    return make


@pytest.fixture(scope="session")
def stored_edition(make_config, tmp_path_factory) -> dict:
    store_root = tmp_path_factory.mktemp("store")
    config = make_config(store_root, workers=4)
    status, handle = run_pipeline(config)
    assert status == 0 and handle is not None, "session pipeline run failed"
    return {"store_root": store_root, "handle": handle, "config": config}
