"""Command-line entry points.

Subcommands: simulate (write a synthetic fixture), ingest (inputs to
model-ready datasets, summarized), fit (one model on one dataset),
rank (print a stored ranking), run (the whole pipeline into the store),
report (stored model summary), curves (stored prediction curves), and
serve (the read-only HTTP API). `run` accepts a YAML config; every
field can be overridden by a flag.
"""
from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .errors import (FitNonConvergenceError, InputError, NotFoundError,
                     ValidationError)
from .persistence import EditionStore
from .pipeline import PipelineConfig, run_pipeline
from .records import COVARIATE_KEYS, INDICATORS

logger = logging.getLogger(__name__)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="debug logging")
def main(verbose: bool):
    """Excellence-ranking engine: simulate, ingest, fit, rank, serve."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )


@main.command()
@click.option("--out", type=click.Path(file_okay=False), required=True,
              help="directory for the generated input files")
@click.option("--seed", type=int, default=20050101, show_default=True)
@click.option("--institutions", "n_institutions", type=int, default=72,
              show_default=True)
@click.option("--beta0", type=float, default=None, help="true intercept")
@click.option("--beta-gdp", type=float, default=None, help="true covariate slope")
@click.option("--sigma2", type=float, default=None, help="true cluster variance")
def simulate(out, seed, n_institutions, beta0, beta_gdp, sigma2):
    """Write a reproducible synthetic fixture in the ingest schema."""
    from .simulate import FixtureParams, generate_fixture
    params = FixtureParams(seed=seed, n_institutions=n_institutions)
    overrides = {}
    if beta0 is not None:
        overrides["beta0"] = beta0
    if beta_gdp is not None:
        overrides["beta_gdp"] = beta_gdp
    if sigma2 is not None:
        overrides["sigma2"] = sigma2
    if overrides:
        from dataclasses import replace
        params = replace(params, **overrides)
    info = generate_fixture(out, params)
    click.echo(json.dumps(info, indent=2, sort_keys=True))


@main.command()
@click.option("--papers", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--journals", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--institutions", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--covariates", "covariates_file",
              type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--indicator", type=click.Choice(list(INDICATORS)),
              default="best_paper", show_default=True)
@click.option("--min-papers", type=int, default=500, show_default=True)
@click.option("--min-institutions", type=int, default=50, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="write the dataset summary JSON here instead of stdout")
def ingest(papers, journals, institutions, covariates_file, indicator,
           min_papers, min_institutions, out):
    """Build model-ready datasets from input files and summarize them."""
    from .ingest import (build_subject_datasets, load_country_covariates,
                         load_institutions, load_journals, load_papers)
    try:
        datasets = build_subject_datasets(
            load_papers(papers), load_journals(journals),
            load_institutions(institutions),
            load_country_covariates(covariates_file),
            indicator, min_papers=min_papers, min_institutions=min_institutions,
        )
    except InputError as exc:
        raise click.ClickException(str(exc)) from None
    summary = {
        "indicator": indicator,
        "subjects": [
            {
                "subject": d.subject_area,
                "institutions": len(d.observations),
                "papers": sum(o.n_trials for o in d.observations),
                "successes": sum(o.n_success for o in d.observations),
                "covariates": sorted(d.covariate_standardization),
            }
            for d in datasets
        ],
    }
    text = json.dumps(summary, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        click.echo(text)


@main.command()
@click.option("--aggregated", type=click.Path(exists=True, dir_okay=False),
              required=True, help="pre-aggregated counts file")
@click.option("--subject", required=True)
@click.option("--indicator", type=click.Choice(list(INDICATORS)),
              default="best_paper", show_default=True)
@click.option("--nodes", type=int, default=8, show_default=True,
              help="quadrature nodes")
@click.option("--tolerance", type=float, default=1e-6, show_default=True)
@click.option("--min-papers", type=int, default=500, show_default=True)
@click.option("--min-institutions", type=int, default=50, show_default=True)
def fit(aggregated, subject, indicator, nodes, tolerance, min_papers,
        min_institutions):
    """Fit the no-covariate model for one subject and print the estimates."""
    import numpy as np

    from .glmm import FitSpec, fit_model
    from .ingest import build_datasets_from_aggregated, load_aggregated
    try:
        datasets = build_datasets_from_aggregated(
            load_aggregated(aggregated), [], [], indicator,
            min_papers=min_papers, min_institutions=min_institutions,
        )
    except InputError as exc:
        raise click.ClickException(str(exc)) from None
    for dataset in datasets:
        if dataset.subject_area == subject:
            break
    else:
        raise click.ClickException(
            f"subject {subject!r} not retained; available: "
            f"{[d.subject_area for d in datasets]}")
    spec = FitSpec(dataset.observations,
                   np.ones((len(dataset.observations), 1)), ("intercept",),
                   quadrature_nodes=nodes, tolerance=tolerance)
    try:
        result = fit_model(spec)
    except FitNonConvergenceError as exc:
        raise click.ClickException(str(exc)) from None
    click.echo(json.dumps(result.to_dict(), indent=2, sort_keys=True))


def _store(store_root) -> EditionStore:
    return EditionStore(Path(store_root))


@main.command()
@click.option("--store", "store_root", type=click.Path(file_okay=False),
              required=True)
@click.option("--edition", required=True)
@click.option("--subject", required=True)
@click.option("--indicator", type=click.Choice(list(INDICATORS)), required=True)
@click.option("--covariate", default=None,
              type=click.Choice(list(COVARIATE_KEYS)), help="omit for unadjusted")
def rank(store_root, edition, subject, indicator, covariate):
    """Print a stored ranking table as JSON."""
    try:
        payload = _store(store_root).ranking_bytes(edition, subject, indicator,
                                                   covariate)
    except NotFoundError as exc:
        raise click.ClickException(str(exc)) from None
    sys.stdout.write(payload.decode("utf-8"))


@main.command()
@click.option("--config", "config_path",
              type=click.Path(exists=True, dir_okay=False), default=None,
              help="YAML pipeline config")
@click.option("--edition", default=None, help="edition id override")
@click.option("--store", "store_root", type=click.Path(file_okay=False),
              default=None)
@click.option("--papers", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--journals", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--institutions", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--covariates-file", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--aggregated", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--indicator", "indicators", multiple=True,
              type=click.Choice(list(INDICATORS)),
              help="repeatable; default both")
@click.option("--covariate", "covariates", multiple=True,
              type=click.Choice(list(COVARIATE_KEYS)),
              help="repeatable; default all four")
@click.option("--nodes", type=int, default=None, help="quadrature nodes")
@click.option("--tolerance", type=float, default=None)
@click.option("--min-papers", type=int, default=None)
@click.option("--min-institutions", type=int, default=None)
@click.option("--workers", type=int, default=None)
def run(config_path, edition, store_root, papers, journals, institutions,
        covariates_file, aggregated, indicators, covariates, nodes, tolerance,
        min_papers, min_institutions, workers):
    """Run the full pipeline and store one edition."""
    try:
        if config_path is not None:
            config = PipelineConfig.from_yaml(config_path)
        else:
            if edition is None or store_root is None:
                raise click.UsageError(
                    "either --config or both --edition and --store are required")
            config = PipelineConfig(edition_id=edition, store_root=store_root)
        config = config.with_overrides(
            edition_id=edition, store_root=store_root, papers=papers,
            journals=journals, institutions=institutions,
            covariates_file=covariates_file, aggregated=aggregated,
            indicators=tuple(indicators) if indicators else None,
            covariates=tuple(covariates) if covariates else None,
            quadrature_nodes=nodes, tolerance=tolerance, min_papers=min_papers,
            min_institutions=min_institutions, workers=workers,
        )
        config.validate()
    except ValidationError as exc:
        raise click.UsageError(str(exc)) from None
    status, handle = run_pipeline(config)
    if handle is not None:
        click.echo(json.dumps(handle, indent=2, sort_keys=True))
    sys.exit(status)


@main.command()
@click.option("--store", "store_root", type=click.Path(file_okay=False),
              required=True)
@click.option("--edition", required=True)
@click.option("--indicator", type=click.Choice(list(INDICATORS)), required=True)
@click.option("--text/--json", "as_text", default=True,
              help="tab-delimited table or the JSON document")
def report(store_root, edition, indicator, as_text):
    """Print the stored model-summary report for one indicator."""
    try:
        kind = "summary_text" if as_text else "summary"
        doc = _store(store_root).load_report(edition, indicator, kind)
    except NotFoundError as exc:
        raise click.ClickException(str(exc)) from None
    if isinstance(doc, str):
        sys.stdout.write(doc)
    else:
        click.echo(json.dumps(doc, indent=2, sort_keys=True))


@main.command()
@click.option("--store", "store_root", type=click.Path(file_okay=False),
              required=True)
@click.option("--edition", required=True)
@click.option("--indicator", type=click.Choice(list(INDICATORS)), required=True)
@click.option("--covariate", type=click.Choice(list(COVARIATE_KEYS)),
              required=True)
@click.option("--text/--json", "as_text", default=True,
              help="delimited points or the JSON document")
def curves(store_root, edition, indicator, covariate, as_text):
    """Print stored prediction-curve data for one covariate."""
    from .ranking import curve_to_text
    try:
        doc = _store(store_root).load_curves(edition, indicator, covariate)
    except NotFoundError as exc:
        raise click.ClickException(str(exc)) from None
    if as_text:
        points = {s: [(p[0], p[1]) for p in pts]
                  for s, pts in doc["subjects"].items()}
        sys.stdout.write(curve_to_text(points))
    else:
        click.echo(json.dumps(doc, indent=2, sort_keys=True))


@main.command()
@click.option("--store", "store_root", type=click.Path(file_okay=False),
              required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--static-dir", type=click.Path(file_okay=False), default=None,
              help="web client bundle to serve at /")
def serve(store_root, host, port, static_dir):
    """Serve the read-only HTTP API over a store."""
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(store_root, static_dir=static_dir),
                host=host, port=port)


if __name__ == "__main__":
    main()
