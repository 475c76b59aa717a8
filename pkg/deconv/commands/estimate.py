import time
from typing import Any, Dict, Optional

import click

from deconv import __version__
from deconv.commands.common import exit_on_errors, merge_options
from deconv.config import EstimateConfig, kn_policy, validate_config
from deconv.estimator import (
    SelectionResult,
    evaluate,
    imaginary_residual,
    select_model,
    truncation_check,
)
from deconv.harness import SCHEMA_VERSION
from deconv.logs import logger
from deconv.noise import NoiseModel
from deconv.utils.outputs import (
    EstimateDocument,
    RunManifest,
    normalize,
    write_outputs,
)
from deconv.utils.source import read_samples

DEFAULT_DENSITY_OUTPUT = "density.csv"
SELECTION_TABLE_HEADER = ("m", "k_n", "contrast", "penalty", "objective")


def noise_description(noise: NoiseModel) -> Dict[str, Any]:
    smoothness = noise.smoothness
    return {
        "name": noise.name,
        "scale": noise.scale,
        "gamma": smoothness.gamma,
        "mu": smoothness.mu,
        "delta": smoothness.delta,
    }


def selection_rows(selection: SelectionResult):
    for m, (k_n, contrast, pen) in enumerate(
        zip(
            selection.k_n_values,
            selection.contrast_values,
            selection.penalty_values,
        ),
        start=1,
    ):
        yield m, k_n, contrast, pen, contrast + pen


def estimate_report(
    config: EstimateConfig,
    n_samples: int,
    noise: NoiseModel,
    selection: SelectionResult,
    diagnostics: Dict[str, Optional[float]],
) -> Dict[str, Any]:
    penalty_config = config.penalty.build(noise)
    document = EstimateDocument.model_validate(
        normalize(
            {
                "schema_version": SCHEMA_VERSION,
                "version": __version__,
                "config": config.model_dump(mode="json", exclude={"workers"}),
                "n_samples": n_samples,
                "noise": noise_description(noise),
                "penalty": {
                    "a": penalty_config.a,
                    "variant": penalty_config.variant.value,
                    "beta_sum": penalty_config.beta_sum,
                    "tau_sum": penalty_config.tau_sum,
                    "scale": penalty_config.scale,
                },
                "selection": {
                    "m_hat": selection.m_hat,
                    "m_n": selection.m_n,
                    "grid_clamped": selection.grid_clamped,
                    "contrast_values": list(selection.contrast_values),
                    "penalty_values": list(selection.penalty_values),
                    "k_n_values": list(selection.k_n_values),
                },
                "coefficients": [
                    [float(value.real), float(value.imag)]
                    for value in selection.estimate.coeffs
                ],
                "diagnostics": diagnostics,
            }
        )
    )
    return document.model_dump(mode="json")


def run_estimate(config: EstimateConfig, table: Optional[str] = None) -> RunManifest:
    """
    Fits the adaptive estimator to the samples of config.input and writes the
    density table, the optional report and selection table, and the manifest.
    """
    started = time.perf_counter()
    samples = read_samples(config.input)
    noise = config.noise.build()
    penalty_config = config.penalty.build(noise)
    quad = config.quad.build()

    logger.info("Fitting %s samples with %s noise", len(samples), noise.name)
    selection = select_model(
        samples,
        noise,
        penalty_config,
        kn_policy(config.kn),
        quad,
        m_max=config.m_max,
        workers=config.workers,
    )
    selected_at = time.perf_counter()
    logger.info("Selected m=%s over the grid 1..%s", selection.m_hat, selection.m_n)
    if selection.grid_clamped:
        logger.warning("The model grid was clamped to representable values")

    grid = config.grid_points()
    values = evaluate(selection.estimate, grid)
    check = truncation_check(
        samples, noise, selection.m_hat, selection.estimate.k_n, quad
    )
    diagnostics = {
        "imaginary_residual": imaginary_residual(selection.estimate, grid),
        "truncation_contrast_change": check.contrast_change,
        "truncation_tail_bound": check.tail_bound,
    }

    manifest = RunManifest("estimate", config.model_dump(mode="json"))
    manifest.add_input(config.input)
    tables = [
        (
            config.out or DEFAULT_DENSITY_OUTPUT,
            ("x", "ghat"),
            ((float(x), float(y)) for x, y in zip(grid, values)),
        )
    ]
    if table:
        tables.append((table, SELECTION_TABLE_HEADER, selection_rows(selection)))
    report = None
    if config.report:
        report = (
            config.report,
            estimate_report(config, len(samples), noise, selection, diagnostics),
        )
    manifest.timings = {
        "selection_seconds": selected_at - started,
        "total_seconds": time.perf_counter() - started,
    }
    write_outputs(manifest, report, tables)
    return manifest


@click.command(name="estimate")
@click.option("-i", "--input", "input_path", help="Samples file, one value per line.")
@click.option(
    "-c", "--config", "config_path", help="YAML, JSON or TOML configuration file."
)
@click.option("--noise", help="Noise law: gaussian, cauchy, laplace, ...")
@click.option("--noise-scale", type=float, help="Scale of the noise law.")
@click.option(
    "--penalty",
    help="Penalty variant; defaults to the one matching the noise.",
)
@click.option("--a", "a", type=float, help="Penalty constant, greater than 1.")
@click.option("--kn", help="Coefficient radius: auto, exact or a positive integer.")
@click.option("--grid", help="Evaluation grid start:stop:step.")
@click.option("--m-max", type=int, help="Upper bound of the model grid.")
@click.option("--workers", type=int, help="Number of worker threads.")
@click.option("-o", "--out", help="Density CSV output (columns x, ghat).")
@click.option("-r", "--report", help="JSON report output.")
@click.option("--table", help="CSV output of the contrast and penalty by m.")
def estimate_command(
    input_path: Optional[str],
    config_path: Optional[str],
    noise: Optional[str],
    noise_scale: Optional[float],
    penalty: Optional[str],
    a: Optional[float],
    kn: Optional[str],
    grid: Optional[str],
    m_max: Optional[int],
    workers: Optional[int],
    out: Optional[str],
    report: Optional[str],
    table: Optional[str],
):
    """
    Estimates the density of the latent variables from noisy samples.

    $ deconv estimate --input samples.csv --noise laplace --noise-scale 0.5
      --out density.csv --report report.json

    Options given on the command line override the values of the configuration
    file.
    """
    with exit_on_errors():
        data = merge_options(
            config_path,
            {
                "input": input_path,
                "noise.name": noise,
                "noise.scale": noise_scale,
                "penalty.variant": penalty,
                "penalty.a": a,
                "kn": kn,
                "grid": grid,
                "m_max": m_max,
                "workers": workers,
                "out": out,
                "report": report,
            },
        )
        config = validate_config(data, "estimate")
        run_estimate(config, table)
