from typing import Optional

import click

from deconv.commands.common import exit_on_errors, merge_options
from deconv.config import SimulateConfig, validate_config
from deconv.harness import simulate_observations
from deconv.logs import logger
from deconv.utils.outputs import RunManifest, write_outputs

DEFAULT_SIMULATION_OUTPUT = "simulated.csv"


def run_simulate(config: SimulateConfig, observed_only: bool = False) -> RunManifest:
    """
    Draws a path of the configured process, adds noise and writes the table with
    the columns i, x, z; with observed_only the table holds the column z alone and
    can be given to the estimate command.
    """
    target = config.target.build()
    noise = config.noise.build()
    process = config.process.build(target)
    observations = simulate_observations(process, noise, config.n, config.seed)
    logger.info(
        "Simulated %s observations of %s with %s noise",
        config.n,
        process.name,
        noise.name,
    )

    if observed_only:
        header = ("z",)
        rows = ((float(z),) for z in observations.observed)
    else:
        header = ("i", "x", "z")
        rows = (
            (index, float(x), float(z))
            for index, (x, z) in enumerate(
                zip(observations.latent, observations.observed), start=1
            )
        )

    manifest = RunManifest(
        "simulate", config.model_dump(mode="json"), seed=config.seed
    )
    write_outputs(
        manifest, tables=[(config.out or DEFAULT_SIMULATION_OUTPUT, header, rows)]
    )
    return manifest


@click.command(name="simulate")
@click.option(
    "-c", "--config", "config_path", help="YAML, JSON or TOML configuration file."
)
@click.option("--process", help="Process name, for example bernoulli_ar.")
@click.option("--target", help="Stationary density of iid and chain processes.")
@click.option("--noise", help="Noise law; none gives x = z.")
@click.option("--noise-scale", type=float, help="Scale of the noise law.")
@click.option("-n", "--n", "n", type=int, help="Number of observations.")
@click.option("--seed", type=int, help="Seed of the simulation.")
@click.option("-o", "--out", help="CSV output.")
@click.option(
    "--observed-only",
    is_flag=True,
    default=False,
    help="Write the noisy observations alone.",
)
def simulate_command(
    config_path: Optional[str],
    process: Optional[str],
    target: Optional[str],
    noise: Optional[str],
    noise_scale: Optional[float],
    n: Optional[int],
    seed: Optional[int],
    out: Optional[str],
    observed_only: bool,
):
    """
    Emits a sample path of a dependent process with noisy observations.

    $ deconv simulate --process bernoulli_ar --noise laplace -n 1000 --seed 7
    """
    with exit_on_errors():
        data = merge_options(
            config_path,
            {
                "process.name": process,
                "target.name": target,
                "noise.name": noise,
                "noise.scale": noise_scale,
                "n": n,
                "seed": seed,
                "out": out,
            },
        )
        config = validate_config(data, "simulate")
        run_simulate(config, observed_only)
