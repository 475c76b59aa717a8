import math
from typing import Optional

import click

from deconv.commands.common import exit_on_errors, merge_options
from deconv.config import PenaltiesConfig, validate_config
from deconv.errors import RepresentableRangeError
from deconv.estimator import check_penalty_compatibility
from deconv.estimator import penalty as penalty_value
from deconv.logs import logger
from deconv.noise import LOG_MAX_FLOAT, delta_bounds, log_gamma_m
from deconv.utils.outputs import RunManifest, write_outputs

DEFAULT_PENALTIES_OUTPUT = "penalties.csv"
PENALTIES_HEADER = (
    "m",
    "delta",
    "log_delta",
    "gamma",
    "log_gamma",
    "log_lower",
    "log_upper",
    "sandwich_holds",
    "penalty",
)


def _exp(log_value: float) -> float:
    return math.exp(log_value) if log_value < LOG_MAX_FLOAT else math.inf


def penalty_rows(config: PenaltiesConfig):
    """
    Yields, for m = 1..m_max, Δ(m), Γ(m), the logarithms of the sandwich bounds of
    Δ(m) and pen(m). Values beyond double precision are written as inf.
    """
    noise = config.noise.build()
    penalty_config = config.penalty.build(noise)
    check_penalty_compatibility(penalty_config, noise)
    quad = config.quad.build()

    for m in range(1, config.m_max + 1):
        bounds = delta_bounds(noise, m, quad)
        log_gamma = log_gamma_m(noise.smoothness, m)
        try:
            value = penalty_value(penalty_config, noise, m, config.n, quad)
        except RepresentableRangeError:
            value = math.inf
        if not bounds.holds:
            logger.warning("The bounds of Δ(%s) do not hold", m)
        yield (
            m,
            _exp(bounds.log_delta),
            bounds.log_delta,
            _exp(log_gamma),
            log_gamma,
            bounds.log_lower,
            bounds.log_upper,
            int(bounds.holds),
            value,
        )


def run_penalties(config: PenaltiesConfig) -> RunManifest:
    manifest = RunManifest("penalties", config.model_dump(mode="json"))
    rows = list(penalty_rows(config))
    write_outputs(
        manifest,
        tables=[(config.out or DEFAULT_PENALTIES_OUTPUT, PENALTIES_HEADER, rows)],
    )
    return manifest


@click.command(name="penalties")
@click.option(
    "-c", "--config", "config_path", help="YAML, JSON or TOML configuration file."
)
@click.option("--noise", help="Noise law.")
@click.option("--noise-scale", type=float, help="Scale of the noise law.")
@click.option("--penalty", help="Penalty variant.")
@click.option("--a", "a", type=float, help="Penalty constant, greater than 1.")
@click.option("--beta-sum", type=float, help="Sum of the beta coefficients.")
@click.option("--tau-sum", type=float, help="Sum of the tau coefficients.")
@click.option("-n", "--n", "n", type=int, help="Number of observations.")
@click.option("--m-max", type=int, help="Largest tabulated m.")
@click.option("-o", "--out", help="CSV output.")
def penalties_command(
    config_path: Optional[str],
    noise: Optional[str],
    noise_scale: Optional[float],
    penalty: Optional[str],
    a: Optional[float],
    beta_sum: Optional[float],
    tau_sum: Optional[float],
    n: Optional[int],
    m_max: Optional[int],
    out: Optional[str],
):
    """
    Tabulates Δ(m), Γ(m) and pen(m) for inspection.

    $ deconv penalties --noise gaussian --n 1000 --m-max 10 --out penalties.csv
    """
    with exit_on_errors():
        data = merge_options(
            config_path,
            {
                "noise.name": noise,
                "noise.scale": noise_scale,
                "penalty.variant": penalty,
                "penalty.a": a,
                "penalty.beta_sum": beta_sum,
                "penalty.tau_sum": tau_sum,
                "n": n,
                "m_max": m_max,
                "out": out,
            },
        )
        run_penalties(validate_config(data, "penalties"))
