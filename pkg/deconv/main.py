import logging

import click

from deconv import VERSION
from deconv.commands.estimate import estimate_command
from deconv.commands.experiment import experiment_command
from deconv.commands.penalties import penalties_command
from deconv.commands.simulate import simulate_command
from deconv.logs import logger


@click.group()
@click.option(
    "--verbose", default=False, help="Whether to display debug output.", is_flag=True
)
@click.version_option(version=VERSION)
def main(verbose: bool):
    """
    Adaptive density deconvolution CLI.

    Estimates the density of latent variables observed with additive noise of known
    law, and runs the simulation experiments of the estimator.
    """
    if verbose:  # pragma: nocover
        logger.setLevel(logging.DEBUG)

    logger.debug("Running in --verbose mode")


main.add_command(estimate_command)
main.add_command(simulate_command)
main.add_command(experiment_command)
main.add_command(penalties_command)
