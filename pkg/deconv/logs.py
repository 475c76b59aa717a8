"""
Logger of the deconvolution library. Numerical warnings (non converging
quadratures, clamped model grids, failed replications) are logged here at the
WARNING level; the CLI lowers the level to DEBUG with --verbose.
"""
import logging

from rich.logging import RichHandler

logger = logging.getLogger("deconv")
logger.setLevel(logging.INFO)
logger.addHandler(RichHandler(show_path=False))
