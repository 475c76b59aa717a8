"""
This module provides types and helpers shared by all modules of the library:
quadrature settings, seed derivation and worker configuration.
"""
import os
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from deconv.errors import ConfigurationError

Seed = Union[int, np.random.SeedSequence]

THREADS_ENV_VARIABLE = "DECONV_THREADS"


@dataclass(frozen=True)
class QuadratureSpec:
    """
    Settings of the numerical integration routines.

    tolerance applies to adaptive quadrature and to the Romberg check of uniform
    grid rules; nodes, when set, fixes the uniform grid and disables refinement.
    """

    tolerance: float = 1e-8
    limit: int = 200
    max_nodes: int = 2**22
    nodes: Optional[int] = None
    max_nodes_2d: int = 2**20

    def __post_init__(self) -> None:
        if not self.tolerance > 0:
            raise ConfigurationError("must be positive", "quad.tolerance")
        if self.limit < 1:
            raise ConfigurationError("must be at least 1", "quad.limit")
        if self.nodes is not None and self.nodes < 1:
            raise ConfigurationError("must be a positive integer", "quad.nodes")


DEFAULT_QUADRATURE = QuadratureSpec()


def derive_seed(base: Seed, *indices: int) -> np.random.SeedSequence:
    """
    Returns a seed sequence derived from a base seed and a path of indices.

    derive_seed(7, 2, 5) always returns the same stream, independent of the streams
    derived with other index paths.
    """
    if isinstance(base, np.random.SeedSequence):
        return np.random.SeedSequence(
            base.entropy, spawn_key=tuple(base.spawn_key) + tuple(indices)
        )
    return np.random.SeedSequence(int(base), spawn_key=tuple(indices))


def get_generator(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


def default_workers() -> int:
    """
    Returns the default number of worker threads, read from the DECONV_THREADS
    environment variable.
    """
    value = os.environ.get(THREADS_ENV_VARIABLE)
    if not value:
        return 1
    try:
        workers = int(value)
    except ValueError:
        raise ConfigurationError(
            f"expected an integer, got {value!r}", THREADS_ENV_VARIABLE
        )
    return max(1, workers)
