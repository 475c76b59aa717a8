"""
This module implements the penalized contrast deconvolution estimator: the
coefficients â_{m,j} = (1/n)Σ u*_{φ_{m,j}}(Z_i), the contrast, the penalties, the
model grid and the adaptive choice of m.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from deconv.common import DEFAULT_QUADRATURE, QuadratureSpec, default_workers
from deconv.errors import ConfigurationError
from deconv.logs import logger
from deconv.noise import NoiseModel, delta_m, lambda1, lambda2
from deconv.quadrature import fourier_coefficients, oscillatory_integral
from deconv.shannon import ProjectionEstimate, phi, project_l2
from deconv.targets import TargetDensity, bias_tail, squared_norm

# upper bound on the number of complex entries of intermediate matrices
BLOCK_ENTRIES = 2**22

AUTO_KN_MARGIN = 64

# cap of the model grid {1..n} of noise-free data when m_max is not set
NOISE_FREE_M_MAX = 64


class PenaltyVariant(Enum):
    SUPERSMOOTH = "supersmooth"
    ORDINARY = "ordinary"
    REFINED_BETA = "refined_beta"
    REFINED_TAU = "refined_tau"
    NO_NOISE = "no_noise"


class KnMode(Enum):
    AUTO = "auto"
    EXACT = "exact"


KnPolicy = Union[KnMode, str, int]


@dataclass(frozen=True)
class PenaltyConfig:
    """
    Settings of the penalty pen(m).

    beta_sum and tau_sum are the coefficient sums Σβ_{X,1}(k) and Στ_{X,1}(k) used by
    the refined variants; the noise-free penalty reads beta_sum as zero when unset,
    which describes independent inputs. scale multiplies the whole penalty.
    """

    a: float = 1.5
    variant: PenaltyVariant = PenaltyVariant.SUPERSMOOTH
    beta_sum: Optional[float] = None
    tau_sum: Optional[float] = None
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not self.a > 1:
            raise ConfigurationError(f"must be above 1, got {self.a}", "penalty.a")
        if not self.scale > 0:
            raise ConfigurationError("must be positive", "penalty.scale")
        for key in ("beta_sum", "tau_sum"):
            value = getattr(self, key)
            if value is not None and not value >= 0:
                raise ConfigurationError("must be nonnegative", f"penalty.{key}")
        if self.variant is PenaltyVariant.REFINED_BETA and self.beta_sum is None:
            raise ConfigurationError(
                "the refined_beta penalty requires the sum of beta coefficients",
                "penalty.beta_sum",
            )
        if self.variant is PenaltyVariant.REFINED_TAU and self.tau_sum is None:
            raise ConfigurationError(
                "the refined_tau penalty requires the sum of tau coefficients",
                "penalty.tau_sum",
            )


def reference_constants(a: float) -> Tuple[float, float]:
    """
    Returns (κ_a, C_a) with κ_a = (a+1)/(a-1) and C_a = max(κ_a², 2κ_a), the constants
    of the oracle inequality satisfied by the adaptive estimator.
    """
    if not a > 1:
        raise ConfigurationError(f"must be above 1, got {a}", "penalty.a")
    kappa = (a + 1) / (a - 1)
    return kappa, max(kappa * kappa, 2 * kappa)


def _check_samples(samples: Sequence[float]) -> np.ndarray:
    samples = np.asarray(samples, dtype=float).ravel()
    if len(samples) == 0:
        raise ConfigurationError("at least one sample is required", "input")
    if not np.all(np.isfinite(samples)):
        raise ConfigurationError("samples must be finite real numbers", "input")
    return samples


def u_star_kernel(
    noise: NoiseModel,
    m: int,
    j: int,
    z: float,
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
) -> complex:
    """
    Returns u*_{φ_{m,j}}(z) = (1/(2π√m)) ∫_{-πm}^{πm} exp(ix(z - j/m)) / f_ε*(x) dx.

    Without noise the kernel reduces to φ_{m,j}(z).
    """
    if noise.noise_free:
        return complex(phi(m, j, z))
    limit = math.pi * m
    value = oscillatory_integral(
        lambda x: complex(noise.inverse_cf(np.asarray(x))),
        z - j / m,
        -limit,
        limit,
        quad,
    )
    return value / (2 * math.pi * math.sqrt(m))


def empirical_characteristic(samples: np.ndarray, x: np.ndarray) -> np.ndarray:
    """
    Returns (1/n) Σ_i exp(ixZ_i) at every x, accumulated over blocks of samples.
    """
    x = np.asarray(x, dtype=float)
    block = max(1, BLOCK_ENTRIES // max(1, len(x)))
    total = np.zeros(len(x), dtype=complex)
    for start in range(0, len(samples), block):
        chunk = samples[start : start + block]
        total += np.exp(1j * np.outer(x, chunk)).sum(axis=1)
    return total / len(samples)


def fit_coefficients(
    samples: Sequence[float],
    noise: NoiseModel,
    m: int,
    k_n: int,
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
) -> ProjectionEstimate:
    """
    Computes â_{m,j} for |j| <= k_n by integrating exp(-ijx/m)Ψ(x) on a uniform
    grid of [-πm, πm], with Ψ(x) = (1/n) Σ_i exp(ixZ_i) / f_ε*(x).
    """
    samples = _check_samples(samples)
    if m < 1 or k_n < 1:
        raise ConfigurationError(f"expected m >= 1 and k_n >= 1, got m={m}, k_n={k_n}")

    def psi(x):
        return empirical_characteristic(samples, x) * noise.inverse_cf(x)

    coeffs = fourier_coefficients(
        psi, m, k_n, float(np.max(np.abs(samples))), quad
    )
    return ProjectionEstimate(m, k_n, coeffs, len(samples))


def empirical_coefficients(
    samples: Sequence[float], m: int, k_n: int
) -> ProjectionEstimate:
    """
    Computes the coefficients (1/n) Σ_i φ_{m,j}(X_i) of the noise-free contrast.
    """
    samples = _check_samples(samples)
    indices = np.arange(-k_n, k_n + 1)
    block = max(1, BLOCK_ENTRIES // len(indices))
    total = np.zeros(len(indices))
    for start in range(0, len(samples), block):
        chunk = samples[start : start + block]
        total += phi(m, indices[None, :], chunk[:, None]).sum(axis=0)
    return ProjectionEstimate(m, k_n, total.astype(complex) / len(samples), len(samples))


def contrast_value(estimate: ProjectionEstimate) -> float:
    """
    Returns γ_n(ĝ_m) = -Σ_{|j|<=k_n} |â_{m,j}|².
    """
    return -estimate.squared_norm()


@dataclass(frozen=True)
class ModelGrid:
    """
    The largest model m_n of the collection, the bound πm_n is derived from, and
    whether m_n was raised to 1 because the bound left no admissible model.
    """

    m_n: int
    bound: float
    clamped: bool = False


def model_grid(noise: NoiseModel, n: int) -> ModelGrid:
    """
    Returns the model collection {1..m_n} for n observations. Noise-free data uses
    the collection {1..n}.
    """
    if n < 2:
        raise ConfigurationError(f"at least two samples are required, got {n}")
    if noise.noise_free:
        return ModelGrid(n, float(n))

    smoothness = noise.smoothness
    gamma, mu, delta = smoothness.gamma, smoothness.mu, smoothness.delta

    if delta == 0:
        bound = n ** (1 / (2 * gamma + 1))
    else:
        scaled_log = math.log(n) / (2 * mu)
        if scaled_log <= 1:
            logger.warning(
                "No admissible model for n=%s with noise %s; using m_n=1", n, noise.name
            )
            return ModelGrid(1, math.nan, True)
        inner = scaled_log + (2 * gamma + 1 - delta) / (2 * delta * mu) * math.log(
            scaled_log
        )
        if inner <= 0:
            logger.warning(
                "No admissible model for n=%s with noise %s; using m_n=1", n, noise.name
            )
            return ModelGrid(1, math.nan, True)
        bound = inner ** (1 / delta)

    m_n = math.floor(bound / math.pi)
    if m_n < 1:
        logger.warning("The model grid bound %.6g is below π; using m_n=1", bound)
        return ModelGrid(1, bound, True)
    return ModelGrid(m_n, bound)


def m_grid_max(noise: NoiseModel, n: int, m_max: Optional[int] = None) -> int:
    """
    Returns the largest model searched for n observations: m_n, bounded by m_max,
    and by NOISE_FREE_M_MAX for noise-free data when m_max is not set.
    """
    m_n = model_grid(noise, n).m_n
    if noise.noise_free and m_max is None:
        m_max = NOISE_FREE_M_MAX
    return m_n if m_max is None else max(1, min(m_n, m_max))


def check_penalty_compatibility(config: PenaltyConfig, noise: NoiseModel) -> None:
    variant = config.variant
    if noise.noise_free != (variant is PenaltyVariant.NO_NOISE):
        raise ConfigurationError(
            f"the {variant.value} penalty does not apply to the noise {noise.name}; "
            "the no_noise penalty is used exactly when there is no noise",
            "penalty.variant",
        )
    if (
        variant
        in (
            PenaltyVariant.ORDINARY,
            PenaltyVariant.REFINED_BETA,
            PenaltyVariant.REFINED_TAU,
        )
        and not noise.smoothness.is_ordinary_smooth
    ):
        raise ConfigurationError(
            f"the {variant.value} penalty requires ordinary smooth noise (delta = 0), "
            f"the noise {noise.name} has delta = {noise.smoothness.delta}",
            "penalty.variant",
        )


def supersmooth_exponent(delta: float) -> float:
    return min(max(1.5 * delta - 0.5, 0.0), delta)


def penalty(
    config: PenaltyConfig,
    noise: NoiseModel,
    m: int,
    n: int,
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
) -> float:
    """
    Returns pen(m) for n observations.

    penalty(PenaltyConfig(1.5, PenaltyVariant.NO_NOISE), builtin_noise("none"), 4, 1000)
    -> 0.768
    """
    check_penalty_compatibility(config, noise)
    a = config.a
    variant = config.variant

    if variant is PenaltyVariant.NO_NOISE:
        beta_sum = config.beta_sum or 0.0
        return config.scale * 128 * a * (1 + 4 * beta_sum) * m / n

    delta = delta_m(noise, m, quad)

    if variant is PenaltyVariant.ORDINARY:
        value = 25 * a * delta / n
    elif variant is PenaltyVariant.REFINED_BETA:
        value = (24 * a * delta + 128 * a * (1 + 4 * config.beta_sum) * m) / n
    elif variant is PenaltyVariant.REFINED_TAU:
        value = 24 * a * delta / n + 64 * a * (1 + 38 * math.log(m)) * (
            m + math.pi * config.tau_sum * m * m
        ) / n
    else:
        smoothness = noise.smoothness
        if smoothness.delta < 1 / 3:
            value = 24 * a * delta / n
        else:
            ratio = lambda2(noise) / lambda1(smoothness, smoothness.kappa0_prime)
            factor = 1 + 48 * smoothness.mu * math.pi**smoothness.delta * ratio
            value = (
                8 * a * factor * delta * m ** supersmooth_exponent(smoothness.delta) / n
            )
    return config.scale * value


def resolve_kn(
    policy: KnPolicy, m: int, samples: Sequence[float], noise_free: bool = False
) -> int:
    """
    Returns the coefficient radius k_n. The exact policy uses k_n = n (n² without
    noise); the auto policy uses ceil(m·max|Z_i|) + 64, beyond which the
    coefficients are negligible.
    """
    if isinstance(policy, bool):
        raise ConfigurationError(f"invalid policy {policy!r}", "kn")
    if isinstance(policy, (int, np.integer)):
        if policy < 1:
            raise ConfigurationError("must be a positive integer", "kn")
        return int(policy)
    try:
        mode = KnMode(policy)
    except ValueError:
        raise ConfigurationError(
            f"expected auto, exact or a positive integer, got {policy!r}", "kn"
        )
    samples = np.asarray(samples, dtype=float)
    if mode is KnMode.EXACT:
        n = len(samples)
        return n * n if noise_free else n
    return math.ceil(m * float(np.max(np.abs(samples)))) + AUTO_KN_MARGIN


def fit_model(
    samples: Sequence[float],
    noise: NoiseModel,
    m: int,
    k_n: int,
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
) -> ProjectionEstimate:
    """Fits ĝ_m through the contrast matching the noise."""
    if noise.noise_free:
        return empirical_coefficients(samples, m, k_n)
    return fit_coefficients(samples, noise, m, k_n, quad)


@dataclass(frozen=True)
class SelectionResult:
    """
    Outcome of the adaptive choice of m over the grid {1..m_n}; tables are indexed
    by m - 1.
    """

    m_hat: int
    estimate: ProjectionEstimate
    contrast_values: Tuple[float, ...]
    penalty_values: Tuple[float, ...]
    m_n: int
    estimates: Tuple[ProjectionEstimate, ...] = ()
    grid_clamped: bool = False

    @property
    def objective_values(self) -> Tuple[float, ...]:
        return tuple(
            contrast + pen
            for contrast, pen in zip(self.contrast_values, self.penalty_values)
        )

    @property
    def k_n_values(self) -> Tuple[int, ...]:
        return tuple(estimate.k_n for estimate in self.estimates)


def argmin_smallest(values: Sequence[float]) -> int:
    """Returns the 1-based index of the smallest value, ties resolved to the first."""
    return int(np.argmin(np.asarray(values, dtype=float))) + 1


def select_model(
    samples: Sequence[float],
    noise: NoiseModel,
    config: PenaltyConfig,
    k_n: KnPolicy = KnMode.EXACT,
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
    m_max: Optional[int] = None,
    workers: Optional[int] = None,
) -> SelectionResult:
    """
    Selects m̂ = argmin_{1 <= m <= m_n} [γ_n(ĝ_m) + pen(m)], smallest m on ties.
    """
    samples = _check_samples(samples)
    n = len(samples)
    check_penalty_compatibility(config, noise)
    grid = model_grid(noise, n)
    m_n = m_grid_max(noise, n, m_max)

    def evaluate_model(m: int) -> Tuple[ProjectionEstimate, float, float]:
        radius = resolve_kn(k_n, m, samples, noise.noise_free)
        estimate = fit_model(samples, noise, m, radius, quad)
        return estimate, contrast_value(estimate), penalty(config, noise, m, n, quad)

    models = range(1, m_n + 1)
    workers = workers or default_workers()
    if workers > 1 and m_n > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(evaluate_model, models))
    else:
        rows = [evaluate_model(m) for m in models]

    estimates = tuple(row[0] for row in rows)
    contrasts = tuple(row[1] for row in rows)
    penalties = tuple(row[2] for row in rows)
    m_hat = argmin_smallest([c + p for c, p in zip(contrasts, penalties)])
    logger.debug("Selected m=%s over the grid 1..%s (n=%s)", m_hat, m_n, n)

    return SelectionResult(
        m_hat=m_hat,
        estimate=estimates[m_hat - 1],
        contrast_values=contrasts,
        penalty_values=penalties,
        m_n=m_n,
        estimates=estimates,
        grid_clamped=grid.clamped,
    )


def _reconstruct(estimate: ProjectionEstimate, grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).ravel()
    indices = estimate.indices
    block = max(1, BLOCK_ENTRIES // len(indices))
    values = np.empty(len(grid), dtype=complex)
    for start in range(0, len(grid), block):
        chunk = grid[start : start + block]
        values[start : start + block] = (
            phi(estimate.m, indices[None, :], chunk[:, None]) @ estimate.coeffs
        )
    return values


def evaluate(estimate: ProjectionEstimate, grid: Sequence[float]) -> np.ndarray:
    """
    Returns the real part of ĝ(x) = Σ_{|j|<=k_n} â_{m,j} φ_{m,j}(x) on the grid.
    """
    return _reconstruct(estimate, grid).real


def imaginary_residual(estimate: ProjectionEstimate, grid: Sequence[float]) -> float:
    """
    Returns max |Im ĝ(x)| over the grid, a diagnostic of the quadrature accuracy.
    """
    values = _reconstruct(estimate, grid)
    return float(np.max(np.abs(values.imag))) if len(values) else 0.0


@dataclass(frozen=True)
class MiseDecomposition:
    """
    ‖ĝ - g‖² split into the error on the support [-πm, πm] and the bias tail.
    """

    projection_error: float
    tail_bias: float

    @property
    def total(self) -> float:
        return self.projection_error + self.tail_bias


def mise_against_truth(
    estimate: ProjectionEstimate,
    target: TargetDensity,
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
    projection: Optional[ProjectionEstimate] = None,
) -> MiseDecomposition:
    """
    Returns ‖ĝ_m - g‖², computed in the Fourier domain:

        Σ_{|j|<=k_n} |â_{m,j} - a_{m,j}|² + Σ_{|j|>k_n} |a_{m,j}|² + ‖g - g_m‖².

    projection, when given, holds the exact coefficients a_{m,j} for a radius of at
    least k_n.
    """
    m, k_n = estimate.m, estimate.k_n
    if projection is None or projection.m != m or projection.k_n < k_n:
        projection = project_l2(target.cf, m, k_n, quad)
    projection = projection.truncated(k_n)

    tail = bias_tail(target, m, quad)
    on_support_norm = squared_norm(target) - tail
    outside_radius = max(0.0, on_support_norm - projection.squared_norm())
    inside = float(np.sum(np.abs(estimate.coeffs - projection.coeffs) ** 2))
    return MiseDecomposition(inside + outside_radius, tail)


@dataclass(frozen=True)
class TruncationCheck:
    """
    Change of the contrast when k_n is doubled, and the bound Σ_{k_n<|j|<=2k_n}|â|²
    it must stay below.
    """

    k_n: int
    contrast_change: float
    tail_bound: float


def truncation_check(
    samples: Sequence[float],
    noise: NoiseModel,
    m: int,
    k_n: int,
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
) -> TruncationCheck:
    wide = fit_model(samples, noise, m, 2 * k_n, quad)
    narrow = wide.truncated(k_n)
    tail = wide.squared_norm() - narrow.squared_norm()
    return TruncationCheck(
        k_n, abs(contrast_value(wide) - contrast_value(narrow)), max(0.0, tail)
    )
