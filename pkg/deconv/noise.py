"""
This module defines the known error laws f_ε, with their characteristic functions
and smoothness descriptors, and the quantities the variance of the deconvolution
estimator depends on: Δ(m), Γ(m), λ₁, λ₂ and Δ₂(m).
"""
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import special

from deconv.common import DEFAULT_QUADRATURE, QuadratureSpec
from deconv.errors import ConfigurationError, RepresentableRangeError
from deconv.quadrature import real_integral, tensor_integral

LOG_MAX_FLOAT = math.log(np.finfo(float).max)

Sampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class NoiseSmoothness:
    """
    Constants of the two-sided bound

        κ₀(x²+1)^{-γ/2} exp(-μ|x|^δ) <= |f_ε*(x)| <= κ₀′(x²+1)^{-γ/2} exp(-μ|x|^δ).
    """

    gamma: float = 0.0
    mu: float = 0.0
    delta: float = 0.0
    kappa0: float = 1.0
    kappa0_prime: float = 1.0

    def __post_init__(self) -> None:
        if min(self.gamma, self.mu, self.delta) < 0:
            raise ConfigurationError("gamma, mu and delta must be nonnegative")
        if self.delta > 0 and self.mu <= 0:
            raise ConfigurationError("mu must be positive when delta is positive")
        if not 0 < self.kappa0 <= self.kappa0_prime:
            raise ConfigurationError("expected 0 < kappa0 <= kappa0_prime")

    @property
    def is_ordinary_smooth(self) -> bool:
        return self.delta == 0

    def log_envelope(self, x: np.ndarray) -> np.ndarray:
        """Returns log((x²+1)^{-γ/2} exp(-μ|x|^δ))."""
        x = np.asarray(x, dtype=float)
        return -0.5 * self.gamma * np.log1p(x * x) - self.mu * np.abs(x) ** self.delta


@dataclass(frozen=True)
class NoiseModel:
    """
    A known error law. cf is the characteristic function f_ε*, log_abs_cf returns
    log|f_ε*| without underflow, sampler draws ε from a given generator.

    log_delta, when set, is a closed form of m -> log Δ(m).
    """

    name: str
    cf: Callable[[np.ndarray], np.ndarray]
    log_abs_cf: Callable[[np.ndarray], np.ndarray]
    smoothness: NoiseSmoothness
    sampler: Sampler
    density: Optional[Callable[[np.ndarray], np.ndarray]] = None
    l2_norm: Optional[float] = None
    abs_mean: float = math.inf
    variance: float = math.inf
    scale: float = 1.0
    noise_free: bool = False
    log_delta: Optional[Callable[[int], float]] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        smoothness = self.smoothness
        if (
            not self.noise_free
            and smoothness.is_ordinary_smooth
            and smoothness.gamma <= 0.5
        ):
            raise ConfigurationError(
                f"the noise {self.name} is ordinary smooth with gamma <= 1/2: its "
                "density is not square integrable",
                "noise",
            )

    def inverse_cf(self, x: np.ndarray) -> np.ndarray:
        return 1.0 / np.asarray(self.cf(x), dtype=complex)

    def sample(self, generator: np.random.Generator, size: int) -> np.ndarray:
        return np.asarray(self.sampler(generator, size), dtype=float)


def _log_cosh(y: np.ndarray) -> np.ndarray:
    y = np.abs(y)
    return y + np.log1p(np.exp(-2 * y)) - math.log(2)


def _log_sinh(y: float) -> float:
    return y + math.log1p(-math.exp(-2 * y)) - math.log(2)


def _gaussian_noise(scale: float) -> NoiseModel:
    variance = scale * scale

    def log_delta(m: int) -> float:
        limit = math.pi * m
        return (
            variance * limit * limit
            + math.log(special.dawsn(scale * limit))
            - math.log(math.pi * scale)
        )

    return NoiseModel(
        name="gaussian",
        cf=lambda x: np.exp(-0.5 * variance * np.asarray(x, dtype=float) ** 2),
        log_abs_cf=lambda x: -0.5 * variance * np.asarray(x, dtype=float) ** 2,
        smoothness=NoiseSmoothness(gamma=0.0, mu=variance / 2, delta=2.0),
        sampler=lambda generator, size: generator.normal(0.0, scale, size),
        density=lambda x: np.exp(-0.5 * (np.asarray(x) / scale) ** 2)
        / (scale * math.sqrt(2 * math.pi)),
        l2_norm=math.sqrt(1 / (2 * scale * math.sqrt(math.pi))),
        abs_mean=scale * math.sqrt(2 / math.pi),
        variance=variance,
        scale=scale,
        log_delta=log_delta,
    )


def _cauchy_noise(scale: float) -> NoiseModel:
    def log_delta(m: int) -> float:
        exponent = 2 * scale * math.pi * m
        return (
            exponent
            + math.log1p(-math.exp(-exponent))
            - math.log(2 * math.pi * scale)
        )

    return NoiseModel(
        name="cauchy",
        cf=lambda x: np.exp(-scale * np.abs(np.asarray(x, dtype=float))),
        log_abs_cf=lambda x: -scale * np.abs(np.asarray(x, dtype=float)),
        smoothness=NoiseSmoothness(gamma=0.0, mu=scale, delta=1.0),
        sampler=lambda generator, size: scale * generator.standard_cauchy(size),
        density=lambda x: scale / (math.pi * (scale**2 + np.asarray(x) ** 2)),
        l2_norm=math.sqrt(1 / (2 * math.pi * scale)),
        scale=scale,
        log_delta=log_delta,
    )


def _laplace_noise(scale: float) -> NoiseModel:
    squared = scale * scale

    def log_delta(m: int) -> float:
        limit = math.pi * m
        return math.log(
            (limit + 2 * squared * limit**3 / 3 + squared**2 * limit**5 / 5)
            / math.pi
        )

    return NoiseModel(
        name="laplace",
        cf=lambda x: 1.0 / (1.0 + squared * np.asarray(x, dtype=float) ** 2),
        log_abs_cf=lambda x: -np.log1p(squared * np.asarray(x, dtype=float) ** 2),
        smoothness=NoiseSmoothness(
            gamma=2.0,
            mu=0.0,
            delta=0.0,
            kappa0=min(1.0, 1 / squared),
            kappa0_prime=max(1.0, 1 / squared),
        ),
        sampler=lambda generator, size: generator.laplace(0.0, scale, size),
        density=lambda x: np.exp(-np.abs(np.asarray(x)) / scale) / (2 * scale),
        l2_norm=math.sqrt(1 / (4 * scale)),
        abs_mean=scale,
        variance=2 * squared,
        scale=scale,
        log_delta=log_delta,
    )


def _log_chi_squared_density(scale: float):
    def density(x):
        y = np.asarray(x, dtype=float) / scale
        return np.exp(0.5 * y - 0.5 * np.exp(y)) / (scale * math.sqrt(2 * math.pi))

    return density


def _log_chi_squared_noise(scale: float) -> NoiseModel:
    # ε = scale · ln(η²) with η standard normal, E exp(ixε) = 2^{iax} Γ(1/2+iax)/√π
    def cf(x):
        ax = scale * np.asarray(x, dtype=float)
        return np.exp(
            1j * ax * math.log(2) + special.loggamma(0.5 + 1j * ax) - 0.5 * math.log(math.pi)
        )

    def log_delta(m: int) -> float:
        exponent = math.pi * scale * math.pi * m
        return _log_sinh(exponent) - math.log(math.pi**2 * scale)

    density = _log_chi_squared_density(scale)
    abs_mean = real_integral(
        lambda y: abs(y) * float(density(y)), -np.inf, np.inf, DEFAULT_QUADRATURE
    )

    return NoiseModel(
        name="log_chi_squared",
        cf=cf,
        log_abs_cf=lambda x: -0.5 * _log_cosh(math.pi * scale * np.asarray(x)),
        smoothness=NoiseSmoothness(
            gamma=0.0,
            mu=math.pi * scale / 2,
            delta=1.0,
            kappa0=1.0,
            kappa0_prime=math.sqrt(2),
        ),
        sampler=lambda generator, size: scale
        * np.log(generator.standard_normal(size) ** 2),
        density=density,
        l2_norm=math.sqrt(1 / (2 * math.pi * scale)),
        abs_mean=abs_mean,
        variance=scale * scale * math.pi**2 / 2,
        scale=scale,
        log_delta=log_delta,
    )


def _no_noise(scale: float) -> NoiseModel:
    return NoiseModel(
        name="none",
        cf=lambda x: np.ones_like(np.asarray(x, dtype=float), dtype=complex),
        log_abs_cf=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        smoothness=NoiseSmoothness(),
        sampler=lambda generator, size: np.zeros(size),
        abs_mean=0.0,
        variance=0.0,
        scale=scale,
        noise_free=True,
        log_delta=lambda m: math.log(m),
    )


NOISE_FACTORIES = {
    "gaussian": _gaussian_noise,
    "cauchy": _cauchy_noise,
    "laplace": _laplace_noise,
    "log_chi_squared": _log_chi_squared_noise,
    "none": _no_noise,
}


@lru_cache(maxsize=None)
def builtin_noise(name: str, scale: float = 1.0) -> NoiseModel:
    """
    Returns a built-in error law by name: gaussian, cauchy, laplace,
    log_chi_squared or none.
    """
    try:
        factory = NOISE_FACTORIES[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown noise {name!r}; expected one of {', '.join(NOISE_FACTORIES)}",
            "noise.name",
        )
    if not scale > 0:
        raise ConfigurationError("must be positive", "noise.scale")
    return factory(float(scale))


def _log_delta_quadrature(noise: NoiseModel, m: int, quad: QuadratureSpec) -> float:
    limit = math.pi * m
    probe = np.linspace(0.0, limit, 4097)
    exponents = -2.0 * np.asarray(noise.log_abs_cf(probe), dtype=float)
    peak = int(np.argmax(exponents))
    shift = float(exponents[peak])
    peak_location = float(probe[peak])

    # geometric break points around the peak keep sharply concentrated integrands
    # (exp(x² - L²) near L) visible to the adaptive rule
    offsets = limit * 2.0 ** -np.arange(1, 40)
    points = np.concatenate([peak_location - offsets, peak_location + offsets])
    points = np.unique(points[(points > 0) & (points < limit)])

    def integrand(x):
        return math.exp(-2.0 * float(noise.log_abs_cf(np.asarray(x))) - shift)

    value = real_integral(
        integrand, 0.0, limit, quad, points=points, limit=max(quad.limit, 4 * len(points))
    )
    return shift + math.log(value / math.pi)


def log_delta_m(
    noise: NoiseModel,
    m: int,
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
    closed_form: bool = True,
) -> float:
    """
    Returns log Δ(m), Δ(m) = (1/2π) ∫_{-πm}^{πm} |f_ε*(x)|^{-2} dx, evaluated in log
    space. Closed forms are used when the model has one, unless closed_form is False.
    """
    if m < 1:
        raise ConfigurationError(f"m must be at least 1, got {m}")
    if closed_form and noise.log_delta is not None:
        return noise.log_delta(m)
    return _log_delta_quadrature(noise, m, quad)


def _largest_finite_m(log_value: Callable[[int], float]) -> int:
    upper = 1
    while log_value(upper * 2) < LOG_MAX_FLOAT:
        upper *= 2
    lower, upper = upper, upper * 2
    while upper - lower > 1:
        middle = (lower + upper) // 2
        if log_value(middle) < LOG_MAX_FLOAT:
            lower = middle
        else:
            upper = middle
    return lower


def delta_m(
    noise: NoiseModel,
    m: int,
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
    closed_form: bool = True,
) -> float:
    """
    Returns Δ(m) = (1/2π) ∫_{-πm}^{πm} |f_ε*(x)|^{-2} dx.
    """
    log_value = log_delta_m(noise, m, quad, closed_form)
    if log_value >= LOG_MAX_FLOAT:
        raise RepresentableRangeError(
            f"Δ({m}) for the noise {noise.name} overflows double precision.",
            largest_m=_largest_finite_m(
                lambda value: log_delta_m(noise, value, quad, closed_form)
            ),
        )
    return math.exp(log_value)


def log_gamma_m(smoothness: NoiseSmoothness, m: int) -> float:
    """
    Returns log Γ(m), Γ(m) = (1+(πm)²)^γ (πm)^{1-δ} exp{2μ(πm)^δ}.
    """
    limit = math.pi * m
    return (
        smoothness.gamma * math.log1p(limit * limit)
        + (1 - smoothness.delta) * math.log(limit)
        + 2 * smoothness.mu * limit**smoothness.delta
    )


def gamma_m(smoothness: NoiseSmoothness, m: int) -> float:
    log_value = log_gamma_m(smoothness, m)
    if log_value >= LOG_MAX_FLOAT:
        raise RepresentableRangeError(
            f"Γ({m}) overflows double precision.",
            largest_m=_largest_finite_m(lambda value: log_gamma_m(smoothness, value)),
        )
    return math.exp(log_value)


def lambda1(smoothness: NoiseSmoothness, kappa: float) -> float:
    """
    Returns λ₁ = 1/(κ²πR(μ,δ)), with R = 1 when δ = 0 and R = 2μδ when δ > 0.
    """
    if smoothness.delta > 0:
        if smoothness.mu <= 0:
            raise ConfigurationError("mu must be positive when delta is positive")
        ratio = 2 * smoothness.mu * smoothness.delta
    else:
        ratio = 1.0
    return 1.0 / (kappa * kappa * math.pi * ratio)


def lambda2(noise: NoiseModel, kappa: Optional[float] = None) -> float:
    """
    Returns λ₂ = ‖f_ε‖ κ₀^{-1} √(2λ₁(κ₀)) when δ <= 1, and 2λ₁(κ₀) when δ > 1.
    """
    smoothness = noise.smoothness
    kappa = smoothness.kappa0 if kappa is None else kappa
    first = lambda1(smoothness, kappa)

    if smoothness.delta > 1:
        return 2 * first

    if noise.l2_norm is None:
        raise ConfigurationError(
            f"the noise {noise.name} does not provide the L2 norm of its density, "
            "required by λ₂ when delta <= 1",
            "noise",
        )
    return noise.l2_norm / kappa * math.sqrt(2 * first)


@dataclass(frozen=True)
class DeltaSandwich:
    """
    Logarithms of the lower bound, of Δ(m) and of the upper bound in
    (1/2)λ₁(κ₀′)Γ(m) <= Δ(m) <= 2λ₁(κ₀)Γ(m).
    """

    m: int
    log_lower: float
    log_delta: float
    log_upper: float

    @property
    def holds(self) -> bool:
        return self.log_lower <= self.log_delta <= self.log_upper


def delta_bounds(
    noise: NoiseModel, m: int, quad: QuadratureSpec = DEFAULT_QUADRATURE
) -> DeltaSandwich:
    """
    Returns the sandwich of Δ(m) between multiples of Γ(m). For ordinary smooth
    noise Δ(m) behaves as λ₁Γ(m)/(2γ+1), so the lower side carries that factor.
    """
    smoothness = noise.smoothness
    log_gamma = log_gamma_m(smoothness, m)
    log_lower = math.log(0.5 * lambda1(smoothness, smoothness.kappa0_prime)) + log_gamma
    if smoothness.is_ordinary_smooth:
        log_lower -= math.log(2 * smoothness.gamma + 1)
    log_upper = math.log(2 * lambda1(smoothness, smoothness.kappa0)) + log_gamma
    return DeltaSandwich(m, log_lower, log_delta_m(noise, m, quad), log_upper)


def delta2_m(
    noise: NoiseModel,
    target_cf: Callable[[np.ndarray], np.ndarray],
    m: int,
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
) -> float:
    """
    Returns Δ₂(m) = ∬_{[-πm,πm]²} |f_Z*(x-y)|² / |f_ε*(x) f_ε*(y)|² dx dy, with
    f_Z* = f_ε* g*.
    """
    limit = math.pi * m

    def integrand(x, y):
        difference = x - y
        log_ratio = 2.0 * (
            noise.log_abs_cf(difference) - noise.log_abs_cf(x) - noise.log_abs_cf(y)
        )
        return np.abs(target_cf(difference)) ** 2 * np.exp(log_ratio)

    return tensor_integral(integrand, -limit, limit, panels=4 * m, quad=quad)
