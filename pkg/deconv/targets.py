"""
This module defines the simulation ground truth densities g, with their exact
characteristic functions g*, their smoothness class and the bound M₂ on
∫x²g²(x)dx.
"""
import inspect
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Mapping, Optional, Sequence

import numpy as np
from scipy import special, stats

from deconv.common import DEFAULT_QUADRATURE, QuadratureSpec
from deconv.errors import ConfigurationError
from deconv.quadrature import real_integral

# declared constants are rounded up by this factor above their computed value
DECLARED_MARGIN = 1.1

SMOOTHNESS_QUADRATURE = QuadratureSpec(tolerance=1e-7, limit=1000)


@dataclass(frozen=True)
class SmoothnessClass:
    """
    Describes the class ∫|g*(x)|²(x²+1)^s exp(2b|x|^r) dx <= c1.
    """

    s: float = 0.0
    r: float = 0.0
    b: float = 0.0
    c1: float = 1.0

    def __post_init__(self) -> None:
        if min(self.s, self.r, self.b) < 0:
            raise ConfigurationError("s, r and b must be nonnegative")
        if self.r > 0 and self.b <= 0:
            raise ConfigurationError("b must be positive when r is positive")
        if not self.c1 > 0:
            raise ConfigurationError("c1 must be positive")

    def log_weight(self, x: np.ndarray) -> np.ndarray:
        """
        Returns s·log(1+x²) + 2b|x|^r, the logarithm of the weight of the class.
        """
        x = np.abs(np.asarray(x, dtype=float))
        return self.s * np.log1p(x * x) + 2 * self.b * x**self.r

    def weight(self, x: np.ndarray) -> np.ndarray:
        return np.exp(self.log_weight(x))


@dataclass(frozen=True)
class TargetDensity:
    """
    A density g with known characteristic function.

    abs_cf_bound, when set, is an envelope of |g*| used where g* oscillates with a
    slowly decaying amplitude; tail_closed_form maps L to (1/π)∫_L^∞|g*(x)|²dx;
    log_abs_cf, when set, is log|g*| in closed form, finite where |g*| underflows.
    """

    name: str
    density: Callable[[np.ndarray], np.ndarray]
    cf: Callable[[np.ndarray], np.ndarray]
    smoothness: SmoothnessClass
    m2: float
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    norm_squared: Optional[float] = None
    abs_cf_bound: Optional[Callable[[np.ndarray], np.ndarray]] = None
    tail_closed_form: Optional[Callable[[float], float]] = None
    log_abs_cf: Optional[Callable[[np.ndarray], np.ndarray]] = None
    parameters: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.m2 > 0:
            raise ConfigurationError(f"the moment bound of {self.name} must be positive")

    def abs_cf_squared(self, x: np.ndarray) -> np.ndarray:
        return np.abs(self.cf(x)) ** 2

    def log_abs_cf_squared(self, x: np.ndarray) -> np.ndarray:
        if self.log_abs_cf is not None:
            return 2 * np.asarray(self.log_abs_cf(x), dtype=float)
        with np.errstate(divide="ignore"):
            return 2 * np.log(np.abs(self.cf(x)))

    def sample(self, generator: np.random.Generator, size: int) -> np.ndarray:
        return np.asarray(self.sampler(generator, size), dtype=float)

    def squared_norm(self) -> float:
        return squared_norm(self)


def squared_norm(target: TargetDensity) -> float:
    """
    Returns ‖g‖² = (1/2π)∫|g*|², using the closed form when the target has one.
    """
    if target.norm_squared is not None:
        return target.norm_squared
    return (
        real_integral(
            lambda x: float(target.abs_cf_squared(x)), 0.0, np.inf, DEFAULT_QUADRATURE
        )
        / math.pi
    )


def smoothness_integral(
    target: TargetDensity,
    smoothness: Optional[SmoothnessClass] = None,
    quad: QuadratureSpec = SMOOTHNESS_QUADRATURE,
) -> float:
    """
    Returns ∫|g*(x)|²(x²+1)^s exp(2b|x|^r) dx for the given class (by default the
    target's own). Targets with an envelope of |g*| are integrated through the
    envelope, which gives an upper bound.

    The integrand is evaluated as exp(log|g*|² + log weight): the weight overflows
    where |g*|² underflows, and their product stays finite.
    """
    smoothness = smoothness or target.smoothness

    if target.abs_cf_bound is not None:

        def log_magnitude(x):
            bound = float(target.abs_cf_bound(x))
            return 2 * math.log(bound) if bound > 0 else -math.inf

    else:

        def log_magnitude(x):
            return float(target.log_abs_cf_squared(x))

    def integrand(x):
        log_value = log_magnitude(x)
        if log_value == -math.inf:
            return 0.0
        total = log_value + float(smoothness.log_weight(x))
        return 0.0 if math.isnan(total) else math.exp(total)

    value = real_integral(integrand, 0.0, np.inf, quad)
    return 2 * value


def bias_tail(
    target: TargetDensity, m: int, quad: QuadratureSpec = DEFAULT_QUADRATURE
) -> float:
    """
    Returns the squared bias ‖g - g_m‖² = (1/2π)∫_{|x|>πm}|g*(x)|²dx.

    bias_tail(target, 0) is ‖g‖².
    """
    if m < 0:
        raise ConfigurationError(f"m must be nonnegative, got {m}")
    limit = math.pi * m

    if target.tail_closed_form is not None:
        return target.tail_closed_form(limit)

    if target.abs_cf_bound is not None:
        # the oscillating tail is obtained as the complement of a finite integral
        inner = real_integral(
            lambda x: float(target.abs_cf_squared(x)),
            0.0,
            limit,
            quad,
            limit=max(quad.limit, 50 * m + 50),
        )
        return max(0.0, squared_norm(target) - inner / math.pi)

    return (
        real_integral(lambda x: float(target.abs_cf_squared(x)), limit, np.inf, quad)
        / math.pi
    )


def declared_c1(
    target: TargetDensity, quad: QuadratureSpec = SMOOTHNESS_QUADRATURE
) -> float:
    return DECLARED_MARGIN * smoothness_integral(target, quad=quad)


def _with_declared_constants(target: TargetDensity) -> TargetDensity:
    smoothness = target.smoothness
    c1 = declared_c1(target)
    return replace(
        target,
        smoothness=SmoothnessClass(smoothness.s, smoothness.r, smoothness.b, c1),
    )


def _second_moment_of_square(density: Callable) -> float:
    value = real_integral(
        lambda x: x * x * float(density(x)) ** 2, -np.inf, np.inf, DEFAULT_QUADRATURE
    )
    return DECLARED_MARGIN * value


def gaussian_target(mean: float = 0.0, sd: float = 1.0) -> TargetDensity:
    norm = 1 / (2 * sd * math.sqrt(math.pi))
    return TargetDensity(
        name="gaussian",
        density=lambda x: stats.norm.pdf(x, loc=mean, scale=sd),
        cf=lambda t: np.exp(
            1j * mean * np.asarray(t) - 0.5 * sd * sd * np.asarray(t, dtype=float) ** 2
        ),
        smoothness=SmoothnessClass(s=0.0, r=2.0, b=sd * sd / 4),
        m2=DECLARED_MARGIN * norm * (mean * mean + sd * sd / 2),
        sampler=lambda generator, size: generator.normal(mean, sd, size),
        norm_squared=norm,
        tail_closed_form=lambda limit: special.erfc(sd * limit) * norm,
        log_abs_cf=lambda t: -0.5 * sd * sd * np.asarray(t, dtype=float) ** 2,
        parameters={"mean": mean, "sd": sd},
    )


def cauchy_target(scale: float = 1.0, loc: float = 0.0) -> TargetDensity:
    norm = 1 / (2 * math.pi * scale)
    return TargetDensity(
        name="cauchy",
        density=lambda x: stats.cauchy.pdf(x, loc=loc, scale=scale),
        cf=lambda t: np.exp(
            1j * loc * np.asarray(t) - scale * np.abs(np.asarray(t, dtype=float))
        ),
        smoothness=SmoothnessClass(s=0.0, r=1.0, b=scale / 2),
        m2=DECLARED_MARGIN * (scale / (2 * math.pi) + loc * loc * norm),
        sampler=lambda generator, size: loc + scale * generator.standard_cauchy(size),
        norm_squared=norm,
        tail_closed_form=lambda limit: math.exp(-2 * scale * limit) * norm,
        log_abs_cf=lambda t: -scale * np.abs(np.asarray(t, dtype=float)),
        parameters={"scale": scale, "loc": loc},
    )


def laplace_target(scale: float = 1.0, loc: float = 0.0) -> TargetDensity:
    norm = 1 / (4 * scale)

    def tail(limit: float) -> float:
        u = scale * limit
        return (math.pi / 4 - 0.5 * (u / (1 + u * u) + math.atan(u))) / (
            math.pi * scale
        )

    return TargetDensity(
        name="laplace",
        density=lambda x: stats.laplace.pdf(x, loc=loc, scale=scale),
        cf=lambda t: np.exp(1j * loc * np.asarray(t))
        / (1 + scale * scale * np.asarray(t, dtype=float) ** 2),
        # |g*|² decays as x^{-4}: any s < 3/2 is admissible
        smoothness=SmoothnessClass(s=1.4, r=0.0, b=0.0),
        m2=DECLARED_MARGIN * (scale / 8 + loc * loc * norm),
        sampler=lambda generator, size: generator.laplace(loc, scale, size),
        norm_squared=norm,
        tail_closed_form=tail,
        log_abs_cf=lambda t: -np.log1p(scale * scale * np.asarray(t, dtype=float) ** 2),
        parameters={"scale": scale, "loc": loc},
    )


def _as_floats(values: Sequence[float], key: str) -> np.ndarray:
    try:
        array = np.asarray(values, dtype=float).ravel()
    except (TypeError, ValueError):
        raise ConfigurationError("expected a list of numbers", key)
    return array


def mixture_gaussian_target(
    weights: Sequence[float] = (0.5, 0.5),
    means: Sequence[float] = (-2.0, 2.0),
    sds: Sequence[float] = (1.0, 1.0),
) -> TargetDensity:
    weights = _as_floats(weights, "target.weights")
    means = _as_floats(means, "target.means")
    sds = _as_floats(sds, "target.sds")

    if not len(weights) == len(means) == len(sds) or len(weights) == 0:
        raise ConfigurationError(
            "weights, means and sds must be non empty lists of equal length", "target"
        )
    if np.any(weights < 0) or not math.isclose(float(np.sum(weights)), 1.0):
        raise ConfigurationError("must be nonnegative and sum to 1", "target.weights")
    if np.any(sds <= 0):
        raise ConfigurationError("must be positive", "target.sds")

    pair_variances = sds[:, None] ** 2 + sds[None, :] ** 2
    pair_weights = weights[:, None] * weights[None, :]
    overlaps = stats.norm.pdf(
        means[:, None] - means[None, :], scale=np.sqrt(pair_variances)
    )
    product_means = (
        means[:, None] * sds[None, :] ** 2 + means[None, :] * sds[:, None] ** 2
    ) / pair_variances
    product_variances = (sds[:, None] ** 2 * sds[None, :] ** 2) / pair_variances
    norm = float(np.sum(pair_weights * overlaps))
    second = float(
        np.sum(pair_weights * overlaps * (product_means**2 + product_variances))
    )

    def density(x):
        x = np.asarray(x, dtype=float)
        return np.sum(
            weights[:, None]
            * stats.norm.pdf(np.atleast_1d(x)[None, :], means[:, None], sds[:, None]),
            axis=0,
        ).reshape(x.shape)

    def cf(t):
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t)[None, :]
        values = np.sum(
            weights[:, None]
            * np.exp(1j * means[:, None] * flat - 0.5 * sds[:, None] ** 2 * flat**2),
            axis=0,
        )
        return values.reshape(t.shape)

    def sampler(generator, size):
        components = generator.choice(len(weights), size=size, p=weights)
        return generator.normal(means[components], sds[components])

    return TargetDensity(
        name="mixture_gaussian",
        density=density,
        cf=cf,
        smoothness=SmoothnessClass(s=0.0, r=2.0, b=float(np.min(sds)) ** 2 / 4),
        m2=DECLARED_MARGIN * second,
        sampler=sampler,
        norm_squared=norm,
        parameters={
            "weights": weights.tolist(),
            "means": means.tolist(),
            "sds": sds.tolist(),
        },
    )


def uniform_smooth_target(
    half_width: float = 1.0, bandwidth: float = 0.2
) -> TargetDensity:
    """
    Uniform law on [-half_width, half_width] convolved with a centered Gaussian of
    standard deviation bandwidth.
    """

    def density(x):
        x = np.asarray(x, dtype=float)
        return (
            stats.norm.cdf((x + half_width) / bandwidth)
            - stats.norm.cdf((x - half_width) / bandwidth)
        ) / (2 * half_width)

    def cf(t):
        t = np.asarray(t, dtype=float)
        return (np.sinc(half_width * t / math.pi) + 0j) * np.exp(
            -0.5 * bandwidth**2 * t**2
        )

    def log_abs_cf(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(np.abs(np.sinc(half_width * t / math.pi))) - 0.5 * (
                bandwidth * t
            ) ** 2

    target = TargetDensity(
        name="uniform_smooth",
        density=density,
        cf=cf,
        log_abs_cf=log_abs_cf,
        smoothness=SmoothnessClass(s=0.0, r=2.0, b=bandwidth**2 / 4),
        m2=1.0,
        sampler=lambda generator, size: generator.uniform(-half_width, half_width, size)
        + generator.normal(0.0, bandwidth, size),
        parameters={"half_width": half_width, "bandwidth": bandwidth},
    )
    norm = squared_norm(target)
    return replace(target, m2=_second_moment_of_square(density), norm_squared=norm)


def uniform_target(a: float = 0.0, b: float = 1.0) -> TargetDensity:
    """
    Uniform law on [a, b], the stationary marginal of the Bernoulli autoregression.
    """
    if not b > a:
        raise ConfigurationError("expected a < b", "target")
    width = b - a
    center = (a + b) / 2

    def cf(t):
        t = np.asarray(t, dtype=float)
        return np.exp(1j * center * t) * np.sinc(width * t / (2 * math.pi))

    def envelope(t):
        t = np.abs(np.asarray(t, dtype=float))
        return np.minimum(1.0, 2.0 / (width * np.maximum(t, 1e-300)))

    return TargetDensity(
        name="uniform",
        density=lambda x: stats.uniform.pdf(x, loc=a, scale=width),
        cf=cf,
        # |g*|² decays as x^{-2}: any s < 1/2 is admissible
        smoothness=SmoothnessClass(s=0.4, r=0.0, b=0.0),
        m2=DECLARED_MARGIN * (b**3 - a**3) / (3 * width**2),
        sampler=lambda generator, size: generator.uniform(a, b, size),
        norm_squared=1 / width,
        abs_cf_bound=envelope,
        parameters={"a": a, "b": b},
    )


TARGET_FACTORIES = {
    "gaussian": gaussian_target,
    "cauchy": cauchy_target,
    "laplace": laplace_target,
    "mixture_gaussian": mixture_gaussian_target,
    "uniform_smooth": uniform_smooth_target,
    "uniform": uniform_target,
}

POSITIVE_PARAMETERS = {"sd", "scale", "half_width", "bandwidth"}


def check_target_parameters(name: str, params: Mapping[str, Any]) -> None:
    if name not in TARGET_FACTORIES:
        raise ConfigurationError(
            f"unknown target {name!r}; expected one of {', '.join(TARGET_FACTORIES)}",
            "target.name",
        )
    accepted = list(inspect.signature(TARGET_FACTORIES[name]).parameters)
    for key, value in params.items():
        if key not in accepted:
            raise ConfigurationError(
                f"unknown parameter for the target {name}; expected one of "
                f"{', '.join(accepted)}",
                f"target.{key}",
            )
        if key in POSITIVE_PARAMETERS:
            if not isinstance(value, (int, float)) or not value > 0:
                raise ConfigurationError("must be a positive number", f"target.{key}")


def builtin_target(
    name: str, params: Optional[Mapping[str, Any]] = None
) -> TargetDensity:
    """
    Returns a built-in target by name, with its declared smoothness class.

    builtin_target("gaussian", {"mean": 0, "sd": 1}).cf(1.0) -> exp(-1/2)
    """
    params = dict(params or {})
    check_target_parameters(name, params)
    return _with_declared_constants(TARGET_FACTORIES[name](**params))
