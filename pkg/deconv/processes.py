"""
This module provides stationary generators of the latent sequence (X_i) with a
known dependence structure, the analytic bounds on their β and τ coefficients and
the bounds on the covariance residual

    R_m = (1/π) Σ_{k=2}^{n} ∫_{-πm}^{πm} |Cov(exp(ixX_1), exp(ixX_k))| dx.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import signal

from deconv.common import Seed, get_generator
from deconv.errors import ConfigurationError, UnsupportedProcessError
from deconv.logs import logger
from deconv.noise import NoiseModel, builtin_noise
from deconv.quadrature import gauss_legendre_nodes
from deconv.targets import TargetDensity, builtin_target

CoefficientBound = Callable[[np.ndarray], np.ndarray]

DEFAULT_BURN_IN = 1000
BURN_IN_TOLERANCE = 1e-12


@dataclass(frozen=True)
class DependentProcess:
    """
    A strictly stationary sequence generator.

    path draws X_1, ..., X_n from a numpy generator; tau_bound and beta_bound map
    lags k >= 1 (scalars or arrays) to bounds on τ_{X,∞}(k) and β_{X,∞}(k), and
    are absent when no such bound is known.
    """

    name: str
    path: Callable[[np.random.Generator, int], np.ndarray] = field(compare=False)
    stationary_density: Optional[TargetDensity] = field(default=None, compare=False)
    tau_bound: Optional[CoefficientBound] = field(default=None, compare=False)
    beta_bound: Optional[CoefficientBound] = field(default=None, compare=False)
    burn_in: int = 0
    metadata: Dict[str, Any] = field(default_factory=dict, compare=False)

    def generate(self, n: int, seed: Seed) -> np.ndarray:
        """
        Returns X_1, ..., X_n; equal seeds give identical sequences.
        """
        if n < 1:
            raise ConfigurationError(f"n must be at least 1, got {n}")
        return np.asarray(self.path(get_generator(seed), n), dtype=float)

    @property
    def is_beta_mixing(self) -> bool:
        return self.beta_bound is not None


def _zero_bound(k):
    return np.zeros_like(np.asarray(k, dtype=float))


def _halving_path(generator: np.random.Generator, n: int) -> np.ndarray:
    # X_k = (X_{k-1} + ε_k) / 2 started from the stationary law U[0, 1]
    start = generator.uniform()
    bits = generator.integers(0, 2, size=n).astype(float)
    path, _ = signal.lfilter([0.5], [1.0, -0.5], bits, zi=[0.5 * start])
    return path


def bernoulli_ar() -> DependentProcess:
    """
    Bernoulli autoregression X_k = (X_{k-1} + ε_k)/2 with ε_k ~ Bernoulli(1/2): a
    τ-dependent chain with uniform marginal, which is not strongly mixing.

    bernoulli_ar().tau_bound(3) -> 0.125
    """
    return DependentProcess(
        name="bernoulli_ar",
        path=_halving_path,
        stationary_density=builtin_target("uniform", {"a": 0.0, "b": 1.0}),
        tau_bound=lambda k: 2.0 ** -np.asarray(k, dtype=float),
        metadata={"beta_mixing": False},
    )


def expanding_map() -> DependentProcess:
    """
    The Markov chain dual to the iterates of the doubling map T(x) = 2x mod 1,
    X_{i+1} = (X_i + B_i)/2, with τ_{X,∞}(k) <= Cρ^k.
    """
    constant, ratio = 2.0, 0.5
    return DependentProcess(
        name="expanding_map",
        path=_halving_path,
        stationary_density=builtin_target("uniform", {"a": 0.0, "b": 1.0}),
        tau_bound=lambda k: constant * ratio ** np.asarray(k, dtype=float),
        metadata={
            "beta_mixing": False,
            "map": "2x mod 1",
            "tau_constant": constant,
            "tau_ratio": ratio,
            "constants_source": "implementation-chosen",
        },
    )


def _check_innovation(innovation: NoiseModel) -> None:
    if not math.isfinite(innovation.abs_mean):
        raise ConfigurationError(
            f"the innovation law {innovation.name} must have a finite first moment",
            "process.innovation",
        )


def burn_in_floor(kappa: float, tolerance: float = BURN_IN_TOLERANCE) -> int:
    return math.ceil(math.log(tolerance) / math.log(kappa))


def contractive_chain(
    transition: Callable[[float], float],
    kappa: float,
    innovation: NoiseModel,
    burn_in: int = DEFAULT_BURN_IN,
    start: float = 0.0,
    tolerance: float = BURN_IN_TOLERANCE,
) -> DependentProcess:
    """
    Markov chain X_n = f(X_{n-1}) + ξ_n with a κ-Lipschitz map f, κ < 1. The first
    burn_in states are discarded; the bound on τ uses
    E|X₀| <= (|f(0)| + E|ξ|) / (1 - κ).
    """
    if not 0 < kappa < 1:
        raise ConfigurationError("must satisfy 0 < kappa < 1", "process.kappa")
    if burn_in < 0:
        raise ConfigurationError("must be nonnegative", "process.burn_in")
    _check_innovation(innovation)

    abs_mean = (abs(transition(0.0)) + innovation.abs_mean) / (1 - kappa)
    floor = burn_in_floor(kappa, tolerance)
    metadata: Dict[str, Any] = {
        "kappa": kappa,
        "abs_mean_bound": abs_mean,
        "burn_in_floor": floor,
    }
    if burn_in < floor:
        metadata["warning"] = (
            f"burn_in={burn_in} is below the recommended floor {floor} for "
            f"kappa={kappa}"
        )
        logger.warning("%s", metadata["warning"])

    def path(generator: np.random.Generator, n: int) -> np.ndarray:
        shocks = innovation.sample(generator, n + burn_in)
        values = np.empty(n + burn_in)
        state = start
        for index, shock in enumerate(shocks):
            state = transition(state) + shock
            values[index] = state
        return values[burn_in:]

    return DependentProcess(
        name="contractive_chain",
        path=path,
        tau_bound=lambda k: 2 * abs_mean * kappa ** np.asarray(k, dtype=float),
        burn_in=burn_in,
        metadata=metadata,
    )


def gaussian_ar1(kappa: float = 0.5, sigma: float = 1.0) -> DependentProcess:
    """
    Gaussian autoregression X_n = κX_{n-1} + ξ_n, ξ_n ~ N(0, σ²), started from its
    stationary law N(0, σ²/(1-κ²)).
    """
    if not 0 < abs(kappa) < 1:
        raise ConfigurationError("must satisfy 0 < |kappa| < 1", "process.kappa")
    if not sigma > 0:
        raise ConfigurationError("must be positive", "process.sigma")

    stationary_sd = sigma / math.sqrt(1 - kappa * kappa)
    abs_mean = stationary_sd * math.sqrt(2 / math.pi)

    def path(generator: np.random.Generator, n: int) -> np.ndarray:
        start = generator.normal(0.0, stationary_sd)
        shocks = generator.normal(0.0, sigma, n)
        values, _ = signal.lfilter([1.0], [1.0, -kappa], shocks, zi=[kappa * start])
        return values

    return DependentProcess(
        name="gaussian_ar1",
        path=path,
        stationary_density=builtin_target("gaussian", {"mean": 0.0, "sd": stationary_sd}),
        tau_bound=lambda k: 2 * abs_mean * abs(kappa) ** np.asarray(k, dtype=float),
        metadata={"kappa": kappa, "sigma": sigma, "stationary_sd": stationary_sd},
    )


def linear_tau_bound(
    coeffs: Sequence[float],
    abs_mean: float,
    variance: float,
    tail: float = 0.0,
) -> CoefficientBound:
    """
    Returns k -> min(2E|ξ|Σ_{j>=k}|a_j|, √(2Var(ξ)Σ_{j>=k}a_j²)), with the declared
    tail Σ_{j>J}|a_j| added to the first sum. Either side is skipped when the
    matching moment is infinite.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    absolute = np.concatenate([np.cumsum(np.abs(coeffs)[::-1])[::-1], [0.0]]) + tail
    squared = np.concatenate([np.cumsum((coeffs**2)[::-1])[::-1], [0.0]]) + tail**2

    def bound(k):
        k = np.minimum(np.asarray(k, dtype=int), len(coeffs))
        candidates = []
        if math.isfinite(abs_mean):
            candidates.append(2 * abs_mean * absolute[k])
        if math.isfinite(variance):
            candidates.append(np.sqrt(2 * variance * squared[k]))
        if not candidates:
            return np.full(np.shape(k), np.inf)
        return np.minimum.reduce(candidates)

    return bound


def linear_process(
    coeffs: Sequence[float],
    innovation: NoiseModel,
    tail: float = 0.0,
    tail_tolerance: float = 1e-8,
) -> DependentProcess:
    """
    Moving average X_t = Σ_{j=0}^{J} a_j ξ_{t-j}. tail declares Σ_{j>J}|a_j| for
    coefficient sequences truncated at J; it must not exceed tail_tolerance.
    """
    coeffs = np.asarray(coeffs, dtype=float).ravel()
    if len(coeffs) == 0 or not np.all(np.isfinite(coeffs)):
        raise ConfigurationError("expected a non empty list of finite numbers", "process.coeffs")
    if tail < 0 or tail > tail_tolerance:
        raise ConfigurationError(
            f"the truncated tail {tail:.3e} of the coefficients is above the "
            f"tolerance {tail_tolerance:.3e}",
            "process.coeffs",
        )
    _check_innovation(innovation)
    order = len(coeffs) - 1

    def path(generator: np.random.Generator, n: int) -> np.ndarray:
        shocks = innovation.sample(generator, n + order)
        return signal.lfilter(coeffs, [1.0], shocks)[order:]

    tau_bound = linear_tau_bound(coeffs, innovation.abs_mean, innovation.variance, tail)

    return DependentProcess(
        name="linear_process",
        path=path,
        tau_bound=tau_bound,
        beta_bound=_zero_bound if order == 0 else None,
        metadata={"order": order, "tail": tail, "innovation": innovation.name},
    )


def gaussian_marginal(
    innovation: NoiseModel, mean: float, energy: float
) -> Optional[TargetDensity]:
    """
    Returns the law of mean + Σ_j a_j ξ_j, with energy = Σ_j a_j², when the
    innovations ξ_j are Gaussian; None for the other innovation laws.
    """
    if innovation.name != "gaussian":
        return None
    sd = innovation.scale * math.sqrt(energy)
    return builtin_target("gaussian", {"mean": mean, "sd": sd})


def iid_process(target: TargetDensity) -> DependentProcess:
    """
    Independent draws from the target: every dependence coefficient vanishes.
    """
    return DependentProcess(
        name="iid",
        path=target.sample,
        stationary_density=target,
        tau_bound=_zero_bound,
        beta_bound=_zero_bound,
    )


PROCESS_PARAMETERS = {
    "iid": (),
    "bernoulli_ar": (),
    "expanding_map": (),
    "gaussian_ar1": ("kappa", "sigma"),
    "contractive_chain": ("kappa", "innovation", "scale", "burn_in", "offset"),
    "linear_process": ("coeffs", "innovation", "scale", "tail"),
}


def check_process_parameters(name: str, params: Dict[str, Any]) -> None:
    if name not in PROCESS_PARAMETERS:
        raise ConfigurationError(
            f"unknown process {name!r}; expected one of {', '.join(PROCESS_PARAMETERS)}",
            "process.name",
        )
    for key in params:
        if key not in PROCESS_PARAMETERS[name]:
            raise ConfigurationError(
                f"unknown parameter for the process {name}", f"process.{key}"
            )


def builtin_process(
    name: str,
    params: Optional[Dict[str, Any]] = None,
    target: Optional[TargetDensity] = None,
) -> DependentProcess:
    """
    Returns a process by configuration name. The contractive chain uses the map
    f(x) = κx + offset; innovations are built-in noise laws.
    """
    params = dict(params or {})
    check_process_parameters(name, params)

    if name == "iid":
        if target is None:
            raise ConfigurationError("the iid process requires a target", "target")
        return iid_process(target)
    if name == "bernoulli_ar":
        return bernoulli_ar()
    if name == "expanding_map":
        return expanding_map()
    if name == "gaussian_ar1":
        return gaussian_ar1(**params)

    innovation = builtin_noise(
        params.pop("innovation", "gaussian"), params.pop("scale", 1.0)
    )
    if name == "contractive_chain":
        kappa = params.pop("kappa", 0.5)
        offset = params.pop("offset", 0.0)
        process = contractive_chain(
            lambda x: kappa * x + offset, kappa, innovation, **params
        )
        # X = offset/(1-κ) + Σ_j κ^j ξ_j
        marginal = gaussian_marginal(
            innovation, offset / (1 - kappa), 1 / (1 - kappa * kappa)
        )
    else:
        coeffs = params.pop("coeffs", [1.0])
        process = linear_process(coeffs, innovation, **params)
        energy = float(np.sum(np.asarray(coeffs, dtype=float) ** 2))
        marginal = gaussian_marginal(innovation, 0.0, energy)
    return replace(process, stationary_density=marginal)


@dataclass(frozen=True)
class RmBounds:
    """
    The bounds R_{m,β} = 4mΣβ_{X,1}(k) and R_{m,τ} = πm²Στ_{X,1}(k), k = 1..n-1;
    each is None when the process lacks the matching coefficient bound.
    """

    r_beta: Optional[float]
    r_tau: Optional[float]

    @property
    def best(self) -> float:
        return min(value for value in (self.r_beta, self.r_tau) if value is not None)


def _coefficient_sum(bound: CoefficientBound, n: int) -> float:
    lags = np.arange(1, n)
    if len(lags) == 0:
        return 0.0
    values = np.asarray(bound(lags), dtype=float)
    if values.shape != lags.shape:
        values = np.array([float(bound(int(lag))) for lag in lags])
    return float(np.sum(values))


def r_m_bounds(process: DependentProcess, m: int, n: int) -> RmBounds:
    """
    Bounds the covariance residual R_m with the coefficient bounds of the process,
    used as surrogates of β_{X,1} and τ_{X,1}.
    """
    if process.beta_bound is None and process.tau_bound is None:
        raise UnsupportedProcessError(process.name)
    r_beta = r_tau = None
    if process.beta_bound is not None:
        r_beta = 4 * m * _coefficient_sum(process.beta_bound, n)
    if process.tau_bound is not None:
        r_tau = math.pi * m * m * _coefficient_sum(process.tau_bound, n)
    return RmBounds(r_beta, r_tau)


def r_m_alpha(alpha_sum: float, m: int) -> float:
    """Bound 16mΣα_{X,1}(k) on R_m for strongly mixing sequences."""
    return 16 * m * alpha_sum


def r_m_associated(covariance_sum: float, m: int) -> float:
    """Bound (8π²/3)m³ΣCov(X_1, X_k) on R_m for associated sequences."""
    return 8 * math.pi**2 / 3 * m**3 * covariance_sum


def empirical_char_covariance(
    path: np.ndarray, x: float, lag: int, batches: int = 20
) -> Tuple[float, float]:
    """
    Returns |Ĉov(exp(ixX_1), exp(ixX_{1+k}))| estimated along a path, with a batch
    means standard error.
    """
    path = np.asarray(path, dtype=float)
    if not 0 < lag < len(path) - batches:
        raise ConfigurationError(f"lag {lag} is out of range for a path of {len(path)}")
    waves = np.exp(1j * x * path)
    centered = waves - waves.mean()
    products = centered[:-lag] * np.conj(centered[lag:])
    value = abs(products.mean())
    means = np.array([chunk.mean() for chunk in np.array_split(products, batches)])
    spread = math.sqrt(np.var(means.real, ddof=1) + np.var(means.imag, ddof=1))
    return value, spread / math.sqrt(batches)


def empirical_r_m(
    path: np.ndarray, m: int, max_lag: int, panels: int = 8
) -> float:
    """
    Plug-in estimate of R_m truncated at max_lag, for diagnostics. The integral
    over [-πm, πm] uses a composite Gauss-Legendre rule with panels per unit m.
    """
    path = np.asarray(path, dtype=float)
    max_lag = min(max_lag, len(path) - 1)
    nodes, weights = gauss_legendre_nodes(0.0, math.pi * m, panels * m)
    waves = np.exp(1j * np.outer(nodes, path))
    centered = waves - waves.mean(axis=1, keepdims=True)

    total = 0.0
    for lag in range(1, max_lag + 1):
        covariances = np.mean(centered[:, :-lag] * np.conj(centered[:, lag:]), axis=1)
        # |Cov| is even in x
        total += 2 * float(np.sum(weights * np.abs(covariances)))
    return total / math.pi
