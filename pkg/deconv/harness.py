"""
This module runs Monte Carlo experiments on the adaptive estimator: brute force
oracle choice of m, the theoretical choice of m from the smoothness of the target
and of the noise, MISE tables across sample sizes and the fitted rates.
"""
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, stats

from deconv import __version__
from deconv.common import (
    DEFAULT_QUADRATURE,
    QuadratureSpec,
    Seed,
    default_workers,
    derive_seed,
)
from deconv.config import ExperimentConfig, kn_policy
from deconv.errors import (
    ConfigurationError,
    NumericalToleranceError,
    RepresentableRangeError,
    UnsupportedProcessError,
)
from deconv.estimator import (
    KnMode,
    KnPolicy,
    argmin_smallest,
    fit_model,
    m_grid_max,
    mise_against_truth,
    model_grid,
    reference_constants,
    resolve_kn,
    select_model,
)
from deconv.logs import logger
from deconv.noise import NoiseModel, NoiseSmoothness, delta_m
from deconv.processes import DependentProcess, r_m_bounds
from deconv.shannon import ProjectionEstimate, project_l2
from deconv.targets import SmoothnessClass, TargetDensity, bias_tail

SCHEMA_VERSION = "1.0"

ADAPTIVE_STREAM = 0
ORACLE_STREAM = 1

MAX_FAILURE_RATE = 0.05
TRIM_PROPORTION = 0.1


@dataclass(frozen=True)
class Observations:
    latent: np.ndarray
    observed: np.ndarray


def simulate_observations(
    process: DependentProcess, noise: NoiseModel, n: int, seed: Seed
) -> Observations:
    """
    Draws X_1..X_n from the process and returns them with Z_i = X_i + ε_i. The latent
    path and the noise use independent streams derived from seed.
    """
    latent = process.generate(n, derive_seed(seed, 0))
    noise_generator = np.random.default_rng(derive_seed(seed, 1))
    return Observations(latent, latent + noise.sample(noise_generator, n))


class ProjectionCache:
    """
    Thread safe cache of the exact coefficients a_{m,j} of a target. Tables are
    computed for radii rounded up to a power of two, so a given (m, k_n) always
    reads the same table whatever the order of the requests.
    """

    def __init__(
        self, target: TargetDensity, quad: QuadratureSpec = DEFAULT_QUADRATURE
    ) -> None:
        self.target = target
        self.quad = quad
        self._tables: Dict[Tuple[int, int], ProjectionEstimate] = {}
        self._lock = threading.Lock()

    def get(self, m: int, k_n: int) -> ProjectionEstimate:
        radius = 2 ** math.ceil(math.log2(max(k_n, 1)))
        key = (m, radius)
        with self._lock:
            table = self._tables.get(key)
        if table is None:
            table = project_l2(self.target.cf, m, radius, self.quad)
            with self._lock:
                table = self._tables.setdefault(key, table)
        return table.truncated(k_n)


@dataclass(frozen=True)
class OracleResult:
    """
    Monte Carlo estimate of E‖ĝ_m - g‖² for every m of the grid, and its argmin m̆.
    """

    m_breve: int
    mise_by_m: Tuple[float, ...]
    standard_errors: Tuple[float, ...]
    replications: int

    @property
    def mise(self) -> float:
        return self.mise_by_m[self.m_breve - 1]

    @property
    def standard_error(self) -> float:
        return self.standard_errors[self.m_breve - 1]


def _standard_error(values: np.ndarray, axis: int = 0) -> np.ndarray:
    count = values.shape[axis]
    if count < 2:
        return np.zeros(np.delete(values.shape, axis))
    return np.std(values, axis=axis, ddof=1) / math.sqrt(count)


def oracle_m(
    target: TargetDensity,
    noise: NoiseModel,
    process: DependentProcess,
    n: int,
    replications: int,
    seed: Seed,
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
    k_n: KnPolicy = KnMode.AUTO,
    m_max: Optional[int] = None,
    cache: Optional[ProjectionCache] = None,
    workers: Optional[int] = None,
) -> OracleResult:
    """
    Estimates m̆ = argmin_m E‖ĝ_m - g‖² by brute force over the grid, on
    replications drawn from streams derived from seed.
    """
    cache = cache or ProjectionCache(target, quad)
    size = m_grid_max(noise, n, m_max)

    def replicate(index: int) -> List[float]:
        observations = simulate_observations(
            process, noise, n, derive_seed(seed, index)
        )
        row = []
        for m in range(1, size + 1):
            radius = resolve_kn(k_n, m, observations.observed, noise.noise_free)
            estimate = fit_model(observations.observed, noise, m, radius, quad)
            row.append(
                mise_against_truth(
                    estimate, target, quad, cache.get(m, estimate.k_n)
                ).total
            )
        return row

    table = np.array(_run(replicate, range(replications), workers))
    means = table.mean(axis=0)
    errors = _standard_error(table)
    return OracleResult(
        m_breve=argmin_smallest(means),
        mise_by_m=tuple(float(value) for value in means),
        standard_errors=tuple(float(value) for value in errors),
        replications=replications,
    )


@dataclass(frozen=True)
class TheoreticalChoice:
    """
    The resolution balancing the squared bias and the variance for the given
    smoothness, and the rate it achieves; rate is nan when no explicit rate exists.
    """

    m: int
    pi_m: float
    rate: float
    clamped: bool
    regime: str


def theoretical_m_breve(
    target: SmoothnessClass, noise: NoiseSmoothness, n: int
) -> TheoreticalChoice:
    """
    Returns the choice of m̆ and the corresponding rate:

    - δ = 0, r = 0: πm̆ = n^{1/(2s+2γ+1)}, rate n^{-2s/(2s+2γ+1)}
    - δ = 0, r > 0: πm̆ = (ln n / 2b)^{1/r}, rate (ln n)^{(2γ+1)/r} / n
    - δ > 0, r = 0: πm̆ = (ln n / (2μ+1))^{1/δ}, rate (ln n)^{-2s/δ}
    - δ > 0, r > 0: m̆ solves m^{2s+2γ+1-r} exp{2μ(πm)^δ + 2bπ^r m^r} = n
    """
    if n < 3:
        raise ValueError(f"n must be at least 3, got {n}")
    s, r, b = target.s, target.r, target.b
    gamma, mu, delta = noise.gamma, noise.mu, noise.delta
    log_n = math.log(n)

    if delta == 0 and r == 0:
        exponent = 2 * s + 2 * gamma + 1
        pi_m = n ** (1 / exponent)
        rate = n ** (-2 * s / exponent)
        regime = "polynomial"
    elif delta == 0:
        pi_m = (log_n / (2 * b)) ** (1 / r)
        rate = log_n ** ((2 * gamma + 1) / r) / n
        regime = "polynomial"
    elif r == 0:
        pi_m = (log_n / (2 * mu + 1)) ** (1 / delta)
        rate = log_n ** (-2 * s / delta)
        regime = "logarithmic"
    else:
        pi_m = math.pi * _solve_implicit_choice(s, r, b, gamma, mu, delta, log_n)
        rate = math.nan
        regime = "implicit"

    m = math.floor(pi_m / math.pi)
    return TheoreticalChoice(max(1, m), pi_m, rate, m < 1, regime)


def _solve_implicit_choice(s, r, b, gamma, mu, delta, log_n) -> float:
    power = 2 * s + 2 * gamma + 1 - r

    def equation(m: float) -> float:
        return (
            power * math.log(m)
            + 2 * mu * (math.pi * m) ** delta
            + 2 * b * math.pi**r * m**r
            - log_n
        )

    lower, upper = 1e-8, 1.0
    if equation(lower) >= 0:
        raise RepresentableRangeError(
            "The equation of the bias variance balance has no root above 1e-8."
        )
    while equation(upper) <= 0:
        upper *= 2
        if upper > 1e8:
            raise RepresentableRangeError(
                "The equation of the bias variance balance cannot be bracketed."
            )
    return optimize.brentq(equation, lower, upper, xtol=1e-12)


@dataclass(frozen=True)
class RiskBound:
    """
    Components of the upper bound of the risk of ĝ_m: the squared bias, the main
    variance term 2Δ(m)/n and the residual; r_m is None when the process has no
    coefficient bound, in which case the residual omits it.
    """

    bias: float
    variance_main: float
    residual: float
    r_m: Optional[float]

    @property
    def total(self) -> float:
        return self.bias + self.variance_main + self.residual

    @property
    def flagged(self) -> bool:
        return self.r_m is None


def risk_bound_terms(
    target: TargetDensity,
    noise: NoiseModel,
    process: DependentProcess,
    m: int,
    n: int,
    k_n: Optional[int] = None,
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
) -> RiskBound:
    """
    Returns the terms of ‖g - g_m‖² + 2Δ(m)/n + m²(M₂+1)/k_n + 2R_m/n, with k_n = n by
    default. Without noise the bound is ‖g - g_m‖² + m(M₂+3)/n + 2R_m/n.
    """
    try:
        r_m = r_m_bounds(process, m, n).best
    except UnsupportedProcessError:
        logger.warning(
            "The process %s has no coefficient bound: R_m is left out", process.name
        )
        r_m = None
    dependence = 2 * r_m / n if r_m is not None else 0.0
    bias = bias_tail(target, m, quad)

    if noise.noise_free:
        return RiskBound(bias, 0.0, m * (target.m2 + 3) / n + dependence, r_m)

    k_n = n if k_n is None else k_n
    return RiskBound(
        bias,
        2 * delta_m(noise, m, quad) / n,
        m * m * (target.m2 + 1) / k_n + dependence,
        r_m,
    )


@dataclass(frozen=True)
class RateFit:
    """
    Least squares slope of log(MISE) against log n, or against log log n for the
    logarithmic regime, with the sample sizes left out of the fit.
    """

    slope: float
    standard_error: float
    abscissa: str
    excluded: Tuple[int, ...] = ()


def rate_fit(
    n_values: Sequence[int],
    mise_values: Sequence[float],
    log_log: bool = False,
    grid_sizes: Optional[Sequence[int]] = None,
) -> RateFit:
    """
    Fits the rate of the MISE; the smallest n is excluded when its model grid is
    reduced to m_n = 1, since no selection happens there.
    """
    points = list(zip(n_values, mise_values))
    excluded: List[int] = []
    if grid_sizes is not None and len(points) > 2 and grid_sizes[0] == 1:
        excluded.append(points[0][0])
        points = points[1:]
    points = [(n, value) for n, value in points if value > 0 and math.isfinite(value)]

    abscissa = "log log n" if log_log else "log n"
    if len(points) < 2:
        return RateFit(math.nan, math.nan, abscissa, tuple(excluded))

    sizes = np.array([n for n, _ in points], dtype=float)
    x = np.log(np.log(sizes)) if log_log else np.log(sizes)
    y = np.log([value for _, value in points])
    fit = stats.linregress(x, y)
    return RateFit(float(fit.slope), float(fit.stderr), abscissa, tuple(excluded))


@dataclass(frozen=True)
class ReplicationCell:
    """
    One replication at one sample size; failed cells carry the error message and
    no estimate.
    """

    n: int
    replication: int
    m_hat: Optional[int]
    mise: Optional[float]
    contrast_values: Tuple[float, ...] = ()
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class SizeSummary:
    n: int
    m_n: int
    grid_clamped: bool
    penalty_values: Tuple[float, ...]
    replications: int
    failures: int
    mean_mise: float
    median_mise: float
    trimmed_mean_mise: float
    mise_standard_error: float
    aggregate_mise: float
    mean_m_hat: float
    oracle_m: Optional[int]
    oracle_mise: Optional[float]
    oracle_standard_error: Optional[float]
    oracle_mise_by_m: Tuple[float, ...]
    adaptive_oracle_ratio: Optional[float]
    theoretical_m: int
    theoretical_pi_m: float
    theoretical_rate: float
    risk_bound: Optional[RiskBound]


@dataclass(frozen=True)
class ExperimentReport:
    schema_version: str
    version: str
    seed: int
    config: Dict[str, Any]
    kappa_a: float
    c_a: float
    sizes: Tuple[SizeSummary, ...]
    cells: Tuple[ReplicationCell, ...]
    rate_fit: RateFit
    failures: int
    valid: bool


def _run(function, items, workers: Optional[int]) -> list:
    items = list(items)
    workers = workers or default_workers()
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(function, items))
    return [function(item) for item in items]


def _aggregate(values: np.ndarray) -> Tuple[float, float, float, float]:
    if len(values) == 0:
        return math.nan, math.nan, math.nan, math.nan
    return (
        float(np.mean(values)),
        float(np.median(values)),
        float(stats.trim_mean(values, TRIM_PROPORTION)),
        float(_standard_error(values)) if len(values) > 1 else 0.0,
    )


def truth_density(config: ExperimentConfig, process: DependentProcess) -> TargetDensity:
    """
    Returns the density the MISE is measured against: the stationary marginal of
    the process. A target named in the configuration must be that marginal.
    """
    truth = process.stationary_density
    if truth is None:
        raise ConfigurationError(
            f"the process {process.name} has no known stationary density to "
            "measure the MISE against",
            "process",
        )
    if process.name == "iid" or "target" not in config.model_fields_set:
        return truth

    configured = config.target.build()
    if configured.name != truth.name or not _same_parameters(
        configured.parameters, truth.parameters
    ):
        raise ConfigurationError(
            f"the process {process.name} has the stationary density {truth.name} "
            f"{truth.parameters}, which contradicts the configured target "
            f"{configured.name} {configured.parameters}; leave the target out",
            "target",
        )
    return truth


def _same_parameters(first: Dict[str, Any], second: Dict[str, Any]) -> bool:
    if first.keys() != second.keys():
        return False
    return all(
        np.shape(first[key]) == np.shape(second[key])
        and np.allclose(first[key], second[key], rtol=1e-12, atol=0.0)
        for key in first
    )


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """
    Runs the experiment described by config. Replications use seeds derived from
    the configured seed, so equal configurations give equal reports; replications
    failing on numerical grounds are recorded and excluded from the aggregates.
    The MISE is measured against the stationary density of the process.
    """
    seed = config.require_seed()
    noise = config.noise.build()
    process = config.process.build(config.target.build())
    target = truth_density(config, process)
    penalty_config = config.penalty.build(noise)
    quad = config.quad.build()
    policy = kn_policy(config.kn)
    kappa_a, c_a = reference_constants(penalty_config.a)
    cache = ProjectionCache(target, quad)
    log_log = noise.smoothness.delta > 0 and target.smoothness.r == 0

    cells: List[ReplicationCell] = []
    sizes: List[SizeSummary] = []

    for size_index, n in enumerate(config.n_values):
        m_max = m_grid_max(noise, n, config.m_max)
        grid = model_grid(noise, n)
        logger.info(
            "Running %s replications with n=%s over the grid 1..%s",
            config.replications,
            n,
            m_max,
        )

        def replicate(index: int, n=n, size_index=size_index, m_max=m_max):
            observations = simulate_observations(
                process,
                noise,
                n,
                derive_seed(seed, ADAPTIVE_STREAM, size_index, index),
            )
            try:
                selection = select_model(
                    observations.observed,
                    noise,
                    penalty_config,
                    policy,
                    quad,
                    m_max=m_max,
                    workers=1,
                )
                estimate = selection.estimate
                mise = mise_against_truth(
                    estimate, target, quad, cache.get(estimate.m, estimate.k_n)
                ).total
            except (NumericalToleranceError, RepresentableRangeError) as error:
                logger.warning("Replication %s at n=%s failed: %s", index, n, error)
                return ReplicationCell(n, index, None, None, error=str(error)), None
            cell = ReplicationCell(
                n, index, selection.m_hat, mise, selection.contrast_values
            )
            return cell, selection.penalty_values

        rows = _run(replicate, range(config.replications), config.workers)
        size_cells = [cell for cell, _ in rows]
        cells.extend(size_cells)
        penalty_values = next((pen for _, pen in rows if pen is not None), ())

        succeeded = [cell for cell in size_cells if not cell.failed]
        values = np.array([cell.mise for cell in succeeded], dtype=float)
        mean, median, trimmed, error = _aggregate(values)
        aggregate = trimmed if config.aggregation == "trimmed" else mean
        mean_m_hat = (
            float(np.mean([cell.m_hat for cell in succeeded])) if succeeded else math.nan
        )

        oracle = None
        risk = None
        if config.include_oracle:
            oracle = oracle_m(
                target,
                noise,
                process,
                n,
                config.oracle_replications or config.replications,
                derive_seed(seed, ORACLE_STREAM, size_index),
                quad,
                policy,
                m_max,
                cache,
                config.workers,
            )
            risk = risk_bound_terms(target, noise, process, oracle.m_breve, n, quad=quad)

        theoretical = theoretical_m_breve(target.smoothness, noise.smoothness, max(n, 3))
        sizes.append(
            SizeSummary(
                n=n,
                m_n=m_max,
                grid_clamped=grid.clamped,
                penalty_values=tuple(penalty_values),
                replications=config.replications,
                failures=len(size_cells) - len(succeeded),
                mean_mise=mean,
                median_mise=median,
                trimmed_mean_mise=trimmed,
                mise_standard_error=error,
                aggregate_mise=aggregate,
                mean_m_hat=mean_m_hat,
                oracle_m=oracle.m_breve if oracle else None,
                oracle_mise=oracle.mise if oracle else None,
                oracle_standard_error=oracle.standard_error if oracle else None,
                oracle_mise_by_m=oracle.mise_by_m if oracle else (),
                adaptive_oracle_ratio=aggregate / oracle.mise
                if oracle and oracle.mise > 0
                else None,
                theoretical_m=theoretical.m,
                theoretical_pi_m=theoretical.pi_m,
                theoretical_rate=theoretical.rate,
                risk_bound=risk,
            )
        )

    failures = sum(summary.failures for summary in sizes)
    total = len(cells)
    valid = failures <= MAX_FAILURE_RATE * total
    if not valid:
        logger.warning(
            "%s of %s replications failed: the experiment is marked invalid",
            failures,
            total,
        )

    fit = rate_fit(
        config.n_values,
        [summary.aggregate_mise for summary in sizes],
        log_log=log_log,
        grid_sizes=[summary.m_n for summary in sizes],
    )

    return ExperimentReport(
        schema_version=SCHEMA_VERSION,
        version=__version__,
        seed=seed,
        config=config.model_dump(mode="json", exclude={"workers"}),
        kappa_a=kappa_a,
        c_a=c_a,
        sizes=tuple(sizes),
        cells=tuple(cells),
        rate_fit=fit,
        failures=failures,
        valid=valid,
    )
