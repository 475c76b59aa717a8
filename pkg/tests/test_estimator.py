import math

import numpy as np
import pytest

from deconv.common import derive_seed, get_generator
from deconv.errors import ConfigurationError
from deconv.estimator import (
    AUTO_KN_MARGIN,
    NOISE_FREE_M_MAX,
    KnMode,
    PenaltyConfig,
    PenaltyVariant,
    argmin_smallest,
    check_penalty_compatibility,
    contrast_value,
    empirical_coefficients,
    evaluate,
    fit_coefficients,
    fit_model,
    imaginary_residual,
    m_grid_max,
    mise_against_truth,
    model_grid,
    penalty,
    reference_constants,
    resolve_kn,
    select_model,
    supersmooth_exponent,
    truncation_check,
    u_star_kernel,
)
from deconv.noise import (
    NoiseModel,
    NoiseSmoothness,
    builtin_noise,
    delta_m,
    lambda1,
    lambda2,
)
from deconv.shannon import ProjectionEstimate, phi, project_l2, sinc
from deconv.targets import bias_tail, builtin_target, squared_norm

NONE = builtin_noise("none")
LAPLACE = builtin_noise("laplace", 1.0)


@pytest.fixture(scope="module")
def gaussian():
    return builtin_target("gaussian")


def laplace_observations(n: int, seed: int) -> np.ndarray:
    generator = get_generator(seed)
    return generator.normal(0.0, 1.0, n) + generator.laplace(0.0, 0.5, n)


def test_reference_constants():
    assert reference_constants(1.5) == (5.0, 25.0)
    with pytest.raises(ConfigurationError):
        reference_constants(1.0)


def test_kernel_without_noise():
    assert u_star_kernel(NONE, 2, 1, 0.3) == pytest.approx(phi(2, 1, 0.3))


@pytest.mark.parametrize(
    "noise",
    [builtin_noise("laplace"), builtin_noise("cauchy", 0.5), builtin_noise("gaussian", 0.5)],
    ids=["laplace", "cauchy", "gaussian"],
)
@pytest.mark.parametrize("m", [1, 2])
def test_kernel_ceiling(noise, m):
    generator = np.random.default_rng(13)
    ceiling = math.sqrt(delta_m(noise, m)) * (1 + 1e-6)
    for j, z in zip(generator.integers(-5, 6, 12), generator.uniform(-4, 4, 12)):
        assert abs(u_star_kernel(noise, m, int(j), float(z))) <= ceiling


def test_kernel_matches_fitted_coefficients():
    # a single observation z gives â_{m,j} = u*_{φ_{m,j}}(z)
    z = 0.7
    estimate = fit_coefficients([z], LAPLACE, 1, 2)
    for j in range(-2, 3):
        kernel = u_star_kernel(LAPLACE, 1, j, z)
        assert estimate.coefficient(j) == pytest.approx(kernel, abs=1e-7)


@pytest.mark.parametrize("m", [1, 2, 4])
def test_noise_free_reduction(m):
    samples = get_generator(21).normal(0.0, 1.0, 100)
    fitted = fit_coefficients(samples, NONE, m, 200)
    direct = empirical_coefficients(samples, m, 200)
    np.testing.assert_allclose(fitted.coeffs, direct.coeffs, atol=1e-7)


def test_fit_coefficients_validation():
    with pytest.raises(ConfigurationError):
        fit_coefficients([], LAPLACE, 1, 2)
    with pytest.raises(ConfigurationError):
        fit_coefficients([0.1, math.inf], LAPLACE, 1, 2)
    with pytest.raises(ConfigurationError):
        fit_coefficients([0.1], LAPLACE, 0, 2)


def test_fit_model_dispatches_on_noise():
    samples = [0.1, -0.4, 0.9]
    direct = empirical_coefficients(samples, 1, 5)
    np.testing.assert_allclose(fit_model(samples, NONE, 1, 5).coeffs, direct.coeffs)
    assert fit_model(samples, LAPLACE, 1, 5).n_samples == 3


def test_contrast_value():
    assert contrast_value(ProjectionEstimate(1, 2, np.zeros(5, dtype=complex))) == 0
    single = empirical_coefficients([0.0], 1, 5)
    assert contrast_value(single) == pytest.approx(-1.0)


@pytest.mark.parametrize(
    "noise,n,expected",
    [
        (LAPLACE, 100000, 3),
        (LAPLACE, 1000, 1),
        (NONE, 50, 50),
    ],
)
def test_model_grid(noise, n, expected):
    assert m_grid_max(noise, n) == expected
    assert not model_grid(noise, n).clamped


def test_model_grid_cap_without_noise():
    assert m_grid_max(NONE, 10**4) == NOISE_FREE_M_MAX
    assert m_grid_max(NONE, 10) == 10
    assert m_grid_max(NONE, 1000, 5) == 5
    assert m_grid_max(LAPLACE, 100000, 10) == 3


def test_supersmooth_model_grid():
    n = 10**6
    grid = model_grid(builtin_noise("gaussian", 1.0), n)
    log_n = math.log(n)
    bound = math.sqrt(log_n - 0.5 * math.log(log_n))
    assert grid.bound == pytest.approx(bound)
    assert grid.m_n == max(1, math.floor(bound / math.pi))


def test_model_grid_is_clamped():
    grid = model_grid(builtin_noise("gaussian", 3.0), 10)
    assert grid.m_n == 1
    assert grid.clamped


def test_model_grid_requires_two_samples():
    with pytest.raises(ConfigurationError):
        model_grid(LAPLACE, 1)


def test_ordinary_penalty():
    config = PenaltyConfig(1.5, PenaltyVariant.ORDINARY)
    value = penalty(config, LAPLACE, 1, 1000)
    assert value == pytest.approx(25 * 1.5 * delta_m(LAPLACE, 1) / 1000)
    assert value == pytest.approx(1.0149, rel=1e-3)


def test_no_noise_penalty():
    config = PenaltyConfig(1.5, PenaltyVariant.NO_NOISE)
    assert penalty(config, NONE, 4, 1000) == pytest.approx(0.768)
    dependent = PenaltyConfig(1.5, PenaltyVariant.NO_NOISE, beta_sum=0.5)
    assert penalty(dependent, NONE, 4, 1000) == pytest.approx(0.768 * 3)


def test_supersmooth_penalty_above_one_third():
    noise = builtin_noise("gaussian", 1.0)
    smoothness = noise.smoothness
    config = PenaltyConfig(2.0, PenaltyVariant.SUPERSMOOTH)
    ratio = lambda2(noise) / lambda1(smoothness, smoothness.kappa0_prime)
    factor = 1 + 48 * smoothness.mu * math.pi**2 * ratio
    expected = 8 * 2.0 * factor * delta_m(noise, 1) * 1**2 / 500
    assert penalty(config, noise, 1, 500) == pytest.approx(expected)


def test_supersmooth_penalty_below_one_third():
    noise = NoiseModel(
        name="stretched",
        cf=lambda x: np.exp(-np.abs(np.asarray(x, dtype=float)) ** 0.25),
        log_abs_cf=lambda x: -np.abs(np.asarray(x, dtype=float)) ** 0.25,
        smoothness=NoiseSmoothness(mu=1.0, delta=0.25),
        sampler=lambda generator, size: np.zeros(size),
    )
    config = PenaltyConfig(1.5, PenaltyVariant.SUPERSMOOTH)
    assert penalty(config, noise, 2, 100) == pytest.approx(
        24 * 1.5 * delta_m(noise, 2) / 100
    )


def test_refined_penalties():
    delta = delta_m(LAPLACE, 2)
    beta = PenaltyConfig(1.5, PenaltyVariant.REFINED_BETA, beta_sum=0.25)
    assert penalty(beta, LAPLACE, 2, 1000) == pytest.approx(
        (24 * 1.5 * delta + 128 * 1.5 * 2 * 2) / 1000
    )
    tau = PenaltyConfig(1.5, PenaltyVariant.REFINED_TAU, tau_sum=1.0)
    assert penalty(tau, LAPLACE, 2, 1000) == pytest.approx(
        24 * 1.5 * delta / 1000
        + 64 * 1.5 * (1 + 38 * math.log(2)) * (2 + math.pi * 4) / 1000
    )


def test_penalty_scale():
    base = PenaltyConfig(1.5, PenaltyVariant.ORDINARY)
    scaled = PenaltyConfig(1.5, PenaltyVariant.ORDINARY, scale=0.5)
    assert penalty(scaled, LAPLACE, 3, 200) == pytest.approx(
        0.5 * penalty(base, LAPLACE, 3, 200)
    )


@pytest.mark.parametrize(
    "variant,noise",
    [
        (PenaltyVariant.NO_NOISE, LAPLACE),
        (PenaltyVariant.SUPERSMOOTH, NONE),
        (PenaltyVariant.ORDINARY, builtin_noise("gaussian")),
    ],
)
def test_penalty_mismatch(variant, noise):
    with pytest.raises(ConfigurationError) as error:
        check_penalty_compatibility(PenaltyConfig(1.5, variant), noise)
    assert error.value.key_path == "penalty.variant"


@pytest.mark.parametrize(
    "options,key",
    [
        ({"a": 1.0}, "penalty.a"),
        ({"variant": PenaltyVariant.REFINED_BETA}, "penalty.beta_sum"),
        ({"variant": PenaltyVariant.REFINED_TAU}, "penalty.tau_sum"),
        ({"scale": 0.0}, "penalty.scale"),
        ({"beta_sum": -1.0}, "penalty.beta_sum"),
    ],
)
def test_penalty_config_validation(options, key):
    with pytest.raises(ConfigurationError) as error:
        PenaltyConfig(**options)
    assert error.value.key_path == key


@pytest.mark.parametrize(
    "delta,expected", [(0.2, 0.0), (0.5, 0.25), (1.0, 1.0), (2.0, 2.0)]
)
def test_supersmooth_exponent(delta, expected):
    assert supersmooth_exponent(delta) == pytest.approx(expected)


def test_resolve_kn():
    samples = [0.5, -2.25, 1.0]
    assert resolve_kn(KnMode.EXACT, 2, samples) == 3
    assert resolve_kn("exact", 2, samples, noise_free=True) == 9
    assert resolve_kn("auto", 2, samples) == math.ceil(4.5) + AUTO_KN_MARGIN
    assert resolve_kn(17, 2, samples) == 17


@pytest.mark.parametrize("policy", [0, "bogus", True])
def test_resolve_kn_errors(policy):
    with pytest.raises(ConfigurationError):
        resolve_kn(policy, 1, [0.0])


def test_argmin_smallest():
    assert argmin_smallest([2.0, 1.0, 1.0]) == 2
    assert argmin_smallest([0.5]) == 1


def test_select_model_with_single_model():
    samples = laplace_observations(50, 1)
    result = select_model(
        samples, LAPLACE, PenaltyConfig(variant=PenaltyVariant.ORDINARY), "auto", m_max=1
    )
    assert result.m_hat == 1
    assert result.m_n == 1
    assert len(result.contrast_values) == 1


def test_select_model_minimizes_the_criterion():
    samples = get_generator(derive_seed(3, 1)).normal(0.0, 1.0, 200)
    config = PenaltyConfig(1.5, PenaltyVariant.NO_NOISE)
    result = select_model(samples, NONE, config, KnMode.AUTO, m_max=6)

    assert result.m_n == 6
    assert len(result.estimates) == 6
    assert result.m_hat == argmin_smallest(result.objective_values)
    assert result.estimate is result.estimates[result.m_hat - 1]
    assert result.penalty_values == tuple(
        penalty(config, NONE, m, 200) for m in range(1, 7)
    )
    assert result.k_n_values == tuple(
        resolve_kn(KnMode.AUTO, m, samples) for m in range(1, 7)
    )


def test_select_model_workers_do_not_change_the_result():
    samples = laplace_observations(80, 4)
    config = PenaltyConfig(variant=PenaltyVariant.NO_NOISE)
    single = select_model(samples, NONE, config, "auto", m_max=4, workers=1)
    pooled = select_model(samples, NONE, config, "auto", m_max=4, workers=3)
    assert single.m_hat == pooled.m_hat
    assert single.contrast_values == pooled.contrast_values


@pytest.mark.parametrize(
    "config,noise,m_max",
    [
        (PenaltyConfig(1.5, PenaltyVariant.NO_NOISE), NONE, 30),
        (PenaltyConfig(1.5, PenaltyVariant.ORDINARY), LAPLACE, 30),
        (PenaltyConfig(2.0, PenaltyVariant.SUPERSMOOTH), builtin_noise("gaussian", 0.3), 15),
        (PenaltyConfig(1.5, PenaltyVariant.SUPERSMOOTH), builtin_noise("cauchy"), 30),
        (
            PenaltyConfig(1.5, PenaltyVariant.REFINED_BETA, beta_sum=0.5),
            LAPLACE,
            30,
        ),
        (PenaltyConfig(1.5, PenaltyVariant.REFINED_TAU, tau_sum=1.0), LAPLACE, 30),
    ],
)
def test_penalty_increases_with_m(config, noise, m_max):
    values = [penalty(config, noise, m, 1000) for m in range(1, m_max + 1)]
    assert all(later > earlier for earlier, later in zip(values, values[1:]))


def test_constant_contrast_shift_keeps_the_choice(monkeypatch):
    samples = laplace_observations(300, 6)
    config = PenaltyConfig(1.5, PenaltyVariant.NO_NOISE, scale=0.01)
    reference = select_model(samples, NONE, config, "auto", m_max=6, workers=1)

    original = contrast_value
    monkeypatch.setattr(
        "deconv.estimator.contrast_value", lambda estimate: original(estimate) + 17.5
    )
    shifted = select_model(samples, NONE, config, "auto", m_max=6, workers=1)
    assert shifted.m_hat == reference.m_hat
    assert list(shifted.contrast_values) == pytest.approx(
        [value + 17.5 for value in reference.contrast_values]
    )


@pytest.mark.parametrize(
    "noise,variant",
    [(LAPLACE, PenaltyVariant.ORDINARY), (NONE, PenaltyVariant.NO_NOISE)],
)
def test_huge_penalty_selects_the_smallest_model(noise, variant):
    samples = laplace_observations(10_000, 7)
    config = PenaltyConfig(1.5, variant, scale=1e6)
    result = select_model(samples, noise, config, "auto", m_max=6, workers=1)
    assert result.m_n > 1
    assert result.m_hat == 1


@pytest.mark.slow
def test_selection_matches_a_brute_force_search():
    # the Laplace grid n^{1/5}/π holds three models from n = 10⁵ on
    n = 100_000
    noise = builtin_noise("laplace", 0.5)
    generator = get_generator(derive_seed(41, 0))
    samples = generator.normal(0.0, 1.0, n) + noise.sample(generator, n)
    config = PenaltyConfig(1.5, PenaltyVariant.ORDINARY)
    result = select_model(samples, noise, config, "auto", workers=1)

    objective = []
    for m in range(1, result.m_n + 1):
        radius = math.ceil(m * float(np.max(np.abs(samples)))) + AUTO_KN_MARGIN
        coeffs = fit_coefficients(samples, noise, m, radius).coeffs
        objective.append(
            -float(np.sum(np.abs(coeffs) ** 2)) + 25 * 1.5 * delta_m(noise, m) / n
        )
    assert result.m_n == 3
    assert result.m_hat == int(np.argmin(objective)) + 1
    np.testing.assert_allclose(result.objective_values, objective, rtol=1e-9)


def test_evaluate_zero_estimate():
    estimate = ProjectionEstimate(2, 3, np.zeros(7, dtype=complex))
    np.testing.assert_array_equal(evaluate(estimate, [-1.0, 0.0, 2.0]), 0.0)


def test_evaluate_single_basis_function():
    coeffs = np.zeros(5, dtype=complex)
    coeffs[2] = 1.0
    estimate = ProjectionEstimate(1, 2, coeffs)
    grid = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(evaluate(estimate, grid), sinc(math.pi * grid))
    assert imaginary_residual(estimate, grid) == 0.0


def test_evaluate_recovers_the_target(gaussian):
    projection = project_l2(gaussian.cf, 4, 40)
    grid = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(
        evaluate(projection, grid), gaussian.density(grid), atol=1e-5
    )
    assert imaginary_residual(projection, grid) < 1e-6


def test_mise_of_exact_projection(gaussian):
    projection = project_l2(gaussian.cf, 1, 40)
    mise = mise_against_truth(projection, gaussian)
    assert mise.projection_error == pytest.approx(0.0, abs=1e-7)
    assert mise.total == pytest.approx(bias_tail(gaussian, 1), abs=1e-7)


def test_mise_of_zero_estimate(gaussian):
    estimate = ProjectionEstimate(2, 10, np.zeros(21, dtype=complex))
    assert mise_against_truth(estimate, gaussian).total == pytest.approx(
        squared_norm(gaussian), rel=1e-6
    )


def test_mise_reuses_a_wider_projection(gaussian):
    samples = laplace_observations(60, 8)
    estimate = fit_coefficients(samples, LAPLACE, 1, 6)
    wide = project_l2(gaussian.cf, 1, 16)
    assert mise_against_truth(estimate, gaussian, projection=wide).total == (
        pytest.approx(mise_against_truth(estimate, gaussian).total, rel=1e-6)
    )


def test_truncation_check():
    samples = laplace_observations(40, 2)
    check = truncation_check(samples, LAPLACE, 1, 8)
    assert check.k_n == 8
    assert check.tail_bound >= 0
    assert check.contrast_change == pytest.approx(check.tail_bound, abs=1e-12)


@pytest.mark.slow
def test_coefficients_are_unbiased(gaussian):
    m, n, replications = 2, 500, 2000
    noise = builtin_noise("laplace", 0.5)
    exact = project_l2(gaussian.cf, m, 2)
    draws = np.empty((replications, 5), dtype=complex)
    for index in range(replications):
        generator = get_generator(derive_seed(99, index))
        samples = generator.normal(0.0, 1.0, n) + noise.sample(generator, n)
        draws[index] = fit_coefficients(samples, noise, m, 2).coeffs

    mean = draws.mean(axis=0)
    errors = np.sqrt(
        draws.real.var(axis=0, ddof=1) + draws.imag.var(axis=0, ddof=1)
    ) / math.sqrt(replications)
    assert np.all(np.abs(mean - exact.coeffs) <= 3 * errors)
