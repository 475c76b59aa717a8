import math

import numpy as np
import pytest
from scipy import stats

from deconv.errors import ConfigurationError, UnsupportedProcessError
from deconv.noise import builtin_noise
from deconv.processes import (
    DependentProcess,
    bernoulli_ar,
    builtin_process,
    burn_in_floor,
    contractive_chain,
    empirical_char_covariance,
    empirical_r_m,
    expanding_map,
    gaussian_ar1,
    iid_process,
    linear_process,
    r_m_alpha,
    r_m_associated,
    r_m_bounds,
)
from deconv.targets import builtin_target


@pytest.fixture(scope="module")
def uniform():
    return builtin_target("uniform")


def test_bernoulli_ar_tau_bound():
    assert bernoulli_ar().tau_bound(3) == pytest.approx(0.125)


def test_bernoulli_ar_is_deterministic():
    process = bernoulli_ar()
    np.testing.assert_array_equal(process.generate(50, 7), process.generate(50, 7))
    assert not np.array_equal(process.generate(50, 7), process.generate(50, 8))


def test_bernoulli_ar_marginal():
    path = bernoulli_ar().generate(20000, 1)
    assert path.min() >= 0 and path.max() <= 1
    assert path.mean() == pytest.approx(0.5, abs=0.02)
    assert path.var() == pytest.approx(1 / 12, abs=0.01)


def test_bernoulli_ar_recursion():
    path = bernoulli_ar().generate(200, 3)
    bits = 2 * path[1:] - path[:-1]
    np.testing.assert_allclose(bits, np.round(bits), atol=1e-9)
    assert set(np.round(bits).astype(int)) <= {0, 1}


def test_bernoulli_ar_is_not_beta_mixing():
    process = bernoulli_ar()
    assert not process.is_beta_mixing
    assert process.beta_bound is None


def test_expanding_map_bound():
    process = expanding_map()
    np.testing.assert_allclose(process.tau_bound(np.array([1, 2, 3])), [1, 0.5, 0.25])
    assert process.metadata["map"] == "2x mod 1"


def test_generate_requires_positive_n():
    with pytest.raises(ConfigurationError):
        bernoulli_ar().generate(0, 1)


def test_contractive_chain_bound_is_geometric():
    process = contractive_chain(lambda x: 0.6 * x, 0.6, builtin_noise("laplace"))
    values = process.tau_bound(np.arange(1, 6))
    np.testing.assert_allclose(values[1:] / values[:-1], 0.6)


def test_contractive_chain_burn_in_warning():
    floor = burn_in_floor(0.9)
    assert floor == math.ceil(math.log(1e-12) / math.log(0.9))

    process = contractive_chain(
        lambda x: 0.9 * x, 0.9, builtin_noise("gaussian"), burn_in=floor - 1
    )
    assert "warning" in process.metadata

    process = contractive_chain(
        lambda x: 0.9 * x, 0.9, builtin_noise("gaussian"), burn_in=floor
    )
    assert "warning" not in process.metadata


def test_contractive_chain_path():
    process = contractive_chain(
        lambda x: 0.5 * x, 0.5, builtin_noise("gaussian"), burn_in=100
    )
    path = process.generate(30, 4)
    assert path.shape == (30,)
    np.testing.assert_array_equal(path, process.generate(30, 4))


@pytest.mark.parametrize("kappa", [0.0, 1.0, -0.2])
def test_contractive_chain_kappa(kappa):
    with pytest.raises(ConfigurationError):
        contractive_chain(lambda x: kappa * x, kappa, builtin_noise("gaussian"))


def test_contractive_chain_needs_integrable_innovation():
    with pytest.raises(ConfigurationError):
        contractive_chain(lambda x: 0.5 * x, 0.5, builtin_noise("cauchy"))


def test_gaussian_ar1_moments():
    kappa = 0.6
    path = gaussian_ar1(kappa, 1.0).generate(40000, 2)
    assert path.var() == pytest.approx(1 / (1 - kappa**2), rel=0.05)
    correlation = np.corrcoef(path[:-1], path[1:])[0, 1]
    assert correlation == pytest.approx(kappa, abs=0.03)


def test_linear_process_without_memory():
    process = linear_process([1.0, 0.0, 0.0], builtin_noise("gaussian"))
    np.testing.assert_array_equal(process.tau_bound(np.array([1, 2, 5])), 0)


def test_linear_process_order_zero_is_iid():
    process = linear_process([1.0], builtin_noise("laplace"))
    assert process.is_beta_mixing
    path = process.generate(10, 5)
    expected = builtin_noise("laplace").sample(np.random.default_rng(5), 10)
    np.testing.assert_allclose(path, expected)


def test_linear_process_bound():
    noise = builtin_noise("gaussian")
    process = linear_process([1.0, 0.5, 0.25], noise)
    first = min(2 * noise.abs_mean * 0.75, math.sqrt(2 * noise.variance * 0.3125))
    assert process.tau_bound(1) == pytest.approx(first)
    assert process.tau_bound(3) == 0


def test_linear_process_tail_tolerance():
    with pytest.raises(ConfigurationError) as error:
        linear_process([1.0, 0.5], builtin_noise("gaussian"), tail=1e-3)
    assert error.value.key_path == "process.coeffs"


def test_iid_bounds(uniform):
    bounds = r_m_bounds(iid_process(uniform), 3, 1000)
    assert (bounds.r_beta, bounds.r_tau) == (0.0, 0.0)
    assert bounds.best == 0.0


def test_bernoulli_ar_r_m():
    bounds = r_m_bounds(bernoulli_ar(), 2, 200)
    assert bounds.r_beta is None
    assert bounds.r_tau == pytest.approx(4 * math.pi)
    assert bounds.best == bounds.r_tau


def test_r_m_with_beta_bound_only():
    process = DependentProcess(
        name="beta_only",
        path=lambda generator, n: generator.uniform(size=n),
        beta_bound=lambda k: 0.5 ** np.asarray(k, dtype=float),
    )
    bounds = r_m_bounds(process, 1, 100)
    assert bounds.r_tau is None
    assert bounds.r_beta == pytest.approx(4.0)


def test_r_m_without_bounds():
    process = DependentProcess(
        name="opaque", path=lambda generator, n: generator.uniform(size=n)
    )
    with pytest.raises(UnsupportedProcessError):
        r_m_bounds(process, 1, 100)


def test_r_m_single_observation():
    assert r_m_bounds(bernoulli_ar(), 2, 1).r_tau == 0.0


def test_other_r_m_bounds():
    assert r_m_alpha(0.5, 3) == pytest.approx(24.0)
    assert r_m_associated(0.3, 2) == pytest.approx(8 * math.pi**2 / 3 * 8 * 0.3)


def test_builtin_process(uniform):
    assert builtin_process("iid", target=uniform).name == "iid"
    assert builtin_process("bernoulli_ar").name == "bernoulli_ar"
    process = builtin_process(
        "contractive_chain", {"kappa": 0.3, "innovation": "laplace", "burn_in": 200}
    )
    assert process.burn_in == 200
    assert builtin_process("linear_process", {"coeffs": [1, 0.5]}).metadata[
        "order"
    ] == 1


@pytest.mark.parametrize(
    "name,params,key",
    [
        ("random_walk", {}, "process.name"),
        ("gaussian_ar1", {"rho": 0.5}, "process.rho"),
        ("iid", {}, "target"),
    ],
)
def test_builtin_process_errors(name, params, key):
    with pytest.raises(ConfigurationError) as error:
        builtin_process(name, params)
    assert error.value.key_path == key


def test_empirical_char_covariance(uniform):
    iid_path = iid_process(uniform).generate(20000, 9)
    chain_path = bernoulli_ar().generate(20000, 9)

    iid_value, iid_error = empirical_char_covariance(iid_path, math.pi, 1)
    chain_value, _ = empirical_char_covariance(chain_path, math.pi, 1)

    assert iid_value < 4 * iid_error + 0.02
    assert chain_value > 0.1


def test_empirical_char_covariance_lag_range():
    with pytest.raises(ConfigurationError):
        empirical_char_covariance(np.zeros(30), 1.0, 15)


def test_empirical_r_m(uniform):
    iid_path = iid_process(uniform).generate(4000, 10)
    chain_path = bernoulli_ar().generate(4000, 10)
    iid_value = empirical_r_m(iid_path, 1, 3)
    chain_value = empirical_r_m(chain_path, 1, 3)
    assert 0 <= iid_value < chain_value


def test_builtin_chains_carry_their_gaussian_marginal():
    chain = builtin_process(
        "contractive_chain", {"kappa": 0.6, "offset": 0.4, "scale": 0.8}
    )
    assert chain.stationary_density.name == "gaussian"
    assert chain.stationary_density.parameters == pytest.approx({"mean": 1.0, "sd": 1.0})

    linear = builtin_process("linear_process", {"coeffs": [1.0, 0.5, 0.25], "scale": 2.0})
    assert linear.stationary_density.parameters == pytest.approx(
        {"mean": 0.0, "sd": 2.0 * math.sqrt(1.3125)}
    )


@pytest.mark.parametrize(
    "name,params",
    [
        ("contractive_chain", {"innovation": "laplace"}),
        ("linear_process", {"coeffs": [1.0, 0.5], "innovation": "log_chi_squared"}),
    ],
)
def test_chains_without_closed_form_marginal(name, params):
    assert builtin_process(name, params).stationary_density is None


# states 64 steps apart are independent up to a negligible correlation
THINNING = 64

MARGINAL_CASES = [
    ("bernoulli_ar", {}),
    ("expanding_map", {}),
    ("gaussian_ar1", {"kappa": 0.7, "sigma": 0.5}),
    ("contractive_chain", {"kappa": 0.5, "offset": 1.0}),
    ("linear_process", {"coeffs": [1.0, -0.6, 0.3]}),
]


def marginal_cdf(truth):
    parameters = truth.parameters
    if truth.name == "uniform":
        return stats.uniform(parameters["a"], parameters["b"] - parameters["a"]).cdf
    return stats.norm(parameters["mean"], parameters["sd"]).cdf


@pytest.mark.parametrize("name,params", MARGINAL_CASES)
def test_path_follows_the_stationary_density(name, params):
    process = builtin_process(name, params)
    path = process.generate(100_000, 21)[::THINNING]
    result = stats.kstest(path, marginal_cdf(process.stationary_density))
    assert result.pvalue > 0.001


@pytest.mark.parametrize("name,params", MARGINAL_CASES)
def test_path_halves_have_the_same_law(name, params):
    path = builtin_process(name, params).generate(100_000, 22)[::THINNING]
    half = len(path) // 2
    result = stats.ks_2samp(path[:half], path[half:])
    assert result.pvalue > 0.001


@pytest.mark.parametrize(
    "process",
    [
        bernoulli_ar(),
        expanding_map(),
        gaussian_ar1(0.8),
        contractive_chain(lambda x: 0.7 * x, 0.7, builtin_noise("laplace")),
        linear_process([1.0, 0.5, -0.25, 0.125], builtin_noise("gaussian")),
        linear_process([1.0], builtin_noise("laplace")),
    ],
)
def test_coefficient_bounds_do_not_increase(process):
    lags = np.arange(1, 101)
    for bound in (process.tau_bound, process.beta_bound):
        if bound is None:
            continue
        values = np.asarray(bound(lags), dtype=float)
        assert np.all(values >= 0)
        assert np.all(np.diff(values) <= 0)


@pytest.mark.parametrize("process", [bernoulli_ar(), gaussian_ar1(0.5)])
@pytest.mark.parametrize("x", [1.0, math.pi])
@pytest.mark.parametrize("lag", [1, 2, 4])
def test_char_covariance_is_below_the_tau_bound(process, x, lag):
    # e^{ix·} is |x|-Lipschitz
    path = process.generate(40_000, 23)
    value, error = empirical_char_covariance(path, x, lag)
    assert value <= abs(x) * float(process.tau_bound(lag)) + 5 * error
