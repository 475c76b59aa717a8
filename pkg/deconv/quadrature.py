"""
This module provides the numerical integration routines used to compute Fourier
side inner products on [-πm, πm]: a Romberg-checked trapezoid rule on uniform grids
evaluated with the FFT, adaptive oscillatory quadrature, and tensor Gauss-Legendre
rules for double integrals.
"""
import math
import warnings
from typing import Callable, Tuple

import numpy as np
from scipy import integrate

from deconv.common import QuadratureSpec
from deconv.errors import InsufficientNodesError, NumericalToleranceError
from deconv.logs import logger

ComplexFunction = Callable[[np.ndarray], np.ndarray]

ROMBERG_LEVELS = 4
MIN_UNIFORM_NODES = 64


def initial_node_count(m: int, k_n: int, frequency: float) -> int:
    """
    Returns the starting number of intervals of the uniform grid on [-πm, πm]: eight
    nodes per period of the fastest oscillation exp(ix(z - j/m)).
    """
    wavelengths = k_n + m * abs(frequency)
    return max(MIN_UNIFORM_NODES, 2 ** math.ceil(math.log2(8 * wavelengths + 16)))


def nyquist_floor(m: int, k_n: int, frequency: float) -> int:
    return 2 * (k_n + math.ceil(m * abs(frequency))) + 1


def _trapezoid_dft(values: np.ndarray, step: float, k_n: int) -> np.ndarray:
    # values sampled at x_k = -πm + k·step, k = 0..N; the end nodes share the same
    # phase, so they fold into index 0 of a length N transform
    intervals = len(values) - 1
    folded = values[:-1].copy()
    folded[0] = 0.5 * (values[0] + values[-1])
    spectrum = np.fft.fft(folded)
    indices = np.arange(-k_n, k_n + 1)
    signs = np.where(indices % 2 == 0, 1.0, -1.0)
    return step * signs * spectrum[indices % intervals]


def _romberg_dft(
    values: np.ndarray, step: float, k_n: int
) -> Tuple[np.ndarray, np.ndarray]:
    table = []
    for level in range(ROMBERG_LEVELS - 1, -1, -1):
        stride = 2**level
        table.append([_trapezoid_dft(values[::stride], step * stride, k_n)])

    for row in range(1, ROMBERG_LEVELS):
        for column in range(1, row + 1):
            factor = 4.0**column
            table[row].append(
                (factor * table[row][column - 1] - table[row - 1][column - 1])
                / (factor - 1.0)
            )

    best = table[-1][-1]
    error = np.abs(best - table[-1][-2])
    return best, error


def fourier_coefficients(
    func: ComplexFunction,
    m: int,
    k_n: int,
    frequency: float,
    quad: QuadratureSpec,
) -> np.ndarray:
    """
    Returns the table (1/(2π√m)) ∫_{-πm}^{πm} exp(-ijx/m) func(x) dx for |j| <= k_n,
    indexed by j + k_n.

    frequency is the largest angular frequency of func itself (for example max|Z_i|
    for empirical characteristic functions); it sets the starting grid.
    """
    half_width = math.pi * m
    factor = 1.0 / (2.0 * math.pi * math.sqrt(m))

    if quad.nodes is not None:
        floor = nyquist_floor(m, k_n, frequency)
        if quad.nodes < floor:
            raise InsufficientNodesError(
                f"The uniform grid with {quad.nodes} nodes cannot resolve the "
                f"oscillations of {2 * k_n + 1} coefficients at m={m}.",
                required=floor,
            )
        intervals = 2**ROMBERG_LEVELS * math.ceil(quad.nodes / 2**ROMBERG_LEVELS)
        nodes = np.linspace(-half_width, half_width, intervals + 1)
        values = func(nodes)
        _ensure_finite(values, m)
        best, _ = _romberg_dft(values, 2 * half_width / intervals, k_n)
        return factor * best

    intervals = initial_node_count(m, k_n, frequency)
    nodes = np.linspace(-half_width, half_width, intervals + 1)
    values = func(nodes)

    while True:
        _ensure_finite(values, m)
        step = 2 * half_width / intervals
        best, error = _romberg_dft(values, step, k_n)
        best = factor * best
        error = factor * error
        worst = int(np.argmax(error))
        threshold = quad.tolerance * max(1.0, float(np.max(np.abs(best))))

        if error[worst] <= threshold:
            logger.debug(
                "Uniform grid converged at m=%s with %s intervals (k_n=%s)",
                m,
                intervals,
                k_n,
            )
            return best

        if 2 * intervals > quad.max_nodes:
            raise NumericalToleranceError(
                f"The uniform grid quadrature at m={m} did not converge within "
                f"{quad.max_nodes} nodes",
                worst_index=worst - k_n,
                error_estimate=float(error[worst]),
            )

        midpoints = nodes[:-1] + 0.5 * step
        refined = np.empty(2 * intervals + 1, dtype=complex)
        refined[::2] = values
        refined[1::2] = func(midpoints)
        nodes = np.linspace(-half_width, half_width, 2 * intervals + 1)
        values = refined
        intervals *= 2


def _ensure_finite(values: np.ndarray, m: int) -> None:
    if not np.all(np.isfinite(values)):
        raise NumericalToleranceError(
            f"The integrand is not finite on [-πm, πm] for m={m}: the noise "
            "characteristic function underflows"
        )


def _real_quad(func, lower: float, upper: float, quad: QuadratureSpec, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, error = integrate.quad(
                func,
                lower,
                upper,
                epsabs=quad.tolerance,
                epsrel=quad.tolerance,
                **kwargs,
            )
        except integrate.IntegrationWarning as warning:
            raise NumericalToleranceError(
                f"Adaptive quadrature on [{lower}, {upper}] failed: {warning}",
                omega=kwargs.get("wvar"),
            ) from warning
    return value, error


def oscillatory_integral(
    func: Callable[[float], complex],
    omega: float,
    lower: float,
    upper: float,
    quad: QuadratureSpec,
) -> complex:
    """
    Returns ∫_lower^upper exp(iωx) func(x) dx for a complex valued, non oscillating
    func, using Fourier weighted adaptive quadrature.
    """

    def real_part(x):
        return complex(func(x)).real

    def imag_part(x):
        return complex(func(x)).imag

    if omega == 0:
        real, _ = _real_quad(real_part, lower, upper, quad, limit=quad.limit)
        imag, _ = _real_quad(imag_part, lower, upper, quad, limit=quad.limit)
        return complex(real, imag)

    periods = abs(omega) * (upper - lower) / (2 * math.pi)
    limit = max(quad.limit, int(4 * periods) + 50)
    options = dict(wvar=omega, limit=limit, maxp1=max(50, limit))

    cos_real, _ = _real_quad(real_part, lower, upper, quad, weight="cos", **options)
    sin_real, _ = _real_quad(real_part, lower, upper, quad, weight="sin", **options)
    cos_imag, _ = _real_quad(imag_part, lower, upper, quad, weight="cos", **options)
    sin_imag, _ = _real_quad(imag_part, lower, upper, quad, weight="sin", **options)

    return complex(cos_real - sin_imag, sin_real + cos_imag)


def real_integral(
    func: Callable[[float], float],
    lower: float,
    upper: float,
    quad: QuadratureSpec,
    **kwargs,
) -> float:
    """
    Returns ∫_lower^upper func(x) dx with adaptive quadrature; upper may be inf.
    """
    kwargs.setdefault("limit", quad.limit)
    value, _ = _real_quad(func, lower, upper, quad, **kwargs)
    return value


def gauss_legendre_nodes(
    lower: float, upper: float, panels: int, order: int = 16
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Returns nodes and weights of a composite Gauss-Legendre rule.
    """
    base_nodes, base_weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lower, upper, panels + 1)
    half = 0.5 * np.diff(edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    nodes = (centers[:, None] + half[:, None] * base_nodes[None, :]).ravel()
    weights = (half[:, None] * base_weights[None, :]).ravel()
    return nodes, weights


def tensor_integral(
    func: Callable[[np.ndarray, np.ndarray], np.ndarray],
    lower: float,
    upper: float,
    panels: int,
    quad: QuadratureSpec,
    order: int = 16,
) -> float:
    """
    Returns the double integral of func over [lower, upper]² with a tensor composite
    Gauss-Legendre rule, refusing grids above the configured budget.
    """
    per_axis = panels * order
    required = per_axis * per_axis
    if required > quad.max_nodes_2d:
        raise InsufficientNodesError(
            f"The double quadrature needs {per_axis} nodes per axis, above the "
            f"budget of {quad.max_nodes_2d} nodes.",
            required=required,
        )
    nodes, weights = gauss_legendre_nodes(lower, upper, panels, order)
    x, y = np.meshgrid(nodes, nodes, indexing="ij")
    values = func(x, y)
    return float(np.real(np.sum(weights[:, None] * weights[None, :] * values)))
