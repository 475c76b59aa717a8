"""
This module provides the Shannon (sinc) orthonormal system

    φ_{m,j}(x) = √m · sinc(π(mx - j)),

its Fourier transforms, and projections of densities known through their
characteristic functions on the truncated spaces S_m^{(n)}.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from deconv.common import DEFAULT_QUADRATURE, QuadratureSpec
from deconv.quadrature import fourier_coefficients

ArrayLike = Union[float, np.ndarray]

SERIES_THRESHOLD = 1e-4


def sinc(u: ArrayLike) -> ArrayLike:
    """
    Returns sin(u)/u, with the removable singularity handled by a series branch
    for |u| < 1e-4.
    """
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < SERIES_THRESHOLD
    safe = np.where(small, 1.0, u)
    squared = u * u
    values = np.where(
        small, 1.0 - squared / 6.0 + squared * squared / 120.0, np.sin(safe) / safe
    )
    return values if values.ndim else float(values)


def phi(m: int, j: int, x: ArrayLike) -> ArrayLike:
    """
    Returns φ_{m,j}(x) = √m · sin(π(mx - j)) / (π(mx - j)).

    phi(4, 3, 0.75) -> 2.0
    """
    return math.sqrt(m) * sinc(math.pi * (m * np.asarray(x, dtype=float) - j))


def phi_fourier(m: int, j: int, x: ArrayLike) -> ArrayLike:
    """
    Returns the Fourier transform φ*_{m,j}(x) = m^{-1/2} exp(ijx/m) 1{|x| <= πm},
    with the convention u*(x) = ∫ exp(itx) u(t) dt. The boundary |x| = πm belongs
    to the support.
    """
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) <= math.pi * m
    values = np.where(inside, np.exp(1j * j * x / m) / math.sqrt(m), 0.0 + 0.0j)
    return values if values.ndim else complex(values)


@dataclass(frozen=True)
class TruncatedSum:
    """
    Value of Σ_{|j|<=J} φ_{m,j}(x)², and the analytic bound 2m/(π²J) on its
    distance to the limit m.
    """

    value: float
    tail_bound: float


def sum_phi_squared(m: int, x: float, truncation: int) -> TruncatedSum:
    """
    Returns Σ_{|j|<=J} φ_{m,j}(x)², which increases to m as J grows.
    """
    indices = np.arange(-truncation, truncation + 1)
    values = phi(m, 0, x - indices / m)
    tail_bound = 2 * m / (math.pi**2 * truncation) if truncation > 0 else math.inf
    return TruncatedSum(float(np.sum(values * values)), tail_bound)


@dataclass(frozen=True)
class ProjectionEstimate:
    """
    An element Σ_{|j|<=k_n} a_{m,j} φ_{m,j} of S_m^{(n)}.

    coeffs[j + k_n] holds the (complex) coefficient a_{m,j}; n_samples is the number
    of observations behind an estimate, or zero for exact projections.
    """

    m: int
    k_n: int
    coeffs: np.ndarray = field(repr=False, compare=False)
    n_samples: int = 0

    def __post_init__(self) -> None:
        if len(self.coeffs) != 2 * self.k_n + 1:
            raise ValueError(
                f"Expected {2 * self.k_n + 1} coefficients, got {len(self.coeffs)}."
            )

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.k_n, self.k_n + 1)

    def coefficient(self, j: int) -> complex:
        if abs(j) > self.k_n:
            return 0j
        return complex(self.coeffs[j + self.k_n])

    def squared_norm(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def truncated(self, k_n: int) -> "ProjectionEstimate":
        if k_n > self.k_n:
            raise ValueError(f"Cannot extend a table of radius {self.k_n} to {k_n}.")
        offset = self.k_n - k_n
        return ProjectionEstimate(
            self.m, k_n, self.coeffs[offset : offset + 2 * k_n + 1], self.n_samples
        )

    def fourier(self, x: ArrayLike) -> ArrayLike:
        """
        Returns the Fourier transform m^{-1/2} Σ_j a_{m,j} exp(ijx/m) 1{|x| <= πm}.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        phases = np.exp(1j * np.outer(x, self.indices) / self.m)
        values = phases @ self.coeffs / math.sqrt(self.m)
        return np.where(np.abs(x) <= math.pi * self.m, values, 0.0)


def project_l2(
    f_fourier: Callable[[np.ndarray], np.ndarray],
    m: int,
    k_n: int,
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
    frequency: float = 0.0,
) -> ProjectionEstimate:
    """
    Projects a function known through its Fourier transform on S_m^{(n)}:

        a_{m,j} = (1/2π) ∫_{-πm}^{πm} conj(φ*_{m,j}(x)) f*(x) dx.

    frequency is an upper bound on the oscillation of f* (for instance the absolute
    location of a shifted density); it only sets the starting grid.
    """
    coeffs = fourier_coefficients(
        lambda x: np.asarray(f_fourier(x), dtype=complex), m, k_n, frequency, quad
    )
    return ProjectionEstimate(m, k_n, coeffs)
