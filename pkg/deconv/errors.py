"""
This module defines the exceptions raised by the deconvolution library.
"""
from typing import Optional


class DeconvolutionError(Exception):
    """Base type for exceptions raised by the deconvolution library."""


class ConfigurationError(DeconvolutionError, ValueError):
    """
    Exception raised when a model, a penalty or a configuration file is invalid.
    """

    def __init__(self, message: str, key_path: Optional[str] = None) -> None:
        if key_path:
            message = f"{key_path}: {message}"
        super().__init__(message)
        self.key_path = key_path


class NumericalToleranceError(DeconvolutionError, ArithmeticError):
    """
    Exception raised when a quadrature does not reach the requested tolerance.
    """

    def __init__(
        self,
        message: str,
        worst_index: Optional[int] = None,
        error_estimate: Optional[float] = None,
        omega: Optional[float] = None,
    ) -> None:
        details = []
        if worst_index is not None:
            details.append(f"worst index j={worst_index}")
        if error_estimate is not None:
            details.append(f"error estimate {error_estimate:.3e}")
        if omega is not None:
            details.append(f"oscillation {omega:.6g}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)
        self.worst_index = worst_index
        self.error_estimate = error_estimate
        self.omega = omega


class InsufficientNodesError(NumericalToleranceError):
    """
    Exception raised when a quadrature is refused because the available nodes are
    below the required count.
    """

    def __init__(self, message: str, required: int) -> None:
        super().__init__(f"{message} Required nodes: {required}.")
        self.required = required


class RepresentableRangeError(DeconvolutionError, OverflowError):
    """
    Exception raised when a quantity leaves the range of double precision numbers,
    or when a root cannot be bracketed.
    """

    def __init__(self, message: str, largest_m: Optional[int] = None) -> None:
        if largest_m is not None:
            message = f"{message} The largest representable m is {largest_m}."
        super().__init__(message)
        self.largest_m = largest_m


class UnsupportedProcessError(DeconvolutionError):
    """
    Exception raised when a process does not expose the dependence coefficient
    bounds required by an operation.
    """

    def __init__(self, process_name: str) -> None:
        super().__init__(
            f"The process {process_name} has neither a beta nor a tau coefficient "
            "bound: R_m cannot be bounded."
        )
        self.process_name = process_name


class SamplesFormatError(DeconvolutionError, ValueError):
    """
    Exception raised when a line of a samples file is not a single finite real
    number.
    """

    def __init__(
        self,
        path: str,
        line: int,
        value: str,
        reason: str = "is not a finite real number",
    ) -> None:
        super().__init__(f"Invalid sample at line {line} of {path}: {value!r} {reason}.")
        self.path = path
        self.line = line


class OutputWriteError(DeconvolutionError, OSError):
    """
    Exception raised when an output file cannot be written.
    Inspect the inner exception (__context__) for more information.
    """

    def __init__(self, path: str) -> None:
        super().__init__(f"Failed to write the output file: {path}.")
        self.path = path

    @property
    def inner_exception(self):
        return self.__context__
