"""
This module maps the exceptions of the library to the exit codes of the CLI.
"""
import sys
from contextlib import contextmanager
from typing import Any, Dict, Iterator, Optional

from deconv.errors import (
    NumericalToleranceError,
    OutputWriteError,
    RepresentableRangeError,
    UnsupportedProcessError,
)
from deconv.logs import logger
from deconv.utils.source import read_structured_file

EXIT_INTERRUPTED = 1
EXIT_CONFIGURATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


@contextmanager
def exit_on_errors() -> Iterator[None]:
    try:
        yield
    except KeyboardInterrupt:  # pragma: nocover
        logger.info("User interrupted")
        sys.exit(EXIT_INTERRUPTED)
    except (NumericalToleranceError, RepresentableRangeError) as numerical_error:
        logger.error(numerical_error)
        sys.exit(EXIT_NUMERICAL)
    except (ValueError, UnsupportedProcessError) as value_error:
        logger.error(value_error)
        sys.exit(EXIT_CONFIGURATION)
    except (OutputWriteError, OSError) as io_error:
        logger.error(io_error)
        sys.exit(EXIT_IO)


def merge_options(
    config_path: Optional[str], overrides: Dict[str, Any]
) -> Dict[str, Any]:
    """
    Returns the configuration file values, flattened to dotted keys, overridden by
    the options given on the command line.
    """
    data = _flatten(read_structured_file(config_path)) if config_path else {}
    data.update({key: value for key, value in overrides.items() if value is not None})
    return data


def _flatten(data: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    result: Dict[str, Any] = {}
    for key, value in data.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            result.update(_flatten(value, path + "."))
        else:
            result[path] = value
    return result
