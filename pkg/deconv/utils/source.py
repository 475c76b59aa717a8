"""
This module provides methods to read configuration files and samples files.
"""
import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Union

import yaml

from deconv.errors import ConfigurationError, SamplesFormatError
from deconv.logs import logger

try:
    import tomllib
except ImportError:  # pragma: no cover
    import tomli as tomllib  # type: ignore


def read_from_json_file(file_path: Path) -> Any:
    """
    Reads JSON from a given file by path.
    """
    with open(file_path, "rt", encoding="utf-8") as source_file:
        return json.loads(source_file.read())


def read_from_yaml_file(file_path: Path) -> Any:
    """
    Reads YAML from a given file by path.
    """
    with open(file_path, "rt", encoding="utf-8") as source_file:
        return yaml.safe_load(source_file.read())


def read_from_toml_file(file_path: Path) -> Any:
    with open(file_path, "rb") as source_file:
        return tomllib.load(source_file)


READERS = {
    ".json": read_from_json_file,
    ".yaml": read_from_yaml_file,
    ".yml": read_from_yaml_file,
    ".toml": read_from_toml_file,
}


def read_structured_file(source: Union[str, Path]) -> Dict[str, Any]:
    """
    Reads a mapping from a JSON, YAML or TOML file. An empty file gives an empty
    mapping.
    """
    source_path = Path(source)

    if not source_path.exists():
        raise ConfigurationError(f"the file {source} does not exist", "config")
    if not source_path.is_file():
        raise ConfigurationError(f"the path {source} is not a file path", "config")

    try:
        reader = READERS[source_path.suffix.lower()]
    except KeyError:
        raise ConfigurationError(
            f"unsupported configuration file {source}; expected one of "
            f"{', '.join(READERS)}",
            "config",
        )

    logger.debug("Reading configuration from %s", source)

    try:
        data = reader(source_path)
    except (json.JSONDecodeError, yaml.YAMLError, ValueError) as parse_error:
        if isinstance(parse_error, ConfigurationError):
            raise
        raise ConfigurationError(
            f"cannot parse {source}: {parse_error}", "config"
        ) from parse_error

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(
            f"the file {source} must contain a mapping of keys", "config"
        )
    return data


def unflatten_keys(data: Dict[str, Any]) -> Dict[str, Any]:
    """
    Turns flat dotted keys into nested mappings:

        {"noise.name": "laplace"} -> {"noise": {"name": "laplace"}}
    """
    result: Dict[str, Any] = {}
    for key, value in data.items():
        if isinstance(value, dict):
            value = unflatten_keys(value)
        parts = str(key).split(".")
        node = result
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigurationError(
                    "is both a value and a section", ".".join(parts[:-1])
                )
            node = child
        last = parts[-1]
        if isinstance(node.get(last), dict) and isinstance(value, dict):
            node[last].update(value)
        else:
            node[last] = value
    return result


def read_samples(source: Union[str, Path]) -> List[float]:
    """
    Reads one real number per line from a CSV or plain text file. A non numeric
    first line is read as a header and skipped; empty lines are ignored. Rows with
    more than one value are rejected.
    """
    source_path = Path(source)
    if not source_path.is_file():
        raise ConfigurationError(f"the samples file {source} does not exist", "input")

    samples: List[float] = []
    with open(source_path, "rt", encoding="utf-8", newline="") as source_file:
        for line_number, row in enumerate(csv.reader(source_file), start=1):
            cells = [cell.strip() for cell in row if cell.strip()]
            if not cells:
                continue
            if len(cells) > 1:
                raise SamplesFormatError(
                    str(source),
                    line_number,
                    ",".join(row),
                    "has more than one column; expected one value per line",
                )
            text = cells[0]
            try:
                value = float(text)
            except ValueError:
                if line_number == 1:
                    logger.debug("Skipping the header %r of %s", text, source)
                    continue
                raise SamplesFormatError(str(source), line_number, text)
            if not math.isfinite(value):
                raise SamplesFormatError(str(source), line_number, text)
            samples.append(value)

    logger.debug("Read %s samples from %s", len(samples), source)
    return samples
