"""
This module writes the outputs of the commands: CSV tables, JSON reports and the
run manifests that record digests of the files read and written.
"""
import csv
import hashlib
import math
from dataclasses import asdict, dataclass, field, is_dataclass
from datetime import datetime, timezone
from enum import Enum
from json import JSONEncoder
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from essentials.folders import ensure_folder
from essentials.json import FriendlyEncoder, dumps
from pydantic import BaseModel, ConfigDict

from deconv import __version__
from deconv.errors import OutputWriteError
from deconv.logs import logger

PathLike = Union[str, Path]


class ReportJSONEncoder(JSONEncoder):
    """
    Encodes numpy values, complex numbers as [re, im] pairs, enums by value and
    dataclasses as mappings.
    """

    def default(self, obj):
        try:
            return JSONEncoder.default(self, obj)
        except TypeError:
            if isinstance(obj, np.integer):
                return int(obj)
            if isinstance(obj, np.floating):
                return finite_or_none(float(obj))
            if isinstance(obj, (complex, np.complexfloating)):
                return [float(obj.real), float(obj.imag)]
            if isinstance(obj, np.ndarray):
                return normalize(obj.tolist())
            if isinstance(obj, Enum):
                return obj.value
            return FriendlyEncoder.default(self, obj)  # type: ignore


def finite_or_none(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None


def normalize(value: Any) -> Any:
    """
    Returns a copy of value with dataclasses turned into mappings, tuples into lists
    and non finite floats into None, so reports are strict JSON.
    """
    if is_dataclass(value) and not isinstance(value, type):
        value = asdict(value)
    if isinstance(value, dict):
        return {key: normalize(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [normalize(item) for item in value]
    if isinstance(value, (float, np.floating)):
        return finite_or_none(float(value))
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.ndarray):
        return normalize(value.tolist())
    return value


def to_json(value: Any) -> str:
    return dumps(normalize(value), indent=4, cls=ReportJSONEncoder)


def format_float(value: float) -> str:
    return format(float(value), ".17g")


def _ensure_parent(path: Path) -> None:
    if path.parent and str(path.parent) not in ("", "."):
        ensure_folder(str(path.parent))


def write_text(path: PathLike, content: str) -> Path:
    path = Path(path)
    try:
        _ensure_parent(path)
        with open(path, "wt", encoding="utf-8", newline="\n") as output_file:
            output_file.write(content)
    except OSError:
        raise OutputWriteError(str(path))
    logger.debug("Wrote %s", path)
    return path


def write_json(path: PathLike, value: Any) -> Path:
    return write_text(path, to_json(value) + "\n")


def write_csv(
    path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> Path:
    """
    Writes a CSV table; floats are written with 17 significant digits, which
    reads back to the same doubles.
    """
    path = Path(path)
    try:
        _ensure_parent(path)
        with open(path, "wt", encoding="utf-8", newline="") as output_file:
            writer = csv.writer(output_file, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow(
                    [
                        format_float(value)
                        if isinstance(value, (float, np.floating))
                        else value
                        for value in row
                    ]
                )
    except OSError:
        raise OutputWriteError(str(path))
    logger.debug("Wrote %s", path)
    return path


def write_density_csv(
    path: PathLike, grid: Sequence[float], values: Sequence[float]
) -> Path:
    return write_csv(
        path, ("x", "ghat"), ((float(x), float(y)) for x, y in zip(grid, values))
    )


def read_csv_table(path: PathLike) -> Tuple[List[str], List[List[float]]]:
    with open(path, "rt", encoding="utf-8", newline="") as source_file:
        reader = csv.reader(source_file)
        header = next(reader)
        return header, [[float(value) for value in row] for row in reader if row]


def file_digest(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as source_file:
        for chunk in iter(lambda: source_file.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def manifest_path(output: PathLike) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".manifest.json")


@dataclass
class RunManifest:
    """
    Record of a command run: the configuration, the seed, the library version and
    the sha256 digests of the files read and written. Wall-clock timings live here
    so that reports stay deterministic.
    """

    command: str
    config: Dict[str, Any]
    seed: Optional[int] = None
    version: str = __version__
    timestamp: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat()
    )
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)

    def add_input(self, path: PathLike) -> None:
        self.inputs[str(path)] = file_digest(path)

    def add_output(self, path: PathLike) -> None:
        self.outputs[str(path)] = file_digest(path)

    def write(self, primary_output: PathLike) -> Path:
        return write_json(manifest_path(primary_output), self)


def write_outputs(
    manifest: RunManifest,
    report: Optional[Tuple[PathLike, Any]] = None,
    tables: Sequence[Tuple[PathLike, Sequence[str], Iterable[Sequence[Any]]]] = (),
) -> Optional[Path]:
    """
    Writes the report and the tables, records their digests in the manifest and
    writes the manifest next to the first output. Returns the manifest path.
    """
    written: List[Path] = []
    for path, header, rows in tables:
        written.append(write_csv(path, header, rows))
    if report is not None:
        report_path, value = report
        written.insert(0, write_json(report_path, value))

    for path in written:
        manifest.add_output(path)
    if not written:
        return None
    return manifest.write(written[0])


class Document(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RiskBoundDocument(Document):
    bias: Optional[float]
    variance_main: Optional[float]
    residual: Optional[float]
    r_m: Optional[float]


class SizeDocument(Document):
    n: int
    m_n: int
    grid_clamped: bool
    penalty_values: List[Optional[float]]
    replications: int
    failures: int
    mean_mise: Optional[float]
    median_mise: Optional[float]
    trimmed_mean_mise: Optional[float]
    mise_standard_error: Optional[float]
    aggregate_mise: Optional[float]
    mean_m_hat: Optional[float]
    oracle_m: Optional[int]
    oracle_mise: Optional[float]
    oracle_standard_error: Optional[float]
    oracle_mise_by_m: List[Optional[float]]
    adaptive_oracle_ratio: Optional[float]
    theoretical_m: int
    theoretical_pi_m: Optional[float]
    theoretical_rate: Optional[float]
    risk_bound: Optional[RiskBoundDocument]


class CellDocument(Document):
    n: int
    replication: int
    m_hat: Optional[int]
    mise: Optional[float]
    contrast_values: List[Optional[float]]
    error: Optional[str]


class RateFitDocument(Document):
    slope: Optional[float]
    standard_error: Optional[float]
    abscissa: str
    excluded: List[int]


class ReportDocument(Document):
    """
    Published schema of the experiment report; see model_json_schema().
    """

    schema_version: str
    version: str
    seed: int
    config: Dict[str, Any]
    kappa_a: float
    c_a: float
    sizes: List[SizeDocument]
    cells: List[CellDocument]
    rate_fit: RateFitDocument
    failures: int
    valid: bool


class SelectionDocument(Document):
    m_hat: int
    m_n: int
    grid_clamped: bool
    contrast_values: List[Optional[float]]
    penalty_values: List[Optional[float]]
    k_n_values: List[int]


class EstimateDocument(Document):
    """
    Published schema of the estimate report.
    """

    schema_version: str
    version: str
    config: Dict[str, Any]
    n_samples: int
    noise: Dict[str, Any]
    penalty: Dict[str, Any]
    selection: SelectionDocument
    coefficients: List[List[float]]
    diagnostics: Dict[str, Optional[float]]


def report_json_schema() -> Dict[str, Any]:
    return ReportDocument.model_json_schema()