"""Field files, result CSVs and run summaries.

Floats are written with ``repr`` (shortest round-trip decimal), so files read
back bit for bit. Every file is written whole and atomically.
"""

import csv
import io
import logging
import os
import re
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel

from glfem.core.exceptions import FieldFormatError, MeshError
from glfem.models.field import ComplexField
from glfem.models.mesh import build_uniform

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CONVERGE_COLUMNS = (
    "kappa", "n", "h",
    "err_l2", "err_hk1", "err_energy",
    "scaled_l2", "scaled_hk1", "scaled_energy",
    "order_l2", "order_hk1", "order_energy",
    "bestapprox_hk1", "bestapprox_l2",
    "preasymptotic_flag",
)
LOD_COLUMNS = CONVERGE_COLUMNS + ("method",)
MINIMIZE_COLUMNS = (
    "kappa", "n", "energy", "scaled_energy", "gf_iters", "newton_iters", "residual_norm", "converged",
)
BESTAPPROX_COLUMNS = ("kappa", "n", "h", "bestapprox_l2", "bestapprox_hk1", "bestapprox_scaled_energy")

_HEADER = re.compile(r"^n=(\d+) kappa=([-+0-9.eEinfa]+)$")


def eigs_columns(count: int) -> Tuple[str, ...]:
    return ("kappa",) + tuple(f"lambda_{i}" for i in range(1, count + 1)) + ("gauge_angle", "verdict")


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if hasattr(value, "value"):  # Enum
        return str(value.value)
    return str(value)


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Write ``text`` to a temporary file next to ``path``, then rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle = tempfile.NamedTemporaryFile(
        "w", dir=path.parent, prefix=f".{path.name}.", suffix=".tmp", delete=False, encoding="utf-8", newline=""
    )
    try:
        with handle:
            handle.write(text)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(handle.name, path)
    except BaseException:
        Path(handle.name).unlink(missing_ok=True)
        raise
    logger.info("wrote %s", path)
    return path


def field_path(output_dir: PathLike, kappa: float, n: int, prefix: str = "field") -> Path:
    return Path(output_dir) / f"{prefix}_k{kappa:g}_n{n}.txt"


def dump_field(u: ComplexField, kappa: float) -> str:
    lines = [f"n={u.mesh.n} kappa={float(kappa)!r}"]
    nodes = u.mesh.nodes
    for index in range(u.mesh.num_nodes):
        lines.append(",".join([
            str(index),
            repr(float(nodes[index, 0])),
            repr(float(nodes[index, 1])),
            repr(float(u.re[index])),
            repr(float(u.im[index])),
        ]))
    return "\n".join(lines) + "\n"


def write_field(path: PathLike, u: ComplexField, kappa: float) -> Path:
    return atomic_write_text(path, dump_field(u, kappa))


def load_field(text: str) -> Tuple[ComplexField, float]:
    lines = text.splitlines()
    if not lines:
        raise FieldFormatError("Field file is empty")
    match = _HEADER.match(lines[0].strip())
    if match is None:
        raise FieldFormatError(f"Malformed header {lines[0]!r}; expected 'n=<int> kappa=<float>'")
    try:
        n, kappa = int(match.group(1)), float(match.group(2))
        mesh = build_uniform(n)
    except (ValueError, MeshError) as exc:
        raise FieldFormatError(str(exc)) from exc

    rows = [line for line in lines[1:] if line.strip()]
    if len(rows) != mesh.num_nodes:
        raise FieldFormatError(f"Expected {mesh.num_nodes} node rows for n={n}, found {len(rows)}")

    data = np.empty((mesh.num_nodes, 4))
    for expected, row in enumerate(rows):
        parts = row.split(",")
        if len(parts) != 5:
            raise FieldFormatError(f"Row {expected}: expected 'index,x,y,re,im', got {row!r}")
        try:
            index = int(parts[0])
            data[expected] = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise FieldFormatError(f"Row {expected}: {exc}") from exc
        if index != expected:
            raise FieldFormatError(f"Row {expected}: node index {index} out of canonical order")

    if not np.array_equal(data[:, :2], mesh.nodes):
        raise FieldFormatError(f"Node coordinates do not match the uniform mesh with n={n}")
    return ComplexField(mesh, data[:, 2], data[:, 3]), kappa


def read_field(path: PathLike) -> Tuple[ComplexField, float]:
    path = Path(path)
    u, kappa = load_field(path.read_text(encoding="utf-8"))
    logger.info("read field n=%d kappa=%g from %s", u.mesh.n, kappa, path)
    return u, kappa


def dump_csv(columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(column)) for column in columns])
    return buffer.getvalue()


def write_csv(path: PathLike, columns: Sequence[str], rows: Iterable[Union[Dict[str, Any], BaseModel]]) -> Path:
    dicts: List[Dict[str, Any]] = [row.model_dump() if isinstance(row, BaseModel) else row for row in rows]
    return atomic_write_text(path, dump_csv(columns, dicts))


def write_summary(path: PathLike, summary: BaseModel) -> Path:
    return atomic_write_text(path, summary.model_dump_json(indent=2) + "\n")
