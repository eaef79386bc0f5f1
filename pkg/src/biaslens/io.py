"""File formats: distribution JSON, dataset CSV, bias-spec JSON."""

from __future__ import annotations

import csv
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from .bias import LabelBiasSpec, SelectionBiasSpec
from .distribution import Dataset, JointDistribution, Schema
from .errors import DistributionError, SpecError


def jsonable(obj, exact: bool = False):
    """Recursively convert numpy scalars, Fractions and infinities for ``json.dumps``.

    Fractions become floats, or ``"p/q"`` strings when ``exact`` is set.
    Infinite values become the strings ``"inf"`` / ``"-inf"``.
    """
    if isinstance(obj, dict):
        return {str(k): jsonable(v, exact) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [jsonable(v, exact) for v in items]
    if isinstance(obj, np.ndarray):
        return [jsonable(v, exact) for v in obj.tolist()]
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict(), exact)
    if isinstance(obj, Fraction):
        return str(obj) if exact else float(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return None
        return v
    return obj


def _num(v):
    if isinstance(v, str):
        return Fraction(v)
    return float(v)


# -- distributions --------------------------------------------------------


def distribution_to_dict(J: JointDistribution) -> dict:
    mass = J.mass.ravel()
    if J.exact:
        values = [str(v) for v in mass]
    else:
        values = [float(v) for v in mass]
    return {"schema": J.schema.to_dict(), "mass": values}


def distribution_from_dict(d: dict) -> JointDistribution:
    try:
        schema = Schema.from_dict(d["schema"])
        raw = d["mass"]
    except (KeyError, TypeError) as exc:
        raise DistributionError(f"malformed distribution object: {exc}") from None
    if len(raw) != int(np.prod(schema.shape)):
        raise DistributionError(f"mass has {len(raw)} entries, schema needs {int(np.prod(schema.shape))}")
    values = [_num(v) for v in raw]
    if any(isinstance(v, Fraction) for v in values):
        values = np.array([Fraction(v) for v in values], dtype=object)
    return JointDistribution(schema, values)


def write_distribution(J: JointDistribution, path) -> None:
    Path(path).write_text(json.dumps(distribution_to_dict(J)) + "\n")


def read_distribution(path) -> JointDistribution:
    return distribution_from_dict(json.loads(Path(path).read_text()))


# -- datasets ---------------------------------------------------------------


def write_dataset(D: Dataset, path) -> None:
    k = len(D.schema.features)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "a", *[f"x{i}" for i in range(k)], "count"])
        for y, coords, a, n in D.rows():
            w.writerow([y, a, *coords, n])


def read_dataset(path, schema: Schema | None = None) -> Dataset:
    """Read a dataset CSV.  Without a schema, cardinalities are inferred from the data."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["y", "a"] or header[-1] != "count":
            raise DistributionError(f"dataset header must be y,a,x0,...,xk,count; got {header}")
        k = len(header) - 3
        if k < 1 or header[2:-1] != [f"x{i}" for i in range(k)]:
            raise DistributionError(f"dataset header must be y,a,x0,...,xk,count; got {header}")
        rows = [[int(v) for v in row] for row in reader if row]
    arr = np.array(rows, dtype=np.int64).reshape(-1, k + 3)
    if schema is None:
        if len(arr) == 0:
            raise DistributionError("cannot infer a schema from an empty dataset")
        cards = tuple(int(c) + 1 for c in arr[:, 2:-1].max(axis=0))
        schema = Schema(cards, max(2, int(arr[:, 1].max()) + 1))
    if len(schema.features) != k:
        raise DistributionError(f"dataset has {k} features, schema has {len(schema.features)}")
    cells = [schema.cell_index(tuple(r)) for r in arr[:, 2:-1]]
    return Dataset(schema, arr[:, 0], arr[:, 1], cells, arr[:, -1])


# -- bias specs ---------------------------------------------------------------


def read_spec(path, strict: bool = True):
    d = json.loads(Path(path).read_text())
    if "flip" in d:
        return LabelBiasSpec.from_dict(d)
    if "keep" in d:
        return SelectionBiasSpec.from_dict(d, strict=strict)
    raise SpecError("spec file needs a 'flip' or 'keep' table")


def write_spec(spec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")
