"""Finite joint distributions over (label, group, cell) and empirical datasets.

A distribution is stored as a dense table ``mass[y, a, cell]`` where ``y`` is
0 (unfavorable) or 1 (favorable), ``a`` indexes the sensitive group and
``cell`` is the row-major flattened index of the categorical feature vector.

Tables may hold 64-bit floats or :class:`fractions.Fraction` objects (numpy
``object`` dtype).  Every query below is written against numpy operations
that work for both, so toy datasets can be audited exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import DistributionError, UndefinedConditionalError

MASS_TOL = 1e-12

Y0, Y1 = 0, 1


@dataclass(frozen=True)
class Schema:
    """Feature cardinalities plus the number of sensitive groups."""

    features: tuple[int, ...]
    groups: int = 2

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(int(c) for c in self.features))
        if not self.features:
            raise DistributionError("schema needs at least one feature")
        if any(c < 1 for c in self.features):
            raise DistributionError(f"feature cardinalities must be >= 1, got {self.features}")
        if self.groups < 2:
            raise DistributionError(f"need at least two groups, got {self.groups}")

    @property
    def n_cells(self) -> int:
        return math.prod(self.features)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (2, self.groups, self.n_cells)

    def cell_index(self, cell) -> int:
        """Flat index of a cell given either its index or its coordinate tuple."""
        if isinstance(cell, (tuple, list, np.ndarray)):
            if len(cell) != len(self.features):
                raise DistributionError(f"cell {tuple(cell)} does not match schema {self.features}")
            for c, card in zip(cell, self.features):
                if not 0 <= int(c) < card:
                    raise DistributionError(f"cell {tuple(cell)} out of range for schema {self.features}")
            return int(np.ravel_multi_index(tuple(int(c) for c in cell), self.features))
        idx = int(cell)
        if not 0 <= idx < self.n_cells:
            raise DistributionError(f"cell index {idx} out of range [0, {self.n_cells})")
        return idx

    def cell_coords(self, index) -> tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(int(index), self.features))

    def check_group(self, group: int) -> int:
        group = int(group)
        if not 0 <= group < self.groups:
            raise DistributionError(f"group {group} out of range [0, {self.groups})")
        return group

    def to_dict(self) -> dict:
        return {"features": list(self.features), "groups": self.groups}

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        return cls(tuple(d["features"]), int(d.get("groups", 2)))


def _is_exact(arr: np.ndarray) -> bool:
    return arr.dtype == object


def validate(obj) -> str | None:
    """Return ``None`` for a valid table, otherwise a description of the violation.

    Accepts a :class:`JointDistribution` or a raw ``(2, G, cells)`` array.
    """
    mass = obj.mass if isinstance(obj, JointDistribution) else np.asarray(obj)
    if mass.ndim != 3 or mass.shape[0] != 2:
        return f"mass table must have shape (2, G, cells), got {mass.shape}"
    if not _is_exact(mass) and not np.all(np.isfinite(mass)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(mass))[0])
        return f"non-finite entry at (y, a, cell) = {bad}"
    neg = mass < 0
    if np.any(neg):
        bad = tuple(int(i) for i in np.argwhere(neg)[0])
        return f"negative entry {mass[bad]} at (y, a, cell) = {bad}"
    total = mass.sum()
    if abs(total - 1) > MASS_TOL:
        return f"mass = {float(total)!r}, expected 1"
    return None


class JointDistribution:
    """Immutable probability table over (label, group, cell)."""

    __slots__ = ("schema", "mass")

    def __init__(self, schema: Schema, mass, *, check: bool = True):
        arr = np.array(mass, dtype=object if _has_fractions(mass) else float)
        arr = arr.reshape(schema.shape)
        arr.setflags(write=False)
        self.schema = schema
        self.mass = arr
        if check:
            problem = validate(self)
            if problem is not None:
                raise DistributionError(problem)

    @property
    def exact(self) -> bool:
        return _is_exact(self.mass)

    def __repr__(self):
        kind = "exact" if self.exact else "float"
        return f"JointDistribution(features={self.schema.features}, groups={self.schema.groups}, {kind})"

    def __eq__(self, other):
        if not isinstance(other, JointDistribution):
            return NotImplemented
        return self.schema == other.schema and bool(np.all(self.mass == other.mass))

    def __hash__(self):
        return hash((self.schema, self.mass.tobytes() if not self.exact else tuple(self.mass.ravel())))

    @classmethod
    def normalized(cls, schema: Schema, weights) -> "JointDistribution":
        """Build a distribution from nonnegative weights by dividing by their total."""
        w = np.array(weights, dtype=object if _has_fractions(weights) else float).reshape(schema.shape)
        if np.any(w < 0):
            raise DistributionError("weights must be nonnegative")
        total = w.sum()
        if total <= 0:
            raise DistributionError("total weight is zero")
        return cls(schema, w / total)

    def to_float(self) -> "JointDistribution":
        if not self.exact:
            return self
        return JointDistribution(self.schema, self.mass.astype(float), check=False)

    def to_exact(self, max_denominator: int | None = None) -> "JointDistribution":
        """Rational copy; floats are converted exactly unless ``max_denominator`` is given."""
        if self.exact:
            return self
        conv = (lambda v: Fraction(v).limit_denominator(max_denominator)) if max_denominator else Fraction
        m = np.array([conv(float(v)) for v in self.mass.ravel()], dtype=object)
        return JointDistribution.normalized(self.schema, m)

    # -- derived tables -------------------------------------------------

    @property
    def xa(self) -> np.ndarray:
        """P(a, x) as a ``(G, cells)`` table."""
        return self.mass[0] + self.mass[1]

    @property
    def group_mass(self) -> np.ndarray:
        """P(a) as a length-G vector."""
        return self.mass.sum(axis=(0, 2))

    def support_mask(self) -> np.ndarray:
        """Boolean ``(G, cells)`` table of cells with positive mass in each group."""
        return np.asarray(self.xa > 0, dtype=bool)

    def cond_table(self) -> np.ndarray:
        """P(y1 | x, a) as a ``(G, cells)`` table; NaN where the cell is off support."""
        return _ratio(self.mass[1], self.xa)

    def x_given_a(self) -> np.ndarray:
        """P(x | a) as a ``(G, cells)`` table."""
        gm = self.group_mass
        if np.any(gm <= 0):
            raise UndefinedConditionalError(f"group {int(np.argmax(gm <= 0))} has zero mass")
        return self.xa / gm[:, None]


def _has_fractions(values) -> bool:
    arr = np.asarray(values, dtype=object) if not isinstance(values, np.ndarray) else values
    if arr.dtype != object:
        return False
    return any(isinstance(v, Fraction) for v in arr.ravel())


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """Elementwise ``num / den`` with NaN wherever ``den`` is zero."""
    mask = np.asarray(den > 0, dtype=bool)
    out = np.full(den.shape, np.nan, dtype=num.dtype if num.dtype == object else float)
    out[mask] = num[mask] / den[mask]
    return out


def is_nan(value) -> bool:
    return isinstance(value, float) and math.isnan(value)


# -- point queries ------------------------------------------------------


def cond_y(J: JointDistribution, cell, group: int):
    """P(y1 | x = cell, a = group)."""
    x = J.schema.cell_index(cell)
    a = J.schema.check_group(group)
    p0, p1 = J.mass[0, a, x], J.mass[1, a, x]
    den = p0 + p1
    if den <= 0:
        raise UndefinedConditionalError(f"P(x={x}, a={a}) = 0; conditional undefined")
    return p1 / den


def marg_y_given_a(J: JointDistribution, group: int):
    """P(y1 | a = group)."""
    a = J.schema.check_group(group)
    p1 = J.mass[1, a].sum()
    den = J.mass[:, a].sum()
    if den <= 0:
        raise UndefinedConditionalError(f"group {a} has zero mass")
    return p1 / den


def marg_y(J: JointDistribution):
    """P(y1)."""
    return J.mass[1].sum()


def support(J: JointDistribution, group: int) -> frozenset[int]:
    """Flat indices of cells with P(x | a) > 0."""
    a = J.schema.check_group(group)
    if J.group_mass[a] <= 0:
        raise UndefinedConditionalError(f"group {a} has zero mass")
    return frozenset(int(i) for i in np.flatnonzero(J.support_mask()[a]))


def total_variation(P: JointDistribution, Q: JointDistribution) -> float:
    if P.schema != Q.schema:
        raise DistributionError("schemas differ")
    return 0.5 * float(np.abs(P.mass.astype(float) - Q.mass.astype(float)).sum())


# -- datasets -----------------------------------------------------------


class Dataset:
    """Multiset of (label, group, cell) rows with positive integer multiplicities.

    Stored column-wise.  Row order is kept as given; :meth:`compact` merges
    duplicate rows and sorts them by the flat (y, a, cell) index.
    """

    __slots__ = ("schema", "y", "a", "cell", "count")

    def __init__(self, schema: Schema, y, a, cell, count=None):
        y = np.asarray(y, dtype=np.int64).ravel()
        a = np.asarray(a, dtype=np.int64).ravel()
        cell = np.asarray(cell, dtype=np.int64).ravel()
        count = np.ones_like(y) if count is None else np.asarray(count, dtype=np.int64).ravel()
        if not (len(y) == len(a) == len(cell) == len(count)):
            raise DistributionError("dataset columns have different lengths")
        if np.any((y != 0) & (y != 1)):
            raise DistributionError("labels must be 0 or 1")
        if np.any((a < 0) | (a >= schema.groups)):
            raise DistributionError("group index out of range")
        if np.any((cell < 0) | (cell >= schema.n_cells)):
            raise DistributionError("cell index out of range")
        if np.any(count < 1):
            raise DistributionError("multiplicities must be >= 1")
        for arr in (y, a, cell, count):
            arr.setflags(write=False)
        self.schema = schema
        self.y, self.a, self.cell, self.count = y, a, cell, count

    @classmethod
    def from_rows(cls, schema: Schema, rows: Iterable[Sequence]) -> "Dataset":
        """Rows are ``(label, cell, group, multiplicity)``; cell may be a coordinate tuple."""
        ys, cells, gs, ns = [], [], [], []
        for y, cell, a, n in rows:
            ys.append(y)
            cells.append(schema.cell_index(cell))
            gs.append(a)
            ns.append(n)
        return cls(schema, ys, gs, cells, ns)

    @classmethod
    def from_counts(cls, schema: Schema, counts) -> "Dataset":
        """Dataset whose multiplicities are a ``(2, G, cells)`` integer table."""
        counts = np.asarray(counts, dtype=np.int64).reshape(schema.shape)
        y, a, cell = np.nonzero(counts)
        return cls(schema, y, a, cell, counts[y, a, cell])

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n(self) -> int:
        """Total row mass (sum of multiplicities)."""
        return int(self.count.sum())

    def __repr__(self):
        return f"Dataset(features={self.schema.features}, groups={self.schema.groups}, rows={len(self)}, n={self.n})"

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.schema == other.schema and np.array_equal(self.counts(), other.counts())

    def flat_index(self) -> np.ndarray:
        return np.ravel_multi_index((self.y, self.a, self.cell), self.schema.shape)

    def counts(self) -> np.ndarray:
        """Multiplicity table of shape ``(2, G, cells)``."""
        out = np.zeros(int(np.prod(self.schema.shape)), dtype=np.int64)
        np.add.at(out, self.flat_index(), self.count)
        return out.reshape(self.schema.shape)

    def compact(self) -> "Dataset":
        return Dataset.from_counts(self.schema, self.counts())

    def group_sizes(self) -> np.ndarray:
        return self.counts().sum(axis=(0, 2))

    def rows(self):
        for y, a, c, n in zip(self.y, self.a, self.cell, self.count):
            yield int(y), self.schema.cell_coords(c), int(a), int(n)

    def unlabeled_counts(self) -> np.ndarray:
        """Row mass per (group, cell), labels ignored."""
        return self.counts().sum(axis=0)


def from_dataset(D: Dataset, smoothing=0, *, exact: bool = False) -> JointDistribution:
    """Maximum-likelihood table, with additive smoothing over every (y, a, cell) triple."""
    if D.n < 1:
        raise DistributionError("empty dataset")
    if smoothing < 0:
        raise DistributionError("smoothing must be nonnegative")
    counts = D.counts()
    if exact:
        smooth = Fraction(smoothing)
        w = np.array([Fraction(int(c)) + smooth for c in counts.ravel()], dtype=object)
    else:
        w = counts.astype(float) + float(smoothing)
    return JointDistribution.normalized(D.schema, w)
