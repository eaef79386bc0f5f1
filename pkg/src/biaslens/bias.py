"""Label bias and selection bias, applied exactly to distributions and
stochastically to datasets.

Both mechanisms depend only on the (label, group) pair of a row.  Label bias
flips the recorded label with probability ``flip[y, a]``; selection bias keeps
a row with probability ``keep[y, a]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import rng
from .distribution import Dataset, JointDistribution
from .errors import DistributionError, SpecError

LABEL_STREAM = 1
SELECTION_STREAM = 2


def _as_table(values, groups: int | None = None) -> np.ndarray:
    arr = np.asarray(values, dtype=object)
    if not any(isinstance(v, Fraction) for v in arr.ravel()):
        arr = arr.astype(float)
    if arr.ndim != 2 or arr.shape[0] != 2:
        raise SpecError(f"bias table must have shape (2, G), got {arr.shape}")
    if groups is not None and arr.shape[1] != groups:
        raise SpecError(f"bias table covers {arr.shape[1]} groups, distribution has {groups}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LabelBiasSpec:
    """Flip probabilities ``flip[y, a] = P(c1 | y, a)``."""

    flip: np.ndarray

    def __post_init__(self):
        flip = _as_table(self.flip)
        if np.any(flip < 0) or np.any(flip > 1):
            raise SpecError("flip probabilities must lie in [0, 1]")
        object.__setattr__(self, "flip", flip)

    @property
    def groups(self) -> int:
        return self.flip.shape[1]

    @classmethod
    def identity(cls, groups: int = 2) -> "LabelBiasSpec":
        return cls(np.zeros((2, groups)))

    def __eq__(self, other):
        return isinstance(other, LabelBiasSpec) and np.array_equal(self.flip, other.flip)

    def keep_prob(self, y: int, a: int):
        """P(c0 | y, a)."""
        return 1 - self.flip[y, a]

    def to_dict(self) -> dict:
        return {"flip": _table_to_dict(self.flip)}

    @classmethod
    def from_dict(cls, d: dict) -> "LabelBiasSpec":
        return cls(_table_from_dict(d["flip"]))


@dataclass(frozen=True, eq=False)
class SelectionBiasSpec:
    """Retention probabilities ``keep[y, a] = P(k1 | y, a)``.

    Distribution-level use requires every entry in (0, 1]; dataset-level
    injection also accepts zeros (construct with ``strict=False``).
    """

    keep: np.ndarray
    strict: bool = True

    def __post_init__(self):
        keep = _as_table(self.keep)
        if np.any(keep > 1) or np.any(keep < 0):
            raise SpecError("keep probabilities must lie in [0, 1]")
        if self.strict and np.any(keep <= 0):
            raise SpecError("keep probabilities must be strictly positive")
        object.__setattr__(self, "keep", keep)

    @property
    def groups(self) -> int:
        return self.keep.shape[1]

    @classmethod
    def identity(cls, groups: int = 2) -> "SelectionBiasSpec":
        return cls(np.ones((2, groups)))

    @classmethod
    def from_deltas(cls, deltas) -> "SelectionBiasSpec":
        """Spec with the given per-group odds multipliers, keeping as much as possible."""
        cols = []
        for d in deltas:
            if not d > 0:
                raise SpecError(f"delta must be positive, got {d}")
            one = Fraction(1) if isinstance(d, Fraction) else 1.0
            cols.append((one / d, one) if d >= 1 else (one, d))
        return cls(np.array(cols, dtype=object).T)

    def __eq__(self, other):
        return isinstance(other, SelectionBiasSpec) and np.array_equal(self.keep, other.keep)

    def to_dict(self) -> dict:
        return {"keep": _table_to_dict(self.keep)}

    @classmethod
    def from_dict(cls, d: dict, strict: bool = True) -> "SelectionBiasSpec":
        return cls(_table_from_dict(d["keep"]), strict=strict)


def _table_to_dict(table: np.ndarray) -> dict:
    out = {}
    for y in range(2):
        out[f"y{y}"] = {f"a{a}": _num_out(table[y, a]) for a in range(table.shape[1])}
    return out


def _num_out(v):
    return str(v) if isinstance(v, Fraction) else float(v)


def _table_from_dict(d: dict) -> np.ndarray:
    try:
        groups = len(d["y0"])
        rows = [[_num_in(d[f"y{y}"][f"a{a}"]) for a in range(groups)] for y in range(2)]
    except KeyError as exc:
        raise SpecError(f"bias table missing entry {exc}") from None
    return np.array(rows, dtype=object)


def _num_in(v):
    return Fraction(v) if isinstance(v, str) else float(v)


def label_bias_coefficients(S: LabelBiasSpec, group: int):
    """Affine coefficients (alpha, beta, gamma) with alpha*P + beta*P_D + gamma = 0."""
    c0_y1 = 1 - S.flip[1, group]
    c1_y0 = S.flip[0, group]
    return c0_y1 - c1_y0, -1, c1_y0


def delta(S: SelectionBiasSpec, group: int):
    """Odds multiplier P(k1 | y1, a) / P(k1 | y0, a)."""
    den = S.keep[0, group]
    if den <= 0:
        raise SpecError(f"keep[y0][a{group}] is zero; odds multiplier undefined")
    return S.keep[1, group] / den


def _match(J: JointDistribution, table: np.ndarray) -> np.ndarray:
    if table.shape[1] != J.schema.groups:
        raise SpecError(f"spec covers {table.shape[1]} groups, distribution has {J.schema.groups}")
    if J.exact and table.dtype != object:
        return np.array([Fraction(float(v)) for v in table.ravel()], dtype=object).reshape(table.shape)
    if not J.exact and table.dtype == object:
        return table.astype(float)
    return table


def apply_label_bias(J: JointDistribution, S: LabelBiasSpec) -> JointDistribution:
    flip = _match(J, S.flip)
    m0, m1 = J.mass[0], J.mass[1]
    f0 = flip[0][:, None]
    f1 = flip[1][:, None]
    new1 = (1 - f1) * m1 + f0 * m0
    new0 = (1 - f0) * m0 + f1 * m1
    return JointDistribution(J.schema, np.stack([new0, new1]), check=False)


def apply_selection_bias(J: JointDistribution, S: SelectionBiasSpec) -> JointDistribution:
    keep = _match(J, S.keep)
    if S.strict is False and np.any(keep <= 0):
        raise SpecError("distribution-level selection needs strictly positive keep probabilities")
    w = J.mass * keep[:, :, None]
    total = w.sum()
    if total <= 0:
        raise DistributionError("selection retains zero mass")
    return JointDistribution(J.schema, w / total, check=False)


# -- stochastic injection -----------------------------------------------


def _unit_rows(D: Dataset):
    """Expand multiplicities to one entry per unit row, in dataset row order."""
    idx = np.repeat(np.arange(len(D)), D.count)
    return D.y[idx], D.a[idx], D.cell[idx]


def inject_dataset_label_bias(D: Dataset, S: LabelBiasSpec, seed: int) -> Dataset:
    """Flip each unit row's label independently with probability ``flip[y, a]``."""
    if S.groups != D.schema.groups:
        raise SpecError("spec and dataset disagree on group count")
    y, a, cell = _unit_rows(D)
    u = rng.uniforms(seed, len(y), LABEL_STREAM)
    flip = S.flip.astype(float)[y, a]
    y_new = np.where(u < flip, 1 - y, y)
    return Dataset(D.schema, y_new, a, cell).compact()


def inject_dataset_selection_bias(D: Dataset, S: SelectionBiasSpec, seed: int) -> Dataset:
    """Keep each unit row independently with probability ``keep[y, a]``."""
    if S.groups != D.schema.groups:
        raise SpecError("spec and dataset disagree on group count")
    y, a, cell = _unit_rows(D)
    u = rng.uniforms(seed, len(y), SELECTION_STREAM)
    kept = u < S.keep.astype(float)[y, a]
    return Dataset(D.schema, y[kept], a[kept], cell[kept]).compact()
