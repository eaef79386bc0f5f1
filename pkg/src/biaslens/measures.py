"""Demographic parity difference and the two worldview checks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .distribution import Dataset, JointDistribution, marg_y_given_a
from .errors import DistributionError, UndefinedConditionalError


@dataclass
class FairnessGapReport:
    measure: str
    value: object
    detail: dict
    tolerance: float
    skipped: list = field(default_factory=list)

    @property
    def satisfied(self) -> bool:
        return self.value <= self.tolerance

    def to_dict(self) -> dict:
        from .io import jsonable

        return jsonable(
            {
                "measure": self.measure,
                "value": self.value,
                "satisfied": self.satisfied,
                "tolerance": self.tolerance,
                "detail": self.detail,
                "skipped": self.skipped,
            }
        )


def score_table(scorer, schema) -> np.ndarray:
    """Evaluate a scorer on every (group, cell) pair, giving a ``(G, cells)`` table.

    Scorers either expose ``table(schema)`` or are vectorized callables
    ``scorer(cells, groups)``.
    """
    if hasattr(scorer, "table"):
        return np.asarray(scorer.table(schema))
    if isinstance(scorer, (int, float)):
        return np.full((schema.groups, schema.n_cells), float(scorer))
    G, C = schema.groups, schema.n_cells
    groups = np.repeat(np.arange(G), C)
    cells = np.tile(np.arange(C), G)
    out = np.asarray(scorer(cells, groups))
    if out.dtype != object or not any(isinstance(v, Fraction) for v in out.ravel()):
        out = out.astype(float)
    return out.reshape(G, C)


def group_mean_scores(scores: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Per-group weighted mean of a ``(G, cells)`` score table.

    Scores are centred on their minimum before averaging, so a constant
    scorer yields identical group means with no rounding residue.
    """
    totals = weights.sum(axis=1)
    if np.any(totals <= 0):
        missing = int(np.argmax(totals <= 0))
        raise UndefinedConditionalError(f"group {missing} absent")
    base = scores.min()
    return base + ((scores - base) * weights).sum(axis=1) / totals


def _max_pair_gap(means) -> float:
    return max(abs(means[i] - means[j]) for i, j in itertools.combinations(range(len(means)), 2))


def dpd_empirical(scorer, D: Dataset):
    """|mean score over a0 rows - mean score over a1 rows|, multiplicities respected.

    With more than two groups the largest pairwise gap is returned.
    """
    scores = score_table(scorer, D.schema)
    means = group_mean_scores(scores, D.unlabeled_counts())
    return _max_pair_gap(means)


def dpd_on(scorer, data):
    """DPD of a scorer under the (x, a) marginal of a dataset or distribution."""
    if isinstance(data, Dataset):
        return dpd_empirical(scorer, data)
    scores = score_table(scorer, data.schema)
    return _max_pair_gap(group_mean_scores(scores, data.xa.astype(float)))


def dpd_distributional(J: JointDistribution):
    """|P(y1 | a1) - P(y1 | a0)| (largest pairwise gap for more groups)."""
    rates = [marg_y_given_a(J, a) for a in range(J.schema.groups)]
    return _max_pair_gap(rates)


def check_statistical_parity(J: JointDistribution, tol: float = 1e-9) -> FairnessGapReport:
    rates = [marg_y_given_a(J, a) for a in range(J.schema.groups)]
    return FairnessGapReport(
        "statistical_parity",
        _max_pair_gap(rates),
        {f"a{a}": r for a, r in enumerate(rates)},
        tol,
    )


def check_wae(J: JointDistribution, tol: float = 1e-9) -> FairnessGapReport:
    """Largest gap |P(y1|x,ai) - P(y1|x,aj)| over cells supported in both groups."""
    cond = J.cond_table()
    mask = J.support_mask()
    value = 0
    worst = None
    skipped = set()
    for i, j in itertools.combinations(range(J.schema.groups), 2):
        shared = mask[i] & mask[j]
        skipped.update(int(x) for x in np.flatnonzero(mask[i] ^ mask[j]))
        for x in np.flatnonzero(shared):
            gap = abs(cond[i, x] - cond[j, x])
            if worst is None or gap > value:
                value, worst = gap, (int(x), i, j)
    detail = {}
    if worst is not None:
        detail = {"cell": worst[0], "groups": [worst[1], worst[2]]}
    return FairnessGapReport("wae", value, detail, tol, sorted(skipped))


def odds(J: JointDistribution, cell, group: int):
    """P(y1 | x, a) / P(y0 | x, a); ``math.inf`` when P(y0 | x, a) = 0."""
    x = J.schema.cell_index(cell)
    a = J.schema.check_group(group)
    p0, p1 = J.mass[0, a, x], J.mass[1, a, x]
    if p0 + p1 <= 0:
        raise DistributionError(f"cell {x} is outside the support of group {a}")
    if p0 == 0:
        return math.inf
    return p1 / p0
