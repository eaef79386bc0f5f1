"""Consistency audits: could a worldview plus a bias mechanism have produced
the observed distribution?

Four combinations are covered:

``sp-label``
    statistical parity distorted by label flips (interval intersection test).
``sp-sel``
    statistical parity distorted by selection; always feasible, the audit
    returns the odds ratio any generating keep-spec must reproduce.
``wae-label``
    "we're all equal" distorted by label flips; per-cell conditionals of two
    groups must be collinear.
``wae-sel``
    "we're all equal" distorted by selection; per-cell odds of two groups must
    be proportional.

Maxima and minima over cells are always taken over the group's support.
Audits run on float or exact-rational distributions; with exact input the
interval endpoints, line coefficients and odds ratios come back as
``Fraction`` values wherever no square root or logarithm is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .bias import SelectionBiasSpec
from .distribution import JointDistribution
from .errors import AuditError, UndefinedConditionalError
from .io import jsonable

DEFAULT_TOL = 1e-9
SAMPLED_TOL = 0.05

COMBOS = ("sp-label", "sp-sel", "wae-label", "wae-sel")


def _group_rates(J: JointDistribution, a: int):
    gm = J.mass[:, a].sum()
    if gm <= 0:
        raise UndefinedConditionalError(f"group {a} has zero mass")
    return J.mass[1, a].sum() / gm, J.mass[0, a].sum() / gm


def _support_conds(J: JointDistribution, a: int) -> np.ndarray:
    cond = J.cond_table()[a]
    return cond[J.support_mask()[a]]


@dataclass
class IntervalReport:
    """Admissible values of the fair favorable rate P(y1), per group and jointly."""

    intervals: dict
    intersection: tuple | None
    feasible: bool
    tolerance: float
    gap: object = 0

    def to_dict(self) -> dict:
        return {
            "combo": "sp-label",
            "feasible": self.feasible,
            "intervals": {f"a{a}": list(iv) for a, iv in self.intervals.items()},
            "intersection": None if self.intersection is None else list(self.intersection),
            "gap": self.gap,
            "tolerance": self.tolerance,
        }


def group_interval(J: JointDistribution, a: int) -> tuple:
    """[1 - P_D(y0|a) / max_x P_D(y0|x,a),  P_D(y1|a) / max_x P_D(y1|x,a)]."""
    q1, q0 = _group_rates(J, a)
    conds = _support_conds(J, a)
    max1 = conds.max()
    max0 = 1 - conds.min()
    # A group with no favorable (resp. unfavorable) labels constrains nothing on that side.
    hi = q1 / max1 if max1 > 0 else 1
    lo = 1 - q0 / max0 if max0 > 0 else 0
    return lo, hi


def audit_sp_label(J: JointDistribution, tol: float = DEFAULT_TOL) -> IntervalReport:
    """Intersect the per-group intervals of admissible fair rates P(y1).

    The intervals assume every group flips labels with the same orientation:
    1 - P(c1|y0,a) - P(c0|y1,a) has one sign across groups.  A group whose
    flips point the other way constrains 1 - P(y1) instead, so a fair source
    biased with mixed orientations can fail this audit.  An empty
    intersection within ``tol`` means no same-orientation label bias of a
    statistically fair world explains J.
    """
    intervals = {a: group_interval(J, a) for a in range(J.schema.groups)}
    lo = max(iv[0] for iv in intervals.values())
    hi = min(iv[1] for iv in intervals.values())
    gap = lo - hi if lo > hi else 0
    if lo <= hi:
        inter = (lo, hi)
    elif gap <= tol:
        mid = (lo + hi) / 2
        inter = (mid, mid)
    else:
        inter = None
    return IntervalReport(intervals, inter, inter is not None, tol, gap)


@dataclass
class SelectionAuditReport:
    """Odds ratios a generating selection must reproduce, with one witness keep-spec.

    ``ratios[j]`` is odds_D(a_j) / odds_D(a0) for the group-level odds of y1.
    Feasibility always holds under statistical parity.
    """

    ratios: dict
    witness: SelectionBiasSpec
    feasible: bool = True
    note: str = "some selection always explains the data under statistical parity; the witness is one choice"

    @property
    def r(self):
        return self.ratios[1]

    def to_dict(self) -> dict:
        return {
            "combo": "sp-sel",
            "feasible": self.feasible,
            "ratios": {f"a{j}": r for j, r in self.ratios.items()},
            "witness": self.witness.to_dict(),
            "note": self.note,
        }


def audit_sp_selection(J: JointDistribution) -> SelectionAuditReport:
    odds = []
    for a in range(J.schema.groups):
        q1, q0 = _group_rates(J, a)
        if q1 == 0 or q0 == 0:
            raise AuditError(f"P_D(y|a{a}) has a zero entry; group odds undefined")
        odds.append(q1 / q0)
    ratios = {j: odds[j] / odds[0] for j in range(1, len(odds))}
    one = Fraction(1) if J.exact else 1.0
    witness = SelectionBiasSpec.from_deltas([one] + [ratios[j] for j in sorted(ratios)])
    return SelectionAuditReport(ratios, witness)


@dataclass
class LinearFitReport:
    """Line alpha*u + beta*v + gamma = 0 through the points (P_D(y1|x,ai), P_D(y1|x,aj)).

    ``coefficients`` has unit Euclidean norm with its first nonzero entry
    positive.  ``residual`` is the largest perpendicular distance of a point
    from the line.  When the points do not all share one ``v`` value the
    relation is also given as ``u = slope * v + intercept``.
    """

    groups: tuple
    points: list
    cells: list
    coefficients: tuple
    slope: object
    intercept: object
    residual: object
    feasible: bool
    tolerance: float
    underdetermined: bool

    def to_dict(self) -> dict:
        return {
            "combo": "wae-label",
            "groups": list(self.groups),
            "feasible": self.feasible,
            "coefficients": list(self.coefficients),
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "underdetermined": self.underdetermined,
            "points": [list(p) for p in self.points],
            "cells": self.cells,
        }


def _canonical(coef) -> tuple:
    coef = np.asarray(coef, dtype=float)
    coef = coef / np.linalg.norm(coef)
    nz = np.flatnonzero(np.abs(coef) > 1e-15)
    if len(nz) and coef[nz[0]] < 0:
        coef = -coef
    return tuple(float(c) + 0.0 for c in coef)


def _shared_cells(J: JointDistribution, i: int, j: int) -> np.ndarray:
    mask = J.support_mask()
    return np.flatnonzero(mask[i] & mask[j])


def _exact_line(pts):
    """Line through the first two distinct points if every point lies on it exactly."""
    (u1, v1), (u2, v2) = pts[0], pts[1]
    du, dv = u2 - u1, v2 - v1
    for u, v in pts[2:]:
        if du * (v - v1) - dv * (u - u1) != 0:
            return None
    # normal (dv, -du): dv*u - du*v + (du*v1 - dv*u1) = 0
    return dv, -du, du * v1 - dv * u1


def audit_wae_label(J: JointDistribution, tol: float = DEFAULT_TOL, groups=(0, 1)) -> LinearFitReport:
    i, j = groups
    cells = _shared_cells(J, i, j)
    if len(cells) == 0:
        raise AuditError(f"groups a{i} and a{j} share no supported cell")
    cond = J.cond_table()
    pts = [(cond[i, x], cond[j, x]) for x in cells]
    distinct = list(dict.fromkeys(pts))
    underdetermined = len(distinct) < 3

    if len(distinct) == 1:
        u0, v0 = distinct[0]
        raw = (1, -1, v0 - u0)
        residual = 0 * u0
    elif len(distinct) == 2 or (J.exact and _exact_line(distinct) is not None):
        raw = _exact_line(distinct)
        residual = 0 * raw[0]
    else:
        P = np.array(distinct, dtype=float)
        centre = P.mean(axis=0)
        _, _, vt = np.linalg.svd(P - centre)
        normal = vt[-1]
        raw = (normal[0], normal[1], -float(normal @ centre))
        residual = float(np.max(np.abs((P - centre) @ normal)))

    a_, b_, g_ = raw
    slope = intercept = None
    if a_ != 0:
        slope = -b_ / a_ + 0
        intercept = -g_ / a_ + 0
    return LinearFitReport(
        groups=(i, j),
        points=pts,
        cells=[int(x) for x in cells],
        coefficients=_canonical([float(c) for c in raw]),
        slope=slope,
        intercept=intercept,
        residual=residual,
        feasible=residual <= tol,
        tolerance=tol,
        underdetermined=underdetermined,
    )


@dataclass
class OddsRatioReport:
    """Per-cell odds proportionality between two groups.

    ``alpha`` estimates the constant with odds_D(x, ai) = alpha * odds_D(x, aj)
    (geometric mean over eligible cells).  ``residual`` is the largest relative
    deviation |ratio / alpha - 1|.  Cells whose odds are 0 (or infinite) in
    both groups fit any constant and are skipped; a cell that is 0 or
    infinite in only one group cannot be reconciled with a finite positive
    constant and makes the report infeasible.
    """

    groups: tuple
    alpha: object
    residual: object
    feasible: bool
    tolerance: float
    ratios: dict
    skipped: list = field(default_factory=list)
    conflicts: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "combo": "wae-sel",
            "groups": list(self.groups),
            "feasible": self.feasible,
            "alpha": self.alpha,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "ratios": {str(k): v for k, v in self.ratios.items()},
            "skipped": self.skipped,
            "conflicts": self.conflicts,
        }


def audit_wae_selection(J: JointDistribution, tol: float = DEFAULT_TOL, groups=(0, 1)) -> OddsRatioReport:
    i, j = groups
    cells = _shared_cells(J, i, j)
    m = J.mass
    ratios, skipped, conflicts = {}, [], []
    for x in cells:
        oi = _odds(m[1, i, x], m[0, i, x])
        oj = _odds(m[1, j, x], m[0, j, x])
        finite_i = 0 < oi < math.inf
        finite_j = 0 < oj < math.inf
        if finite_i and finite_j:
            ratios[int(x)] = oi / oj
        elif oi == oj:
            skipped.append(int(x))
        else:
            conflicts.append(int(x))
    if not ratios:
        raise AuditError(f"no cell has finite positive odds in both a{i} and a{j}")

    values = list(ratios.values())
    if all(v == values[0] for v in values):
        alpha = values[0]
        residual = 0 * alpha
    else:
        alpha = math.exp(float(np.mean(np.log(np.array(values, dtype=float)))))
        residual = max(abs(float(v) / alpha - 1) for v in values)
    if conflicts:
        residual = math.inf
    return OddsRatioReport(
        groups=(i, j),
        alpha=alpha,
        residual=residual,
        feasible=residual <= tol,
        tolerance=tol,
        ratios=ratios,
        skipped=skipped,
        conflicts=conflicts,
    )


def _odds(p1, p0):
    if p0 == 0:
        return math.inf
    return p1 / p0


def audit_all(J: JointDistribution, tol: float = DEFAULT_TOL, combos=COMBOS) -> dict:
    """Run the requested audits; a failing audit is reported without stopping the others.

    With more than two groups the WAE audits compare every group against a0.
    """
    out = {}
    pairs = [(0, j) for j in range(1, J.schema.groups)]
    runners = {
        "sp-label": lambda: audit_sp_label(J, tol),
        "sp-sel": lambda: audit_sp_selection(J),
        "wae-label": lambda: [audit_wae_label(J, tol, p) for p in pairs],
        "wae-sel": lambda: [audit_wae_selection(J, tol, p) for p in pairs],
    }
    for combo in combos:
        try:
            rep = runners[combo]()
        except (AuditError, UndefinedConditionalError) as exc:
            out[combo] = {"feasible": None, "tol": tol, "error": str(exc)}
            continue
        if isinstance(rep, list):
            feasible = all(r.feasible for r in rep)
            rep = rep[0] if len(rep) == 1 else rep
        else:
            feasible = rep.feasible
        out[combo] = {"feasible": feasible, "tol": tol, "report": rep}
    return out


def summary_to_json(summary: dict, exact: bool = False) -> dict:
    return jsonable(summary, exact)
