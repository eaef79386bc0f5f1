"""Reconstruct candidate fair distributions from a biased one.

Every reconstruction here inverts one of the bias mechanisms for a chosen
biasing spec.  The data alone never pins down a single spec, so the
``feasible_*`` helpers return a :class:`RecoveryFamily` describing the whole
admissible set through a few free scalars.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .audit import DEFAULT_TOL, audit_sp_label, audit_sp_selection
from .bias import LabelBiasSpec, SelectionBiasSpec, apply_selection_bias, delta
from .distribution import Dataset, JointDistribution
from .errors import DistributionError, InfeasibleError, SpecError

DEGENERATE = 1e-12


def f_delta(d, t):
    """Odds-rescaling map t -> t / (d + (1 - d) t) on [0, 1].

    ``d = inf`` sends every t < 1 to 0 and keeps f(1) = 1; ``d = 0`` sends
    every t > 0 to 1.  Arrays are mapped elementwise.
    """
    if isinstance(t, np.ndarray):
        return np.array([f_delta(d, v) for v in t.ravel()], dtype=t.dtype).reshape(t.shape)
    if d < 0 or not 0 <= t <= 1:
        raise ValueError(f"f_delta needs d >= 0 and t in [0, 1], got d={d}, t={t}")
    if d == math.inf:
        return 1.0 if t == 1 else 0.0
    den = d * (1 - t) + t
    if den == 0:
        return 0 * t
    return t / den


@dataclass
class FreeParameter:
    """One free scalar of a family with its admissible closed range."""

    name: str
    group: int
    lo: object
    hi: object
    branch: str = "regular"

    def at(self, position):
        """Point at relative ``position`` in [0, 1] along the range."""
        return self.lo + (self.hi - self.lo) * position

    def to_dict(self) -> dict:
        return {"name": self.name, "group": self.group, "range": [self.lo, self.hi], "branch": self.branch}


@dataclass
class RecoveryFamily:
    """Admissible biasing specs for one worldview/bias combination.

    ``build`` maps a list of parameter values (one per entry of ``params``) to
    a spec.  ``alternatives`` lists extra branches (label inversion) that the
    default sampler does not visit.
    """

    combo: str
    params: list
    build: Callable
    target: dict = field(default_factory=dict)
    alternatives: list = field(default_factory=list)
    canonical_spec: object = None

    def spec(self, positions=None):
        """Spec at relative positions along each free parameter (default: midpoints)."""
        if positions is None:
            positions = [Fraction(1, 2) if isinstance(p.lo, Fraction) else 0.5 for p in self.params]
        if len(positions) != len(self.params):
            raise ValueError(f"need {len(self.params)} positions, got {len(positions)}")
        return self.build([p.at(s) for p, s in zip(self.params, positions)])

    def spec_at(self, values):
        """Spec for explicit parameter values (each must lie in its range)."""
        for p, v in zip(self.params, values):
            if not p.lo - 1e-12 <= v <= p.hi + 1e-12:
                raise InfeasibleError(f"{p.name}[a{p.group}] = {v} outside [{p.lo}, {p.hi}]")
        return self.build(list(values))

    def canonical(self):
        """The spec echoed when a caller does not choose one."""
        return self.canonical_spec if self.canonical_spec is not None else self.spec()

    def to_dict(self) -> dict:
        return {
            "combo": self.combo,
            "params": [p.to_dict() for p in self.params],
            "alternatives": [p.to_dict() for p in self.alternatives],
            "target": self.target,
            "canonical": self.canonical().to_dict(),
        }


def _clamped_interval(lo, hi, tol):
    if lo > hi:
        if lo - hi > tol:
            return None
        lo = hi
    return lo, hi


# -- statistical parity + label bias -----------------------------------------


def _group_stats(J: JointDistribution, a: int):
    cond = J.cond_table()[a][J.support_mask()[a]]
    q = J.mass[1, a].sum() / J.mass[:, a].sum()
    return q, cond.min(), cond.max()


def feasible_c_specs_sp(J: JointDistribution, p_y1, tol: float = DEFAULT_TOL) -> RecoveryFamily:
    """Label-flip specs that turn a fair world with favorable rate ``p_y1`` into J.

    Each group contributes one free scalar.  On the regular branch it is
    P(c1|y0,a) (the upgrade probability), and P(c0|y1,a) then follows from the
    rate constraint; when ``p_y1 = 0`` the roles swap.
    """
    if J.exact and not isinstance(p_y1, Fraction):
        p_y1 = Fraction(p_y1)
    report = audit_sp_label(J, tol)
    if report.intersection is None or not (report.intersection[0] - tol <= p_y1 <= report.intersection[1] + tol):
        raise InfeasibleError(f"P(y1) = {p_y1} is outside the admissible set {report.intersection}")
    p = p_y1
    params, alternatives, solvers = [], [], []
    for a in range(J.schema.groups):
        q, lo_c, hi_c = _group_stats(J, a)
        if p == 1:
            reg = _clamped_interval(0 * q, lo_c, tol) if q >= hi_c - tol else None
            rev = _clamped_interval(hi_c, 1 + 0 * q, tol) if q <= lo_c + tol else None
            name = "c1_y0"
            solve = (lambda q: lambda u: (u, q))(q)
        elif p == 0:
            reg = _clamped_interval(hi_c, 1 + 0 * q, tol) if q <= lo_c + tol else None
            rev = _clamped_interval(0 * q, lo_c, tol) if q >= hi_c - tol else None
            name = "c0_y1"
            solve = (lambda q: lambda v: (q, v))(q)
        else:
            reg = _clamped_interval(max(0 * q, (q - p) / (1 - p)), min(lo_c, (q - hi_c * p) / (1 - p)), tol)
            rev = _clamped_interval(max(hi_c, (q - lo_c * p) / (1 - p)), min(1 + 0 * q, q / (1 - p)), tol)
            name = "c1_y0"
            solve = (lambda q: lambda u: (u, (q - u * (1 - p)) / p))(q)
        if reg is None:
            raise InfeasibleError(f"group a{a}: no admissible label-flip spec for P(y1) = {p}")
        params.append(FreeParameter(name, a, reg[0], reg[1]))
        if rev is not None:
            alternatives.append(FreeParameter(name, a, rev[0], rev[1], branch="inverted"))
        solvers.append(solve)

    def build(values):
        flip = []
        for solve, v in zip(solvers, values):
            u, c0_y1 = solve(v)
            flip.append((_clip01(u), _clip01(1 - c0_y1)))
        return LabelBiasSpec(np.array(flip, dtype=object).T)

    return RecoveryFamily("sp-label", params, build, {"p_y1": p}, alternatives)


def _clip01(v):
    if v < 0:
        return 0 * v
    if v > 1:
        return 1 + 0 * v
    return v


def _uv(J: JointDistribution, S: LabelBiasSpec):
    """(P(c1|y0,a), P(c0|y1,a)) per group, converted to the distribution's number type."""
    flip = S.flip
    if J.exact and flip.dtype != object:
        flip = np.array([Fraction(float(v)) for v in flip.ravel()], dtype=object).reshape(flip.shape)
    elif not J.exact:
        flip = flip.astype(float)
    if flip.shape[1] != J.schema.groups:
        raise SpecError("spec and distribution disagree on group count")
    return flip[0], 1 - flip[1]


def _joint_from_conditionals(J: JointDistribution, cond: np.ndarray) -> JointDistribution:
    """Keep P(x, a) of J and replace P(y1 | x, a) by ``cond``."""
    xa = J.xa
    mask = J.support_mask()
    c = np.where(mask, cond, 0)
    if not J.exact:
        c = np.clip(c.astype(float), 0.0, 1.0)
    m1 = xa * c
    m0 = xa - m1
    return JointDistribution(J.schema, np.stack([m0, m1]))


def recover_sp_label(J: JointDistribution, p_y1, spec: LabelBiasSpec, tol: float = DEFAULT_TOL) -> JointDistribution:
    """Fair distribution under statistical parity that ``spec`` maps onto J.

    P(x, a) is kept; each cell's conditional is the inverse of the flip map.
    Groups whose two flip parameters coincide receive the constant ``p_y1``.
    """
    if J.exact and not isinstance(p_y1, Fraction):
        p_y1 = Fraction(p_y1)
    u, v = _uv(J, spec)
    cond_d = J.cond_table()
    mask = J.support_mask()
    out = np.zeros_like(cond_d)
    for a in range(J.schema.groups):
        q = J.mass[1, a].sum() / J.mass[:, a].sum()
        lhs = v[a] * p_y1 + u[a] * (1 - p_y1)
        if abs(lhs - q) > tol:
            raise InfeasibleError(f"group a{a}: spec gives P_D(y1|a) = {lhs}, observed {q}")
        conds = cond_d[a][mask[a]]
        lo, hi = min(u[a], v[a]), max(u[a], v[a])
        if conds.min() < lo - tol or conds.max() > hi + tol:
            raise InfeasibleError(f"group a{a}: conditionals leave the bracket [{lo}, {hi}]")
        den = v[a] - u[a]
        if abs(den) < DEGENERATE:
            out[a] = p_y1
        else:
            out[a] = np.where(mask[a], (np.where(mask[a], cond_d[a], 0) - u[a]) / den, 0)
    return _joint_from_conditionals(J, out)


# -- WAE + label bias -----------------------------------------------------------


def _default_anchor(J: JointDistribution) -> int:
    """Last (privileged) group whose conditionals vary; the last group if none do."""
    cond = J.cond_table()
    mask = J.support_mask()
    for a in reversed(range(J.schema.groups)):
        vals = cond[a][mask[a]]
        if len(vals) and vals.max() - vals.min() >= DEGENERATE:
            return a
    return J.schema.groups - 1


def _wae_order(J: JointDistribution, anchor: int | None):
    anchor = _default_anchor(J) if anchor is None else anchor
    return [anchor] + [a for a in range(J.schema.groups) if a != anchor]


def _canonical_wae(J: JointDistribution, anchor: int | None):
    """Spec with P(c0|y,a) = max_x P_D(y|x,a), oriented to each group's relation with the anchor."""
    order = _wae_order(J, anchor)
    cond = J.cond_table()
    mask = J.support_mask()
    r = order[0]
    u, v = {}, {}
    for a in order:
        vals = cond[a][mask[a]]
        lo, hi = vals.min(), vals.max()
        shared = mask[a] & mask[r]
        increasing = True
        if a != r and shared.any():
            xs = np.flatnonzero(shared)
            ref = np.array([cond[r, x] for x in xs], dtype=float)
            own = np.array([cond[a, x] for x in xs], dtype=float)
            if ref.max() > ref.min():
                increasing = own[np.argmax(ref)] >= own[np.argmin(ref)]
        u[a], v[a] = (lo, hi) if increasing else (hi, lo)
    return u, v


def _spec_from_uv(groups: int, u: dict, v: dict) -> LabelBiasSpec:
    return LabelBiasSpec(np.array([[u[a] for a in range(groups)], [1 - v[a] for a in range(groups)]], dtype=object))


def _wae_shared_conditional(J: JointDistribution, u, v, order):
    """P(y1 | x) from the first group (anchor first) that supports x with a non-degenerate spec."""
    cond = J.cond_table()
    mask = J.support_mask()
    C = J.schema.n_cells
    one = Fraction(1) if J.exact else 1.0
    shared = np.empty(C, dtype=object if J.exact else float)
    for x in range(C):
        value = None
        for a in order:
            if mask[a, x] and abs(v[a] - u[a]) >= DEGENERATE:
                value = (cond[a, x] - u[a]) / (v[a] - u[a])
                break
        shared[x] = one if value is None else value
    return shared


def recover_wae_label(J: JointDistribution, spec: LabelBiasSpec | None = None, tol: float = DEFAULT_TOL,
                      anchor: int | None = None) -> JointDistribution:
    """Fair WAE distribution that ``spec`` maps onto J (canonical spec when omitted).

    The shared conditional P(y1 | x) is solved from the anchor group (the last,
    privileged group by default) and checked against every group.
    """
    order = _wae_order(J, anchor)
    if spec is None:
        u, v = _canonical_wae(J, anchor)
    else:
        uu, vv = _uv(J, spec)
        u = {a: uu[a] for a in range(J.schema.groups)}
        v = {a: vv[a] for a in range(J.schema.groups)}
    shared = _wae_shared_conditional(J, u, v, order)
    cond = J.cond_table()
    mask = J.support_mask()
    worst = 0.0
    for a in range(J.schema.groups):
        for x in np.flatnonzero(mask[a]):
            pred = v[a] * shared[x] + u[a] * (1 - shared[x])
            worst = max(worst, float(abs(pred - cond[a, x])))
    lo_bad = min(float(s) for s in shared) < -tol
    hi_bad = max(float(s) for s in shared) > 1 + tol
    if worst > tol or lo_bad or hi_bad:
        raise InfeasibleError(
            f"spec does not reproduce the data under a shared conditional (residual {worst:.3g})"
        )
    table = np.array([shared for _ in range(J.schema.groups)], dtype=shared.dtype)
    return _joint_from_conditionals(J, table)


def feasible_c_specs_wae(J: JointDistribution, tol: float = DEFAULT_TOL, anchor: int | None = None) -> RecoveryFamily:
    """Label-flip specs consistent with a shared fair conditional.

    The free parameters are the anchor group's (P(c1|y0,a), P(c0|y1,a)); every
    other group's pair follows from its affine relation with the anchor.
    """
    order = _wae_order(J, anchor)
    r = order[0]
    u, v = _canonical_wae(J, anchor)
    recover_wae_label(J, _spec_from_uv(J.schema.groups, u, v), tol, anchor)
    span = v[r] - u[r]
    zero = 0 * span
    one = zero + 1
    if abs(span) < DEGENERATE:
        params = [FreeParameter("c1_y0", r, u[r], u[r]), FreeParameter("c0_y1", r, v[r], v[r])]
        lin_u = {a: (zero, u[a]) for a in order}
        lin_v = {a: (zero, v[a]) for a in order}
    else:
        # u_a = k_a * u_r + c_a and v_a = k_a * v_r + c_a for every group
        lin_u = {}
        for a in order:
            k = (v[a] - u[a]) / span
            lin_u[a] = (k, u[a] - k * u[r])
        lin_v = lin_u
        if span > 0:
            u_lo, u_hi, v_lo, v_hi = zero, u[r], v[r], one
        else:
            u_lo, u_hi, v_lo, v_hi = u[r], one, zero, v[r]
        for a in order[1:]:
            k, c = lin_u[a]
            u_lo, u_hi = _restrict(u_lo, u_hi, k, c)
            v_lo, v_hi = _restrict(v_lo, v_hi, k, c)
        params = [FreeParameter("c1_y0", r, u_lo, u_hi), FreeParameter("c0_y1", r, v_lo, v_hi)]

    def build(values):
        ur, vr = values
        uu = {a: _clip01(lin_u[a][0] * ur + lin_u[a][1]) for a in order}
        vv = {a: _clip01(lin_v[a][0] * vr + lin_v[a][1]) for a in order}
        return _spec_from_uv(J.schema.groups, uu, vv)

    return RecoveryFamily("wae-label", params, build, {"anchor": r},
                          canonical_spec=_spec_from_uv(J.schema.groups, u, v))


def _restrict(lo, hi, k, c):
    """Narrow [lo, hi] so that k * t + c stays in [0, 1]."""
    if k > 0:
        lo, hi = max(lo, -c / k), min(hi, (1 - c) / k)
    elif k < 0:
        lo, hi = max(lo, (1 - c) / k), min(hi, -c / k)
    return lo, max(lo, hi)


# -- selection bias ------------------------------------------------------------


def recover_selection(J: JointDistribution, deltas, group_weights=None, marginal: str = "reweight") -> JointDistribution:
    """Undo selection with per-group odds multipliers ``deltas``.

    Conditionals become f_delta(P_D(y1 | x, a)).  With ``marginal="reweight"``
    the within-group table is rescaled by the inverse keep ratio, which also
    restores the fair P(x | a); ``marginal="biased"`` keeps P_D(x | a) instead.
    Group weights P(a) are not identifiable and default to P_D(a).
    """
    G = J.schema.groups
    deltas = list(deltas)
    if len(deltas) != G:
        raise SpecError(f"need {G} deltas, got {len(deltas)}")
    for d in deltas:
        if not 0 < d < math.inf:
            raise SpecError(f"delta must be positive and finite, got {d}")
    gm = J.group_mass
    if group_weights is None:
        weights = gm
    else:
        weights = np.asarray(group_weights, dtype=gm.dtype)
        if len(weights) != G or np.any(weights < 0) or abs(weights.sum() - 1) > 1e-12:
            raise DistributionError("group weights must be a probability vector over groups")
    if np.any(gm <= 0):
        raise DistributionError("every group needs positive mass")
    blocks = []
    for a in range(G):
        d = Fraction(deltas[a]) if J.exact else float(deltas[a])
        m1, m0 = J.mass[1, a], J.mass[0, a]
        if marginal == "reweight":
            w1, w0 = m1, d * m0
        elif marginal == "biased":
            xa = m1 + m0
            mask = np.asarray(xa > 0, dtype=bool)
            cond = np.where(mask, J.cond_table()[a], 0)
            fair = f_delta(d, cond)
            w1, w0 = xa * fair, xa * (1 - fair)
        else:
            raise ValueError(f"unknown marginal mode {marginal!r}")
        tot = w1.sum() + w0.sum()
        blocks.append((w0 * weights[a] / tot, w1 * weights[a] / tot))
    mass = np.stack([np.stack([b[0] for b in blocks]), np.stack([b[1] for b in blocks])])
    return JointDistribution(J.schema, mass)


def feasible_k_specs_sp(J: JointDistribution) -> RecoveryFamily:
    """Keep-specs that explain J under statistical parity.

    The free parameter is a0's odds multiplier; group j then needs
    delta_j = ratio_j * delta_0.
    """
    rep = audit_sp_selection(J)
    one = Fraction(1) if J.exact else 1.0
    params = [FreeParameter("delta", 0, one / 1000 if J.exact else 1e-3, one * 1000)]

    def build(values):
        d0 = values[0]
        return SelectionBiasSpec.from_deltas([d0] + [rep.ratios[j] * d0 for j in sorted(rep.ratios)])

    return RecoveryFamily("sp-sel", params, build, {"ratios": rep.ratios}, canonical_spec=rep.witness)


def recover_sp_selection(J: JointDistribution, spec: SelectionBiasSpec | None = None, group_weights=None) -> JointDistribution:
    """Fair statistical-parity distribution for a keep-spec (the audit witness by default)."""
    spec = audit_sp_selection(J).witness if spec is None else spec
    return recover_selection(J, [delta(spec, a) for a in range(J.schema.groups)], group_weights)


def recover_wae_selection(J: JointDistribution, spec: SelectionBiasSpec | None = None, tol: float = DEFAULT_TOL,
                          group_weights=None) -> JointDistribution:
    """Fair WAE distribution for a keep-spec (a0 unbiased and a_j matched to the fitted odds ratio by default)."""
    from .audit import audit_wae_selection

    if spec is None:
        ratios = []
        for j in range(1, J.schema.groups):
            rep = audit_wae_selection(J, tol, (0, j))
            if not rep.feasible:
                raise InfeasibleError(f"odds of a0 and a{j} are not proportional (residual {rep.residual})")
            # alpha = odds(a0) / odds(aj), so a_j's multiplier relative to a0 is 1 / alpha
            ratios.append(1 / rep.alpha)
        one = Fraction(1) if J.exact else 1.0
        spec = SelectionBiasSpec.from_deltas([one] + ratios)
    return recover_selection(J, [delta(spec, a) for a in range(J.schema.groups)], group_weights)


# -- reweighing -------------------------------------------------------------


def reweighing_weights(data, *, exact: bool = False) -> np.ndarray:
    """Instance weights w[y, a] = P(y) P(a) / P(y, a) making (y, a) factorize.

    ``data`` is a :class:`Dataset` (empirical frequencies) or a distribution.
    """
    if isinstance(data, Dataset):
        counts = data.counts().sum(axis=2)
        if exact:
            table = np.array([[Fraction(int(c)) for c in row] for row in counts], dtype=object)
        else:
            table = counts.astype(float)
    else:
        table = data.mass.sum(axis=2)
    if np.any(table <= 0):
        y, a = (int(i) for i in np.argwhere(table <= 0)[0])
        raise DistributionError(f"(y{y}, a{a}) cell is empty; weight undefined")
    n = table.sum()
    py = table.sum(axis=1) / n
    pa = table.sum(axis=0) / n
    return py[:, None] * pa[None, :] / (table / n)


def reweigh(J: JointDistribution) -> JointDistribution:
    """J with each (y, a) slice scaled by its reweighing weight."""
    w = reweighing_weights(J)
    return JointDistribution.normalized(J.schema, J.mass * w[:, :, None])


# -- selection Jensen gap -------------------------------------------------------


@dataclass
class SelectionGapReport:
    """How far the fair conditionals drift under the biased covariate mix.

    ``gaps[a]`` = E_{x ~ P_D(x|a)}[P(y1|x,a)] - P(y1|a).  ``residual_dpd`` is the
    DPD the fair conditionals show on the biased population.
    """

    deltas: list
    gaps: list
    constant: list
    residual_dpd: float
    sign_ok: list

    def to_dict(self) -> dict:
        return {
            "deltas": self.deltas,
            "gaps": self.gaps,
            "constant_conditional": self.constant,
            "sign_matches_delta": self.sign_ok,
            "residual_dpd": self.residual_dpd,
        }


def _sign(v, eps=0.0) -> int:
    return 0 if abs(v) <= eps else (1 if v > 0 else -1)


def selection_dpd_gap(J: JointDistribution, S: SelectionBiasSpec, const_tol: float = 1e-12) -> SelectionGapReport:
    JD = apply_selection_bias(J, S)
    cond = J.cond_table()
    mask = J.support_mask()
    xg_d = JD.x_given_a()
    G = J.schema.groups
    deltas, gaps, constant, sign_ok, drifted = [], [], [], [], []
    for a in range(G):
        c = np.where(mask[a], cond[a], 0)
        on_biased = (xg_d[a] * c).sum()
        fair_rate = J.mass[1, a].sum() / J.mass[:, a].sum()
        gap = on_biased - fair_rate
        d = delta(S, a)
        vals = cond[a][mask[a]].astype(float)
        is_const = bool(vals.max() - vals.min() <= const_tol)
        deltas.append(d)
        gaps.append(gap)
        constant.append(is_const)
        drifted.append(on_biased)
        sign_ok.append(is_const or _sign(gap) == _sign(d - 1))
    residual = max(abs(drifted[i] - drifted[j]) for i in range(G) for j in range(i + 1, G))
    return SelectionGapReport(deltas, gaps, constant, residual, sign_ok)

