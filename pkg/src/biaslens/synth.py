"""Fair synthetic worlds, seeded sampling, and the four toy fixtures."""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from . import rng
from .distribution import Dataset, JointDistribution, Schema
from .errors import DistributionError

SYNTH_STREAM = 10
SAMPLE_STREAM = 11


@dataclass
class SynthConfig:
    """Naive-Bayes-shaped world: A and Y independent, features independent given (Y, A).

    ``tables[i][y, a]`` is the distribution of feature ``i`` given (y, a).
    """

    p_a: np.ndarray
    p_y1: float
    cards: tuple
    tables: list
    seed: int

    @property
    def groups(self) -> int:
        return len(self.p_a)

    @property
    def schema(self) -> Schema:
        return Schema(self.cards, self.groups)

    def joint(self) -> JointDistribution:
        G = self.groups
        py = np.array([1.0 - self.p_y1, self.p_y1])
        mass = np.empty((2, G, int(np.prod(self.cards))))
        for y in range(2):
            for a in range(G):
                block = reduce(np.multiply.outer, [t[y, a] for t in self.tables]).ravel()
                mass[y, a] = py[y] * self.p_a[a] * block
        return JointDistribution(self.schema, mass)

    def to_dict(self) -> dict:
        return {
            "p_a": [float(v) for v in self.p_a],
            "p_y1": float(self.p_y1),
            "cards": list(self.cards),
            "tables": [t.tolist() for t in self.tables],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        cfg = cls(
            np.asarray(d["p_a"], dtype=float),
            float(d["p_y1"]),
            tuple(d["cards"]),
            [np.asarray(t, dtype=float) for t in d["tables"]],
            int(d.get("seed", 0)),
        )
        cfg.check()
        return cfg

    def check(self) -> None:
        if abs(self.p_a.sum() - 1) > 1e-12 or np.any(self.p_a < 0):
            raise DistributionError("P(a) must be a probability vector")
        if not 0 <= self.p_y1 <= 1:
            raise DistributionError("P(y1) must lie in [0, 1]")
        for i, t in enumerate(self.tables):
            if t.shape != (2, self.groups, self.cards[i]):
                raise DistributionError(f"table {i} has shape {t.shape}")
            if np.any(t < 0) or np.any(np.abs(t.sum(axis=2) - 1) > 1e-12):
                raise DistributionError(f"table {i} rows must be probability vectors")


def generate_fair_sp_network(groups: int = 2, k: int = 4, cards=3, seed: int = 0,
                             p_a=None, p_y1: float = 0.5) -> tuple[SynthConfig, JointDistribution]:
    """Draw a statistically fair world.

    Feature conditionals P(x_i | y, a) are drawn from the flat Dirichlet, so
    every (y, a) row is a uniformly random point of the simplex.
    """
    if k < 1:
        raise DistributionError("need at least one feature")
    cards = (cards,) * k if isinstance(cards, (int, np.integer)) else tuple(cards)
    if len(cards) != k or any(c < 2 for c in cards):
        raise DistributionError(f"need {k} cardinalities >= 2, got {cards}")
    p_a = np.full(groups, 1.0 / groups) if p_a is None else np.asarray(p_a, dtype=float)
    gen = rng.philox(seed, SYNTH_STREAM)
    tables = [gen.dirichlet(np.ones(c), size=(2, groups)) for c in cards]
    cfg = SynthConfig(p_a, float(p_y1), cards, tables, int(seed))
    cfg.check()
    return cfg, cfg.joint()


def sample_dataset(J: JointDistribution, n: int, seed: int) -> Dataset:
    """n i.i.d. rows from J; draw i depends only on (seed, i)."""
    if n < 1:
        raise DistributionError("sample size must be at least 1")
    cdf = np.cumsum(J.mass.astype(float).ravel())
    u = rng.uniforms(seed, n, SAMPLE_STREAM) * cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
    counts = np.bincount(idx, minlength=len(cdf))
    return Dataset.from_counts(J.schema, counts)


# -- toy fixtures -----------------------------------------------------------

DEGREES = ("b.sc", "m.sc", "ph.d")
GROUP_NAMES = ("female", "male")
FIXTURE_SCHEMA = Schema((3,), 2)

_F, _M = 0, 1
_BSC, _MSC, _PHD = 0, 1, 2
_NEG, _POS = 0, 1

# (label, degree, group, copies)
_FIXTURES = {
    "D_a": [
        (_NEG, _BSC, _M, 10), (_NEG, _MSC, _M, 8), (_POS, _MSC, _M, 24), (_POS, _PHD, _M, 21),
        (_NEG, _BSC, _F, 20), (_NEG, _MSC, _F, 4), (_POS, _MSC, _F, 4), (_NEG, _PHD, _F, 3), (_POS, _PHD, _F, 6),
    ],
    "D_b": [
        (_POS, _BSC, _M, 10), (_NEG, _BSC, _M, 20), (_POS, _MSC, _M, 20),
        (_NEG, _MSC, _M, 10), (_POS, _PHD, _M, 20), (_NEG, _PHD, _M, 10),
        (_POS, _BSC, _F, 10), (_NEG, _BSC, _F, 20), (_POS, _MSC, _F, 10),
        (_NEG, _MSC, _F, 20), (_POS, _PHD, _F, 20), (_NEG, _PHD, _F, 10),
    ],
    "D_a_prime": [
        (_NEG, _BSC, _M, 10), (_NEG, _MSC, _M, 40), (_POS, _MSC, _M, 30), (_NEG, _PHD, _M, 10), (_POS, _PHD, _M, 10),
        (_NEG, _BSC, _F, 20), (_NEG, _MSC, _F, 20), (_POS, _MSC, _F, 10), (_NEG, _PHD, _F, 30), (_POS, _PHD, _F, 20),
    ],
}
# The printed table for D_b' repeats D_b row for row.
_FIXTURES["D_b_prime"] = list(_FIXTURES["D_b"])

FIXTURE_NAMES = tuple(_FIXTURES)


def fixture(name: str) -> Dataset:
    """Toy degree/sex dataset.  Group 0 is female (deprived), group 1 male; label 1 is '+'."""
    try:
        rows = _FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURE_NAMES)}") from None
    return Dataset.from_rows(FIXTURE_SCHEMA, [(y, (x,), a, n) for y, x, a, n in rows])
