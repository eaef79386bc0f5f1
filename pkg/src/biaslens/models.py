"""Scorers over (cell, group): plug-in Bayes tables and DPD-penalized logistic regression."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .distribution import Dataset, JointDistribution, Schema, from_dataset
from .errors import DistributionError, TrainingDivergence
from .measures import dpd_on, score_table


class ScoreTable:
    """Scores P_M(y1 | x, a) stored as a ``(G, cells)`` table.

    A ``randomized`` table labels y1 with probability equal to the score
    instead of thresholding it.
    """

    def __init__(self, scores, randomized: bool = False):
        scores = np.asarray(scores, dtype=float)
        if scores.ndim != 2:
            raise ValueError("score table must be (groups, cells)")
        if np.any(scores < 0) or np.any(scores > 1):
            raise ValueError("scores must lie in [0, 1]")
        scores.setflags(write=False)
        self.scores = scores
        self.randomized = randomized

    def table(self, schema: Schema | None = None) -> np.ndarray:
        if schema is not None and self.scores.shape != (schema.groups, schema.n_cells):
            raise DistributionError("score table does not match schema")
        return self.scores

    def __call__(self, cells, groups):
        return self.scores[np.asarray(groups), np.asarray(cells)]

    def __repr__(self):
        return f"ScoreTable(shape={self.scores.shape}, randomized={self.randomized})"


def fit_plugin_bayes(source, smoothing: float = 0.0) -> ScoreTable:
    """Bayes-optimal scores for a distribution (or a dataset's empirical one); 0.5 off support."""
    J = from_dataset(source, smoothing) if isinstance(source, Dataset) else source
    cond = J.cond_table().astype(float)
    return ScoreTable(np.where(np.isnan(cond), 0.5, cond))


def predict(T, thresholds, schema: Schema | None = None) -> ScoreTable:
    """Hard labeler: y1 iff score >= the row group's threshold."""
    scores = score_table(T, schema) if schema is not None else T.table()
    thr = np.asarray(thresholds, dtype=float)
    if thr.shape != (scores.shape[0],):
        raise ValueError(f"need one threshold per group ({scores.shape[0]})")
    if np.any(thr < 0) or np.any(thr > 1):
        raise ValueError("thresholds must lie in [0, 1]")
    return ScoreTable((scores >= thr[:, None]).astype(float))


# -- logistic regression ---------------------------------------------------


@dataclass
class TrainConfig:
    lr: float = 0.1
    epochs: int = 2000
    lambda_dpd: float = 0.0
    include_group: bool = True
    seed: int = 0


def encode(schema: Schema, cells, groups, include_group: bool) -> np.ndarray:
    """One-hot design matrix, first category of every feature (and group) dropped."""
    cells = np.asarray(cells)
    coords = np.unravel_index(cells, schema.features)
    cols = []
    for card, c in zip(schema.features, coords):
        for v in range(1, card):
            cols.append(c == v)
    if include_group:
        for g in range(1, schema.groups):
            cols.append(np.asarray(groups) == g)
    if not cols:
        return np.zeros((len(cells), 0))
    return np.stack(cols, axis=1).astype(float)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class LogisticObjective:
    """Weighted mean log-loss plus ``lambda_dpd`` times the squared DPD of the scores.

    With more than two groups the penalty sums the squared gaps of every
    group's mean score against group a0.  Parameters are packed as
    ``theta = [intercept, coefficients...]``.
    """

    def __init__(self, D: Dataset, config: TrainConfig, weights=None, penalty_data: Dataset | None = None):
        if D.n < 1:
            raise DistributionError("empty training set")
        schema = D.schema
        C = D.compact()
        self.schema = schema
        self.config = config
        X = encode(schema, C.cell, C.a, config.include_group)
        self.X = np.hstack([np.ones((len(C), 1)), X])
        self.y = C.y.astype(float)
        w = C.count.astype(float)
        if weights is not None:
            w = w * np.asarray(weights, dtype=float)[C.y, C.a]
        self.w = w / w.sum()
        self.lam = float(config.lambda_dpd)
        if self.lam > 0:
            P = penalty_data if penalty_data is not None else D
            counts = P.unlabeled_counts()
            gs, xs = np.nonzero(counts)
            if len(set(gs.tolist())) < schema.groups:
                raise DistributionError("DPD penalty needs every group present")
            self.pX = np.hstack([np.ones((len(xs), 1)), encode(schema, xs, gs, config.include_group)])
            self.pg = gs
            c = counts[gs, xs].astype(float)
            totals = np.bincount(gs, weights=c, minlength=schema.groups)
            self.pw = c / totals[gs]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def _group_means(self, theta):
        s = _sigmoid(self.pX @ theta)
        means = np.bincount(self.pg, weights=self.pw * s, minlength=self.schema.groups)
        return s, means

    def value(self, theta) -> float:
        z = self.X @ theta
        loss = float(self.w @ (np.logaddexp(0.0, z) - self.y * z))
        if self.lam > 0:
            _, means = self._group_means(theta)
            loss += self.lam * float(np.sum((means[1:] - means[0]) ** 2))
        return loss

    def grad(self, theta) -> np.ndarray:
        z = self.X @ theta
        g = self.X.T @ (self.w * (_sigmoid(z) - self.y))
        if self.lam > 0:
            s, means = self._group_means(theta)
            ds = self.pw * s * (1 - s)
            G = self.schema.groups
            dmeans = np.stack([self.pX[self.pg == k].T @ ds[self.pg == k] for k in range(G)])
            gaps = means[1:] - means[0]
            g = g + 2 * self.lam * (gaps @ (dmeans[1:] - dmeans[0]))
        return g


@dataclass
class LinearModel:
    schema: Schema
    intercept: float
    coefficients: np.ndarray
    config: TrainConfig
    history: list = field(default_factory=list, repr=False)

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([[self.intercept], self.coefficients])

    def __call__(self, cells, groups):
        X = encode(self.schema, cells, groups, self.config.include_group)
        return _sigmoid(self.intercept + X @ self.coefficients)

    def table(self, schema: Schema | None = None) -> np.ndarray:
        G, C = self.schema.groups, self.schema.n_cells
        return self(np.tile(np.arange(C), G), np.repeat(np.arange(G), C)).reshape(G, C)

    def to_dict(self) -> dict:
        return {
            "schema": self.schema.to_dict(),
            "intercept": float(self.intercept),
            "coefficients": [float(c) for c in self.coefficients],
            "config": asdict(self.config),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(
            Schema.from_dict(d["schema"]),
            float(d["intercept"]),
            np.asarray(d["coefficients"], dtype=float),
            TrainConfig(**d["config"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "LinearModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def train_logistic(D: Dataset, config: TrainConfig | None = None, weights=None,
                   penalty_data: Dataset | None = None, record: bool = False) -> LinearModel:
    """Full-batch gradient descent from zero.

    ``weights`` is an optional ``(2, G)`` per-(label, group) instance-weight
    table.  ``penalty_data`` moves the DPD term onto another (e.g. unlabeled
    fair) dataset; only its (x, a) rows are used.
    """
    config = config or TrainConfig()
    obj = LogisticObjective(D, config, weights, penalty_data)
    theta = np.zeros(obj.dim)
    history = []
    for epoch in range(config.epochs):
        if record:
            loss = obj.value(theta)
            if not np.isfinite(loss):
                raise TrainingDivergence(epoch, loss)
            history.append(loss)
        theta = theta - config.lr * obj.grad(theta)
        if not np.all(np.isfinite(theta)):
            raise TrainingDivergence(epoch, float("nan"))
    final = obj.value(theta)
    if not np.isfinite(final):
        raise TrainingDivergence(config.epochs, final)
    if record:
        history.append(final)
    return LinearModel(D.schema, float(theta[0]), theta[1:].copy(), config, history)


# -- evaluation ---------------------------------------------------------------


@dataclass
class Metrics:
    accuracy: float
    f1: float
    dpd: float
    f1_undefined: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _weight_table(data) -> np.ndarray:
    if isinstance(data, Dataset):
        if data.n < 1:
            raise DistributionError("empty evaluation set")
        return data.counts().astype(float)
    if isinstance(data, JointDistribution):
        return data.mass.astype(float)
    raise TypeError(f"cannot evaluate on {type(data).__name__}")


def evaluate(scorer, data, thresholds=0.5) -> Metrics:
    """Accuracy and F1 (y1 positive) of hard predictions, DPD of the soft scores.

    ``data`` may be a dataset or a distribution; a distribution gives the
    exact population metrics.  Randomized scorers are scored in expectation.
    """
    W = _weight_table(data)
    scores = score_table(scorer, data.schema)
    if getattr(scorer, "randomized", False):
        pred = scores
    else:
        thr = np.broadcast_to(np.asarray(thresholds, dtype=float), (data.schema.groups,))
        pred = (scores >= thr[:, None]).astype(float)
    total = W.sum()
    tp = float((W[1] * pred).sum())
    fp = float((W[0] * pred).sum())
    fn = float((W[1] * (1 - pred)).sum())
    tn = float((W[0] * (1 - pred)).sum())
    accuracy = (tp + tn) / total
    den = 2 * tp + fp + fn
    f1 = 2 * tp / den if den > 0 else 0.0
    return Metrics(float(accuracy), float(f1), float(dpd_on(scorer, data)), bool(den == 0))
