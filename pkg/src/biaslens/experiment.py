"""Bias-intensity sweeps: inject, train, evaluate on the fair and the biased world."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .bias import (
    LabelBiasSpec,
    SelectionBiasSpec,
    apply_label_bias,
    apply_selection_bias,
    inject_dataset_label_bias,
    inject_dataset_selection_bias,
)
from .distribution import JointDistribution
from .errors import BiasLensError, SpecError
from .models import ScoreTable, TrainConfig, evaluate, fit_plugin_bayes, train_logistic
from .recovery import reweighing_weights
from .rng import derive_seed
from .synth import generate_fair_sp_network, sample_dataset

KINDS = ("label", "selection")
PROFILES = ("both", "deprived", "privileged")
MODELS = ("agnostic", "reweighed", "penalized", "semi-supervised", "oracle-on-fair", "random-baseline")
METRICS = ("acc_fair", "f1_fair", "acc_biased", "dpd_fair", "dpd_biased")
DEFAULT_GRID = tuple(round(0.05 * i, 2) for i in range(11))

# seed paths under the master seed
_SOURCE, _UNLABELED, _TRAIN, _INJECT = 0, 1, 2, 3


def intensity_to_spec(kind: str, t: float, profile: str = "both", groups: int = 2, eps: float = 0.05):
    """Bias spec for intensity ``t``.

    Group a0 is deprived and every other group privileged.  ``label`` flips
    a0's y1 labels and the privileged groups' y0 labels with probability t;
    ``selection`` keeps those same rows with probability 1 - t(1 - eps).
    ``profile`` restricts the bias to the deprived or privileged side.
    """
    if not 0 <= t <= 1:
        raise SpecError(f"intensity must lie in [0, 1], got {t}")
    if profile not in PROFILES:
        raise SpecError(f"unknown profile {profile!r}")
    hit_deprived = profile in ("both", "deprived")
    hit_privileged = profile in ("both", "privileged")
    if kind == "label":
        flip = np.zeros((2, groups))
        if hit_deprived:
            flip[1, 0] = t
        if hit_privileged:
            flip[0, 1:] = t
        return LabelBiasSpec(flip)
    if kind == "selection":
        keep = np.ones((2, groups))
        k = 1 - t * (1 - eps)
        if hit_deprived:
            keep[1, 0] = k
        if hit_privileged:
            keep[0, 1:] = k
        return SelectionBiasSpec(keep)
    raise SpecError(f"unknown bias kind {kind!r}")


@dataclass
class SweepConfig:
    """Sweep description, loadable from JSON.

    ``source`` is either ``{"synth": {...}}`` with keyword arguments for the
    fair generator (a fresh world per repetition) or ``{"distribution":
    path}`` naming a fixed fair distribution file.
    """

    source: dict = field(default_factory=lambda: {"synth": {}})
    kind: str = "selection"
    grid: list = field(default_factory=lambda: list(DEFAULT_GRID))
    profile: str = "both"
    eps: float = 0.05
    models: list = field(default_factory=lambda: list(MODELS))
    n: int = 20000
    n_unlabeled: int = 20000
    repetitions: int = 10
    seed: int = 0
    lambda_dpd: float = 100.0
    lr: float = 0.1
    epochs: int = 2000
    include_group: bool = True
    workers: int = 1
    plots: bool = True

    def __post_init__(self):
        self.grid = [float(t) for t in self.grid]
        self.models = list(self.models)
        self.check()

    def check(self) -> None:
        if self.kind not in KINDS:
            raise SpecError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.profile not in PROFILES:
            raise SpecError(f"profile must be one of {PROFILES}, got {self.profile!r}")
        if not self.grid or any(not 0 <= t <= 1 for t in self.grid):
            raise SpecError("grid must be a nonempty list of intensities in [0, 1]")
        if self.grid != sorted(self.grid):
            raise SpecError("grid must be sorted ascending")
        unknown = set(self.models) - set(MODELS)
        if unknown or not self.models:
            raise SpecError(f"unknown models {sorted(unknown)}; choose from {MODELS}")
        if self.repetitions < 1 or self.n < 1 or self.n_unlabeled < 1:
            raise SpecError("repetitions, n and n_unlabeled must be positive")
        if not (isinstance(self.source, dict) and len(self.source) == 1
                and next(iter(self.source)) in ("synth", "distribution")):
            raise SpecError("source must be {'synth': {...}} or {'distribution': path}")

    def train_config(self, lam: float) -> TrainConfig:
        return TrainConfig(self.lr, self.epochs, lam, self.include_group, self.seed)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise SpecError(f"unknown sweep config keys {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "SweepConfig":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}: {exc}") from None
        return cls.from_dict(d)


@dataclass
class SweepRow:
    repetition: int
    intensity: float
    model: str
    acc_fair: float = math.nan
    f1_fair: float = math.nan
    acc_biased: float = math.nan
    dpd_fair: float = math.nan
    dpd_biased: float = math.nan
    error: str = ""

    @property
    def key(self):
        return self.repetition, self.intensity, self.model


def _fair_world(config: SweepConfig, rep: int) -> JointDistribution:
    src = config.source
    if "distribution" in src:
        return io.read_distribution(src["distribution"]).to_float()
    kwargs = dict(src["synth"])
    _, J = generate_fair_sp_network(seed=derive_seed(config.seed, rep, _SOURCE), **kwargs)
    return J


def _scorers(config: SweepConfig, J, D, unlabeled):
    """Yield (model name, zero-argument factory) pairs."""
    makers = {
        "agnostic": lambda: train_logistic(D, config.train_config(0.0)),
        "reweighed": lambda: train_logistic(D, config.train_config(0.0), weights=reweighing_weights(D)),
        "penalized": lambda: train_logistic(D, config.train_config(config.lambda_dpd)),
        "semi-supervised": lambda: train_logistic(D, config.train_config(config.lambda_dpd), penalty_data=unlabeled),
        "oracle-on-fair": lambda: fit_plugin_bayes(J),
        "random-baseline": lambda: ScoreTable(
            np.full((J.schema.groups, J.schema.n_cells), D.counts()[1].sum() / D.n), randomized=True),
    }
    return [(m, makers[m]) for m in config.models]


def _run_cell(config: SweepConfig, rep: int, t_idx: int, J, unlabeled) -> list[SweepRow]:
    t = config.grid[t_idx]
    rows = []
    try:
        spec = intensity_to_spec(config.kind, t, config.profile, J.schema.groups, config.eps)
        # The same fair sample and injection draws are reused across intensities,
        # so neighbouring grid points differ only by the bias itself.
        fair_sample = sample_dataset(J, config.n, derive_seed(config.seed, rep, _TRAIN))
        inject_seed = derive_seed(config.seed, rep, _INJECT)
        if config.kind == "label":
            JD = apply_label_bias(J, spec)
            D = inject_dataset_label_bias(fair_sample, spec, inject_seed)
        else:
            JD = apply_selection_bias(J, spec)
            D = inject_dataset_selection_bias(fair_sample, spec, inject_seed)
    except BiasLensError as exc:
        return [SweepRow(rep, t, m, error=f"{type(exc).__name__}: {exc}") for m in config.models]
    for name, make in _scorers(config, J, D, unlabeled):
        row = SweepRow(rep, t, name)
        try:
            scorer = make()
            fair = evaluate(scorer, J)
            biased = evaluate(scorer, JD)
            row.acc_fair, row.f1_fair, row.dpd_fair = fair.accuracy, fair.f1, fair.dpd
            row.acc_biased, row.dpd_biased = biased.accuracy, biased.dpd
        except (BiasLensError, ValueError, FloatingPointError) as exc:
            row.error = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def run_sweep(config: SweepConfig) -> list[SweepRow]:
    """Every (repetition, intensity, model) row, sorted by that key.

    Failures inside a cell are recorded in the row's ``error`` field and the
    sweep continues.  Results do not depend on ``workers``.
    """
    jobs = []
    for rep in range(config.repetitions):
        J = _fair_world(config, rep)
        unlabeled = None
        if "semi-supervised" in config.models:
            unlabeled = sample_dataset(J, config.n_unlabeled, derive_seed(config.seed, rep, _UNLABELED))
        jobs.extend((rep, i, J, unlabeled) for i in range(len(config.grid)))
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            chunks = list(pool.map(lambda job: _run_cell(config, *job), jobs))
    else:
        chunks = [_run_cell(config, *job) for job in jobs]
    rows = [r for chunk in chunks for r in chunk]
    return sorted(rows, key=lambda r: r.key)


def summarize(rows: list[SweepRow]) -> list[dict]:
    """Mean and standard deviation of every metric per (intensity, model), failed rows excluded."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.intensity, r.model), []).append(r)
    out = []
    for (t, m), rs in sorted(groups.items()):
        ok = [r for r in rs if not r.error]
        entry = {"intensity": t, "model": m, "repetitions": len(ok), "failures": len(rs) - len(ok)}
        for metric in METRICS:
            vals = np.array([getattr(r, metric) for r in ok], dtype=float)
            entry[metric] = {
                "mean": float(vals.mean()) if len(vals) else None,
                "std": float(vals.std()) if len(vals) else None,
            }
        out.append(entry)
    return out


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(rows: list[SweepRow], path) -> None:
    fields = ["repetition", "intensity", "model", *METRICS, "error"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(getattr(r, f)) for f in fields])


def read_csv(path) -> list[SweepRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(SweepRow(
                int(rec["repetition"]), float(rec["intensity"]), rec["model"],
                *(float(rec[m]) for m in METRICS), rec["error"],
            ))
    return rows


def _plot(summary: list[dict], metric: str, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "biaslens"
    fig, ax = plt.subplots(figsize=(6, 4))
    for model in dict.fromkeys(e["model"] for e in summary):
        pts = [(e["intensity"], e[metric]["mean"]) for e in summary
               if e["model"] == model and e[metric]["mean"] is not None]
        if pts:
            xs, ys = zip(*pts)
            ax.plot(xs, ys, marker="o", label=model)
    ax.set_xlabel("bias intensity")
    ax.set_ylabel(metric)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_report(rows: list[SweepRow], out_dir, plots: bool = True, config: SweepConfig | None = None) -> dict:
    """Write ``results.csv``, ``summary.json`` and (optionally) one SVG per metric."""
    if not rows:
        raise ValueError("no rows to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(rows, out / "results.csv")
    summary = summarize(rows)
    doc = {"summary": summary, "failures": sum(1 for r in rows if r.error)}
    if config is not None:
        doc["config"] = config.to_dict()
    (out / "summary.json").write_text(json.dumps(doc, indent=2) + "\n")
    if plots:
        for metric in METRICS:
            _plot(summary, metric, out / f"{metric}.svg")
    return doc
