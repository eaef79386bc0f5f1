"""``biaslens`` command line."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import io
from .audit import (
    COMBOS,
    DEFAULT_TOL,
    SAMPLED_TOL,
    audit_all,
    audit_sp_selection,
    audit_wae_selection,
    summary_to_json,
)
from .bias import (
    LabelBiasSpec,
    SelectionBiasSpec,
    inject_dataset_label_bias,
    inject_dataset_selection_bias,
)
from .distribution import from_dataset
from .errors import BiasLensError
from .experiment import SweepConfig, emit_report, run_sweep
from .models import TrainConfig, train_logistic
from .recovery import (
    feasible_c_specs_sp,
    feasible_c_specs_wae,
    recover_sp_label,
    recover_sp_selection,
    recover_wae_label,
    recover_wae_selection,
    reweighing_weights,
)
from .synth import FIXTURE_NAMES, fixture, generate_fair_sp_network, sample_dataset


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2))


def _load_source(args):
    """Distribution from --dist or the empirical distribution of --data."""
    if args.dist:
        J = io.read_distribution(args.dist)
        return J.to_exact() if getattr(args, "exact", False) and not J.exact else J
    D = io.read_dataset(args.data)
    return from_dataset(D, exact=getattr(args, "exact", False))


def cmd_audit(args) -> int:
    J = _load_source(args)
    tol = args.tol if args.tol is not None else (SAMPLED_TOL if args.data else DEFAULT_TOL)
    combos = COMBOS if args.combo == "all" else (args.combo,)
    _print_json(summary_to_json(audit_all(J, tol, combos), exact=args.exact))
    return 0


def cmd_recover(args) -> int:
    J = io.read_distribution(args.dist)
    spec = io.read_spec(args.spec) if args.spec else None
    combo = args.combo
    if combo == "sp-label":
        if args.p_y1 is None:
            raise BiasLensError("sp-label recovery needs --p-y1")
        p = Fraction(args.p_y1) if J.exact else float(Fraction(args.p_y1))
        if spec is None:
            spec = feasible_c_specs_sp(J, p, args.tol).canonical()
        fair = recover_sp_label(J, p, spec, args.tol)
    elif combo == "wae-label":
        if spec is None:
            spec = feasible_c_specs_wae(J, args.tol).canonical()
        fair = recover_wae_label(J, spec, args.tol)
    elif combo == "sp-sel":
        if spec is None:
            spec = audit_sp_selection(J).witness
        fair = recover_sp_selection(J, spec)
    else:
        if spec is None:
            alphas = [audit_wae_selection(J, args.tol, (0, j)).alpha for j in range(1, J.schema.groups)]
            one = Fraction(1) if J.exact else 1.0
            spec = SelectionBiasSpec.from_deltas([one] + [1 / a for a in alphas])
        fair = recover_wae_selection(J, spec, args.tol)
    io.write_distribution(fair, args.out)
    note = None
    if combo in ("sp-sel", "wae-sel"):
        note = "group weights P(a) are not identifiable under selection; P_D(a) was kept"
    _print_json(io.jsonable({"combo": combo, "spec": spec, "note": note}, exact=J.exact))
    return 0


def cmd_synth(args) -> int:
    cfg, J = generate_fair_sp_network(args.groups, args.features, args.card, args.seed, p_y1=args.p_y1)
    io.write_distribution(J, args.out)
    if args.sample:
        io.write_dataset(sample_dataset(J, args.sample, args.seed), args.sample_out or args.out + ".csv")
    return 0


def cmd_fixture(args) -> int:
    io.write_dataset(fixture(args.name), args.out)
    return 0


def cmd_inject(args) -> int:
    D = io.read_dataset(args.data)
    spec = io.read_spec(args.spec, strict=False)
    if isinstance(spec, LabelBiasSpec):
        out = inject_dataset_label_bias(D, spec, args.seed)
    else:
        out = inject_dataset_selection_bias(D, spec, args.seed)
    io.write_dataset(out, args.out)
    return 0


def cmd_train(args) -> int:
    D = io.read_dataset(args.data)
    penalty = io.read_dataset(args.unlabeled, D.schema) if args.unlabeled else None
    weights = reweighing_weights(D) if args.reweigh else None
    config = TrainConfig(args.lr, args.epochs, args.lam, not args.no_group, args.seed)
    model = train_logistic(D, config, weights=weights, penalty_data=penalty)
    model.save(args.out)
    return 0


def cmd_sweep(args) -> int:
    try:
        config = SweepConfig.load(args.config)
        if args.workers:
            config.workers = args.workers
    except (OSError, TypeError, ValueError) as exc:
        print(f"biaslens: config error: {exc}", file=sys.stderr)
        return 1
    rows = run_sweep(config)
    doc = emit_report(rows, args.out, plots=config.plots and not args.no_plots, config=config)
    if doc["failures"]:
        print(f"biaslens: {doc['failures']} of {len(rows)} rows failed; see the error column", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="biaslens", description="Audit, simulate and undo label and selection bias.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("audit", help="check which worldview/bias combinations can explain a distribution")
    src = a.add_mutually_exclusive_group(required=True)
    src.add_argument("--dist", help="distribution JSON")
    src.add_argument("--data", help="dataset CSV (empirical distribution)")
    a.add_argument("--combo", default="all", choices=("all", *COMBOS))
    a.add_argument("--tol", type=float, help=f"feasibility tolerance (default {DEFAULT_TOL}, {SAMPLED_TOL} for --data)")
    a.add_argument("--exact", action="store_true", help="rational arithmetic; fractions printed as p/q")
    a.set_defaults(func=cmd_audit)

    r = sub.add_parser("recover", help="reconstruct a fair distribution")
    r.add_argument("--dist", required=True)
    r.add_argument("--combo", required=True, choices=COMBOS)
    r.add_argument("--p-y1", help="fair favorable rate for sp-label (e.g. 0.5 or 1/2)")
    r.add_argument("--spec", help="bias spec JSON; the canonical family member is used when omitted")
    r.add_argument("--tol", type=float, default=DEFAULT_TOL)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_recover)

    s = sub.add_parser("synth", help="generate a statistically fair distribution")
    s.add_argument("--features", type=int, default=4)
    s.add_argument("--card", type=int, default=3)
    s.add_argument("--groups", type=int, default=2)
    s.add_argument("--p-y1", type=float, default=0.5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sample", type=int, help="also write this many sampled rows")
    s.add_argument("--sample-out")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    f = sub.add_parser("fixture", help="export a toy dataset as CSV")
    f.add_argument("name", choices=FIXTURE_NAMES)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fixture)

    i = sub.add_parser("inject", help="apply a bias spec to a dataset")
    i.add_argument("--data", required=True)
    i.add_argument("--spec", required=True)
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_inject)

    t = sub.add_parser("train", help="fit a (DPD-penalized) logistic model")
    t.add_argument("--data", required=True)
    t.add_argument("--lambda", dest="lam", type=float, default=0.0)
    t.add_argument("--lr", type=float, default=0.1)
    t.add_argument("--epochs", type=int, default=2000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--no-group", action="store_true", help="leave the group indicator out of the features")
    t.add_argument("--reweigh", action="store_true", help="train with reweighing instance weights")
    t.add_argument("--unlabeled", help="dataset CSV whose (x, a) rows carry the DPD penalty")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    w = sub.add_parser("sweep", help="run a bias-intensity sweep")
    w.add_argument("--config", required=True)
    w.add_argument("--out", required=True)
    w.add_argument("--workers", type=int)
    w.add_argument("--no-plots", action="store_true")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BiasLensError, OSError, KeyError, ValueError) as exc:
        print(f"biaslens: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
