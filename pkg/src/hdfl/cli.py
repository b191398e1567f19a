"""Command-line entry point: ``hdfl <subcommand> ...``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
Stochastic subcommands take ``--seed`` or fall back to ``$HDFL_SEED``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .attacks import attacks_csv, gradient_sign_attack, minimal_linear_attack, transfer_attack
from .classifiers import (
    LinearModel,
    TrainConfig,
    model_from_json,
    model_to_json,
    train_decision_tree,
    train_logistic_regression,
    train_mlp,
)
from .errors import DataError, HdflError, UsageError
from .geometry import (
    Dataset,
    SeedSpec,
    concentric_spheres_spec,
    folded_curve_spec,
    generate,
    subspace_gaussians_spec,
)
from .harness import ExperimentConfig, read_rows, run_experiment
from .lid import lid_csv, lid_mle_batch, twonn
from .plotting import collect_series, png_chart, svg_chart
from .probe import calibrated_radius, fragility_stats, local_complexity, margins_linear

SEED_ENV = "HDFL_SEED"


def _emit(text: str, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        raise UsageError(f"--seed is required (or set {SEED_ENV})")
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _load_data(path) -> Dataset:
    return Dataset.from_json(_read(path))


def _load_model(path):
    return model_from_json(_read(path))


# -- subcommands -------------------------------------------------------------

def cmd_gen(args):
    seed = SeedSpec(_seed(args))
    if args.kind == "subspace_gaussians":
        spec = subspace_gaussians_spec(args.n, args.m, seed.child("manifold"),
                                       separation=args.separation, scale=args.scale,
                                       ambient_noise=args.ambient_noise)
    elif args.kind == "concentric_spheres":
        spec = concentric_spheres_spec(args.n, args.inner, args.outer)
    else:
        spec = folded_curve_spec(args.n, seed.child("manifold"), gap=args.gap,
                                 arm_length=args.arm_length, noise=args.noise)
    data = generate(spec, args.per_class, seed.child("data"))
    _emit(data.to_json() + "\n", args.out)


def cmd_train(args):
    data = _load_data(args.data)
    if args.model == "tree":
        model = train_decision_tree(data)
    else:
        cfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size,
                          init=args.init, init_scale=args.init_scale,
                          seed=SeedSpec(_seed(args)).child("train"))
        if args.model == "logistic":
            model = train_logistic_regression(data, cfg)
        else:
            model = train_mlp(data, args.hidden, cfg)
    _emit(model_to_json(model) + "\n", args.out)


def cmd_probe(args):
    model = _load_model(args.model)
    data = _load_data(args.data) if args.data else None
    report = {}
    if args.complexity:
        if data is not None:
            if not 0 <= args.anchor_index < data.n:
                raise DataError(f"anchor index {args.anchor_index} out of range")
            anchor = data.points[args.anchor_index]
        else:
            anchor = np.zeros(model.dim)
        radius = calibrated_radius(model, anchor) if args.radius == "auto" else float(args.radius)
        report["complexity"] = local_complexity(model, anchor, radius, args.rho).to_dict()
    if args.margins or args.margins_csv:
        if not isinstance(model, LinearModel):
            raise DataError("margins are defined for linear models only")
        if data is None:
            raise UsageError("--margins needs --data")
        stats = fragility_stats(model, data, args.epsilon)
        report["fragility"] = stats.to_dict()
        if args.margins_csv:
            _emit(stats.margins_csv(), args.margins_csv)
    if not report:
        raise UsageError("choose at least one of --complexity, --margins")
    _emit(json.dumps(report, sort_keys=True) + "\n", args.out)


def cmd_attack(args):
    model = _load_model(args.model)
    data = _load_data(args.data)
    targets = [(Path(p).name, _load_model(p)) for p in args.transfer_to]
    rows = []
    for i, (x, y) in enumerate(zip(data.points, data.labels)):
        if args.kind == "minimal":
            if not isinstance(model, LinearModel):
                raise DataError("minimal attack needs a linear model")
            res = minimal_linear_attack(model, x, args.overshoot)
        else:
            res = gradient_sign_attack(model, x, int(y), args.epsilon)
        if not targets:
            rows.append((i, res.kind, res.norm, res.success, "", None))
        for name, target in targets:
            rows.append((i, res.kind, res.norm, res.success, name, transfer_attack(res, target)))
    _emit(attacks_csv(rows), args.out)


def cmd_lid(args):
    data = _load_data(args.data)
    if args.estimator == "twonn":
        est = twonn(data)
        rows = [("all", "dataset", "twonn", 2, est.value)]
    else:
        values = lid_mle_batch(data.points, data, args.k)
        rows = [(i, "dataset", "mle", args.k, v) for i, v in enumerate(values)]
    _emit(lid_csv(rows), args.out)


def _parse_override(text: str):
    if "=" not in text:
        raise UsageError(f"override {text!r} must look like key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def cmd_experiment(args):
    cfg = ExperimentConfig.from_json(_read(args.config))
    overrides = {}
    for item in args.set:
        key, value = _parse_override(item)
        overrides[key] = value
    if overrides:
        cfg = cfg.with_overrides(overrides)
    result = run_experiment(cfg, _seed(args), workers=args.workers)
    csv_path, json_path = result.write(args.out_dir, args.name)
    if args.figure:
        series = collect_series(result.rows)
        svg_path = csv_path.with_suffix(".svg")
        svg_path.write_text(svg_chart(series, title=cfg.kind))
        png_chart(series, csv_path.with_suffix(".png"), title=cfg.kind)
    print(csv_path)
    print(json_path)


def cmd_plot(args):
    text = _read(args.input)
    rows = read_rows(text)
    if not rows:
        raise DataError(f"{args.input} has no result rows")
    series = collect_series(rows, args.metric or None)
    title = args.title if args.title is not None else rows[0].experiment
    fmt = args.format or ("png" if str(args.out).endswith(".png") else "svg")
    if fmt == "png":
        if args.out in (None, "-"):
            raise UsageError("png output needs --out")
        png_chart(series, args.out, title=title, logx=args.logx, loglog=args.loglog,
                  ylabel=args.ylabel)
    else:
        _emit(svg_chart(series, title=title, logx=args.logx, loglog=args.loglog,
                        ylabel=args.ylabel), args.out)


# -- parser ------------------------------------------------------------------

def _hidden(text: str):
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad layer list {text!r}") from None
    return sizes


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hdfl", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset (JSON)")
    g.add_argument("--kind", required=True,
                   choices=["subspace_gaussians", "concentric_spheres", "folded_curve"])
    g.add_argument("--n", type=int, required=True, help="ambient dimension N")
    g.add_argument("--m", type=int, default=2, help="intrinsic dimension M (subspace_gaussians)")
    g.add_argument("--per-class", type=int, default=50)
    g.add_argument("--separation", type=float, default=None)
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--ambient-noise", type=float, default=0.0)
    g.add_argument("--inner", type=float, default=1.0)
    g.add_argument("--outer", type=float, default=1.3)
    g.add_argument("--gap", type=float, default=1.0)
    g.add_argument("--arm-length", type=float, default=4.0)
    g.add_argument("--noise", type=float, default=None, help="folded curve noise norm (default gap/20)")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", "-o")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train a classifier on a dataset file")
    t.add_argument("--data", required=True)
    t.add_argument("--model", choices=["logistic", "mlp", "tree"], default="logistic")
    t.add_argument("--hidden", type=_hidden, default=[32])
    t.add_argument("--lr", type=float, default=0.1)
    t.add_argument("--epochs", type=int, default=200)
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--init", choices=["gaussian", "zeros"], default="gaussian")
    t.add_argument("--init-scale", type=float, default=None)
    t.add_argument("--seed", type=int)
    t.add_argument("--out", "-o")
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("probe", help="margins and local complexity of a trained model")
    pr.add_argument("--model", required=True)
    pr.add_argument("--data")
    pr.add_argument("--complexity", action="store_true")
    pr.add_argument("--radius", default="auto")
    pr.add_argument("--rho", type=float, default=0.25)
    pr.add_argument("--anchor-index", type=int, default=0)
    pr.add_argument("--margins", action="store_true")
    pr.add_argument("--margins-csv")
    pr.add_argument("--epsilon", type=float, default=0.1)
    pr.add_argument("--out", "-o")
    pr.set_defaults(func=cmd_probe)

    a = sub.add_parser("attack", help="attack every point of a dataset")
    a.add_argument("--model", required=True)
    a.add_argument("--data", required=True)
    a.add_argument("--kind", choices=["minimal", "fgsm"], default="minimal")
    a.add_argument("--epsilon", type=float, default=0.1)
    a.add_argument("--overshoot", type=float, default=1e-6)
    a.add_argument("--transfer-to", action="append", default=[])
    a.add_argument("--out", "-o")
    a.set_defaults(func=cmd_attack)

    li = sub.add_parser("lid", help="intrinsic dimension estimates")
    li.add_argument("estimator", choices=["mle", "twonn"])
    li.add_argument("--data", required=True)
    li.add_argument("--k", type=int, default=20)
    li.add_argument("--out", "-o")
    li.set_defaults(func=cmd_lid)

    e = sub.add_parser("experiment", help="run a dimension sweep from a JSON config")
    e.add_argument("--config", required=True)
    e.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (last wins); dotted keys reach train.* / manifold.*")
    e.add_argument("--seed", type=int)
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--out-dir", default=".")
    e.add_argument("--name", default=None, help="output file stem (default: experiment kind)")
    e.add_argument("--figure", action="store_true", help="also write SVG and PNG figures")
    e.set_defaults(func=cmd_experiment)

    pl = sub.add_parser("plot", help="render an experiment CSV as a line chart")
    pl.add_argument("--input", "-i", required=True)
    pl.add_argument("--metric", action="append", default=[])
    pl.add_argument("--logx", action="store_true")
    pl.add_argument("--loglog", action="store_true")
    pl.add_argument("--ylabel")
    pl.add_argument("--title")
    pl.add_argument("--format", choices=["svg", "png"])
    pl.add_argument("--out", "-o")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except HdflError as exc:
        print(f"hdfl {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, FloatingPointError) as exc:
        print(f"hdfl {args.command}: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
