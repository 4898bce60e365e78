"""``modeconn`` command line."""

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import io as mio
from .analysis import correlations, mode_connectivity_distance, vanilla_transfer
from .bounds import BoundConstants, curvature_diagnostic, evaluate_bounds, theorem32_terms
from .csbm import CsbmParams, generate_csbm
from .errors import ConfigError, ModeConnError, UndefinedCorrelationError
from .gnn import Mode, TrainConfig, evaluate_metrics, train_mode
from .graph import normalize_adjacency
from .paths import PathSpec, evaluate_path, landscape_plane, loss_barrier, train_bezier_control
from .spectral import spectral_gap
from .sweep import BEZIER_CONFIG, DEFAULT_BASE, DEFAULT_VALUES, SweepConfig, header, manifest, run_sweep

TRAIN_KEYS = ("epochs", "lr", "optimizer", "weight_decay", "momentum", "hidden", "num_layers",
              "activation", "dropout", "init", "init_scale", "batch_fraction", "data_order_seed")
CONST_KEYS = ("C_L", "C1", "C2", "L_ell", "L_F")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_train(p, defaults=TrainConfig()):
    g = p.add_argument_group("training")
    g.add_argument("--epochs", type=int, default=defaults.epochs)
    g.add_argument("--lr", type=float, default=defaults.lr)
    g.add_argument("--optimizer", choices=("adam", "sgd"), default=defaults.optimizer)
    g.add_argument("--weight-decay", type=float, default=defaults.weight_decay)
    g.add_argument("--momentum", type=float, default=defaults.momentum)
    g.add_argument("--hidden", type=int, default=defaults.hidden)
    g.add_argument("--num-layers", type=int, default=defaults.num_layers)
    g.add_argument("--activation", default=defaults.activation, help="relu, leaky_relu(a) or elu(a)")
    g.add_argument("--dropout", type=float, default=defaults.dropout)
    g.add_argument("--init", choices=("glorot", "uniform"), default=defaults.init)
    g.add_argument("--init-scale", type=float, default=defaults.init_scale)
    g.add_argument("--batch-fraction", type=float, default=defaults.batch_fraction)
    g.add_argument("--data-order-seed", type=int, default=defaults.data_order_seed)


def _train_cfg(ns, prefix=""):
    return TrainConfig(**{k: getattr(ns, prefix + k) for k in TRAIN_KEYS})


def _add_csbm(p, base=DEFAULT_BASE, n_default=None):
    g = p.add_argument_group("CSBM")
    g.add_argument("--n", type=int, default=n_default or base.n)
    g.add_argument("--d", type=int, default=base.d)
    g.add_argument("--p-in", type=float, default=base.p_in)
    g.add_argument("--p-out", type=float, default=base.p_out)
    g.add_argument("--sigma", type=float, default=base.sigma)
    g.add_argument("--mu-gap", type=float, default=base.mu_gap)


def _csbm(ns):
    return CsbmParams(ns.n, ns.d, ns.p_in, ns.p_out, ns.sigma, ns.mu_gap)


def _add_constants(p):
    c = BoundConstants()
    g = p.add_argument_group("bound constants")
    for k in CONST_KEYS:
        g.add_argument(f"--{k.replace('_', '-')}", dest=k, type=float, default=getattr(c, k))


def _constants(ns):
    return BoundConstants(**{k: getattr(ns, k) for k in CONST_KEYS})


def _graph_and_adj(ns, arch="gcn"):
    g = mio.load_graph(ns.graph)
    return g, (normalize_adjacency(g) if arch == "gcn" else None)


def _load_params(path):
    return mio.load_mode(path).params


def _echo(ns, out):
    """Write the resolved configuration next to (or inside) the output."""
    cfg = _resolved(ns)
    if out is None:
        return cfg
    out = Path(out)
    target = out / "config.json" if out.is_dir() else Path(str(out) + ".config.json")
    mio.write_json(target, cfg)
    return cfg


def _resolved(ns):
    return {k: (str(v) if isinstance(v, Path) else v)
            for k, v in sorted(vars(ns).items()) if k not in ("func", "config")}


def _emit(record):
    sys.stdout.write(mio.dumps_json(record))


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_csbm(ns):
    params = _csbm(ns)
    g = generate_csbm(params, ns.seed, ns.train_frac, ns.test_frac)
    mio.save_graph(g, ns.out)
    _echo(ns, ns.out)
    _emit({"graph": str(ns.out), "n": g.n, "num_edges": g.num_edges, "fingerprint": g.fingerprint()})


def cmd_train(ns):
    g, a = _graph_and_adj(ns, ns.arch)
    mode = train_mode(g, _train_cfg(ns), ns.arch, ns.seed, a)
    mio.save_mode(mode, ns.out)
    _echo(ns, ns.out)
    _emit({"checkpoint": str(ns.out), "metrics": mode.metrics.as_dict()})


def _spec(ns):
    ta, tb = _load_params(ns.a), _load_params(ns.b)
    ctrl = _load_params(ns.control) if getattr(ns, "control", None) else None
    return PathSpec(ta, tb, ctrl)


def cmd_interpolate(ns):
    spec = _spec(ns)
    g, a = _graph_and_adj(ns, spec.theta_a.arch)
    prof = evaluate_path(spec, g, a, ns.grid)
    mio.write_profile(ns.out, prof)
    _echo(ns, ns.out)
    _emit({"profile": str(ns.out), "kind": spec.kind, "points": len(prof.alphas)})


def cmd_bezier(ns):
    ta, tb = _load_params(ns.a), _load_params(ns.b)
    g, a = _graph_and_adj(ns, ta.arch)
    ctrl = train_bezier_control(ta, tb, g, a, _train_cfg(ns), ns.seed)
    mio.save_mode(Mode(ctrl, evaluate_metrics(ctrl, g, a), {"role": "bezier_control", "seed": ns.seed}), ns.out)
    prof = evaluate_path(PathSpec.bezier(ta, tb, ctrl), g, a, ns.grid)
    rep = loss_barrier(prof, "train")
    _echo(ns, ns.out)
    _emit({"control": str(ns.out), "bezier_barrier": rep.as_dict()})


def cmd_barrier(ns):
    spec = _spec(ns)
    g, a = _graph_and_adj(ns, spec.theta_a.arch)
    prof = evaluate_path(spec, g, a, ns.grid)
    rep = loss_barrier(prof, ns.which)
    out = {"kind": spec.kind, **rep.as_dict()}
    if ns.out:
        mio.write_json(ns.out, out)
    _echo(ns, ns.out)
    _emit(out)


def cmd_landscape(ns):
    ta, tb, tc = _load_params(ns.a), _load_params(ns.b), _load_params(ns.c)
    g, a = _graph_and_adj(ns, ta.arch)
    grid = landscape_plane(ta, tb, tc, g, a, (ns.grid, ns.grid), ns.extent)
    mio.write_csv(ns.out, ["x", "y", "train_loss[nats]"], grid.rows())
    mio.write_json(Path(str(ns.out) + ".anchors.json"), grid.anchors)
    _echo(ns, ns.out)
    _emit({"landscape": str(ns.out), "anchors": grid.anchors})


def cmd_bounds(ns):
    ta, tb = _load_params(ns.a), _load_params(ns.b)
    g, a = _graph_and_adj(ns, ta.arch)
    spec = spectral_gap(normalize_adjacency(g), k=ns.k, constants=_constants(ns))
    prof = evaluate_path(PathSpec(ta, tb), g, a, ns.grid)
    barrier = loss_barrier(prof, "train").loss_barrier
    params = None
    if ns.p_in is not None and ns.p_out is not None:
        params = CsbmParams(g.n, g.d, ns.p_in, ns.p_out, ns.sigma)
    rep = evaluate_bounds(ta, tb, g, spec, barrier, _constants(ns), params, ns.T, ns.rho, ns.delta_conf)
    e = rep.inputs_echo
    terms = theorem32_terms(ta, tb, e["X_norm"], e["lambda_eff"], _constants(ns))
    out = {**rep.as_dict(), "spectral": spec.as_dict(),
           "curvature_diagnostic": curvature_diagnostic(terms, prof).as_dict()}
    if ns.out:
        mio.write_json(ns.out, out)
    _echo(ns, ns.out)
    _emit(out)


def cmd_dmc(ns):
    pa, pb = mio.read_profile(ns.profile_a), mio.read_profile(ns.profile_b)
    _emit({"d_mc": mode_connectivity_distance(pa, pb, ns.which), "which": ns.which})


def cmd_transfer(ns):
    src, tgt = mio.load_graph(ns.source), mio.load_graph(ns.target)
    rep = vanilla_transfer(src, tgt, _train_cfg(ns), ns.seed, ns.arch, ns.grid, ns.which)
    if ns.out:
        mio.write_json(ns.out, rep.as_dict())
    _echo(ns, ns.out)
    _emit(rep.as_dict())


def cmd_sweep(ns):
    values = ns.values if ns.values is not None else DEFAULT_VALUES[ns.axis]
    cfg = SweepConfig(
        axis=ns.axis, values=tuple(values), base=_csbm(ns), repeats=ns.repeats,
        seed_base=ns.seed_base, arch=ns.arch, train=_train_cfg(ns),
        bezier=TrainConfig(**{**BEZIER_CONFIG.as_dict(), "epochs": ns.bezier_epochs}),
        fit_bezier=not ns.no_bezier, grid_size=ns.grid, constants=_constants(ns),
        rho=ns.rho, delta_conf=ns.delta_conf,
    )
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_sweep(cfg, ns.jobs)
    mio.write_csv(out / "sweep.csv", header(), result.rows)
    # output location and worker count do not affect results, so they stay
    # out of the echoed config (the manifest records them)
    cli = {k: v for k, v in _resolved(ns).items() if k not in ("out", "jobs")}
    mio.write_json(out / "config.json", {"sweep": cfg.as_dict(), "cli": cli})
    outputs = {name: mio.file_sha256(out / name) for name in ("sweep.csv", "config.json")}
    man = manifest(result, outputs)
    man["out"], man["jobs"] = str(out), ns.jobs
    mio.write_json(out / "manifest.json", man)
    failed = [r for r in result.results if r.status != "ok"]
    _emit({"out": str(out), "rows": len(result.rows), "failed": len(failed)})
    if failed:
        first = failed[0].error
        raise _SweepFailure(first.get("exit_code", 1), f"{len(failed)} sweep tasks failed; first: {first}")


class _SweepFailure(ModeConnError):
    def __init__(self, code, message):
        super().__init__(message)
        self.exit_code = code


def summarize_sweep(path):
    """Per-cell means, trend and generalization correlations of a sweep CSV."""
    names, rows = mio.read_csv_columns(path)
    col = {n: i for i, n in enumerate(names)}

    def num(r, k):
        return float(r[col[k]])

    cells = {}
    for r in rows:
        cells.setdefault(int(r[col["cell"]]), []).append(r)
    per_cell = []
    for cell in sorted(cells):
        rs = cells[cell]
        entry = {"cell": cell, "value": num(rs[0], "value"), "repeats": len(rs)}
        for k in ("linear_loss_barrier", "bezier_loss_barrier", "linear_acc_barrier", "gen_gap",
                  "theorem32_bound", "csbm_bound", "delta"):
            vals = [num(r, k) for r in rs]
            entry[k] = float(np.mean(vals))
        per_cell.append(entry)
    out = {"axis": rows[0][col["axis"]] if rows else None, "cells": per_cell}

    def corr(xs, ys):
        try:
            return correlations(xs, ys).as_dict()
        except (UndefinedCorrelationError, ValueError) as exc:
            return {"undefined": str(exc)}

    if len(per_cell) >= 3:
        out["trend"] = corr([c["value"] for c in per_cell], [c["linear_loss_barrier"] for c in per_cell])
    if len(rows) >= 3:
        gap = [num(r, "gen_gap") for r in rows]
        out["acc_barrier_vs_gen_gap"] = corr([num(r, "linear_acc_barrier") for r in rows], gap)
        out["val_acc_vs_gen_gap"] = corr([num(r, "val_acc") for r in rows], gap)
    ratios = [num(r, "bezier_loss_barrier") / num(r, "linear_loss_barrier") for r in rows
              if num(r, "linear_loss_barrier") > 0 and not math.isnan(num(r, "bezier_loss_barrier"))]
    if ratios:
        out["bezier_over_linear_median"] = float(np.median(ratios))
    return out


def cmd_report(ns):
    paths = [Path(p) for p in ns.sweeps]
    reports = {}
    for p in paths:
        csv_path = p / "sweep.csv" if p.is_dir() else p
        reports[str(p)] = summarize_sweep(csv_path)
    if ns.out:
        mio.write_json(ns.out, reports)
    _emit(reports)


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(prog="modeconn", description="Mode connectivity experiments on graph neural networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", type=Path, help="JSON file of option defaults (keys are option names)")
        p.set_defaults(func=func)
        return p

    p = add("gen-csbm", cmd_gen_csbm, "Sample a CSBM graph into a TSV directory.")
    _add_csbm(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-frac", type=float, default=0.1)
    p.add_argument("--test-frac", type=float, default=0.2)
    p.add_argument("--out", type=Path, required=True)

    p = add("train", cmd_train, "Train one mode and write a checkpoint.")
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--arch", choices=("gcn", "sage_mean", "mlp"), default="gcn")
    p.add_argument("--seed", type=int, default=0)
    _add_train(p)
    p.add_argument("--out", type=Path, required=True)

    for name, func, text in (
        ("interpolate", cmd_interpolate, "Evaluate loss and accuracy along a path; writes a profile CSV."),
        ("barrier", cmd_barrier, "Loss and accuracy barrier along a linear or Bezier path."),
    ):
        p = add(name, func, text)
        p.add_argument("--graph", type=Path, required=True)
        p.add_argument("--a", type=Path, required=True)
        p.add_argument("--b", type=Path, required=True)
        p.add_argument("--control", type=Path, help="Bezier control checkpoint")
        p.add_argument("--grid", type=int, default=25)
        if name == "barrier":
            p.add_argument("--which", choices=("train", "test"), default="train")
            p.add_argument("--out", type=Path)
        else:
            p.add_argument("--out", type=Path, required=True)

    p = add("bezier", cmd_bezier, "Fit a quadratic Bezier control point between two modes.")
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--a", type=Path, required=True)
    p.add_argument("--b", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=25)
    _add_train(p, BEZIER_CONFIG)
    p.add_argument("--out", type=Path, required=True)

    p = add("landscape", cmd_landscape, "Training loss over the plane through three modes.")
    p.add_argument("--graph", type=Path, required=True)
    for k in ("a", "b", "c"):
        p.add_argument(f"--{k}", type=Path, required=True)
    p.add_argument("--grid", type=int, default=21)
    p.add_argument("--extent", type=float, default=1.2)
    p.add_argument("--out", type=Path, required=True)

    p = add("bounds", cmd_bounds, "Evaluate every barrier and generalization bound for a mode pair.")
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--a", type=Path, required=True)
    p.add_argument("--b", type=Path, required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--grid", type=int, default=25)
    p.add_argument("--p-in", type=float)
    p.add_argument("--p-out", type=float)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--T", type=int, default=200)
    p.add_argument("--rho", type=float, default=0.25)
    p.add_argument("--delta-conf", type=float, default=0.05)
    _add_constants(p)
    p.add_argument("--out", type=Path)

    p = add("dmc", cmd_dmc, "Mode-connectivity distance between two profile CSVs.")
    p.add_argument("--profile-a", type=Path, required=True)
    p.add_argument("--profile-b", type=Path, required=True)
    p.add_argument("--which", choices=("train", "test"), default="test")

    p = add("transfer", cmd_transfer, "Vanilla transfer from a source graph to a target graph.")
    p.add_argument("--source", type=Path, required=True)
    p.add_argument("--target", type=Path, required=True)
    p.add_argument("--arch", choices=("gcn", "sage_mean", "mlp"), default="gcn")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=25)
    p.add_argument("--which", choices=("train", "test"), default="test")
    _add_train(p)
    p.add_argument("--out", type=Path)

    p = add("sweep", cmd_sweep, "Mode pairs across a CSBM grid; writes sweep.csv and manifest.json.")
    p.add_argument("--axis", choices=("density", "homophily", "sigma"), default="homophily")
    p.add_argument("--values", type=_floats)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--arch", choices=("gcn", "sage_mean", "mlp"), default="gcn")
    p.add_argument("--grid", type=int, default=25)
    p.add_argument("--bezier-epochs", type=int, default=BEZIER_CONFIG.epochs)
    p.add_argument("--no-bezier", action="store_true")
    p.add_argument("--jobs", type=int, help="worker processes (default: $MODECONN_JOBS or 1)")
    p.add_argument("--rho", type=float, default=0.25)
    p.add_argument("--delta-conf", type=float, default=0.05)
    _add_csbm(p)
    _add_train(p)
    _add_constants(p)
    p.add_argument("--out", type=Path, required=True)

    p = add("report", cmd_report, "Summarize one or more sweep outputs.")
    p.add_argument("sweeps", nargs="+", type=Path)
    p.add_argument("--out", type=Path)
    return parser


def _config_path(argv):
    for k, tok in enumerate(argv):
        if tok == "--config" and k + 1 < len(argv):
            return argv[k + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _apply_config(parser, argv):
    """Parse ``argv`` with defaults taken from ``--config``; unknown keys are an error.

    Explicit flags still win over config values.
    """
    path = _config_path(argv)
    choices = parser._subparsers._group_actions[0].choices
    if path is None or not argv or argv[0] not in choices:
        return parser.parse_args(argv)
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    sub = choices[argv[0]]
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    unknown = sorted(set(cfg) - set(actions))
    if unknown:
        raise ConfigError(f"unknown config keys for {argv[0]}: {unknown}")
    for dest, v in cfg.items():
        action = actions[dest]
        action.required = False
        if action.type is not None and v is not None:
            if action.type is _floats and isinstance(v, list):
                v = [float(x) for x in v]
            else:
                try:
                    v = action.type(str(v))
                except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
                    raise ConfigError(f"config key {dest}: {exc}") from None
        cfg[dest] = v
    sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def run_command(argv=None):
    """Run one subcommand; returns the process exit status."""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ns = _apply_config(parser, argv)
        ns.func(ns)
        return 0
    except ModeConnError as exc:
        code = exc.exit_code
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    except argparse.ArgumentTypeError as exc:
        code = ConfigError.exit_code
        err = {"error": "ConfigError", "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
