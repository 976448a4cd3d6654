"""Command-line frontend: fit plugin models, post-process, evaluate, sweep, synth.

Every subcommand prints a single JSON summary to stdout, also on failure
(with a ``status`` field), so harnesses can script against it.  Exit codes:
0 ok, 2 user/data error, 3 numeric/solver failure.  Set FAIRPOST_LOG to a
logging level name for diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
import time

import numpy as np

from . import calibrate as cal
from . import evaluate as ev
from . import models as mdl
from .core import FairnessSpec, NoiseSpec
from .criteria import Criterion, CriterionKind, build_group_scores, build_spec, derive_risks
from .data import Dataset, Schema, load_csv, synth_random, synth_tightness
from .errors import DataError, FairpostError, InvalidArgumentError, SolverError
from .postprocess import linear_post, load_params, params_to_json, save_params

log = logging.getLogger("fairpost")

CRITERION_NAMES = {
    "sp": CriterionKind.SP,
    "eopp": CriterionKind.EOPP_BINARY,
    "eopp_mc": CriterionKind.EOPP_MULTICLASS,
    "eo": CriterionKind.EO,
}


def main(argv=None) -> int:
    level = os.environ.get("FAIRPOST_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    summary = {"status": "ok", "command": args.command}
    try:
        handler = {
            "fit": _cmd_fit,
            "postprocess": _cmd_postprocess,
            "evaluate": _cmd_evaluate,
            "sweep": _cmd_sweep,
            "synth": _cmd_synth,
        }[args.command]
        summary.update(handler(args))
        code = 0
    except SolverError as exc:
        summary.update(status="error", error=str(exc))
        if exc.dump and getattr(args, "out", None):
            dump_path = str(args.out) + ".lpdump"
            with open(dump_path, "w") as fh:
                fh.write(exc.dump)
            summary["lp_dump"] = dump_path
        code = 3
    except (np.linalg.LinAlgError, FloatingPointError, OverflowError) as exc:
        summary.update(status="error", error=f"numeric failure: {exc}")
        code = 3
    except (DataError, InvalidArgumentError, FileNotFoundError, FairpostError) as exc:
        summary.update(status="error", error=str(exc))
        code = 2
    print(json.dumps(summary, default=_jsonable))
    return code


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _build_parser():
    p = argparse.ArgumentParser(prog="fairpost", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="train a multinomial logistic plugin model")
    f.add_argument("--data", required=True)
    f.add_argument("--schema", required=True)
    f.add_argument("--target", choices=["y", "a", "joint"], default="y")
    f.add_argument("--out", required=True)
    f.add_argument("--lr", type=float, default=1.0)
    f.add_argument("--epochs", type=int, default=400)
    f.add_argument("--l2", type=float, default=1e-4)
    f.add_argument("--seed", type=int, default=0)

    q = sub.add_parser("postprocess", help="fit the fair post-processing on scores")
    q.add_argument("--scores", help="CSV with precomputed risk/group columns")
    q.add_argument("--model", help="model file from `fit` (joint target)")
    q.add_argument("--data", help="CSV with features for --model")
    q.add_argument("--schema", required=True)
    q.add_argument("--criterion", required=True,
                   help="sp | eopp | eopp_mc | eo | path to custom JSON")
    aware = q.add_mutually_exclusive_group()
    aware.add_argument("--aware", action="store_true")
    aware.add_argument("--blind", action="store_true")
    q.add_argument("--alpha", type=float, required=True)
    q.add_argument("--sigma", default="auto", help="'auto', or a nonnegative float")
    q.add_argument("--calibrate", choices=["none", "platt", "isotonic"], default="none")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--drop-empty", action="store_true")
    q.add_argument("--solver-path", choices=["dual", "primal"], default="dual")
    q.add_argument("--out", required=True)

    e = sub.add_parser("evaluate", help="measure risk and disparities of fitted params")
    e.add_argument("--params", required=True)
    e.add_argument("--scores", required=True)
    e.add_argument("--schema", required=True)
    e.add_argument("--truth-groups", action="store_true",
                   help="declare the group columns as true membership info")
    e.add_argument("--metrics", default="max,rms")
    e.add_argument("--draws", type=int, default=10_000)
    e.add_argument("--out", help="report path prefix (.csv/.json appended)")

    s = sub.add_parser("sweep", help="tolerance sweep producing a tradeoff table")
    s.add_argument("--scores", required=True)
    s.add_argument("--schema", required=True)
    s.add_argument("--criterion", required=True)
    s.add_argument("--alphas", default="1,0.5,0.2,0.1,0.05,0.02,0.01")
    s.add_argument("--sigma", default="auto")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--solver-path", choices=["dual", "primal"], default="dual")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", required=True, help="output prefix")
    plot = s.add_mutually_exclusive_group()
    plot.add_argument("--plot", dest="plot", action="store_true", default=True)
    plot.add_argument("--no-plot", dest="plot", action="store_false")

    g = sub.add_parser("synth", help="generate synthetic score bundles")
    g.add_argument("--kind", choices=["tightness", "random"], required=True)
    g.add_argument("--p", type=float, default=0.25)
    g.add_argument("--epsilon", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n", type=int, default=4)
    g.add_argument("--classes", type=int, default=2)
    g.add_argument("--groups", type=int, default=2)
    g.add_argument("--one-hot", action="store_true")
    g.add_argument("--out", required=True, help="output prefix")
    return p


def _parse_sigma(text):
    if text == "auto":
        return None
    value = float(text)
    if value < 0:
        raise InvalidArgumentError("--sigma must be 'auto' or >= 0")
    return value


def _cmd_fit(args):
    schema = Schema.from_json(args.schema)
    ds = load_csv(args.data, schema)
    if ds.features is None:
        raise DataError("schema declares no feature columns")
    if args.target == "y":
        if ds.labels is None:
            raise DataError("--target y needs a label column in the schema")
        labels, n_out = ds.labels, None
    elif args.target == "a":
        if ds.attrs is None:
            raise DataError("--target a needs an attribute column in the schema")
        labels, n_out = ds.attrs, None
    else:
        if ds.labels is None or ds.attrs is None:
            raise DataError("--target joint needs both label and attribute columns")
        n_cls = int(ds.labels.max()) + 1
        labels = ds.attrs * n_cls + ds.labels
        n_out = (int(ds.attrs.max()) + 1) * n_cls
    config = mdl.TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                             l2=args.l2, seed=args.seed)
    model = mdl.fit(ds.features, labels, config, num_classes=n_out)
    train_acc = mdl.accuracy(model, ds.features, labels)
    extra = {"num_classes": int(ds.labels.max()) + 1 if ds.labels is not None else 0,
             "attr_arity": int(ds.attrs.max()) + 1 if ds.attrs is not None else 0}
    _save_model(args.out, model, args.target, extra)
    return {"n": ds.n, "target": args.target, "train_accuracy": train_acc,
            "model_classes": model.num_classes, "out": args.out}


def _save_model(path, model, target, extra):
    buf = io.BytesIO()
    np.savez(buf, weights=model.weights, mean=model.mean, scale=model.scale,
             meta=json.dumps({
                 "target": target,
                 "num_classes": model.num_classes,
                 "config": vars(model.config) | {},
                 **extra,
             }))
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def _load_model(path):
    try:
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            config = mdl.TrainConfig(**{k: meta["config"][k]
                                        for k in ("learning_rate", "epochs", "l2", "seed")})
            model = mdl.LogisticModel(weights=z["weights"], mean=z["mean"], scale=z["scale"],
                                      config=config, num_classes=meta["num_classes"])
    except FileNotFoundError:
        raise DataError(f"model file not found: {path}")
    except (KeyError, ValueError, OSError) as exc:
        raise DataError(f"cannot read model file {path}: {exc}")
    return model, meta


def _resolve_criterion(name, num_classes, num_groups):
    """Map a criterion name (or custom JSON path) + bundle dims to a spec builder."""
    if name in CRITERION_NAMES:
        kind = CRITERION_NAMES[name]
        if kind is CriterionKind.SP:
            attr_arity = num_groups
        else:
            if num_groups % num_classes:
                raise InvalidArgumentError(
                    f"{name} needs K = |A| * |Y| group columns; got K={num_groups}, |Y|={num_classes}"
                )
            attr_arity = num_groups // num_classes
        return Criterion(kind=kind, attr_arity=attr_arity, num_classes=num_classes)
    try:
        with open(name) as fh:
            raw = json.load(fh)
        constraints = tuple((int(c["class"]), tuple(int(k) for k in c["groups"]))
                            for c in raw["constraints"])
        return Criterion(kind=CriterionKind.CUSTOM, attr_arity=int(raw["num_groups"]),
                         num_classes=int(raw["num_classes"]), custom_constraints=constraints)
    except FileNotFoundError:
        raise InvalidArgumentError(
            f"--criterion must be one of {sorted(CRITERION_NAMES)} or a JSON file path; "
            f"got {name!r}"
        )
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"bad custom criterion file {name}: {exc}")


def _bundle_from_args(args):
    """Assemble (bundle, spec) from either a scores CSV or a model + data CSV."""
    schema = Schema.from_json(args.schema)
    aware = bool(args.aware)
    if args.scores:
        ds = load_csv(args.scores, schema)
        bundle = ds.bundle()
        criterion = _resolve_criterion(args.criterion, bundle.num_classes, bundle.num_groups)
        spec, _ = build_spec(criterion, args.alpha)
        return bundle, spec, ds

    if not (args.model and args.data):
        raise InvalidArgumentError("postprocess needs either --scores or --model with --data")
    model, meta = _load_model(args.model)
    ds = load_csv(args.data, schema)
    if ds.features is None:
        raise DataError("schema declares no feature columns")
    if meta["target"] != "joint":
        raise InvalidArgumentError("score derivation from a model requires a joint-target model")
    n_attr, n_cls = int(meta["attr_arity"]), int(meta["num_classes"])
    f_ay = mdl.predict_proba(model, ds.features)
    if args.calibrate != "none":
        if ds.labels is None or ds.attrs is None:
            raise DataError("--calibrate needs label and attribute columns in the data")
        joint_labels = ds.attrs * n_cls + ds.labels
        f_ay = cal.calibrate_joint(f_ay, joint_labels, method=args.calibrate)
    f_a, f_y, cond = mdl.joint_to_marginals(f_ay, n_attr, n_cls)
    risks = derive_risks(f_y / f_y.sum(axis=1, keepdims=True))
    criterion = _resolve_criterion(args.criterion, n_cls, _groups_for(args.criterion, n_attr, n_cls))
    spec, indexing = build_spec(criterion, args.alpha)
    if indexing.scheme.value == "attr":
        if aware:
            if ds.attrs is None:
                raise DataError("--aware needs an attribute column in the data")
            g = build_group_scores(indexing, True, attr_labels=ds.attrs)
        else:
            g = build_group_scores(indexing, False, f_A=f_a / f_a.sum(axis=1, keepdims=True))
    else:
        if aware:
            if ds.attrs is None:
                raise DataError("--aware needs an attribute column in the data")
            g = build_group_scores(indexing, True, attr_labels=ds.attrs, f_Y_given_AX=cond)
        else:
            g = build_group_scores(indexing, False, f_AY=f_ay / f_ay.sum(axis=1, keepdims=True))
    from .core import ScoreBundle

    bundle = ScoreBundle(risks=risks, groups=np.clip(g, 0.0, 1.0), weights=ds.weights)
    return bundle, spec, ds


def _groups_for(name, n_attr, n_cls):
    if name == "sp":
        return n_attr
    return n_attr * n_cls


def _cmd_postprocess(args):
    bundle, spec, _ = _bundle_from_args(args)
    noise = NoiseSpec(sigma=_parse_sigma(args.sigma), seed=args.seed)
    params, _clf = linear_post(bundle, spec, noise=noise, seed=args.seed,
                               drop_empty=args.drop_empty, solver_path=args.solver_path)
    with open(args.out, "wb") as fh:
        fh.write(save_params(params))
    info = params.fit
    return {
        "out": args.out,
        "objective": info.objective,
        "iterations": info.iterations,
        "sigma": info.sigma,
        "solver_path": info.solver_path,
        "psi_zero_sum_residual": info.psi_zero_sum,
        **params_to_json(params),
    }


def _cmd_evaluate(args):
    with open(args.params, "rb") as fh:
        params = load_params(fh.read())
    schema = Schema.from_json(args.schema)
    ds = load_csv(args.scores, schema)
    bundle = ds.bundle()
    spec = params.spec
    if bundle.num_classes != spec.num_classes or bundle.num_groups != spec.num_groups:
        raise InvalidArgumentError(
            f"params expect {spec.num_classes} classes / {spec.num_groups} groups, "
            f"bundle has {bundle.num_classes} / {bundle.num_groups}"
        )
    from .core import RandomizedClassifier

    clf = RandomizedClassifier(params)
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    bad = set(metrics) - {"max", "rms"}
    if bad:
        raise InvalidArgumentError(f"unknown metrics: {sorted(bad)}")
    t0 = time.perf_counter()
    pi = ev.policy_from_classifier(clf, bundle, draws=args.draws)
    row = {
        "alpha": spec.alpha,
        "risk": ev.policy_risk(pi, bundle),
        "violation_max": ev.violation_max(pi, bundle, spec) if "max" in metrics else None,
        "violation_rms": ev.violation_rms(pi, bundle, spec) if "rms" in metrics else None,
        "wall_time": time.perf_counter() - t0,
    }
    outputs = {}
    if args.out:
        ev.write_report_csv([row], args.out + ".csv")
        ev.write_report_json([row], args.out + ".json")
        outputs = {"report_csv": args.out + ".csv", "report_json": args.out + ".json"}
    return {**row, "violation_semantics": "true" if args.truth_groups else "plugin", **outputs}


def _cmd_sweep(args):
    schema = Schema.from_json(args.schema)
    ds = load_csv(args.scores, schema)
    bundle = ds.bundle()
    criterion = _resolve_criterion(args.criterion, bundle.num_classes, bundle.num_groups)
    alphas = [float(a) for a in args.alphas.split(",") if a.strip()]
    spec, _ = build_spec(criterion, max(alphas))
    noise = NoiseSpec(sigma=_parse_sigma(args.sigma), seed=args.seed)
    rows = ev.sweep(bundle, spec, alphas, noise=noise, seed=args.seed,
                    solver_path=args.solver_path, max_workers=args.workers)
    ev.write_report_csv(rows, args.out + ".csv")
    ev.write_report_json(rows, args.out + ".json")
    outputs = {"report_csv": args.out + ".csv", "report_json": args.out + ".json"}
    if args.plot:
        outputs["figure"] = _render_sweep_figure(rows, args.out + ".png")
    return {"rows": rows, **outputs}


def _render_sweep_figure(rows, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    alphas = [r["alpha"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(alphas, [r["risk"] for r in rows], "o-", color="tab:blue", label="risk")
    ax.set_xlabel("tolerance alpha")
    ax.set_ylabel("risk", color="tab:blue")
    ax.set_xscale("symlog", linthresh=1e-3)
    ax.invert_xaxis()
    ax2 = ax.twinx()
    ax2.plot(alphas, [r["violation_max"] for r in rows], "s--", color="tab:red",
             label="violation (max)")
    ax2.plot(alphas, [r["violation_rms"] for r in rows], "^:", color="tab:orange",
             label="violation (rms)")
    ax2.set_ylabel("violation", color="tab:red")
    lines = ax.get_lines() + ax2.get_lines()
    ax.legend(lines, [ln.get_label() for ln in lines], loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _cmd_synth(args):
    if args.kind == "tightness":
        inst = synth_tightness(args.p, args.epsilon)
        scores_path = args.out + "_scores.csv"
        plug, true = inst.bundle_plugin, inst.bundle_true
        header = ["r_0", "r_1", "g_0", "g_1", "tg_0", "tg_1", "weight"]
        lines = [",".join(header)]
        for i in range(plug.n):
            lines.append(",".join(repr(float(v)) for v in [
                plug.risks[i, 0], plug.risks[i, 1], plug.groups[i, 0], plug.groups[i, 1],
                true.groups[i, 0], true.groups[i, 1], plug.weights[i]]))
        meta = inst.metadata
    else:
        bundle, _ = synth_random(args.seed, n=args.n, num_classes=args.classes,
                                 num_groups=args.groups, one_hot=args.one_hot)
        scores_path = args.out + "_scores.csv"
        header = ([f"r_{y}" for y in range(bundle.num_classes)]
                  + [f"g_{k}" for k in range(bundle.num_groups)] + ["weight"])
        lines = [",".join(header)]
        for i in range(bundle.n):
            vals = list(bundle.risks[i]) + list(bundle.groups[i]) + [bundle.weights[i]]
            lines.append(",".join(repr(float(v)) for v in vals))
        meta = {"kind": "random", "seed": args.seed, "n": args.n,
                "num_classes": args.classes, "num_groups": args.groups,
                "one_hot": bool(args.one_hot)}
    with open(scores_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    schema_path = args.out + "_schema.json"
    ncls = 2 if args.kind == "tightness" else args.classes
    ngrp = 2 if args.kind == "tightness" else args.groups
    with open(schema_path, "w") as fh:
        json.dump({
            "risks": [f"r_{y}" for y in range(ncls)],
            "groups": [f"g_{k}" for k in range(ngrp)],
            "weight": "weight",
        }, fh, indent=2)
        fh.write("\n")
    meta_path = args.out + "_meta.json"
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, default=_jsonable)
        fh.write("\n")
    return {"scores": scores_path, "schema": schema_path, "meta": meta_path}


if __name__ == "__main__":
    sys.exit(main())
