"""Command-line entry point: ``steinit {bench,init,eval,synth}``.

Failures print one line ``error: <kind>: <message>`` to stderr. Usage errors
exit with status 2, runtime failures with status 1.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .bench import (
    bundled_config,
    emit_report,
    load_config,
    prepare_data,
    resolve_threads,
    run_experiment,
    width_for,
    DatasetEntry,
    WIDTH_RULE,
)
from .data import load_schema
from .initializers import InitScheme, init_network
from .mlp import evaluate
from .network import Architecture, NetworkParams
from .synthetic import multi_index


class UsageError(Exception):
    pass


def _config(arg):
    path = Path(arg)
    if path.exists():
        return load_config(path)
    if path.suffix == "" and "/" not in arg:
        return bundled_config(arg)
    raise FileNotFoundError(f"config file {arg} not found")


def cmd_bench(args):
    try:
        config = _config(args.config)
        threads = resolve_threads(args.threads, config)
    except ValueError as exc:
        raise UsageError(f"malformed config: {exc}") from exc

    def progress(t):
        status = "ok" if t.ok else ("divergent" if t.divergent else "failed")
        print(f"{t.dataset} depth={t.depth} {t.scheme} seed={t.seed} "
              f"metric={t.test_metric:.4f} {status}", file=sys.stderr, flush=True)

    report = run_experiment(config, args.out, threads,
                            progress=None if args.quiet else progress)
    paths = emit_report(report, args.out)
    print(json.dumps({"report": [str(p) for p in paths],
                      "config_hash": report.environment["config_hash"],
                      "threads": threads}))
    return 0


def _entry(dataset, schema_path, task):
    schema = load_schema(schema_path)
    return DatasetEntry(Path(dataset).stem, str(Path(dataset).resolve()), tuple(schema), task)


def cmd_init(args):
    if args.depth < 1:
        raise UsageError("--depth must be >= 1")
    try:
        scheme = InitScheme.parse(args.scheme)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    entry = _entry(args.dataset, args.schema, args.task)
    ds, sp = prepare_data(entry, args.seed)
    width = width_for(args.width if args.width is not None else WIDTH_RULE, ds.d)
    arch = Architecture.for_task(ds.d, args.depth, width, args.task, args.activation)
    Xtr, ytr = ds.subset(sp.train_idx)
    Xv, yv = ds.subset(sp.val_idx)
    params = init_network(arch, scheme, Xtr, ytr, Xv, yv, rng=np.random.default_rng(args.seed))
    params.meta.update({
        "seed": args.seed,
        "task": args.task,
        "schema": str(Path(args.schema).resolve()),
        "dataset": entry.path,
    })
    params.save(args.dump, arch)
    train_loss, _ = evaluate(params, Xtr, ytr, arch, args.task)
    print(json.dumps({"params": args.dump, "scheme": scheme.label, "width": width,
                      "train_loss": train_loss}))
    return 0


def cmd_eval(args):
    params, arch = NetworkParams.load(args.params)
    meta = params.meta
    if arch is None or "task" not in meta:
        raise UsageError(f"{args.params} lacks the architecture or preprocessing record")
    schema = args.schema or meta["schema"]
    entry = _entry(args.dataset, schema, meta["task"])
    seed = meta["seed"] if args.seed is None else args.seed
    ds, sp = prepare_data(entry, seed)
    if ds.d != arch.input_dim:
        raise ValueError(f"dataset has {ds.d} features, model expects {arch.input_dim}")
    out = {"seed": seed}
    for part, idx in (("train", sp.train_idx), ("val", sp.val_idx), ("test", sp.test_idx)):
        value, metric = evaluate(params, *ds.subset(idx), arch, meta["task"])
        out[f"{part}_loss"] = value
        out[f"{part}_metric"] = metric
    print(json.dumps(out))
    return 0


def cmd_synth(args):
    if args.kind != "multi-index":
        raise UsageError(f"unknown synthetic kind {args.kind!r}")
    try:
        X, y, B = multi_index(args.n, args.dim, args.k, args.seed, noise=args.noise)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    frame = pd.DataFrame(X, columns=[f"x{j + 1}" for j in range(args.dim)])
    frame["y"] = y
    frame.to_csv(sys.stdout if args.out == "-" else args.out, index=False, float_format="%.17g")
    if args.basis_out:
        pd.DataFrame(B, columns=[f"b{j + 1}" for j in range(args.k)]).to_csv(
            args.basis_out, index=False, float_format="%.17g")
    if args.schema_out:
        cols = [{"name": f"x{j + 1}", "kind": "numeric"} for j in range(args.dim)]
        cols.append({"name": "y", "kind": "response"})
        Path(args.schema_out).write_text(json.dumps(cols, indent=1) + "\n")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"error: usage: {message}\n")


def build_parser():
    p = _Parser(prog="steinit", description="Stein-moment network initialization toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bench", help="run an experiment sweep and write reports")
    b.add_argument("--config", required=True,
                   help="JSON config path, or a bundled name: smoke, ablation, quick, full")
    b.add_argument("--out", required=True, help="output directory (result log and reports)")
    b.add_argument("--threads", type=int, help="max concurrent trials (default STEINIT_THREADS or 1)")
    b.add_argument("--quiet", action="store_true")
    b.set_defaults(func=cmd_bench)

    i = sub.add_parser("init", help="initialize a network and dump its parameters")
    i.add_argument("--dataset", required=True)
    i.add_argument("--schema", required=True)
    i.add_argument("--depth", type=int, required=True)
    i.add_argument("--scheme", required=True, help="e.g. SteinGLM, Stein, HeNormal, orthogonal+glm")
    i.add_argument("--dump", required=True)
    i.add_argument("--task", choices=("regression", "binary-classification"), default="regression")
    i.add_argument("--width", type=int)
    i.add_argument("--activation", choices=("tanh", "sigmoid"), default="tanh")
    i.add_argument("--seed", type=int, default=0)
    i.set_defaults(func=cmd_init)

    e = sub.add_parser("eval", help="score dumped parameters on the split they were made for")
    e.add_argument("--params", required=True)
    e.add_argument("--dataset", required=True)
    e.add_argument("--schema")
    e.add_argument("--seed", type=int)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="write planted multi-index data as CSV")
    s.add_argument("--kind", required=True)
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    s.add_argument("--basis-out", help="also write the planted basis B as CSV")
    s.add_argument("--schema-out", help="also write a column schema for the CSV")
    s.set_defaults(func=cmd_synth)
    return p


def _one_line(exc):
    return " ".join(str(exc).split())


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: usage: {_one_line(exc)}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {_one_line(exc)}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
