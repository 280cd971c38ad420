"""Experiment harness: seeded trials over datasets x depths x schemes, with reports.

Config files are JSON objects::

    {
      "datasets": [
        {"name": "abalone", "bundled": "abalone", "width": 8},
        {"name": "mine", "path": "mine.csv", "schema": "mine.schema.json",
         "task": "regression"}
      ],
      "depths": [10, 20],
      "width": "min(d,20)",            # or an integer; per-dataset "width" wins
      "schemes": ["SteinGLM", "GlorotNormal", "he-normal+glm",
                  {"id": "Stein-restd", "hidden": "stein", "output": "glm",
                   "restandardize": true}],
      "repeats": 10,
      "seed_base": 0,
      "activation": "tanh",
      "train": {"max_epochs": 200, "learning_rate": 0.001},
      "output_dir": "results",
      "threads": 1
    }

``schema`` may be a path or an inline column list; relative paths resolve
against the config file's directory. Trial ``r`` of every cell uses seed
``seed_base + r`` for the split, the initializer and the batch shuffles.
"""

import csv
import hashlib
import json
import os
import platform
import time
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    BUNDLED,
    ColumnSchema,
    _check_schema,
    bundled_path,
    load_csv,
    load_schema,
    preprocess,
    split,
)
from .initializers import InitScheme, init_network
from .mlp import TrainConfig, evaluate, train
from .network import Architecture

__all__ = [
    "DatasetEntry",
    "SchemeEntry",
    "ExperimentConfig",
    "TrialResult",
    "ExperimentReport",
    "load_config",
    "bundled_config",
    "width_for",
    "run_trial",
    "run_experiment",
    "aggregate",
    "emit_report",
    "prepare_data",
]

WIDTH_RULE = "min(d,20)"
LOG_NAME = "trials.jsonl"


@dataclass(frozen=True)
class DatasetEntry:
    name: str
    path: str
    schema: tuple
    task: str
    width: object = None

    def to_dict(self):
        return {
            "name": self.name,
            "path": self.path,
            "schema": [{"name": c.name, "kind": c.kind} for c in self.schema],
            "task": self.task,
            "width": self.width,
        }


@dataclass(frozen=True)
class SchemeEntry:
    id: str
    scheme: InitScheme

    def to_dict(self):
        return {"id": self.id, **self.scheme.to_dict()}


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple
    depths: tuple
    schemes: tuple
    repeats: int = 10
    width: object = WIDTH_RULE
    seed_base: int = 0
    activation: str = "tanh"
    train: TrainConfig = field(default_factory=TrainConfig)
    output_dir: str = "results"
    threads: int = None

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not self.depths or min(self.depths) < 1:
            raise ValueError("depths must be a non-empty list of positive integers")
        if not self.datasets:
            raise ValueError("at least one dataset is required")
        if not self.schemes:
            raise ValueError("at least one scheme is required")
        ids = [s.id for s in self.schemes]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate scheme ids in {ids}")
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate dataset names in {names}")
        _check_width(self.width)
        for d in self.datasets:
            if d.width is not None:
                _check_width(d.width)

    def result_dict(self):
        """Everything that influences trial results (not output location or threads)."""
        train = self.train.to_dict()
        train.pop("seed", None)
        return {
            "datasets": [d.to_dict() for d in self.datasets],
            "depths": list(self.depths),
            "schemes": [s.to_dict() for s in self.schemes],
            "repeats": self.repeats,
            "width": self.width,
            "seed_base": self.seed_base,
            "activation": self.activation,
            "train": train,
        }

    @property
    def hash(self):
        blob = json.dumps(self.result_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_dict(self):
        return {**self.result_dict(), "output_dir": self.output_dir, "threads": self.threads}


def _check_width(width):
    if isinstance(width, bool) or not (width == WIDTH_RULE or
                                        (isinstance(width, int) and width >= 1)):
        raise ValueError(f"width must be a positive integer or {WIDTH_RULE!r}, got {width!r}")


def width_for(rule, d):
    return min(d, 20) if rule == WIDTH_RULE else int(rule)


def _parse_scheme(item):
    if isinstance(item, str):
        scheme = InitScheme.parse(item)
        return SchemeEntry(item, scheme)
    if isinstance(item, dict):
        spec = dict(item)
        sid = spec.pop("id", None)
        if "lambda_grid" in spec:
            spec["lambda_grid"] = tuple(spec["lambda_grid"])
        scheme = InitScheme(**spec)
        return SchemeEntry(sid or scheme.label, scheme)
    raise ValueError(f"scheme entries must be strings or objects, got {item!r}")


def _parse_dataset(item, base):
    if not isinstance(item, dict):
        raise ValueError(f"dataset entries must be objects, got {item!r}")
    unknown = set(item) - {"name", "bundled", "path", "schema", "task", "width"}
    if unknown:
        raise ValueError(f"unknown dataset keys {sorted(unknown)}")
    if "bundled" in item:
        name = item["bundled"]
        if name not in BUNDLED:
            raise ValueError(f"no bundled dataset {name!r}")
        path = f"bundled:{name}"
        schema = load_schema(bundled_path(name, ".schema.json"))
        task = item.get("task", BUNDLED[name])
    else:
        for key in ("path", "schema", "task"):
            if key not in item:
                raise ValueError(f"dataset entry {item.get('name')!r} lacks {key!r}")
        path = str((base / item["path"]).resolve())
        schema_spec = item["schema"]
        if isinstance(schema_spec, str):
            schema = load_schema(base / schema_spec)
        else:
            schema = [ColumnSchema(c["name"], c["kind"]) for c in schema_spec]
            _check_schema(schema)
        task = item["task"]
        name = Path(path).stem
    return DatasetEntry(item.get("name", name), path, tuple(schema), task, item.get("width"))


def config_from_dict(doc, base="."):
    """Build an :class:`ExperimentConfig`; raises ``ValueError`` on malformed input."""
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    known = {"datasets", "depths", "schemes", "repeats", "width", "seed_base", "activation",
             "train", "output_dir", "threads"}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)}")
    base = Path(base)
    try:
        train = TrainConfig(**doc.get("train", {}))
        return ExperimentConfig(
            datasets=tuple(_parse_dataset(d, base) for d in doc.get("datasets", [])),
            depths=tuple(int(x) for x in doc.get("depths", [])),
            schemes=tuple(_parse_scheme(s) for s in doc.get("schemes", [])),
            repeats=int(doc.get("repeats", 10)),
            width=doc.get("width", WIDTH_RULE),
            seed_base=int(doc.get("seed_base", 0)),
            activation=doc.get("activation", "tanh"),
            train=train,
            output_dir=doc.get("output_dir", "results"),
            threads=doc.get("threads"),
        )
    except TypeError as exc:
        raise ValueError(str(exc)) from exc


def load_config(path):
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(doc, path.parent)


def bundled_config(name="smoke"):
    """Load one of the configs shipped with the package (``smoke``, ``ablation``, ``quick`` or ``full``)."""
    path = Path(str(resources.files("steinit") / "configs" / f"{name}.json"))
    if not path.exists():
        raise ValueError(f"no bundled config {name!r}")
    return load_config(path)


@dataclass
class TrialResult:
    dataset: str
    depth: int
    scheme: str
    seed: int
    repeat: int
    width: int = 0
    init_seconds: float = float("nan")
    train_seconds: float = float("nan")
    trajectory: list = field(default_factory=list)   # [epoch, train_loss, val_loss, val_metric]
    test_metric: float = float("nan")
    test_loss: float = float("nan")
    best_epoch: int = 0
    initial_train_loss: float = float("nan")
    initial_val_loss: float = float("nan")
    glm_lambda: float = None
    divergent: bool = False
    error: str = None

    @property
    def key(self):
        return (self.dataset, self.depth, self.scheme, self.seed)

    @property
    def ok(self):
        return self.error is None and not self.divergent and np.isfinite(self.test_metric)

    _FLOATS = ("init_seconds", "train_seconds", "test_metric", "test_loss",
               "initial_train_loss", "initial_val_loss")

    def to_dict(self):
        # NaN is not valid JSON; store it as null
        d = asdict(self)
        for name in self._FLOATS:
            if d[name] is not None and not np.isfinite(d[name]):
                d[name] = None
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for name in cls._FLOATS:
            if d.get(name) is None:
                d[name] = float("nan")
        return cls(**d)


@lru_cache(maxsize=8)
def _raw_table(path, schema):
    if path.startswith("bundled:"):
        path = bundled_path(path.split(":", 1)[1])
    return load_csv(path, list(schema))


def prepare_data(entry, seed):
    """Split and preprocess ``entry`` for ``seed``; returns ``(dataset, split)``."""
    raw = _raw_table(entry.path, entry.schema)
    sp = split(raw.n_rows, seed)
    return preprocess(raw, entry.task, sp.train_idx), sp


def run_trial(config, entry, depth, scheme_entry, repeat):
    """One seeded trial. Failures are captured in ``TrialResult.error``."""
    seed = config.seed_base + repeat
    result = TrialResult(entry.name, depth, scheme_entry.id, seed, repeat)
    try:
        ds, sp = prepare_data(entry, seed)
        Xtr, ytr = ds.subset(sp.train_idx)
        Xv, yv = ds.subset(sp.val_idx)
        Xte, yte = ds.subset(sp.test_idx)
        width = width_for(entry.width if entry.width is not None else config.width, ds.d)
        result.width = width
        arch = Architecture.for_task(ds.d, depth, width, entry.task, config.activation)

        t0 = time.perf_counter()
        params = init_network(arch, scheme_entry.scheme, Xtr, ytr, Xv, yv,
                              rng=np.random.default_rng(seed))
        result.init_seconds = time.perf_counter() - t0
        result.glm_lambda = params.meta.get("glm_lambda")

        t0 = time.perf_counter()
        tc = TrainConfig(**{**config.train.to_dict(), "seed": seed})
        model = train(params, Xtr, ytr, Xv, yv, arch, tc, entry.task)
        result.train_seconds = time.perf_counter() - t0

        result.trajectory = [list(map(float, r)) for r in model.trajectory]
        for row in result.trajectory:
            row[0] = int(row[0])
        result.best_epoch = model.best_epoch
        result.divergent = model.divergent
        result.initial_train_loss = model.initial_train_loss
        result.initial_val_loss = model.initial_val_loss
        result.test_loss, result.test_metric = evaluate(model.best_params, Xte, yte, arch,
                                                        entry.task)
    except Exception as exc:  # one bad trial must not end the sweep
        result.error = f"{type(exc).__name__}: {exc}"
        result.trajectory = []
        if os.environ.get("STEINIT_DEBUG"):
            traceback.print_exc()
    return result


@dataclass
class ExperimentReport:
    config: dict
    trials: list
    aggregates: list
    trajectories: list
    environment: dict

    def to_dict(self):
        return {
            "config": self.config,
            "environment": self.environment,
            "aggregates": self.aggregates,
            "trajectories": self.trajectories,
            "trials": [t.to_dict() for t in self.trials],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["config"], [TrialResult.from_dict(t) for t in d["trials"]],
                   d["aggregates"], d["trajectories"], d["environment"])

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def cell(self, dataset, depth, scheme):
        for row in self.aggregates:
            if (row["dataset"], row["depth"], row["scheme"]) == (dataset, depth, scheme):
                return row
        raise KeyError((dataset, depth, scheme))

    def trials_for(self, dataset, depth, scheme):
        return [t for t in self.trials if (t.dataset, t.depth, t.scheme) ==
                (dataset, depth, scheme)]


def _cells(trials, order=None):
    groups = {}
    for t in trials:
        groups.setdefault((t.dataset, t.depth, t.scheme), []).append(t)
    keys = order if order is not None else sorted(groups)
    return [(k, sorted(groups.get(k, []), key=lambda t: t.seed)) for k in keys]


def aggregate(trials, order=None):
    """Per-cell metric mean/std (population) over the non-flagged trials, in seed order.

    Returns ``(aggregates, trajectories)``. Trajectories hold the per-epoch
    mean training and validation losses over the non-flagged trials.
    """
    aggregates, trajectories = [], []
    for (dataset, depth, scheme), group in _cells(trials, order):
        good = [t for t in group if t.ok]
        values = np.array([t.test_metric for t in good])
        aggregates.append({
            "dataset": dataset,
            "depth": depth,
            "scheme": scheme,
            "n_trials": len(group),
            "n_flagged": len(group) - len(good),
            "mean": float(values.mean()) if good else None,
            "std": float(values.std()) if good else None,
            "mean_init_seconds": float(np.mean([t.init_seconds for t in good])) if good else None,
        })
        by_epoch = {}
        for t in good:
            for epoch, tr, va, _ in t.trajectory:
                by_epoch.setdefault(int(epoch), []).append((tr, va))
        trajectories.append({
            "dataset": dataset,
            "depth": depth,
            "scheme": scheme,
            "epochs": sorted(by_epoch),
            "mean_train_loss": [float(np.mean([v[0] for v in by_epoch[e]]))
                                for e in sorted(by_epoch)],
            "mean_val_loss": [float(np.mean([v[1] for v in by_epoch[e]]))
                              for e in sorted(by_epoch)],
        })
    return aggregates, trajectories


def resolve_threads(requested=None, config=None):
    """``requested``, else the config's budget, else ``STEINIT_THREADS``, else 1."""
    for value in (requested, getattr(config, "threads", None), os.environ.get("STEINIT_THREADS")):
        if value not in (None, ""):
            threads = int(value)
            if threads < 1:
                raise ValueError("thread count must be >= 1")
            return threads
    return 1


def _read_log(path, config_hash):
    done = {}
    if not path.exists():
        return done
    with open(path, encoding="utf-8") as f:
        for line in f:
            try:
                doc = json.loads(line)
            except json.JSONDecodeError:
                continue  # torn final line from an interrupted run
            if doc.get("config_hash") == config_hash:
                trial = TrialResult.from_dict(doc["trial"])
                done[trial.key] = trial
    return done


def _cell_order(config):
    return [(d.name, depth, s.id) for d in config.datasets for depth in config.depths
            for s in config.schemes]


def run_experiment(config, out_dir=None, threads=None, progress=None):
    """Run (or resume) every trial of ``config`` and return the report.

    Finished trials are appended to ``<out_dir>/trials.jsonl`` as they
    complete; rerunning with the same config skips trials already logged.
    With ``threads > 1`` trials run in separate processes.
    """
    out = Path(out_dir if out_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    threads = resolve_threads(threads, config)
    log_path = out / LOG_NAME
    config_hash = config.hash
    done = _read_log(log_path, config_hash)

    jobs = []
    for entry in config.datasets:
        for depth in config.depths:
            for scheme in config.schemes:
                for repeat in range(config.repeats):
                    key = (entry.name, depth, scheme.id, config.seed_base + repeat)
                    if key not in done:
                        jobs.append((config, entry, depth, scheme, repeat))

    with open(log_path, "a+", encoding="utf-8") as log:
        if log.tell() > 0:
            log.seek(log.tell() - 1)
            if log.read(1) != "\n":
                log.write("\n")  # terminate a torn record before appending
        def record(result):
            log.write(json.dumps({"config_hash": config_hash, "trial": result.to_dict()}) + "\n")
            log.flush()
            done[result.key] = result
            if progress is not None:
                progress(result)

        if threads == 1 or len(jobs) <= 1:
            for job in jobs:
                record(run_trial(*job))
        else:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                futures = [pool.submit(run_trial, *job) for job in jobs]
                for fut in as_completed(futures):
                    record(fut.result())

    wanted = {(d.name, depth, s.id, config.seed_base + r) for d in config.datasets
              for depth in config.depths for s in config.schemes for r in range(config.repeats)}
    trials = sorted((t for k, t in done.items() if k in wanted), key=lambda t: t.key)
    aggregates, trajectories = aggregate(trials, _cell_order(config))
    environment = {
        "threads": threads,
        "version": __version__,
        "config_hash": config_hash,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }
    return ExperimentReport(config.to_dict(), trials, aggregates, trajectories, environment)


def format_cell(mean, std):
    if mean is None:
        return ""
    return f"{mean:.4f}±{std:.4f}"


def emit_report(report, out_dir, formats=("json", "csv")):
    """Write ``report.json``, ``metrics.csv`` and ``trajectories.csv``; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in formats:
        path = out / "report.json"
        with open(path, "w", encoding="utf-8") as f:
            json.dump(report.to_dict(), f, indent=1)
        written.append(path)
    if "csv" in formats:
        schemes = [s["id"] for s in report.config.get("schemes", [])]
        for row in report.aggregates:
            if row["scheme"] not in schemes:
                schemes.append(row["scheme"])
        rows = {}
        for row in report.aggregates:
            cells = rows.setdefault((row["dataset"], row["depth"]), {})
            cells[row["scheme"]] = format_cell(row["mean"], row["std"])
        path = out / "metrics.csv"
        with open(path, "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f)
            w.writerow(["dataset", "depth", *schemes])
            for (dataset, depth), cells in rows.items():
                w.writerow([dataset, depth, *(cells.get(s, "") for s in schemes)])
        written.append(path)

        path = out / "trajectories.csv"
        with open(path, "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f)
            w.writerow(["dataset", "depth", "scheme", "epoch", "mean_train_loss",
                        "mean_val_loss"])
            for traj in report.trajectories:
                for epoch, tr, va in zip(traj["epochs"], traj["mean_train_loss"],
                                         traj["mean_val_loss"]):
                    w.writerow([traj["dataset"], traj["depth"], traj["scheme"], epoch,
                                repr(tr), repr(va)])
        written.append(path)
    return written
