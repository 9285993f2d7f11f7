"""``varchen`` command line: run experiment specs and the self-verification suites.

Spec files are plain ``key = value`` text. ``[experiment]`` describes the
problem and seeds; each ``[run NAME]`` section is one optimizer config. Run
``varchen --help-config`` for every key with its type and default.

Exit codes: 0 ok, 1 verification failure, 2 spec/config/dataset parse error,
3 a run diverged, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .datasets import DatasetParseError, load_dataset, synthetic_binary
from .optimizer import ConfigError, OptimizerConfig, RunTrace, run

log = logging.getLogger("varchen")

EXIT_OK, EXIT_VERIFY, EXIT_PARSE, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3, 4
ENV_OUT = "VARCHEN_OUT"
SCHEMA_VERSION = 1

TRACE_COLUMNS = ("k", "epoch", "minibatch_loss", "grad_norm", "alpha",
                 "lambda_k", "Lambda_k", "flush", "wall_ms")
EPOCH_COLUMNS = ("epoch", "full_loss", "full_grad_norm", "val_metric")
SUMMARY_COLUMNS = ("run", "method", "seed", "status", "epochs", "iterations",
                   "final_loss", "final_grad_norm", "flushes", "max_Lambda_k")

PROBLEMS = ("logistic", "sigmoid-svm", "synthetic")


class SpecError(Exception):
    def __init__(self, path, lineno: int, col: int, msg: str):
        self.path, self.lineno, self.col, self.msg = str(path), lineno, col, msg
        super().__init__(f"{self.path}:{lineno}:{col}: {msg}")


def _bool(text):
    low = text.lower()
    if low in ("on", "true", "yes", "1"):
        return True
    if low in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


def _opt(conv):
    def parse(text):
        return None if text.lower() in ("none", "") else conv(text)
    parse.__name__ = f"{conv.__name__} or none"
    return parse


def _int_list(text):
    return [int(t) for t in text.replace(",", " ").split()]


_int_list.__name__ = "int list"
_bool.__name__ = "on/off"

# key -> (parser, default, help)
EXPERIMENT_KEYS = {
    "problem": (str, "logistic", "logistic | sigmoid-svm | synthetic"),
    "dataset": (str, "synthetic", "path to a LIBSVM/CSV file, or 'synthetic'"),
    "format": (_opt(str), None, "libsvm | csv; guessed from the extension when unset"),
    "n_features": (_opt(int), None, "LIBSVM feature count (default: max index seen)"),
    "validation": (_opt(str), None, "optional held-out dataset path (accuracy per epoch)"),
    "positive_class": (_opt(int), None, "one-vs-rest target for multi-class labels"),
    "l2": (float, 0.0, "ridge weight for logistic / sigmoid-svm"),
    "n_samples": (int, 200, "synthetic data: number of samples"),
    "dim": (int, 20, "synthetic data: dimension"),
    "data_seed": (int, 0, "synthetic data: generator seed"),
    "noise": (float, 0.5, "synthetic_binary label noise"),
    "cond": (float, 1e4, "synthetic problem: condition number"),
    "nonconvex_mix": (float, 0.0, "synthetic problem: weight of the sine terms in [0, 1]"),
    "seeds": (_int_list, [0], "optimizer seeds; one run per (config, seed)"),
    "timing": (_bool, True, "off writes wall_ms = 0 so traces are byte-reproducible"),
}

_RUN_HELP = {
    "method": "varchen | sdlbfgs-vr | svrg | sgd (default: section name)",
    "memory": "number of stored curvature pairs p",
    "eta": "damping parameter in (0, 1)",
    "lambda_min": "lower admissible eigenvalue bound",
    "lambda_max": "upper admissible eigenvalue bound",
    "gamma_lo": "lower clamp for the H0 scaling",
    "gamma_hi": "upper clamp for the H0 scaling",
    "clamp_mode": "h0-scalar | b0-scalar",
    "lg_mode": "per-pair | running-max | fixed",
    "lg_fixed": "gradient Lipschitz estimate when lg_mode = fixed",
    "schedule": "constant | harmonic | power",
    "alpha": "constant step size",
    "c": "harmonic numerator (none: lambda_min / (L lambda_max))",
    "beta": "power schedule exponent in (0.5, 1)",
    "lipschitz": "L for the schedules (none: running estimate)",
    "epochs": "number of epochs",
    "batch_size": "minibatch size",
    "seed": "overridden by [experiment] seeds",
    "sampling": "without-replacement | with-replacement",
    "curvature_gradient": "raw | corrected gradient difference for y",
    "tol": "stop once the full gradient norm drops below this",
}


def _run_keys():
    defaults = OptimizerConfig()
    keys = {}
    for f in fields(OptimizerConfig):
        default = getattr(defaults, f.name)
        if f.type in ("int", int):
            conv = int
        elif f.type in ("float", float):
            conv = float
        elif f.type in ("str", str):
            conv = str
        elif "int" in str(f.type):
            conv = _opt(int)
        else:
            conv = _opt(float)
        keys[f.name] = (conv, default, _RUN_HELP.get(f.name, ""))
    return keys


RUN_KEYS = _run_keys()


@dataclass
class RunSpec:
    name: str
    config: OptimizerConfig
    lineno: int


@dataclass
class ExperimentSpec:
    path: str
    experiment: dict
    runs: list = field(default_factory=list)

    def seeds(self):
        return list(self.experiment["seeds"])


def parse_spec_text(text: str, path="<spec>") -> ExperimentSpec:
    experiment = {k: v[1] for k, v in EXPERIMENT_KEYS.items()}
    runs: list[RunSpec] = []
    section = None
    current: Optional[dict] = None
    seen: set = set()
    where = {}

    def close_run():
        if current is None:
            return
        name, lineno, values = current["name"], current["lineno"], current["values"]
        values.setdefault("method", name)
        try:
            cfg = OptimizerConfig(**values).validate()
        except ConfigError as exc:
            raise SpecError(path, lineno, 1, f"[run {name}]: {exc}") from None
        runs.append(RunSpec(name, cfg, lineno))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        stripped = line.strip()
        if not stripped:
            continue
        col = len(line) - len(line.lstrip()) + 1
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise SpecError(path, lineno, col, "unterminated section header")
            header = stripped[1:-1].split()
            close_run()
            current = None
            if header == ["experiment"]:
                section = "experiment"
            elif len(header) == 2 and header[0] == "run":
                name = header[1]
                if name in (r.name for r in runs):
                    raise SpecError(path, lineno, col, f"duplicate run name {name!r}")
                section = "run"
                current = {"name": name, "lineno": lineno, "values": {}}
            else:
                raise SpecError(path, lineno, col, f"unknown section [{' '.join(header)}]")
            seen = set()
            continue
        key, sep, rest = line.partition("=")
        if not sep:
            raise SpecError(path, lineno, col, "expected 'key = value'")
        key, value = key.strip(), rest.strip()
        vcol = len(line) - len(rest.lstrip()) + 1
        if section is None:
            raise SpecError(path, lineno, col, "key outside of a section")
        table = EXPERIMENT_KEYS if section == "experiment" else RUN_KEYS
        if key not in table:
            raise SpecError(path, lineno, col, f"unknown key {key!r} in [{section}]")
        if key in seen:
            raise SpecError(path, lineno, col, f"duplicate key {key!r}")
        seen.add(key)
        conv = table[key][0]
        try:
            parsed = conv(value)
        except ValueError as exc:
            raise SpecError(path, lineno, vcol, f"bad value for {key}: {exc}") from None
        if section == "experiment":
            experiment[key] = parsed
            where[key] = (lineno, vcol)
        else:
            current["values"][key] = parsed
    close_run()

    if experiment["problem"] not in PROBLEMS:
        raise SpecError(path, *where["problem"], f"problem must be one of {PROBLEMS}")
    if not experiment["seeds"]:
        raise SpecError(path, *where["seeds"], "seeds must not be empty")
    if not runs:
        raise SpecError(path, 1, 1, "no [run NAME] sections")
    return ExperimentSpec(str(path), experiment, runs)


def parse_spec(path) -> ExperimentSpec:
    return parse_spec_text(Path(path).read_text(), path)


def help_config() -> str:
    out = ["[experiment]"]
    for key, (conv, default, text) in EXPERIMENT_KEYS.items():
        out.append(f"  {key:<20} {conv.__name__:<14} default={default!r:<14} {text}")
    out.append("")
    out.append("[run NAME]   (one section per optimizer config)")
    for key, (conv, default, text) in RUN_KEYS.items():
        out.append(f"  {key:<20} {conv.__name__:<14} default={default!r:<14} {text}")
    return "\n".join(out)


def _resolve(base: str, p):
    p = Path(p)
    return p if p.is_absolute() else Path(base).parent / p


def build_problem(experiment: dict, spec_path: str = "."):
    from .problems import logistic_regression, sigmoid_svm, synthetic_illconditioned

    e = experiment
    if e["problem"] == "synthetic":
        return synthetic_illconditioned(e["dim"], e["cond"], e["nonconvex_mix"],
                                        e["data_seed"], e["n_samples"])

    def load(p):
        ds = load_dataset(_resolve(spec_path, p), e["format"], e["n_features"])
        if e["positive_class"] is not None:
            ds = ds.one_vs_rest(e["positive_class"])
        return ds

    if e["dataset"] == "synthetic":
        ds = synthetic_binary(e["n_samples"], e["dim"], e["data_seed"], e["noise"])
    else:
        ds = load(e["dataset"])
    val = load(e["validation"]) if e["validation"] else None
    factory = logistic_regression if e["problem"] == "logistic" else sigmoid_svm
    try:
        return factory(ds, e["l2"], val)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def trace_csv(trace: RunTrace, timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for r in trace.iterations:
        row = [getattr(r, c) for c in TRACE_COLUMNS]
        if not timing:
            row[-1] = 0.0
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def epoch_csv(trace: RunTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EPOCH_COLUMNS)
    for r in trace.epochs:
        w.writerow([_fmt(getattr(r, c)) for c in EPOCH_COLUMNS])
    return buf.getvalue()


def config_hash(experiment: dict, config: OptimizerConfig) -> str:
    blob = json.dumps({"experiment": experiment, "config": config.as_dict()},
                      sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).resolve().parent)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def _execute(job):
    """Worker body: build the problem and run one (config, seed)."""
    experiment, spec_path, name, config_dict = job
    problem = build_problem(experiment, spec_path)
    config = OptimizerConfig(**config_dict)
    t0 = time.time()
    trace = run(problem, config)
    trace.x = None
    return name, config.seed, trace, t0, time.time()


def cmd_run(args) -> int:
    try:
        spec = parse_spec(args.spec)
    except OSError as exc:
        print(f"error: cannot read spec: {exc}", file=sys.stderr)
        return EXIT_IO
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    seeds = [args.seed] if args.seed is not None else spec.seeds()
    out = Path(args.out or os.environ.get(ENV_OUT) or "varchen_out")
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory {out} is not writable: {exc}", file=sys.stderr)
        return EXIT_IO

    # fail on data problems before any run starts
    try:
        problem = build_problem(spec.experiment, spec.path)
    except DatasetParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigError as exc:
        print(f"error: {spec.path}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"error: cannot read dataset: {exc}", file=sys.stderr)
        return EXIT_IO

    jobs = []
    for rs in spec.runs:
        for seed in seeds:
            cfg = rs.config.as_dict()
            cfg["seed"] = seed
            jobs.append((spec.experiment, spec.path, rs.name, cfg))

    results = []
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_execute, jobs))
    else:
        for job in jobs:
            name, cfg = job[2], OptimizerConfig(**job[3])
            t0 = time.time()
            trace = run(problem, cfg)
            results.append((name, cfg.seed, trace, t0, time.time()))

    timing = spec.experiment["timing"]
    flags = {"command": "run", "spec": str(args.spec), "jobs": args.jobs,
             "seed": args.seed, "out": str(out), "verbose": args.verbose}
    manifest = {"schema_version": SCHEMA_VERSION, "tool_version": __version__,
                "spec": str(args.spec), "git_describe": git_describe(),
                "cli_flags": flags, "experiment": spec.experiment, "runs": []}
    summary_rows = []
    exit_code = EXIT_OK
    try:
        for (name, seed, trace, t0, t1), job in zip(results, jobs):
            cfg = OptimizerConfig(**job[3])
            stem = f"{name}_seed{seed}"
            (out / f"{stem}_trace.csv").write_text(trace_csv(trace, timing))
            (out / f"{stem}_epochs.csv").write_text(epoch_csv(trace))
            entry = {"run": name, "seed": seed, "config": cfg.as_dict(),
                     "config_hash": config_hash(spec.experiment, cfg),
                     "status": trace.status, "diagnostic": trace.diagnostic,
                     "trace_csv": f"{stem}_trace.csv", "epochs_csv": f"{stem}_epochs.csv"}
            if timing:
                entry["timing"] = {"start_unix": t0, "end_unix": t1, "seconds": t1 - t0}
            manifest["runs"].append(entry)
            last = trace.epochs[-1] if trace.epochs else None
            lam = trace.column("Lambda_k")
            summary_rows.append([name, cfg.method, seed, trace.status, len(trace.epochs) - 1,
                                 len(trace.iterations), last.full_loss if last else None,
                                 last.full_grad_norm if last else None, trace.flush_count,
                                 float(lam.max()) if lam.size else None])
            if trace.status == "diverged":
                print(f"error: run {stem} diverged: {trace.diagnostic}", file=sys.stderr)
                exit_code = EXIT_DIVERGED
            elif args.verbose:
                print(f"{stem}: {trace.status}, final loss {trace.final_loss:.6g}")

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in summary_rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
        (out / "summary.csv").write_text(buf.getvalue())
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    except OSError as exc:
        print(f"error: writing results failed: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {len(results)} runs to {out}")
    return exit_code


def cmd_verify(args) -> int:
    from . import verify

    sizes = dict(verify.DEFAULT_SIZES)
    if args.quick:
        sizes = {k: max(1, v // 10) for k, v in sizes.items()}
    seed = args.seed if args.seed is not None else 0
    all_ok = True
    for res in verify.run_all(sizes, seed=seed):
        status = "PASS" if res.ok else "FAIL"
        print(f"{status} {res.name:<14} {res.passed}/{res.total} "
              f"worst={res.worst:.3g} ({res.seconds:.1f}s)")
        for info in res.failures:
            print(f"     failing case: {info}")
        all_ok &= res.ok
    print("verify:", "all suites passed" if all_ok else "FAILED")
    return EXIT_OK if all_ok else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="varchen", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--help-config", action="store_true",
                    help="print every spec-file key with type and default, then exit")
    ap.add_argument("--jobs", type=int, default=1, help="parallel runs (default 1)")
    ap.add_argument("--seed", type=int, default=None, help="override the spec's seeds")
    ap.add_argument("--out", default=None, help=f"output directory (default ${ENV_OUT} or ./varchen_out)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command")
    p_run = sub.add_parser("run", help="run an experiment spec")
    p_run.add_argument("spec")
    p_ver = sub.add_parser("verify", help="run the randomized oracle checks")
    p_ver.add_argument("--quick", action="store_true", help="a tenth of the default case counts")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.help_config:
        print(help_config())
        return EXIT_OK
    if args.jobs < 1:
        ap.error("--jobs must be >= 1")
    if args.command == "run":
        return cmd_run(args)
    if args.command == "verify":
        return cmd_verify(args)
    ap.print_help()
    return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
