"""Command-line runner.

    python -m tsdt synth --algo fast --q 5 --reps 20 --out results/
    python -m tsdt crossval --algo fast --dataset monk1 --encoding drop_last --lambda 0.01
    python -m tsdt fit --algo fast --dataset data/monk1.csv --label-col class
    python -m tsdt export-tree --input results/tree_fast_xor_q5_lam0.05_s0.json

A JSON config file (``--config``) may hold any flag, keyed by the flag name
without dashes; flags given on the command line win over the file.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

from . import dtree
from .baseline import GreedyConfig
from .data import ENCODINGS, monk1_full, monk1_sample, one_hot_encode, parse_csv
from .experiments import (
    DEFAULT_LAMBDAS,
    load_tree_json,
    run_crossval,
    run_fold,
    run_synth,
    save_run,
    summarize_synth,
    write_results,
)

COMMANDS = ("synth", "fit", "crossval", "export-tree")
ALGOS = ("tsdt", "fast", "greedy")
BUILTIN_DATASETS = {"monk1": monk1_full, "monk1-train": monk1_sample}


class ConfigError(ValueError):
    pass


@dataclass
class RunSpec:
    command: str
    algo: str | None = None
    variant: str | None = None
    q: int | None = None
    reps: int = 1
    M: int | None = None
    m: int = 100
    lam: list | None = None
    gamma: float = 0.75
    dataset: str | None = None
    label_col: str = "-1"
    encoding: str = "none"
    k: int = 5
    seed: int = 0
    budget_secs: float | None = None
    out: str = "results"
    input: str | None = None
    jobs: int = 1
    delta: float = 1e-7
    grace_period: int = 200
    tau: float = 0.05
    max_depth: int | None = None
    extra: dict = field(default_factory=dict, repr=False)

    def greedy_config(self):
        return GreedyConfig(delta=self.delta, grace_period=self.grace_period,
                            tie_threshold=self.tau, max_depth=self.max_depth)


# key -> (RunSpec attribute, type)
_KEYS = {
    "command": ("command", str), "algo": ("algo", str), "variant": ("variant", str),
    "q": ("q", int), "reps": ("reps", int), "M": ("M", int), "m": ("m", int),
    "lambda": ("lam", "floats"), "gamma": ("gamma", float), "dataset": ("dataset", str),
    "label-col": ("label_col", str), "encoding": ("encoding", str), "k": ("k", int),
    "seed": ("seed", int), "budget-secs": ("budget_secs", float), "out": ("out", str),
    "input": ("input", str), "jobs": ("jobs", int), "delta": ("delta", float),
    "grace-period": ("grace_period", int), "tau": ("tau", float), "max-depth": ("max_depth", int),
}


def _coerce(key, value, kind):
    if kind == "floats":
        if isinstance(value, str):
            value = [v for v in value.replace(",", " ").split() if v]
        if not isinstance(value, (list, tuple)):
            value = [value]
        out = []
        for v in value:
            if isinstance(v, bool):
                raise ConfigError(f"{key}: expected number, got {v!r}")
            try:
                out.append(float(v))
            except (TypeError, ValueError):
                raise ConfigError(f"{key}: expected number, got {v!r}") from None
        return out
    if kind is int:
        if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
            raise ConfigError(f"{key}: expected integer, got {value!r}")
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected integer, got {value!r}") from None
    if kind is float:
        if isinstance(value, bool):
            raise ConfigError(f"{key}: expected number, got {value!r}")
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected number, got {value!r}") from None
    if not isinstance(value, (str, int, float)) or isinstance(value, bool):
        raise ConfigError(f"{key}: expected string, got {value!r}")
    return str(value)


def _normalise(key):
    return key.lstrip("-").replace("_", "-") if key not in ("M", "m") else key


def load_config(path=None, flags=None):
    """Merge a JSON config file and command-line flags into a validated :class:`RunSpec`.

    ``flags`` maps flag names to values; ``None`` values count as unset.
    """
    merged = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                payload = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(payload, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in payload.items():
            merged[_normalise(key)] = value
    for key, value in (flags or {}).items():
        if value is not None:
            merged[_normalise(key)] = value
    unknown = sorted(k for k in merged if k not in _KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    values = {}
    for key, value in merged.items():
        attr, kind = _KEYS[key]
        values[attr] = _coerce(key, value, kind)
    if "command" not in values:
        raise ConfigError("missing required field: command")
    spec = RunSpec(**values)
    _validate(spec)
    return spec


def _validate(spec):
    if spec.command not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, got {spec.command!r}")
    if spec.variant is not None and spec.variant not in ("tsdt", "fast"):
        raise ConfigError(f"variant must be tsdt or fast, got {spec.variant!r}")
    if spec.algo is None and spec.variant is not None:
        spec.algo = spec.variant
    if spec.command == "export-tree":
        if not spec.input:
            raise ConfigError("export-tree requires input")
        return
    if spec.algo is None:
        raise ConfigError(f"{spec.command} requires algo")
    if spec.algo not in ALGOS:
        raise ConfigError(f"algo must be one of {ALGOS}, got {spec.algo!r}")
    if spec.variant is not None and spec.algo != "greedy" and spec.variant != spec.algo:
        raise ConfigError(f"variant {spec.variant!r} conflicts with algo {spec.algo!r}")
    if spec.encoding not in ENCODINGS:
        raise ConfigError(f"encoding must be one of {ENCODINGS}")
    if spec.reps < 1:
        raise ConfigError("reps must be >= 1")
    if spec.m < 1 or (spec.M is not None and spec.M < 1):
        raise ConfigError("M and m must be >= 1")
    if spec.command == "synth":
        if spec.q is None:
            raise ConfigError("synth requires q")
        if spec.q < 2:
            raise ConfigError(f"q must be >= 2, got {spec.q}")
    if spec.command == "fit" and spec.dataset is None and spec.q is None:
        raise ConfigError("fit requires dataset or q")
    if spec.command == "crossval":
        if spec.dataset is None:
            raise ConfigError("crossval requires dataset")
        if spec.k < 2:
            raise ConfigError("k must be >= 2")


def load_dataset(spec):
    if spec.dataset in BUILTIN_DATASETS:
        return BUILTIN_DATASETS[spec.dataset]()
    label = spec.label_col
    try:
        label = int(label)
    except ValueError:
        pass
    return parse_csv(spec.dataset, label)


def _dataset_name(spec):
    return os.path.splitext(os.path.basename(spec.dataset))[0]


def cmd_synth(spec):
    M = spec.M or 400
    lam = spec.lam[0] if spec.lam else 0.05
    outputs = run_synth(spec.algo, spec.q, spec.reps, base_seed=spec.seed, jobs=spec.jobs,
                        M=M, m=spec.m, lam=lam, gamma=spec.gamma, budget_secs=spec.budget_secs,
                        greedy=spec.greedy_config())
    os.makedirs(spec.out, exist_ok=True)
    rows = [o.row for o in outputs]
    write_results(rows, os.path.join(spec.out, "results.csv"))
    for o in outputs:
        save_run(o, spec.out)
    summary = summarize_synth(rows)
    line = (f"algo={spec.algo} q={spec.q} runs={summary['runs']} perfect={summary['perfect']} "
            f"frequency={summary['frequency']:.3f}")
    with open(os.path.join(spec.out, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(line + "\n")
    print(line)
    return summary


def cmd_crossval(spec):
    dataset = load_dataset(spec)
    outputs = run_crossval(dataset, spec.algo, dataset_name=_dataset_name(spec),
                           encoding=spec.encoding, lambdas=spec.lam or DEFAULT_LAMBDAS, k=spec.k,
                           reps=spec.reps, base_seed=spec.seed, M=spec.M or 1000, m=spec.m,
                           gamma=spec.gamma,
                           budget_secs=600.0 if spec.budget_secs is None else spec.budget_secs,
                           jobs=spec.jobs, greedy=spec.greedy_config())
    os.makedirs(spec.out, exist_ok=True)
    rows = [o.row for o in outputs]
    write_results(rows, os.path.join(spec.out, "results.csv"))
    for o in outputs:
        save_run(o, spec.out)
    for r in rows:
        print(f"lambda={r['lambda']} fold={r['fold']} leaves={r['leaves']} "
              f"train_acc={r['train_acc']:.4f} test_acc={r['test_acc']:.4f}")
    return rows


def cmd_fit(spec):
    lam = spec.lam[0] if spec.lam else 0.05
    if spec.dataset is None:
        outputs = run_synth(spec.algo, spec.q, 1, base_seed=spec.seed, M=spec.M or 400, m=spec.m,
                            lam=lam, gamma=spec.gamma, budget_secs=spec.budget_secs,
                            greedy=spec.greedy_config())
        output = outputs[0]
    else:
        data = one_hot_encode(load_dataset(spec), spec.encoding)
        output = run_fold(spec.algo, data, data.subset([]), lam, spec.seed, "", spec.M or 1000,
                          spec.m, spec.gamma, spec.budget_secs, _dataset_name(spec),
                          spec.encoding, greedy=spec.greedy_config())
    os.makedirs(spec.out, exist_ok=True)
    write_results([output.row], os.path.join(spec.out, "results.csv"))
    rid = save_run(output, spec.out)
    print(dtree.to_text(output.tree), end="")
    print(f"run={rid} leaves={output.row['leaves']} splits={output.row['splits']}")
    return output


def cmd_export_tree(spec):
    if not os.path.exists(spec.input):
        raise FileNotFoundError(f"tree file not found: {spec.input}")
    tree = load_tree_json(spec.input)
    os.makedirs(spec.out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(spec.input))[0]
    text_path = os.path.join(spec.out, stem + ".txt")
    dot_path = os.path.join(spec.out, stem + ".dot")
    with open(text_path, "w", encoding="utf-8") as fh:
        fh.write(dtree.to_text(tree))
    with open(dot_path, "w", encoding="utf-8") as fh:
        fh.write(dtree.to_dot(tree))
    print(f"wrote {text_path} {dot_path}")
    return text_path, dot_path


HANDLERS = {"synth": cmd_synth, "fit": cmd_fit, "crossval": cmd_crossval,
            "export-tree": cmd_export_tree}


def build_parser():
    parser = argparse.ArgumentParser(prog="tsdt", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON file with default flag values")
    parser.add_argument("--algo", choices=ALGOS)
    parser.add_argument("--variant", choices=("tsdt", "fast"))
    parser.add_argument("--q", type=int)
    parser.add_argument("--reps", type=int)
    parser.add_argument("--M", type=int, dest="M")
    parser.add_argument("--m", type=int, dest="m")
    parser.add_argument("--lambda", dest="lam", nargs="+", type=float,
                        help="penalty per split; several values form a grid for crossval")
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--dataset", help="CSV path or built-in name (monk1, monk1-train)")
    parser.add_argument("--label-col")
    parser.add_argument("--encoding", choices=ENCODINGS)
    parser.add_argument("--k", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--budget-secs", type=float)
    parser.add_argument("--out")
    parser.add_argument("--input", help="tree JSON for export-tree")
    parser.add_argument("--jobs", type=int)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--grace-period", type=int)
    parser.add_argument("--tau", type=float)
    parser.add_argument("--max-depth", type=int)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("config",)}
    flags["lambda"] = flags.pop("lam")
    try:
        spec = load_config(args.config, flags)
        HANDLERS[spec.command](spec)
    except (ConfigError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"tsdt: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
