"""Experiment runners: synthetic XOR convergence and k-fold cross-validation."""
from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from . import dtree
from .baseline import GreedyConfig, greedy_fit
from .data import AttributeSchema, evaluate, kfold, one_hot_encode, replay_stream, xor_stream
from .mcts import ExperimentConfig, fit

RESULT_COLUMNS = ("algo", "variant", "dataset", "encoding", "lambda", "seed", "fold", "M", "m",
                  "gamma", "leaves", "splits", "train_acc", "test_acc", "perfect", "elapsed_ms")
DEFAULT_LAMBDAS = (0.1, 0.01, 0.0025, 0.0001)

# The two equivalent minimal trees for "label 1 iff attributes 0 and 1 agree".
XOR_FORMS = tuple(
    (first, ((second, (1, 0)), (second, (0, 1)))) for first, second in ((0, 1), (1, 0))
)


def is_perfect_xor(tree):
    """True when ``tree`` is, up to split order, the 4-leaf tree on attributes 0 and 1."""
    return dtree.canonical_form(tree) in XOR_FORMS


@dataclass
class RunOutput:
    row: dict
    tree: object = None
    trace_csv: str = ""


def _mcts_config(algo, M, m, lam, gamma, seed, budget_secs, max_splits=None):
    return ExperimentConfig(M=M, m=m, lam=lam, gamma=gamma, variant=algo, seed=seed,
                            budget_secs=budget_secs, max_splits=max_splits)


def run_synth_once(algo, q, seed, M=400, m=100, lam=0.05, gamma=0.75, budget_secs=None,
                   greedy=None):
    stream = xor_stream(q, seed)
    start = time.perf_counter()
    trace = ""
    if algo == "greedy":
        tree = greedy_fit(stream, stream.schema, greedy or GreedyConfig(), M * m)
        variant = ""
    else:
        result = fit(stream, stream.schema, _mcts_config(algo, M, m, lam, gamma, seed, budget_secs))
        tree, variant, trace = result.tree, algo, result.trace_csv()
    elapsed = int((time.perf_counter() - start) * 1000)
    row = {
        "algo": algo, "variant": variant, "dataset": f"xor_q{q}", "encoding": "none",
        "lambda": lam if algo != "greedy" else "", "seed": seed, "fold": "", "M": M, "m": m,
        "gamma": gamma if algo != "greedy" else "", "leaves": len(tree.leaves),
        "splits": tree.splits, "train_acc": "", "test_acc": "",
        "perfect": int(is_perfect_xor(tree)), "elapsed_ms": elapsed,
    }
    return RunOutput(row, tree, trace)


def _synth_job(args):
    return run_synth_once(*args[0], **args[1])


def run_synth(algo, q, reps, base_seed=0, jobs=1, **kwargs):
    """One run per seed ``base_seed + r``; outputs come back in seed order."""
    if q < 2:
        raise ValueError("q must be >= 2")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    tasks = [((algo, q, base_seed + r), kwargs) for r in range(reps)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_synth_job, tasks))
    return [_synth_job(t) for t in tasks]


def run_fold(algo, train, test, lam, seed, fold, M, m, gamma, budget_secs, dataset_name,
             encoding, greedy=None):
    stream = replay_stream(train, seed)
    start = time.perf_counter()
    trace = ""
    if algo == "greedy":
        tree = greedy_fit(stream, train.schema, greedy or GreedyConfig(), M * m)
    else:
        result = fit(stream, train.schema, _mcts_config(algo, M, m, lam, gamma, seed, budget_secs))
        tree, trace = result.tree, result.trace_csv()
    elapsed = int((time.perf_counter() - start) * 1000)
    tr = evaluate(tree, train, lam or 0.0)
    te = evaluate(tree, test, lam or 0.0) if len(test) else {"accuracy": ""}
    row = {
        "algo": algo, "variant": "" if algo == "greedy" else algo, "dataset": dataset_name,
        "encoding": encoding, "lambda": "" if algo == "greedy" else lam, "seed": seed,
        "fold": fold, "M": M, "m": m, "gamma": "" if algo == "greedy" else gamma,
        "leaves": tr["leaves"], "splits": tr["splits"], "train_acc": tr["accuracy"],
        "test_acc": te["accuracy"], "perfect": "", "elapsed_ms": elapsed,
    }
    return RunOutput(row, tree, trace)


def _fold_job(args):
    return run_fold(**args)


def run_crossval(dataset, algo, dataset_name="dataset", encoding="none", lambdas=DEFAULT_LAMBDAS,
                 k=5, reps=1, base_seed=0, M=1000, m=100, gamma=0.75, budget_secs=600.0, jobs=1,
                 greedy=None):
    """Rows ordered by (repetition, lambda, fold)."""
    encoded = one_hot_encode(dataset, encoding)
    grid = [None] if algo == "greedy" else list(lambdas)
    tasks = []
    for r in range(reps):
        seed = base_seed + r
        for lam in grid:
            for f, (train, test) in enumerate(kfold(encoded, k, seed)):
                tasks.append(dict(algo=algo, train=train, test=test, lam=lam, seed=seed, fold=f,
                                  M=M, m=m, gamma=gamma, budget_secs=budget_secs,
                                  dataset_name=dataset_name, encoding=encoding, greedy=greedy))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_fold_job, tasks))
    return [_fold_job(t) for t in tasks]


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for row in rows:
            w.writerow([_cell(row[c]) for c in RESULT_COLUMNS])


def run_id(row):
    parts = [row["algo"], row["dataset"], f"s{row['seed']}"]
    if row["lambda"] != "":
        parts.insert(2, f"lam{row['lambda']}")
    if row["fold"] != "":
        parts.append(f"f{row['fold']}")
    return "_".join(str(p) for p in parts)


def save_run(output, out_dir):
    """Write trace, tree text, DOT and JSON files for one run."""
    rid = run_id(output.row)
    tree = output.tree
    if output.trace_csv:
        with open(os.path.join(out_dir, f"trace_{rid}.csv"), "w", encoding="utf-8") as fh:
            fh.write(output.trace_csv)
    with open(os.path.join(out_dir, f"tree_{rid}.txt"), "w", encoding="utf-8") as fh:
        fh.write(dtree.to_text(tree))
    with open(os.path.join(out_dir, f"tree_{rid}.dot"), "w", encoding="utf-8") as fh:
        fh.write(dtree.to_dot(tree))
    save_tree_json(tree, os.path.join(out_dir, f"tree_{rid}.json"))
    return rid


def save_tree_json(tree, path):
    schema = tree.store.schema
    payload = dtree.to_dict(tree)
    payload["schema"] = {"names": list(schema.names), "cardinalities": list(schema.cardinalities),
                         "num_classes": schema.num_classes}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_tree_json(path):
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    s = payload["schema"]
    schema = AttributeSchema(s["names"], s["cardinalities"], s["num_classes"])
    return dtree.from_dict(payload, schema)


def summarize_synth(rows):
    perfect = sum(int(r["perfect"]) for r in rows)
    return {"runs": len(rows), "perfect": perfect, "frequency": perfect / len(rows) if rows else 0.0}
