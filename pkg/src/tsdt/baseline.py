"""Greedy Hoeffding-bound tree learner used as a contrast baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dtree import NodeStore, TreeState, assign_leaves, available_splits, gini, observe_batch, split


@dataclass
class GreedyConfig:
    delta: float = 1e-7
    grace_period: int = 200
    tie_threshold: float = 0.05
    max_depth: int | None = None
    gain: str = "gini_gain"

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.grace_period < 1:
            raise ValueError("grace_period must be >= 1")
        if self.tie_threshold < 0:
            raise ValueError("tie_threshold must be >= 0")
        if self.gain != "gini_gain":
            raise ValueError("only gini_gain is supported")


def hoeffding_bound(value_range, delta, n):
    return math.sqrt(value_range * value_range * math.log(1.0 / delta) / (2.0 * n))


def gini_gain(stats, attribute):
    """Drop in Gini impurity from splitting the region on ``attribute``."""
    rows = stats.grid_rows(attribute)
    totals = rows.sum(axis=1)
    n = totals.sum()
    if n == 0:
        return 0.0
    weighted = sum((t / n) * gini(r) for r, t in zip(rows, totals) if t > 0)
    return gini(rows.sum(axis=0)) - weighted


def greedy_fit(stream, schema, config, total_samples):
    """Single-pass VFDT-style learner.

    Every ``grace_period`` samples reaching a leaf, the two best Gini gains
    are compared; the leaf splits on the best attribute when the gap beats
    the Hoeffding radius or the radius itself falls under the tie threshold
    (ties then go to the lowest attribute index). Pure leaves never split.
    """
    store = NodeStore(schema)
    tree = TreeState.root_only(store)
    since_check = {}
    X, y = stream.take(total_samples)
    pos = 0
    while pos < len(y):
        # Some leaf must complete a grace period within leaves * grace samples.
        window = min(len(y) - pos, len(tree.leaves) * config.grace_period)
        keys, leaf_of = assign_leaves(tree, X[pos:pos + window])
        stop, trigger = window, None
        for j, key in enumerate(keys):
            hits = np.nonzero(leaf_of == j)[0]
            need = config.grace_period - since_check.get(key, 0)
            if len(hits) >= need and hits[need - 1] < stop:
                stop, trigger = int(hits[need - 1]) + 1, key
        observe_batch(store, tree, X[pos:pos + stop], y[pos:pos + stop])
        counts = np.bincount(leaf_of[:stop], minlength=len(keys))
        for j, key in enumerate(keys):
            since_check[key] = since_check.get(key, 0) + int(counts[j])
        pos += stop
        if trigger is not None:
            since_check[trigger] = 0
            tree = _try_split(store, tree, trigger, schema, config)
    return tree


def _try_split(store, tree, leaf, schema, config):
    stats = store[leaf]
    if np.count_nonzero(stats.class_counts) <= 1:
        return tree
    if config.max_depth is not None and len(leaf) >= config.max_depth:
        return tree
    candidates = available_splits(tree, leaf, schema)
    if not candidates:
        return tree
    gains = sorted(((gini_gain(stats, a), -a) for a in candidates), reverse=True)
    best_gain, best_attr = gains[0][0], -gains[0][1]
    second = gains[1][0] if len(gains) > 1 else 0.0
    eps = hoeffding_bound(1.0, config.delta, int(stats.grid[0].sum()))
    if best_gain - second >= eps or eps < config.tie_threshold:
        return split(store, tree, leaf, best_attr)
    return tree
