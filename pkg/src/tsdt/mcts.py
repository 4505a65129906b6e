"""Monte Carlo Tree Search over decision trees with Thompson Sampling.

Each search node holds a decision tree. Its children are the trees
obtained by splitting one leaf on one attribute, plus the terminal action
that stops and keeps the tree as is. Every iteration:

1. descends from the root by Thompson draws (only through nodes whose
   leaves have all been expanded; elsewhere the terminal action fires),
2. streams ``m`` samples through the tree at the end of the episode,
3. expands that node along its untreated leaf with the highest Gini
   impurity,
4. recomputes the posteriors of every node on the path, bottom up.
"""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .dtree import NodeStore, TreeState, available_splits, gini, observe_batch, split
from .posterior import fast_max, fold_max, leaf_value_posterior, penalize, thompson_select

VARIANTS = ("tsdt", "fast")
TRACE_COLUMNS = ("iteration", "root_mu", "root_var", "episode_depth", "samples_total", "elapsed_ms")


@dataclass
class ExperimentConfig:
    M: int = 400
    m: int = 100
    lam: float = 0.05
    gamma: float = 0.75
    variant: str = "fast"
    seed: int = 0
    max_splits: int | None = None
    budget_secs: float | None = None

    def __post_init__(self):
        if self.M < 1 or self.m < 1:
            raise ValueError("M and m must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")


class SearchNode:
    __slots__ = ("state", "posterior", "terminal_posterior", "split_children",
                 "untreated", "fully_expanded", "visits", "parent")

    def __init__(self, state, posterior, parent=None):
        self.state = state
        self.posterior = posterior
        self.terminal_posterior = posterior
        self.split_children = []
        self.untreated = set(state.leaves)
        self.fully_expanded = False
        self.visits = 0
        self.parent = parent

    def child_posteriors(self):
        """``(Gaussian, is_terminal)`` list with the terminal action first."""
        out = [(self.terminal_posterior, True)]
        out.extend((child.posterior, False) for _, _, child in self.split_children)
        return out

    def __repr__(self):
        return (f"SearchNode(splits={self.state.splits}, mu={self.posterior.mu:.4f}, "
                f"var={self.posterior.var:.3g}, children={len(self.split_children)})")


class SearchTree:
    def __init__(self, schema, gamma=0.75):
        self.schema = schema
        self.store = NodeStore(schema)
        root_state = TreeState.root_only(self.store)
        self.root = SearchNode(root_state, leaf_value_posterior(self.store, root_state, gamma))
        self.nodes = [self.root]
        self.t = 0


@dataclass
class FitResult:
    tree: TreeState
    search: SearchTree
    trace: list = field(default_factory=list)
    iterations: int = 0
    samples: int = 0
    wall_time: float = 0.0
    extraction_path: list = field(default_factory=list)

    def trace_csv(self, include_timing=True):
        buf = io.StringIO()
        cols = TRACE_COLUMNS if include_timing else TRACE_COLUMNS[:-1]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in self.trace:
            w.writerow([_fmt(row[c]) for c in cols])
        return buf.getvalue()


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


def select_path(search, lam, rng):
    """Episode from the root to the node whose terminal action fires."""
    node = search.root
    path = [node]
    while node.fully_expanded and node.split_children:
        idx = thompson_select(node.child_posteriors(), lam, rng)
        if idx == 0:
            break
        node = node.split_children[idx - 1][2]
        path.append(node)
    return path


def simulate(search, node, stream, m, gamma):
    """Stream ``m`` samples through ``node.state`` and refresh its terminal posterior."""
    X, y = stream.take(m)
    observe_batch(search.store, node.state, X, y)
    node.visits += 1
    node.terminal_posterior = leaf_value_posterior(search.store, node.state, gamma)
    return node.terminal_posterior


def _priority(store, key):
    stats = store[key]
    return (-gini(stats.class_counts), -stats.n, key)


def expand(search, node, gamma, max_splits=None):
    """Create the split children of one untreated leaf of ``node``.

    The leaf with the highest Gini impurity goes first (ties: more samples,
    then the smaller key). Returns the children created.
    """
    if node.fully_expanded:
        raise ValueError("node is already fully expanded")
    store = search.store
    if max_splits is not None and node.state.splits >= max_splits:
        node.untreated.clear()
        node.fully_expanded = True
        return []
    leaf = min(node.untreated, key=lambda k: _priority(store, k))
    created = []
    for attribute in available_splits(node.state, leaf, search.schema):
        state = split(store, node.state, leaf, attribute)
        child = SearchNode(state, leaf_value_posterior(store, state, gamma), parent=node)
        node.split_children.append((leaf, attribute, child))
        search.nodes.append(child)
        created.append(child)
    node.untreated.discard(leaf)
    if not node.untreated:
        node.fully_expanded = True
    return created


def combine(node, variant, lam):
    children = node.child_posteriors()
    if variant == "fast":
        return fast_max(children, lam)
    return fold_max([penalize(g, t, lam) for g, t in children])


def backpropagate(search, path, variant, lam):
    if not path:
        raise ValueError("empty path")
    for node in reversed(path):
        node.posterior = combine(node, variant, lam)
    return search.root.posterior


def extract_greedy(search, lam):
    """Follow the largest penalised posterior mean from the root.

    Returns the selected state and the list of visited search nodes.
    """
    node = search.root
    path = [node]
    while node.split_children:
        best_child = None
        best = node.terminal_posterior.mu
        for _, _, child in node.split_children:
            score = child.posterior.mu - lam
            if score > best:
                best, best_child = score, child
        if best_child is None:
            break
        node = best_child
        path.append(node)
    return node.state, path


def fit(stream, schema, config, on_iteration=None):
    """Run the search for ``config.M`` iterations and extract the greedy tree."""
    rng = np.random.default_rng(config.seed)
    search = SearchTree(schema, config.gamma)
    result = FitResult(tree=search.root.state, search=search)
    start = time.perf_counter()
    for t in range(1, config.M + 1):
        if config.budget_secs is not None and time.perf_counter() - start >= config.budget_secs:
            break
        path = select_path(search, config.lam, rng)
        node = path[-1]
        simulate(search, node, stream, config.m, config.gamma)
        if not node.fully_expanded:
            expand(search, node, config.gamma, config.max_splits)
        backpropagate(search, path, config.variant, config.lam)
        search.t = t
        result.iterations = t
        result.samples += config.m
        root = search.root.posterior
        result.trace.append({
            "iteration": t,
            "root_mu": root.mu,
            "root_var": root.var,
            "episode_depth": len(path) - 1,
            "samples_total": result.samples,
            "elapsed_ms": int((time.perf_counter() - start) * 1000),
        })
        if on_iteration is not None:
            on_iteration(search, t)
    result.tree, result.extraction_path = extract_greedy(search, config.lam)
    result.wall_time = time.perf_counter() - start
    return result
