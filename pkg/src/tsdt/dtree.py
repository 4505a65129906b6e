"""Decision trees over a shared store of region statistics.

A region of the input space is identified by its canonical key: the sorted
tuple of ``(attribute, value)`` constraints defining it. Every tree built
during a search points into one :class:`NodeStore`, so a region reached by
different split orders, or appearing in many trees, owns a single
:class:`NodeStats` record.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ROOT = ()


def canonical_key(constraints):
    """Sort ``(attribute, value)`` pairs by attribute; reject repeated attributes."""
    key = tuple(sorted((int(a), int(v)) for a, v in constraints))
    attrs = [a for a, _ in key]
    if len(set(attrs)) != len(attrs):
        raise ValueError(f"duplicate attribute in constraints {list(constraints)}")
    return key


def extend_key(key, attribute, value):
    return canonical_key(key + ((attribute, value),))


def majority_class(class_counts):
    """Index of the largest count, lowest index on ties."""
    counts = np.asarray(class_counts)
    if counts.sum() <= 0:
        raise ValueError("majority of empty counts is undefined")
    return int(np.argmax(counts))


def gini(class_counts):
    counts = np.asarray(class_counts, dtype=float)
    n = counts.sum()
    if n <= 0:
        return 0.0
    p = counts / n
    return float(1.0 - np.dot(p, p))


class NodeStats:
    """Sufficient statistics of one region.

    Every sample routed through the region updates it, whichever tree did
    the routing and whether the region is a leaf or an internal node there.
    ``correct`` counts samples that the region's majority class, as it stood
    before the sample arrived, predicted correctly. ``grid[u, j, k]`` counts
    samples of class ``k`` with ``attrs[u] == j`` and ``grid_correct[u, j]``
    is the matching prefix-prediction hit count of that sub-region.
    """

    __slots__ = ("key", "n", "class_counts", "correct", "attrs", "grid",
                 "grid_correct", "_ar")

    def __init__(self, key, attrs, max_cardinality, num_classes):
        self.key = key
        self.n = 0
        self.class_counts = np.zeros(num_classes, dtype=np.int64)
        self.correct = 0
        self.attrs = np.asarray(attrs, dtype=np.int64)
        self.grid = np.zeros((len(self.attrs), max_cardinality, num_classes), dtype=np.int64)
        self.grid_correct = np.zeros((len(self.attrs), max_cardinality), dtype=np.int64)
        self._ar = np.arange(len(self.attrs))

    def grid_slot(self, attribute):
        hits = np.nonzero(self.attrs == attribute)[0]
        if len(hits) == 0:
            raise KeyError(f"attribute {attribute} is not tracked at region {self.key}")
        return int(hits[0])

    def grid_rows(self, attribute):
        """Class counts per value of ``attribute`` (shape cardinality_max x K)."""
        return self.grid[self.grid_slot(attribute)]

    def prediction(self):
        return majority_class(self.class_counts) if self.n > 0 else None

    def observe(self, x, label):
        """Record one sample falling in this region.

        Prefix-prediction hits are scored against the counts as they were
        before this sample; the counts are updated afterwards.
        """
        if self.n > 0 and int(np.argmax(self.class_counts)) == label:
            self.correct += 1
        if len(self.attrs):
            vals = x[self.attrs]
            rows = self.grid[self._ar, vals]
            hit = (rows.sum(axis=1) > 0) & (rows.argmax(axis=1) == label)
            self.grid_correct[self._ar, vals] += hit
            self.grid[self._ar, vals, label] += 1
        self.n += 1
        self.class_counts[label] += 1

    def observe_many(self, X, y):
        """Same as calling :meth:`observe` on each row of ``X`` in order."""
        n = len(y)
        if n == 0:
            return
        K = len(self.class_counts)
        onehot = np.zeros((n, K), dtype=np.int64)
        onehot[np.arange(n), y] = 1
        before = self.class_counts + np.cumsum(onehot, axis=0) - onehot
        seen = self.n + np.arange(n)
        self.correct += int(((seen > 0) & (before.argmax(axis=1) == y)).sum())
        self.class_counts += onehot.sum(axis=0)
        self.n += n

        U = len(self.attrs)
        if U == 0:
            return
        C = self.grid.shape[1]
        vals = X[:, self.attrs]                              # (n, U)
        cells = np.zeros((n, U, C, K), dtype=np.int64)
        rows = np.arange(n)[:, None]
        cells[rows, self._ar[None, :], vals, y[:, None]] = 1
        prefix = np.cumsum(cells, axis=0) - cells
        prior = self.grid[self._ar[None, :], vals]           # (n, U, K)
        local = prefix[rows, self._ar[None, :], vals]        # (n, U, K)
        counts = prior + local
        hit = (counts.sum(axis=2) > 0) & (counts.argmax(axis=2) == y[:, None])
        np.add.at(self.grid_correct, (np.broadcast_to(self._ar, vals.shape), vals), hit)
        self.grid += cells.sum(axis=0)


class NodeStore:
    """Map from canonical region key to the region's statistics."""

    def __init__(self, schema):
        self.schema = schema
        self._stats = {}

    def __contains__(self, key):
        return key in self._stats

    def __getitem__(self, key):
        return self._stats[key]

    def __len__(self):
        return len(self._stats)

    def keys(self):
        return self._stats.keys()

    def create(self, key):
        if key in self._stats:
            return self._stats[key]
        used = {a for a, _ in key}
        attrs = [a for a in range(self.schema.q) if a not in used and self.schema.splittable(a)]
        stats = NodeStats(key, attrs, self.schema.max_cardinality, self.schema.num_classes)
        self._stats[key] = stats
        return stats


@dataclass(frozen=True)
class Leaf:
    key: tuple


@dataclass(frozen=True)
class Split:
    key: tuple
    attribute: int
    children: tuple


class TreeState:
    """Immutable tree structure whose regions live in ``store``."""

    __slots__ = ("root", "splits", "store", "_leaves")

    def __init__(self, root, splits, store):
        self.root = root
        self.splits = splits
        self.store = store
        self._leaves = None

    @classmethod
    def root_only(cls, store):
        store.create(ROOT)
        return cls(Leaf(ROOT), 0, store)

    @property
    def leaves(self):
        if self._leaves is None:
            out = []
            stack = [self.root]
            while stack:
                node = stack.pop()
                if isinstance(node, Leaf):
                    out.append(node.key)
                else:
                    stack.extend(reversed(node.children))
            self._leaves = tuple(out)
        return self._leaves

    def structure(self):
        """Nested ``(attribute, [children])`` form; leaves are their keys."""
        def walk(node):
            if isinstance(node, Leaf):
                return node.key
            return (node.attribute, tuple(walk(c) for c in node.children))
        return walk(self.root)

    def __eq__(self, other):
        return isinstance(other, TreeState) and self.root == other.root

    def __hash__(self):
        return hash(self.root)

    def __repr__(self):
        return f"TreeState(splits={self.splits}, leaves={len(self.leaves)})"


def route_key(tree, values):
    node = tree.root
    while isinstance(node, Split):
        node = node.children[values[node.attribute]]
    return node.key


def route(tree, instance):
    """Key of the leaf containing ``instance``."""
    return route_key(tree, instance.values)


def _path(tree, values):
    node = tree.root
    path = [node.key]
    while isinstance(node, Split):
        node = node.children[values[node.attribute]]
        path.append(node.key)
    return path


def observe_xy(store, tree, x, label):
    for key in _path(tree, x):
        if key not in store:
            raise KeyError(f"region {key} missing from store")
        store[key].observe(x, label)


def observe(store, tree, instance):
    observe_xy(store, tree, instance.values, instance.label)
    return store


def observe_batch(store, tree, X, y):
    """Route a block of samples through ``tree`` and update every region on the way."""
    X = np.asarray(X, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    stack = [(tree.root, np.arange(len(y)))]
    while stack:
        node, idx = stack.pop()
        if len(idx) == 0:
            continue
        if node.key not in store:
            raise KeyError(f"region {node.key} missing from store")
        store[node.key].observe_many(X[idx], y[idx])
        if isinstance(node, Split):
            col = X[idx, node.attribute]
            for v, child in enumerate(node.children):
                stack.append((child, idx[col == v]))
    return store


def assign_leaves(tree, X):
    """Leaf keys of ``tree`` and, per row of ``X``, the index of its leaf in that list."""
    X = np.asarray(X, dtype=np.int64)
    keys = []
    out = np.empty(len(X), dtype=np.int64)
    stack = [(tree.root, np.arange(len(X)))]
    while stack:
        node, idx = stack.pop()
        if isinstance(node, Leaf):
            out[idx] = len(keys)
            keys.append(node.key)
            continue
        col = X[idx, node.attribute]
        for v, child in enumerate(node.children):
            stack.append((child, idx[col == v]))
    return keys, out


def leaf_probabilities(store, tree):
    """Chain-rule estimate of P[X in leaf] for every leaf of ``tree``.

    Each factor is the share of the node among its siblings; siblings with
    no samples at all get a uniform share.
    """
    out = {}
    stack = [(tree.root, 1.0)]
    while stack:
        node, p = stack.pop()
        if isinstance(node, Leaf):
            out[node.key] = p
            continue
        counts = [store[c.key].n if c.key in store else 0 for c in node.children]
        total = sum(counts)
        width = len(node.children)
        for child, cnt in zip(node.children, counts):
            stack.append((child, p * (cnt / total if total > 0 else 1.0 / width)))
    return out


def p_hat(store, tree, leaf):
    probs = leaf_probabilities(store, tree)
    if leaf not in probs:
        raise KeyError(f"{leaf} is not a leaf of this tree")
    return probs[leaf]


def available_splits(tree, leaf, schema):
    used = {a for a, _ in leaf}
    return [a for a in range(schema.q) if a not in used and schema.splittable(a)]


def split(store, tree, leaf, attribute):
    """Return a new tree in which ``leaf`` is split on ``attribute``.

    Child regions missing from the store are seeded from the leaf's grid:
    class counts and prefix hits of the matching sub-region, with empty
    grids of their own. Child regions already in the store are shared as is.
    """
    schema = store.schema
    if attribute not in available_splits(tree, leaf, schema):
        raise ValueError(f"attribute {attribute} cannot split leaf {leaf}")
    parent = store[leaf]
    slot = parent.grid_slot(attribute)
    children = []
    for v in range(schema.cardinalities[attribute]):
        ckey = extend_key(leaf, attribute, v)
        if ckey not in store:
            stats = store.create(ckey)
            counts = parent.grid[slot, v]
            stats.class_counts[:] = counts
            stats.n = int(counts.sum())
            stats.correct = int(parent.grid_correct[slot, v])
        children.append(Leaf(ckey))
    replacement = Split(leaf, attribute, tuple(children))
    return TreeState(_replace(tree.root, leaf, replacement), tree.splits + 1, store)


def _replace(node, leaf, replacement):
    if isinstance(node, Leaf):
        if node.key != leaf:
            raise ValueError(f"leaf {leaf} not in tree")
        return replacement
    value = dict(leaf)[node.attribute]
    kids = list(node.children)
    kids[value] = _replace(kids[value], leaf, replacement)
    return Split(node.key, node.attribute, tuple(kids))


def build_tree(store, spec, key=ROOT):
    """Build a tree from a nested ``(attribute, [subspecs])`` spec; ``None`` is a leaf.

    Regions are created empty when absent. Handy for tests and for loading
    saved trees.
    """
    store.create(key)
    if spec is None:
        return TreeState(Leaf(key), 0, store)

    def walk(sub, k):
        store.create(k)
        if sub is None:
            return Leaf(k), 0
        attribute, kids = sub
        nodes, total = [], 1
        for v, child in enumerate(kids):
            node, s = walk(child, extend_key(k, attribute, v))
            nodes.append(node)
            total += s
        return Split(k, attribute, tuple(nodes)), total

    root, splits = walk(spec, key)
    return TreeState(root, splits, store)


def _fallback(tree):
    root = tree.store[ROOT] if ROOT in tree.store else None
    return majority_class(root.class_counts) if root is not None and root.n else 0


def predict_key(tree, key, fallback):
    stats = tree.store[key] if key in tree.store else None
    if stats is None or stats.n == 0:
        return fallback
    return majority_class(stats.class_counts)


def predict(tree, X, fallback=None):
    """Leaf majority class per row; empty leaves use the root-region majority."""
    if fallback is None:
        fallback = _fallback(tree)
    cache = {}
    out = np.empty(len(X), dtype=np.int64)
    for r, x in enumerate(np.asarray(X).tolist()):
        key = route_key(tree, x)
        if key not in cache:
            cache[key] = predict_key(tree, key, fallback)
        out[r] = cache[key]
    return out


def canonical_form(tree, fallback=None):
    """Split attributes and leaf predictions, ignoring region identity.

    Two trees with equal canonical forms classify every input the same way
    through the same split structure.
    """
    if fallback is None:
        fallback = _fallback(tree)

    def walk(node):
        if isinstance(node, Leaf):
            return predict_key(tree, node.key, fallback)
        return (node.attribute, tuple(walk(c) for c in node.children))
    return walk(tree.root)


def to_text(tree):
    """Indented if/elif/else rendering; one ``predict`` line per leaf."""
    fallback = _fallback(tree)
    lines = []

    def walk(node, depth):
        pad = "  " * depth
        if isinstance(node, Leaf):
            stats = tree.store[node.key] if node.key in tree.store else None
            n = stats.n if stats is not None else 0
            lines.append(f"{pad}predict {predict_key(tree, node.key, fallback)} (n={n})")
            return
        last = len(node.children) - 1
        for v, child in enumerate(node.children):
            if v == 0:
                lines.append(f"{pad}if attr{node.attribute} == {v}:")
            elif v < last:
                lines.append(f"{pad}elif attr{node.attribute} == {v}:")
            else:
                lines.append(f"{pad}else:  # attr{node.attribute} == {v}")
            walk(child, depth + 1)

    walk(tree.root, 0)
    return "\n".join(lines) + "\n"


def to_dot(tree, names=None):
    """Graphviz DOT text: split nodes labelled ``X<i>``, edges by category value."""
    fallback = _fallback(tree)
    lines = ["digraph Tree {", '  node [shape=box, fontname="helvetica"];']
    counter = [0]

    def walk(node):
        nid = counter[0]
        counter[0] += 1
        if isinstance(node, Leaf):
            stats = tree.store[node.key] if node.key in tree.store else None
            n = stats.n if stats is not None else 0
            label = f"predict {predict_key(tree, node.key, fallback)}\\nn={n}"
            lines.append(f'  n{nid} [label="{label}", shape=ellipse];')
            return nid
        lines.append(f'  n{nid} [label="X{node.attribute}"];')
        for v, child in enumerate(node.children):
            cid = walk(child)
            lines.append(f'  n{nid} -> n{cid} [label="{v}"];')
        return nid

    walk(tree.root)
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_dict(tree):
    """JSON-ready structure carrying leaf class counts."""
    def walk(node):
        if isinstance(node, Leaf):
            stats = tree.store[node.key] if node.key in tree.store else None
            counts = stats.class_counts.tolist() if stats is not None else []
            return {"leaf": True, "class_counts": counts}
        return {"leaf": False, "attribute": node.attribute,
                "children": [walk(c) for c in node.children]}
    root = tree.store[ROOT] if ROOT in tree.store else None
    return {
        "splits": tree.splits,
        "root_counts": root.class_counts.tolist() if root is not None else [],
        "tree": walk(tree.root),
    }


def from_dict(payload, schema):
    """Rebuild a tree (with leaf and root counts) in a fresh store."""
    store = NodeStore(schema)

    def walk(d, key):
        stats = store.create(key)
        if d["leaf"]:
            counts = np.asarray(d["class_counts"] or [0] * schema.num_classes, dtype=np.int64)
            stats.class_counts[:] = counts
            stats.n = int(counts.sum())
            return Leaf(key)
        a = d["attribute"]
        kids = tuple(walk(c, extend_key(key, a, v)) for v, c in enumerate(d["children"]))
        return Split(key, a, kids)

    root = walk(payload["tree"], ROOT)
    rs = store[ROOT]
    if isinstance(root, Split) and payload.get("root_counts"):
        counts = np.asarray(payload["root_counts"], dtype=np.int64)
        rs.class_counts[:] = counts
        rs.n = int(counts.sum())
    return TreeState(root, payload["splits"], store)
