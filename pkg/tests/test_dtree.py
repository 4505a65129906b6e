import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsdt import dtree
from tsdt.data import AttributeSchema, Instance, xor_stream
from tsdt.dtree import (
    ROOT,
    NodeStore,
    TreeState,
    available_splits,
    build_tree,
    canonical_key,
    gini,
    leaf_probabilities,
    majority_class,
    observe,
    observe_batch,
    p_hat,
    route,
    split,
)

XOR_SPEC = (0, [(1, [None, None]), (1, [None, None])])


def binary_store(q=5):
    return NodeStore(AttributeSchema.uniform(q))


# --- keys ---

def test_canonical_key():
    assert canonical_key([(2, 1), (0, 0)]) == ((0, 0), (2, 1))
    assert canonical_key([]) == ROOT
    assert canonical_key(canonical_key([(2, 1), (0, 0)])) == ((0, 0), (2, 1))
    with pytest.raises(ValueError):
        canonical_key([(1, 0), (1, 1)])


# --- routing ---

def test_route():
    store = binary_store(3)
    root = TreeState.root_only(store)
    assert route(root, Instance([1, 0, 1], 0)) == ROOT
    one = split(store, root, ROOT, 0)
    assert route(one, Instance([1, 0, 1], 0)) == ((0, 1),)
    xor = build_tree(store, XOR_SPEC)
    assert route(xor, Instance([0, 0, 1], 1)) == ((0, 0), (1, 0))


# --- observe ---

def leaf_with_counts(counts):
    s = AttributeSchema.uniform(1)
    store = NodeStore(s)
    tree = TreeState.root_only(store)
    for label, c in enumerate(counts):
        for _ in range(c):
            observe(store, tree, Instance([0], label))
    return store, tree


def test_observe_hit_checked_before_update():
    store, tree = leaf_with_counts([2, 1])
    before = store[ROOT].correct
    observe(store, tree, Instance([0], 0))
    assert store[ROOT].correct == before + 1
    assert store[ROOT].class_counts.tolist() == [3, 1]


def test_observe_miss():
    store, tree = leaf_with_counts([2, 1])
    before = store[ROOT].correct
    observe(store, tree, Instance([0], 1))
    assert store[ROOT].correct == before
    assert store[ROOT].class_counts.tolist() == [2, 2]


@pytest.mark.parametrize("label", [0, 1])
def test_first_sample_never_counts(label):
    store, tree = leaf_with_counts([0, 0])
    observe(store, tree, Instance([0], label))
    assert store[ROOT].correct == 0
    assert store[ROOT].n == 1


def test_observe_grid_prefix_rule():
    store = binary_store(2)
    tree = TreeState.root_only(store)
    for x, y in [([0, 0], 1), ([0, 1], 1), ([0, 0], 1), ([1, 0], 0)]:
        observe(store, tree, Instance(x, y))
    g = store[ROOT]
    # attribute 0, value 0 saw labels 1, 1, 1: the first is unscored, the next two hit
    assert g.grid_correct[g.grid_slot(0), 0] == 2
    # attribute 0, value 1 saw a single sample
    assert g.grid_correct[g.grid_slot(0), 1] == 0
    assert g.grid_rows(0)[:2].tolist() == [[0, 3], [1, 0]]


def test_observe_updates_every_region_on_path():
    store = binary_store(3)
    tree = build_tree(store, XOR_SPEC)
    observe(store, tree, Instance([0, 1, 0], 0))
    for key in (ROOT, ((0, 0),), ((0, 0), (1, 1))):
        assert store[key].n == 1
    assert store[((0, 1),)].n == 0


def test_observe_missing_region():
    store = binary_store(2)
    other = NodeStore(store.schema)
    tree = build_tree(other, (0, [None, None]))
    with pytest.raises(KeyError):
        observe(store, tree, Instance([0, 0], 0))


def test_count_conservation_and_prefix_bound():
    s = xor_stream(4, seed=5)
    store = NodeStore(s.schema)
    tree = TreeState.root_only(store)
    for _ in range(300):
        observe(store, tree, s.next())
        st_ = store[ROOT]
        assert st_.class_counts.sum() == st_.n
        assert (st_.grid.sum(axis=(1, 2)) == st_.n).all()
        assert 0 <= st_.correct <= max(0, st_.n - 1)
        assert (st_.grid_correct <= st_.grid.sum(axis=2)).all()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 300), st.sampled_from([None, XOR_SPEC]))
def test_batch_matches_sequential(seed, n, spec):
    rng = np.random.default_rng(seed)
    schema = AttributeSchema(["a", "b", "c"], [2, 2, 3], 3)
    X = np.stack([rng.integers(0, c, n) for c in schema.cardinalities], axis=1)
    y = rng.integers(0, 3, n)
    a, b = NodeStore(schema), NodeStore(schema)
    ta, tb = build_tree(a, spec), build_tree(b, spec)
    cut = n // 3
    observe_batch(a, ta, X[:cut], y[:cut])
    observe_batch(a, ta, X[cut:], y[cut:])
    for x, label in zip(X, y):
        observe(b, tb, Instance(x, label))
    for key in a.keys():
        sa, sb = a[key], b[key]
        assert sa.n == sb.n and sa.correct == sb.correct
        assert (sa.class_counts == sb.class_counts).all()
        assert (sa.grid == sb.grid).all() and (sa.grid_correct == sb.grid_correct).all()


# --- majority and gini ---

def test_majority_class():
    assert majority_class([3, 5]) == 1
    assert majority_class([4, 4]) == 0
    with pytest.raises(ValueError):
        majority_class([0, 0])


def test_gini():
    assert gini([10, 0]) == 0.0
    assert gini([5, 5]) == 0.5
    assert gini([1, 2, 3]) == pytest.approx(1 - 14 / 36)
    assert gini([0, 0]) == 0.0


# --- chain-rule estimator ---

def set_n(store, key, n):
    store.create(key).n = n


def test_p_hat_examples():
    store = binary_store(3)
    assert p_hat(store, TreeState.root_only(store), ROOT) == 1.0
    one = build_tree(store, (0, [None, None]))
    set_n(store, ((0, 0),), 30)
    set_n(store, ((0, 1),), 70)
    assert p_hat(store, one, ((0, 0),)) == pytest.approx(0.3)
    two = build_tree(store, (0, [(1, [None, None]), None]))
    set_n(store, ((0, 0), (1, 0)), 10)
    set_n(store, ((0, 0), (1, 1)), 20)
    assert p_hat(store, two, ((0, 0), (1, 0))) == pytest.approx(0.1)


def test_p_hat_uniform_when_siblings_empty():
    store = binary_store(2)
    tree = build_tree(store, (0, [(1, [None, None]), None]))
    set_n(store, ((0, 0),), 5)
    set_n(store, ((0, 1),), 5)
    assert p_hat(store, tree, ((0, 0), (1, 1))) == pytest.approx(0.25)
    with pytest.raises(KeyError):
        p_hat(store, tree, ((0, 0),))


def test_chain_rule_consistency():
    s = xor_stream(3, seed=11)
    store = NodeStore(s.schema)
    tree = build_tree(store, XOR_SPEC)
    X, y = s.take(100_000)
    observe_batch(store, tree, X, y)
    for leaf in tree.leaves:
        assert abs(p_hat(store, tree, leaf) - 0.25) <= 0.02


def test_probabilities_sum_to_one_under_interleaving():
    s = xor_stream(4, seed=2)
    store = NodeStore(s.schema)
    root = TreeState.root_only(store)
    trees = [root]
    rng = np.random.default_rng(0)
    for step in range(60):
        tree = trees[rng.integers(len(trees))]
        observe_batch(store, tree, *s.take(int(rng.integers(1, 40))))
        leaf = tree.leaves[rng.integers(len(tree.leaves))]
        options = available_splits(tree, leaf, s.schema)
        if options:
            trees.append(split(store, tree, leaf, options[rng.integers(len(options))]))
        for t in trees:
            assert abs(sum(leaf_probabilities(store, t).values()) - 1.0) <= 1e-9


# --- splits ---

def test_available_splits():
    schema = AttributeSchema.uniform(5)
    store = NodeStore(schema)
    root = TreeState.root_only(store)
    assert available_splits(root, ROOT, schema) == [0, 1, 2, 3, 4]
    assert available_splits(root, ((0, 1),), schema) == [1, 2, 3, 4]
    deep = tuple((a, 0) for a in range(5))
    assert available_splits(root, deep, schema) == []
    mixed = AttributeSchema(["a", "b"], [1, 3], 2)
    assert available_splits(TreeState.root_only(NodeStore(mixed)), ROOT, mixed) == [1]


def test_split_seeds_children_from_parent_grid():
    store = binary_store(2)
    root = TreeState.root_only(store)
    g = store[ROOT]
    slot = g.grid_slot(0)
    g.grid[slot, 0] = [3, 1]
    g.grid[slot, 1] = [0, 4]
    g.grid_correct[slot] = [2, 3]
    tree = split(store, root, ROOT, 0)
    left, right = store[((0, 0),)], store[((0, 1),)]
    assert (left.n, left.class_counts.tolist(), left.correct) == (4, [3, 1], 2)
    assert (right.n, right.class_counts.tolist(), right.correct) == (4, [0, 4], 3)
    assert left.grid.sum() == 0
    assert tree.splits == root.splits + 1
    assert root.leaves == (ROOT,)
    with pytest.raises(ValueError):
        split(store, tree, ((0, 0),), 0)


def test_split_shares_regions_across_orders():
    store = binary_store(3)
    root = TreeState.root_only(store)
    a = split(store, split(store, root, ROOT, 0), ((0, 0),), 1)
    shared = store[((0, 0), (1, 0))]
    shared.n = 99
    b = split(store, split(store, root, ROOT, 1), ((1, 0),), 0)
    assert store[((0, 0), (1, 0))] is shared
    assert shared.n == 99
    assert ((0, 0), (1, 0)) in a.leaves and ((0, 0), (1, 0)) in b.leaves


def test_shared_region_accumulates_both_simulations():
    s = xor_stream(3, seed=4)
    store = NodeStore(s.schema)
    a = build_tree(store, (0, [(1, [None, None]), None]))
    b = build_tree(store, (1, [(0, [None, None]), None]))
    X1, y1 = s.take(500)
    X2, y2 = s.take(500)
    observe_batch(store, a, X1, y1)
    observe_batch(store, b, X2, y2)
    region = ((0, 0), (1, 0))
    expected = int(((X1[:, 0] == 0) & (X1[:, 1] == 0)).sum() + ((X2[:, 0] == 0) & (X2[:, 1] == 0)).sum())
    assert store[region].n == expected


def test_tree_structure_invariants():
    store = binary_store(3)
    tree = build_tree(store, XOR_SPEC)
    assert tree.splits == 3
    assert len(tree.leaves) == tree.splits + 1

    def walk(node, used):
        if isinstance(node, dtree.Leaf):
            return
        assert node.attribute not in used
        for v, child in enumerate(node.children):
            assert child.key == dtree.extend_key(node.key, node.attribute, v)
            walk(child, used | {node.attribute})
    walk(tree.root, set())


# --- prediction and export ---

def trained_xor():
    s = xor_stream(3, seed=0)
    store = NodeStore(s.schema)
    tree = build_tree(store, XOR_SPEC)
    observe_batch(store, tree, *s.take(400))
    return tree


def test_predict_and_canonical_form():
    tree = trained_xor()
    X = np.array([[0, 0, 1], [0, 1, 0], [1, 0, 1], [1, 1, 1]])
    assert dtree.predict(tree, X).tolist() == [1, 0, 0, 1]
    assert dtree.canonical_form(tree) == (0, ((1, (1, 0)), (1, (0, 1))))


def test_to_text():
    tree = trained_xor()
    lines = dtree.to_text(tree).splitlines()
    assert lines[0] == "if attr0 == 0:"
    assert lines[1] == "  if attr1 == 0:"
    assert lines[2].startswith("    predict 1 (n=")
    assert lines[3] == "  else:  # attr1 == 1"
    assert sum(l.strip().startswith("predict") for l in lines) == 4
    three = build_tree(NodeStore(AttributeSchema(["a"], [3], 2)), (0, [None, None, None]))
    assert [l for l in dtree.to_text(three).splitlines() if "attr" in l] == [
        "if attr0 == 0:", "elif attr0 == 1:", "else:  # attr0 == 2"]


def test_to_dot():
    dot = dtree.to_dot(trained_xor())
    assert dot.startswith("digraph Tree {")
    assert dot.rstrip().endswith("}")
    assert dot.count('[label="X') == 3
    assert dot.count("shape=ellipse") == 4
    assert dot.count("->") == 6
    assert '[label="0"]' in dot and '[label="1"]' in dot


def test_dict_round_trip():
    tree = trained_xor()
    back = dtree.from_dict(dtree.to_dict(tree), tree.store.schema)
    assert back.splits == tree.splits
    assert dtree.canonical_form(back) == dtree.canonical_form(tree)
    assert dtree.to_text(back) == dtree.to_text(tree)
