"""Tree induction, rule extraction and rule-text round-trip tests."""
import math
from collections import Counter

import numpy as np
import pytest

from adbn import (Dbn, Rbm, SoftmaxHead, TreeConfig, c45_build, entropy,
                  extract_rules, fidelity, gain_ratio, parse_rules, tree_to_text)


def oracle_entropy(labels):
    counts = Counter(int(v) for v in labels)
    n = len(labels)
    return -sum((c / n) * math.log2(c / n) for c in counts.values())


def oracle_gain_ratio(left, right):
    if len(left) == 0 or len(right) == 0:
        return 0.0
    n = len(left) + len(right)
    wl, wr = len(left) / n, len(right) / n
    gain = oracle_entropy(list(left) + list(right)) \
        - wl * oracle_entropy(left) - wr * oracle_entropy(right)
    split_info = -(wl * math.log2(wl) + wr * math.log2(wr))
    return gain / split_info if split_info > 0 else 0.0


def threshold_network():
    """Saturated DBN predicting class 1 exactly when feature 0 >= 0.5."""
    rbm = Rbm(3, 1, seed=0)
    rbm.W[:] = 0.0
    rbm.W[0, 0] = 60.0
    rbm.c[:] = -30.0
    head = SoftmaxHead(np.array([[0.0, 20.0]]), np.array([10.0, 0.0]))
    return Dbn([rbm], head)


class TestEntropyAndGainRatio:
    def test_entropy_matches_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            y = rng.integers(0, 4, size=int(rng.integers(1, 33)))
            assert entropy(y) == pytest.approx(oracle_entropy(y), abs=1e-10)

    def test_gain_ratio_matches_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            n = int(rng.integers(2, 33))
            y = rng.integers(0, 3, size=n)
            cut = int(rng.integers(1, n))
            assert gain_ratio(y[:cut], y[cut:]) == pytest.approx(
                oracle_gain_ratio(y[:cut].tolist(), y[cut:].tolist()), abs=1e-10)

    def test_empty_side_is_zero(self):
        assert gain_ratio([], [0, 1, 1]) == 0.0
        assert gain_ratio([0, 1], []) == 0.0

    def test_uninformative_split_zero_gain(self):
        assert gain_ratio([0, 1], [0, 1]) == pytest.approx(0.0, abs=1e-12)


class TestC45Build:
    def test_pure_data_single_leaf(self):
        tree = c45_build(np.random.default_rng(0).random((10, 3)), np.zeros(10, int))
        assert tree.root.is_leaf
        assert tree.root.klass == 0
        assert tree.root.support == 10

    def test_one_dimensional_textbook_split(self):
        X = np.array([[0.1], [0.2], [0.8], [0.9]])
        y = np.array([0, 0, 1, 1])
        # oracle arithmetic: candidate thresholds and their gain ratios
        candidates = {0.15: oracle_gain_ratio([0], [0, 1, 1]),
                      0.5: oracle_gain_ratio([0, 0], [1, 1]),
                      0.85: oracle_gain_ratio([0, 0, 1], [1])}
        assert max(candidates, key=candidates.get) == 0.5
        assert candidates[0.5] == pytest.approx(1.0, abs=1e-12)
        tree = c45_build(X, y)
        assert not tree.root.is_leaf
        assert tree.root.feature == 0
        assert tree.root.threshold == pytest.approx(0.5, abs=1e-12)
        assert tree.depth() == 1
        assert (tree.predict(X) == y).all()

    def test_constant_feature_excluded(self):
        X = np.column_stack([np.full(6, 0.3), [0.1, 0.2, 0.3, 0.7, 0.8, 0.9]])
        y = np.array([0, 0, 0, 1, 1, 1])
        tree = c45_build(X, y)
        assert tree.root.feature == 1

    def test_only_constant_features_gives_leaf(self):
        X = np.full((8, 2), 0.4)
        y = np.array([0, 1] * 4)
        tree = c45_build(X, y)
        assert tree.root.is_leaf
        assert tree.root.klass == 0  # majority tie breaks to the lowest class

    def test_tie_breaks_to_lowest_feature(self):
        column = np.array([0.1, 0.2, 0.8, 0.9])
        X = np.column_stack([column, column])
        y = np.array([0, 0, 1, 1])
        tree = c45_build(X, y)
        assert tree.root.feature == 0

    def test_max_depth_stop(self):
        rng = np.random.default_rng(2)
        X = rng.random((40, 3))
        y = rng.integers(0, 2, size=40)
        tree = c45_build(X, y, TreeConfig(max_depth=2))
        assert tree.depth() <= 2

    def test_min_samples_leaf(self):
        X = np.array([[0.1], [0.2], [0.8], [0.9]])
        y = np.array([0, 0, 1, 1])
        tree = c45_build(X, y, TreeConfig(min_samples_leaf=3))
        assert tree.root.is_leaf

    def test_leaf_supports_sum_to_root(self):
        rng = np.random.default_rng(3)
        X = rng.random((60, 4))
        y = rng.integers(0, 3, size=60)
        tree = c45_build(X, y)

        def leaf_supports(node):
            if node.is_leaf:
                return [node.support]
            return leaf_supports(node.left) + leaf_supports(node.right)

        assert sum(leaf_supports(tree.root)) == 60

    def test_empty_data_rejected(self):
        with pytest.raises(ValueError):
            c45_build(np.zeros((0, 2)), np.zeros(0, int))


class TestExtractRules:
    def test_constant_network_single_leaf(self):
        m = threshold_network()
        m.head.U[:] = 0.0
        m.head.d[:] = [5.0, 0.0]
        X = np.random.default_rng(4).random((30, 3))
        tree = extract_rules(m, X)
        assert tree.root.is_leaf
        assert fidelity(tree, m, X) == 1.0

    def test_threshold_network_depth_one_full_fidelity(self):
        m = threshold_network()
        rng = np.random.default_rng(5)
        X = rng.random((200, 3))
        tree = extract_rules(m, X)
        assert tree.depth() == 1
        assert tree.root.feature == 0
        assert abs(tree.root.threshold - 0.5) < 0.05
        assert fidelity(tree, m, X) == 1.0

    def test_fidelity_anchor_on_pinned_corpus(self, a5_corpus, a5_parent):
        train, _ = a5_corpus
        tree = extract_rules(a5_parent, train.features)
        assert fidelity(tree, a5_parent, train.features) >= 0.95


class TestRuleText:
    def test_single_leaf_single_rule(self):
        tree = c45_build(np.full((5, 2), 0.3), np.zeros(5, int))
        text = tree_to_text(tree)
        assert text == "IF TRUE THEN class 0 [support 5]\n"

    def test_depth_one_two_rules(self):
        X = np.array([[0.1], [0.2], [0.8], [0.9]])
        y = np.array([0, 0, 1, 1])
        text = tree_to_text(c45_build(X, y))
        lines = text.strip().split("\n")
        assert len(lines) == 2
        assert lines[0] == "IF x0 < 0.5 THEN class 0 [support 2]"
        assert lines[1] == "IF x0 >= 0.5 THEN class 1 [support 2]"

    def test_round_trip_classifies_identically(self):
        rng = np.random.default_rng(6)
        X = rng.random((80, 4))
        y = rng.integers(0, 3, size=80)
        tree = c45_build(X, y)
        restored = parse_rules(tree_to_text(tree))
        assert (restored.predict(X) == tree.predict(X)).all()

    def test_round_trip_threshold_is_lossless(self):
        X = np.array([[0.1234567890123456], [0.2], [0.8], [0.9007199254740993]])
        y = np.array([0, 0, 1, 1])
        tree = c45_build(X, y)
        restored = parse_rules(tree_to_text(tree))
        assert restored.rules[0].conditions[0][2] == tree.root.threshold

    def test_parse_errors(self):
        with pytest.raises(ValueError):
            parse_rules("nonsense\n")
        with pytest.raises(ValueError):
            parse_rules("")
