"""Decision-rule extraction: explain a trained network with a gain-ratio tree.

The tree is induced over the inputs against the network's own predictions,
so its quality metric is fidelity (agreement with the network), not accuracy
against ground truth.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np


@dataclass
class TreeConfig:
    max_depth: int | None = None
    min_samples_leaf: int = 1

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


@dataclass
class TreeNode:
    klass: int
    support: int
    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None   # samples with x[feature] < threshold
    right: "TreeNode | None" = None  # samples with x[feature] >= threshold

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


class DecisionTree:
    def __init__(self, root: TreeNode, config: TreeConfig):
        self.root = root
        self.config = config

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        out = np.empty(X.shape[0], dtype=np.int64)
        for i, row in enumerate(X):
            node = self.root
            while not node.is_leaf:
                node = node.right if row[node.feature] >= node.threshold else node.left
            out[i] = node.klass
        return int(out[0]) if single else out

    def depth(self) -> int:
        def walk(node):
            if node.is_leaf:
                return 0
            return 1 + max(walk(node.left), walk(node.right))
        return walk(self.root)

    def n_leaves(self) -> int:
        def walk(node):
            if node.is_leaf:
                return 1
            return walk(node.left) + walk(node.right)
        return walk(self.root)


def entropy(labels) -> float:
    """Shannon entropy in bits."""
    y = np.asarray(labels, dtype=np.int64)
    if y.size == 0:
        return 0.0
    counts = np.bincount(y)
    probs = counts[counts > 0] / y.size
    return float(-(probs * np.log2(probs)).sum())


def gain_ratio(labels_left, labels_right) -> float:
    """Information gain of the binary partition divided by its split info."""
    left = np.asarray(labels_left, dtype=np.int64)
    right = np.asarray(labels_right, dtype=np.int64)
    n = left.size + right.size
    if left.size == 0 or right.size == 0:
        return 0.0
    w_left, w_right = left.size / n, right.size / n
    base = entropy(np.concatenate([left, right]))
    gain = base - w_left * entropy(left) - w_right * entropy(right)
    split_info = -(w_left * np.log2(w_left) + w_right * np.log2(w_right))
    if split_info <= 0:
        return 0.0
    return float(gain / split_info)


def _majority(y: np.ndarray) -> int:
    return int(np.argmax(np.bincount(y)))


def _build(X: np.ndarray, y: np.ndarray, cfg: TreeConfig, depth: int) -> TreeNode:
    support = y.size
    node = TreeNode(klass=_majority(y), support=support)
    if np.unique(y).size == 1:
        return node
    if cfg.max_depth is not None and depth >= cfg.max_depth:
        return node
    if support < 2 * cfg.min_samples_leaf:
        return node

    best_ratio = 0.0
    best = None
    for f in range(X.shape[1]):
        column = X[:, f]
        values = np.unique(column)
        for i in range(values.size - 1):
            thr = (values[i] + values[i + 1]) / 2.0
            right_mask = column >= thr
            n_right = int(right_mask.sum())
            if n_right < cfg.min_samples_leaf or support - n_right < cfg.min_samples_leaf:
                continue
            ratio = gain_ratio(y[~right_mask], y[right_mask])
            # strict > keeps the first (lowest feature, lowest threshold) on ties
            if ratio > best_ratio:
                best_ratio = ratio
                best = (f, thr, right_mask)
    if best is None:
        return node
    f, thr, right_mask = best
    node.feature = f
    node.threshold = float(thr)
    node.left = _build(X[~right_mask], y[~right_mask], cfg, depth + 1)
    node.right = _build(X[right_mask], y[right_mask], cfg, depth + 1)
    return node


def c45_build(X, Y, cfg: TreeConfig | None = None) -> DecisionTree:
    """Recursive best-split induction by information gain ratio.

    Candidate thresholds are midpoints of adjacent distinct feature values;
    recursion stops on purity, max_depth, min_samples_leaf, or when no split
    has positive gain ratio.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(Y, dtype=np.int64)
    if X.ndim != 2:
        raise ValueError(f"X must be a matrix, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise ValueError(f"Y has shape {y.shape}, expected ({X.shape[0]},)")
    if X.shape[0] == 0:
        raise ValueError("empty data")
    if y.size and y.min() < 0:
        raise ValueError("labels must be nonnegative")
    cfg = cfg if cfg is not None else TreeConfig()
    return DecisionTree(_build(X, y, cfg, depth=0), cfg)


def extract_rules(m, X, cfg: TreeConfig | None = None) -> DecisionTree:
    """Fit a tree to the network's predictions over X."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a nonempty matrix")
    return c45_build(X, m.predict(X), cfg)


def fidelity(tree: DecisionTree, m, X) -> float:
    """Agreement rate between the tree and the network on X."""
    X = np.asarray(X, dtype=np.float64)
    return float(np.mean(tree.predict(X) == m.predict(X)))


# -- rule-list text format ---------------------------------------------------
#
# line     := "IF " conds " THEN class " INT " [support " INT "]"
# conds    := "TRUE" | cond (" AND " cond)*
# cond     := "x" INT (" >= " | " < ") FLOAT        (FLOAT is repr(), lossless)
#
# Leaves are emitted depth-first, left before right, so the rule conditions
# are mutually exclusive and exhaustive; first match wins on evaluation.

_RULE_RE = re.compile(r"^IF (?P<conds>.+) THEN class (?P<klass>\d+) \[support (?P<support>\d+)\]$")
_COND_RE = re.compile(r"^x(?P<feature>\d+) (?P<op>>=|<) (?P<value>\S+)$")


def tree_to_text(tree: DecisionTree) -> str:
    """One IF/THEN line per leaf; round-trippable through parse_rules."""
    lines: list[str] = []

    def walk(node: TreeNode, conds: list[str]) -> None:
        if node.is_leaf:
            body = " AND ".join(conds) if conds else "TRUE"
            lines.append(f"IF {body} THEN class {node.klass} [support {node.support}]")
            return
        walk(node.left, conds + [f"x{node.feature} < {node.threshold!r}"])
        walk(node.right, conds + [f"x{node.feature} >= {node.threshold!r}"])

    walk(tree.root, [])
    return "\n".join(lines) + "\n"


@dataclass
class Rule:
    conditions: list[tuple[int, str, float]]  # (feature, ">=" or "<", threshold)
    klass: int
    support: int

    def matches(self, row: np.ndarray) -> bool:
        for feature, op, value in self.conditions:
            if op == ">=" and not row[feature] >= value:
                return False
            if op == "<" and not row[feature] < value:
                return False
        return True


class RuleList:
    """Ordered rules parsed back from text; first matching rule classifies."""

    def __init__(self, rules: list[Rule]):
        self.rules = rules

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        out = np.empty(X.shape[0], dtype=np.int64)
        for i, row in enumerate(X):
            for rule in self.rules:
                if rule.matches(row):
                    out[i] = rule.klass
                    break
            else:
                raise ValueError(f"no rule matches sample {i}")
        return int(out[0]) if single else out


def parse_rules(text: str) -> RuleList:
    rules = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        match = _RULE_RE.match(line)
        if match is None:
            raise ValueError(f"unparsable rule at line {lineno}: {line!r}")
        conds: list[tuple[int, str, float]] = []
        body = match.group("conds")
        if body != "TRUE":
            for part in body.split(" AND "):
                cond = _COND_RE.match(part)
                if cond is None:
                    raise ValueError(f"unparsable condition at line {lineno}: {part!r}")
                conds.append((int(cond.group("feature")), cond.group("op"),
                              float(cond.group("value"))))
        rules.append(Rule(conds, int(match.group("klass")), int(match.group("support"))))
    if not rules:
        raise ValueError("no rules in text")
    return RuleList(rules)
