"""CART-style binary decision tree (Gini impurity by default)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class TreeNode:
    # internal node: feature/threshold/left/right set, klass == -1
    # leaf: klass in {0,1} with proba = P(class 1), children == -1
    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    klass: int = -1
    proba: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.klass >= 0


@dataclass
class DecisionTreeModel:
    nodes: list[TreeNode]
    n_features: int
    max_depth: int
    min_samples_split: int

    def __post_init__(self):
        if not self.nodes:
            raise ValueError("tree must have at least one node")


@dataclass(frozen=True)
class TreeHyper:
    max_depth: int = 12
    min_samples_split: int = 2
    min_gain: float = 1e-7
    criterion: str = "gini"     # or "entropy"


def _impurity(n_pos: float, n: float, criterion: str) -> float:
    if n == 0:
        return 0.0
    p = n_pos / n
    if criterion == "gini":
        return 2.0 * p * (1.0 - p)
    if p in (0.0, 1.0):
        return 0.0
    return -(p * np.log2(p) + (1 - p) * np.log2(1 - p))


def _best_split(X: np.ndarray, y: np.ndarray,
                criterion: str) -> Optional[tuple[int, float, float]]:
    """Best (feature, threshold, gain); ties keep the lowest feature index
    then lowest threshold.  Thresholds are midpoints between consecutive
    distinct sorted values."""
    n = y.shape[0]
    n_pos = float(y.sum())
    parent = _impurity(n_pos, n, criterion)
    best = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        pos_cum = np.cumsum(ys)
        for i in range(n - 1):
            if xs[i] == xs[i + 1]:
                continue
            thr = (xs[i] + xs[i + 1]) / 2.0
            n_left = i + 1
            left_pos = float(pos_cum[i])
            weighted = (n_left / n * _impurity(left_pos, n_left, criterion)
                        + (n - n_left) / n * _impurity(n_pos - left_pos,
                                                       n - n_left, criterion))
            gain = parent - weighted
            if best is None or gain > best[2]:
                best = (f, thr, gain)
    return best


def _leaf(y: np.ndarray) -> TreeNode:
    n_pos = int(y.sum())
    p1 = n_pos / y.shape[0]
    # majority class, tie classified as malicious
    return TreeNode(klass=1 if p1 >= 0.5 else 0, proba=p1)


def train(X, y, hyper: TreeHyper = TreeHyper()) -> DecisionTreeModel:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("cannot train a tree on empty data")
    if y.shape[0] != X.shape[0]:
        raise ValueError("X and y length mismatch")
    if not np.all(np.isin(np.unique(y), (0.0, 1.0))):
        raise ValueError("labels must be 0/1")

    nodes: list[TreeNode] = []

    def build(idx: np.ndarray, depth: int) -> int:
        yi = y[idx]
        pure = yi.min() == yi.max()
        if (pure or depth >= hyper.max_depth
                or idx.shape[0] < hyper.min_samples_split):
            nodes.append(_leaf(yi))
            return len(nodes) - 1
        split = _best_split(X[idx], yi, hyper.criterion)
        if split is None or split[2] < hyper.min_gain:
            nodes.append(_leaf(yi))
            return len(nodes) - 1
        f, thr, _ = split
        mask = X[idx, f] <= thr
        pos = len(nodes)
        nodes.append(TreeNode())   # placeholder, patched below
        left = build(idx[mask], depth + 1)
        right = build(idx[~mask], depth + 1)
        nodes[pos] = TreeNode(feature=f, threshold=thr, left=left,
                              right=right)
        return pos

    build(np.arange(X.shape[0]), 0)
    return DecisionTreeModel(nodes, X.shape[1], hyper.max_depth,
                             hyper.min_samples_split)


def predict_one(model: DecisionTreeModel, x) -> tuple[int, float]:
    """Descend root-to-leaf; returns (class, leaf P(class 1))."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != model.n_features:
        raise ValueError(f"feature dimension mismatch: "
                         f"{x.shape[0]} != {model.n_features}")
    node = model.nodes[0]
    while not node.is_leaf:
        node = model.nodes[node.left if x[node.feature] <= node.threshold
                           else node.right]
    return node.klass, node.proba


def predict(model: DecisionTreeModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.array([predict_one(model, row)[0] for row in X])


def predict_proba(model: DecisionTreeModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.array([predict_one(model, row)[1] for row in X])
