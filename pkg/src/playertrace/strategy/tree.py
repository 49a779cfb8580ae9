"""C4.5-style decision tree (gain-ratio splits on numeric thresholds) and bagging."""

from __future__ import annotations

import numpy as np

MIN_LEAF = 2
N_TREES = 25


def _entropy(counts: np.ndarray) -> np.ndarray:
    """Base-2 entropy along the last axis of a count array."""
    total = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(total > 0, counts / total, 0.0)
        h = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return h.sum(axis=-1)


def best_split(X: np.ndarray, y: np.ndarray, n_classes: int, min_leaf: int = MIN_LEAF):
    """Return ``(feature, threshold, gain_ratio)`` of the best split, or None.

    For each feature the threshold with the highest information gain is
    taken (midpoint between adjacent distinct values, both sides holding at
    least ``min_leaf`` rows); features are then compared by gain ratio.
    Ties go to the lowest feature index and the lowest threshold.
    """
    m, d = X.shape
    if m < 2 * min_leaf:
        return None
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    ys = y[order]
    onehot = np.zeros((m, d, n_classes))
    np.put_along_axis(onehot, ys[:, :, None], 1.0, axis=2)
    left = np.cumsum(onehot, axis=0)[:-1]          # split after row i: (m-1, d, K)
    total = left[-1] + onehot[-1]
    n_left = np.arange(1, m, dtype=float)[:, None]
    n_right = m - n_left
    valid = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    # entropies only at candidate thresholds
    vi, vf = np.nonzero(valid)
    lc = left[vi, vf]
    rc = total[vf] - lc
    nl = n_left[vi, 0]
    parent = _entropy(np.bincount(y, minlength=n_classes).astype(float))
    child = (nl * _entropy(lc) + (m - nl) * _entropy(rc)) / m
    gain = np.full((m - 1, d), -np.inf)
    gain[vi, vf] = parent - child
    pos = np.argmax(gain, axis=0)                  # first maximum per feature
    feat_gain = gain[pos, np.arange(d)]
    ok = np.isfinite(feat_gain) & (feat_gain > 1e-12)
    if not ok.any():
        return None
    frac = (pos + 1) / m
    split_info = -(frac * np.log2(frac) + (1 - frac) * np.log2(1 - frac))
    ratio = np.where(ok, feat_gain / split_info, -np.inf)
    f = int(np.argmax(ratio))
    i = int(pos[f])
    thr = float((xs[i, f] + xs[i + 1, f]) / 2.0)
    return f, thr, float(ratio[f])


def fit_tree(X: np.ndarray, y: np.ndarray, n_classes: int, min_leaf: int = MIN_LEAF,
             max_depth: int | None = None) -> dict:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[list[float]] = []

    def new_node(idx: np.ndarray) -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(np.bincount(y[idx], minlength=n_classes).astype(float).tolist())
        return len(feature) - 1

    root = new_node(np.arange(len(y)))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        yy = y[idx]
        if np.all(yy == yy[0]) or (max_depth is not None and depth >= max_depth):
            continue
        split = best_split(X[idx], yy, n_classes, min_leaf)
        if split is None:
            continue
        f, thr, _ = split
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node], threshold[node] = f, thr
        left[node], right[node] = new_node(li), new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return {"feature": np.array(feature, dtype=np.int64), "threshold": np.array(threshold),
            "left": np.array(left, dtype=np.int64), "right": np.array(right, dtype=np.int64),
            "value": np.array(value)}


def tree_leaves(tree: dict, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(X)
    node = np.zeros(len(X), dtype=np.int64)
    feat, thr = tree["feature"], tree["threshold"]
    while True:
        active = feat[node] >= 0
        if not active.any():
            return node
        rows = np.flatnonzero(active)
        n = node[rows]
        go_left = X[rows, feat[n]] <= thr[n]
        node[rows] = np.where(go_left, tree["left"][n], tree["right"][n])


def tree_proba(tree: dict, X: np.ndarray) -> np.ndarray:
    v = tree["value"][tree_leaves(tree, X)]
    return v / v.sum(axis=1, keepdims=True)


def fit_bagged(X: np.ndarray, y: np.ndarray, n_classes: int, n_trees: int = N_TREES,
               bootstrap: bool = True, seed: int = 0, min_leaf: int = MIN_LEAF) -> dict:
    """Bagged C4.5 trees; tree ``t`` draws its bootstrap from the stream (seed, t)."""
    n = len(y)
    trees = []
    for t in range(n_trees):
        if bootstrap:
            rng = np.random.default_rng(np.random.SeedSequence([seed, t]))
            idx = rng.integers(0, n, size=n)
        else:
            idx = np.arange(n)
        trees.append(fit_tree(X[idx], y[idx], n_classes, min_leaf))
    return {"trees": trees}


def bagged_proba(params: dict, X: np.ndarray) -> np.ndarray:
    probs = [tree_proba(t, X) for t in params["trees"]]
    return np.mean(probs, axis=0)
