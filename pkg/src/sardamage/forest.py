"""From-scratch random forest with deterministic training.

Binary CART trees on Gini impurity, bootstrap-resampled per tree, grown
breadth-first under a per-tree node budget. Probability output is the soft
vote: mean over trees of the reached leaf's class-1 fraction, which is what
downstream thresholding and the dashboard slider operate on.

Determinism contract: identical (rows, config, seed) produce a byte-identical
serialized model. Every random draw comes from per-purpose PCG64 streams
derived from the run seed by a splitmix64 hash, so tree construction order
and (future) parallel training cannot change results.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .features import FEATURE_ORDER_TAG, FEATURE_VERSION

SCHEMA = "sardamage-forest/1"

_M64 = (1 << 64) - 1


class TrainingError(ValueError):
    """Training preconditions violated (empty input, single class)."""


class CompatibilityError(ValueError):
    """Model file belongs to a different feature ordering."""


class ModelParseError(ValueError):
    """Model file is not parseable; message carries the position."""


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _M64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return (z ^ (z >> 31)) & _M64


def _stream(seed: int, salt: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(_splitmix64((seed & _M64) ^ salt)))


_BALANCE_SALT = 0xBA7A5CE5_0000_0001


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 50
    min_leaf: int = 3
    max_nodes: int = 10000
    seed: int = 0
    balance: bool = True
    feature_order_tag: str = FEATURE_ORDER_TAG


@dataclass
class Tree:
    """Flat node arrays, breadth-first order, root at 0.

    ``feature[i] < 0`` marks a leaf; then ``p1[i]`` is the class-1 fraction
    of the bootstrap rows that reached it. ``n_rows`` is kept for training
    introspection only and is not serialized.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    p1: np.ndarray
    n_rows: Optional[np.ndarray] = None

    @property
    def node_count(self) -> int:
        return int(self.feature.size)

    def leaf_mask(self) -> np.ndarray:
        return self.feature < 0

    def route(self, X: np.ndarray) -> np.ndarray:
        """Leaf p1 for every row of X."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while np.any(active):
            idx = np.flatnonzero(active)
            cur = node[idx]
            f = self.feature[cur]
            go_left = X[idx, f] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active[idx] = self.feature[node[idx]] >= 0
        return self.p1[node]


@dataclass
class ForestModel:
    trees: list[Tree]
    n_features: int
    config: TrainConfig

    @property
    def feature_order_tag(self) -> str:
        return self.config.feature_order_tag

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Soft-vote damage probability in [0, 1] for each row."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(
                f"feature vector length {X.shape[1]} does not match model "
                f"({self.n_features})"
            )
        acc = np.zeros(X.shape[0], dtype=np.float64)
        for tree in self.trees:
            acc += tree.route(X)
        return acc / len(self.trees)

    def predict_proba_one(self, fv: np.ndarray) -> float:
        return float(self.predict_proba(np.asarray(fv)[None, :])[0])


def predict_proba(model: ForestModel, fv: np.ndarray) -> float:
    return model.predict_proba_one(fv)


def _balance_downsample(y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Indices after downsampling the majority class to parity, preserving
    original row order."""
    idx0 = np.flatnonzero(y == 0)
    idx1 = np.flatnonzero(y == 1)
    if idx0.size == idx1.size:
        return np.arange(y.size)
    major, minor = (idx0, idx1) if idx0.size > idx1.size else (idx1, idx0)
    kept = rng.choice(major, size=minor.size, replace=False)
    return np.sort(np.concatenate([kept, minor]))


def _best_split(
    X: np.ndarray, y: np.ndarray, feats: np.ndarray, min_leaf: int
) -> Optional[tuple[int, float]]:
    """Lowest-cost (feature, midpoint threshold) among the candidates.

    Cost is the size-weighted child Gini sum; ties break toward the lowest
    feature index, then the lowest threshold, so training is a pure function
    of (rows, candidate set).
    """
    n = y.size
    best_cost = np.inf
    best: Optional[tuple[int, float]] = None
    for f in sorted(int(f) for f in feats):
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        sc = col[order]
        sy = y[order]
        nl = np.arange(1, n)
        distinct = sc[1:] > sc[:-1]
        valid = distinct & (nl >= min_leaf) & ((n - nl) >= min_leaf)
        if not np.any(valid):
            continue
        c1 = np.cumsum(sy)[:-1].astype(np.float64)
        total1 = float(np.sum(sy))
        nlf = nl.astype(np.float64)
        nrf = float(n) - nlf
        c1r = total1 - c1
        # weighted gini cost: nl*(1 - p1l^2 - p0l^2) + nr*(...)
        cost = (
            nlf
            - (c1 * c1 + (nlf - c1) * (nlf - c1)) / nlf
            + nrf
            - (c1r * c1r + (nrf - c1r) * (nrf - c1r)) / nrf
        )
        cost = np.where(valid, cost, np.inf)
        k = int(np.argmin(cost))  # first minimum = lowest threshold
        if cost[k] < best_cost:
            best_cost = float(cost[k])
            best = (f, float((sc[k] + sc[k + 1]) / 2.0))
    return best


def _grow_tree(
    X: np.ndarray, y: np.ndarray, config: TrainConfig, rng: np.random.Generator
) -> Tree:
    n, d = X.shape
    mtry = max(1, int(np.sqrt(d)))
    boot = rng.integers(0, n, size=n)
    Xb, yb = X[boot], y[boot]

    feature = [-1]
    threshold = [0.0]
    left = [-1]
    right = [-1]
    p1 = [0.0]
    n_rows = [n]
    count = 1
    queue: list[tuple[int, np.ndarray]] = [(0, np.arange(n))]
    while queue:
        node, rows = queue.pop(0)
        labels = yb[rows]
        frac1 = float(np.mean(labels))
        p1[node] = frac1
        n_rows[node] = rows.size
        pure = frac1 == 0.0 or frac1 == 1.0
        if pure or rows.size < 2 * config.min_leaf or count + 2 > config.max_nodes:
            continue
        feats = rng.choice(d, size=min(mtry, d), replace=False)
        split = _best_split(Xb[rows], labels, feats, config.min_leaf)
        if split is None:
            continue
        f, thr = split
        go_left = Xb[rows, f] <= thr
        feature[node] = f
        threshold[node] = thr
        lid, rid = count, count + 1
        left[node] = lid
        right[node] = rid
        count += 2
        for _ in range(2):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            p1.append(0.0)
            n_rows.append(0)
        queue.append((lid, rows[go_left]))
        queue.append((rid, rows[~go_left]))
    return Tree(
        feature=np.array(feature, dtype=np.int32),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int32),
        right=np.array(right, dtype=np.int32),
        p1=np.array(p1, dtype=np.float64),
        n_rows=np.array(n_rows, dtype=np.int64),
    )


def train_xy(X: np.ndarray, y: np.ndarray, config: TrainConfig = TrainConfig()) -> ForestModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise TrainingError(f"X {X.shape} and y {y.shape} do not align")
    if X.shape[0] < 2:
        raise TrainingError("need at least 2 training rows")
    if not np.all(np.isfinite(X)):
        raise TrainingError("feature matrix contains non-finite values")
    classes = np.unique(y)
    if not np.array_equal(classes, [0, 1]):
        raise TrainingError(
            f"training needs both classes 0 and 1, got {classes.tolist()}"
        )
    if config.balance:
        keep = _balance_downsample(y, _stream(config.seed, _BALANCE_SALT))
        X, y = X[keep], y[keep]
    trees = [
        _grow_tree(X, y, config, _stream(config.seed ^ t, 0))
        for t in range(config.n_trees)
    ]
    return ForestModel(trees=trees, n_features=X.shape[1], config=config)


def train(
    rows: Sequence[tuple[np.ndarray, int]], config: TrainConfig = TrainConfig()
) -> ForestModel:
    """Train from (feature_vector, label) pairs. Labels must include both
    classes; the majority class is downsampled to parity when
    ``config.balance`` is set."""
    if not rows:
        raise TrainingError("no training rows")
    X = np.stack([np.asarray(fv, dtype=np.float64) for fv, _ in rows])
    y = np.array([label for _, label in rows], dtype=np.int64)
    return train_xy(X, y, config)


# ---------------------------------------------------------------------------
# Serialization: structured JSON, floats lossless via repr round-trip.
# ---------------------------------------------------------------------------


def _tree_to_json(tree: Tree) -> dict:
    nodes = []
    for i in range(tree.node_count):
        if tree.feature[i] < 0:
            nodes.append({"p1": float(tree.p1[i])})
        else:
            nodes.append(
                {
                    "feature": int(tree.feature[i]),
                    "threshold": float(tree.threshold[i]),
                    "left": int(tree.left[i]),
                    "right": int(tree.right[i]),
                }
            )
    return {"nodes": nodes}


def _tree_from_json(doc: dict) -> Tree:
    nodes = doc["nodes"]
    k = len(nodes)
    feature = np.full(k, -1, dtype=np.int32)
    threshold = np.zeros(k, dtype=np.float64)
    left = np.full(k, -1, dtype=np.int32)
    right = np.full(k, -1, dtype=np.int32)
    p1 = np.zeros(k, dtype=np.float64)
    for i, nd in enumerate(nodes):
        if "feature" in nd:
            feature[i] = nd["feature"]
            threshold[i] = nd["threshold"]
            left[i] = nd["left"]
            right[i] = nd["right"]
        else:
            p1[i] = nd["p1"]
    return Tree(feature=feature, threshold=threshold, left=left, right=right, p1=p1)


def dumps(model: ForestModel) -> str:
    doc = {
        "schema": SCHEMA,
        "feature_order_tag": model.config.feature_order_tag,
        "n_features": model.n_features,
        "config": {
            "n_trees": model.config.n_trees,
            "min_leaf": model.config.min_leaf,
            "max_nodes": model.config.max_nodes,
            "seed": model.config.seed,
            "balance": model.config.balance,
        },
        "trees": [_tree_to_json(t) for t in model.trees],
    }
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def save(model: ForestModel, path: str | Path) -> None:
    Path(path).write_text(dumps(model))


def load(path: str | Path, expected_tag: Optional[str] = None) -> ForestModel:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelParseError(
            f"{path}: invalid model file at position {exc.pos} ({exc.msg})"
        ) from None
    if doc.get("schema") != SCHEMA:
        raise ModelParseError(f"{path}: unknown schema {doc.get('schema')!r}")
    tag = doc["feature_order_tag"]
    if not tag.startswith(FEATURE_VERSION + ":"):
        raise CompatibilityError(
            f"model feature ordering {tag!r} is incompatible with this code "
            f"(current version {FEATURE_VERSION})"
        )
    if expected_tag is not None and tag != expected_tag:
        raise CompatibilityError(
            f"model feature ordering {tag!r} does not match expected {expected_tag!r}"
        )
    cfg = doc["config"]
    config = TrainConfig(
        n_trees=cfg["n_trees"],
        min_leaf=cfg["min_leaf"],
        max_nodes=cfg["max_nodes"],
        seed=cfg["seed"],
        balance=cfg["balance"],
        feature_order_tag=tag,
    )
    trees = [_tree_from_json(t) for t in doc["trees"]]
    return ForestModel(trees=trees, n_features=int(doc["n_features"]), config=config)
