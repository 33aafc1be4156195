"""From-scratch random-forest binary classifier.

Trees are grown on bootstrap samples with per-split feature subsampling and
Gini impurity. Training is fully deterministic: rows are canonically sorted
before bootstrapping and every tree draws from its own RNG seeded by
mix(seed, tree_index), so results do not depend on row order or on how many
workers trained the trees.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from typing import Optional, Sequence

import numpy as np

from .core import format_utc, parse_utc, utcnow

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

MODEL_FORMAT_VERSION = 1


class ForestError(ValueError):
    pass


class ModelFormatError(ForestError):
    """Base for model (de)serialization failures."""


class ModelVersionError(ModelFormatError):
    pass


class ModelIntegrityError(ModelFormatError):
    pass


def splitmix64(x: int) -> int:
    """splitmix64 finalizer; maps any 64-bit value to a well-mixed one."""
    z = x & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def mix_seed(seed: int, t: int) -> int:
    """Per-tree seed derivation: splitmix of (seed XOR t*golden-ratio)."""
    return splitmix64((seed ^ ((t * _GOLDEN) & _MASK64)) & _MASK64)


@dataclass(frozen=True)
class ForestParams:
    n_trees: int
    max_depth: Optional[int] = None
    min_leaf: int = 1
    m_try: Optional[int] = None  # None: floor(sqrt(dim)), resolved at train time
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ForestError("n_trees must be >= 1")
        if self.min_leaf < 1:
            raise ForestError("min_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ForestError("max_depth must be >= 1 or unlimited")

    def to_json(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "m_try": self.m_try,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ForestParams":
        return cls(
            n_trees=obj["n_trees"],
            max_depth=obj.get("max_depth"),
            min_leaf=obj.get("min_leaf", 1),
            m_try=obj.get("m_try"),
            seed=obj.get("seed", 0),
        )


# Trees are stored as flat node lists (root at index 0) so that arbitrarily
# deep trees survive JSON round trips without recursion.
# Internal node: {"f": feature_index, "t": threshold, "l": left, "r": right}
# Leaf node:     {"p": positives, "n": negatives}
Tree = list


@dataclass(frozen=True)
class LabeledVector:
    """Minimal training row for synthetic data; FeatureRow satisfies the same shape."""

    values: tuple[float, ...]
    label: str
    schema_id: str = "raw"


@dataclass(frozen=True)
class ForestModel:
    params: ForestParams
    trees: tuple[Tree, ...]
    schema_id: str
    trained_at: datetime
    content_hash: str = field(default="")

    def __post_init__(self):
        if len(self.trees) != self.params.n_trees:
            raise ForestError("tree count must equal n_trees")
        expected = compute_content_hash(self.params, self.schema_id, self.trees)
        if self.content_hash and self.content_hash != expected:
            raise ModelIntegrityError("content hash does not match params + trees")
        if not self.content_hash:
            object.__setattr__(self, "content_hash", expected)

    @property
    def dim(self) -> int:
        # Leaf-only trees carry no feature index; fall back to 0 (any row routes).
        best = 0
        for tree in self.trees:
            for node in tree:
                if "f" in node:
                    best = max(best, node["f"] + 1)
        return best


def compute_content_hash(params: ForestParams, schema_id: str, trees: Sequence[Tree]) -> str:
    payload = json.dumps(
        {"params": params.to_json(), "schema_id": schema_id, "trees": list(trees)},
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def gini(pos: int, neg: int) -> float:
    """Gini impurity of a node holding pos positive and neg negative rows."""
    total = pos + neg
    if total < 1:
        raise ForestError("gini requires a non-empty node")
    p = pos / total
    q = neg / total
    return 1.0 - p * p - q * q


def best_split(X: np.ndarray, y: np.ndarray, feature_subset: Sequence[int]):
    """Best (feature_index, threshold, gain) over midpoint thresholds, or None.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values of each feature in the subset. Returns None when no split has
    strictly positive impurity decrease. Ties break toward the lower feature
    index, then the lower threshold.
    """
    if X.shape[0] < 2:
        raise ForestError("best_split requires at least 2 rows")
    return _best_split_at(X, y, np.arange(X.shape[0]), feature_subset)


def _best_split_at(X: np.ndarray, y: np.ndarray, indices: np.ndarray,
                   feature_subset: Sequence[int]):
    # Materializes only the sampled columns for the node's rows; slicing the
    # full row matrix per node would dominate training time on wide schemas.
    n = len(indices)
    features = sorted(set(int(f) for f in feature_subset))
    if not features:
        raise ForestError("feature subset must be non-empty")

    y_node = y[indices]
    total_pos = int(y_node.sum())
    total_neg = n - total_pos
    parent = gini(total_pos, total_neg)

    sub = X[np.ix_(indices, features)]
    order = np.argsort(sub, axis=0, kind="stable")
    sorted_vals = np.take_along_axis(sub, order, axis=0)
    sorted_y = y_node[order]
    cum_pos = np.cumsum(sorted_y, axis=0)

    left_n = np.arange(1, n, dtype=np.float64)[:, None]
    right_n = n - left_n
    left_pos = cum_pos[:-1].astype(np.float64)
    right_pos = total_pos - left_pos

    left_gini = 1.0 - (left_pos / left_n) ** 2 - ((left_n - left_pos) / left_n) ** 2
    right_gini = 1.0 - (right_pos / right_n) ** 2 - ((right_n - right_pos) / right_n) ** 2
    gains = parent - (left_n / n) * left_gini - (right_n / n) * right_gini

    valid = sorted_vals[1:] > sorted_vals[:-1]
    gains = np.where(valid, gains, -np.inf)

    best = None
    for col, feature in enumerate(features):
        pos = int(np.argmax(gains[:, col]))
        gain = float(gains[pos, col])
        if gain <= 0.0 or not math.isfinite(gain):
            continue
        if best is None or gain > best[2]:
            low = float(sorted_vals[pos, col])
            high = float(sorted_vals[pos + 1, col])
            threshold = (low + high) / 2.0
            # Adjacent doubles can make the midpoint round up to the higher
            # value, which would route every row left; clamp back down.
            if threshold >= high:
                threshold = low
            best = (feature, threshold, gain)
    return best


def _grow_tree(X: np.ndarray, y: np.ndarray, params: ForestParams, m_try: int,
               rng: np.random.Generator) -> Tree:
    n = X.shape[0]
    dim = X.shape[1]
    bootstrap = rng.integers(0, n, size=n)
    nodes: Tree = []
    # Explicit stack instead of recursion: unlimited-depth trees on large data
    # would overflow Python's recursion limit. Left child is pushed last so it
    # is processed first, giving a stable preorder numbering.
    stack = [(bootstrap, 0, -1, "")]
    while stack:
        indices, depth, parent, side = stack.pop()
        node_index = len(nodes)
        if parent >= 0:
            nodes[parent][side] = node_index
        pos = int(y[indices].sum())
        neg = len(indices) - pos
        at_depth_limit = params.max_depth is not None and depth >= params.max_depth
        if at_depth_limit or len(indices) < 2 * params.min_leaf or pos == 0 or neg == 0:
            nodes.append({"p": pos, "n": neg})
            continue
        subset = rng.choice(dim, size=m_try, replace=False)
        split = _best_split_at(X, y, indices, subset)
        if split is None:
            nodes.append({"p": pos, "n": neg})
            continue
        feature, threshold, _ = split
        nodes.append({"f": feature, "t": threshold, "l": -1, "r": -1})
        col = X[indices, feature]
        left = indices[col <= threshold]
        right = indices[col > threshold]
        stack.append((right, depth + 1, node_index, "r"))
        stack.append((left, depth + 1, node_index, "l"))
    return nodes


def _canonical_order(rows) -> list:
    # Bootstrap draws must index into a content-determined order so that
    # shuffling the input rows cannot change the trained model.
    return sorted(rows, key=lambda r: (tuple(r.values), r.label))


def train_forest(rows, params: ForestParams) -> ForestModel:
    """Train a forest over labeled rows; deterministic for (rows-as-set, params)."""
    rows = list(rows)
    if not rows:
        raise ForestError("training rows must be non-empty")
    schema_id = rows[0].schema_id
    for row in rows:
        if row.schema_id != schema_id:
            raise ForestError("training rows must share one schema")
        if row.label is None:
            raise ForestError("training rows must be labeled")
    labels = {row.label for row in rows}
    if "+" not in labels:
        raise ForestError("training rows lack the positive class")
    if "-" not in labels:
        raise ForestError("training rows lack the negative class")

    ordered = _canonical_order(rows)
    X = np.asarray([row.values for row in ordered], dtype=np.float64)
    y = np.asarray([1 if row.label == "+" else 0 for row in ordered], dtype=np.int64)
    dim = X.shape[1]

    m_try = params.m_try if params.m_try is not None else max(1, int(math.sqrt(dim)))
    if not 1 <= m_try <= dim:
        raise ForestError(f"m_try must be in [1, {dim}], got {m_try}")
    resolved = replace(params, m_try=m_try)

    trees = tuple(
        _grow_tree(X, y, resolved, m_try, np.random.Generator(
            np.random.PCG64(mix_seed(resolved.seed, t))))
        for t in range(resolved.n_trees)
    )
    return ForestModel(params=resolved, trees=trees, schema_id=schema_id,
                       trained_at=utcnow())


def _route(tree: Tree, values) -> float:
    node = tree[0]
    while "f" in node:
        node = tree[node["l"]] if values[node["f"]] <= node["t"] else tree[node["r"]]
    return node["p"] / (node["p"] + node["n"])


def predict_proba(model: ForestModel, row) -> float:
    """Mean over trees of the positive fraction at the routed leaf."""
    if row.schema_id != model.schema_id:
        raise ForestError(
            f"row schema {row.schema_id!r} does not match model schema {model.schema_id!r}"
        )
    values = row.values
    return sum(_route(tree, values) for tree in model.trees) / len(model.trees)


def predict_proba_many(model: ForestModel, rows) -> list[float]:
    return [predict_proba(model, row) for row in rows]


def save_model(model: ForestModel, path) -> None:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "schema_id": model.schema_id,
        "params": model.params.to_json(),
        "trained_at": format_utc(model.trained_at),
        "trees": list(model.trees),
        "content_hash": model.content_hash,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_model(path) -> ForestModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelIntegrityError(f"model file is corrupt: {exc}") from exc
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelVersionError(
            f"unsupported model format version {version!r} (supported: {MODEL_FORMAT_VERSION})"
        )
    params = ForestParams.from_json(payload["params"])
    trees = tuple(payload["trees"])
    stored_hash = payload.get("content_hash", "")
    expected = compute_content_hash(params, payload["schema_id"], trees)
    if stored_hash != expected:
        raise ModelIntegrityError("stored content hash does not match file contents")
    return ForestModel(
        params=params,
        trees=trees,
        schema_id=payload["schema_id"],
        trained_at=parse_utc(payload["trained_at"]),
        content_hash=stored_hash,
    )


class CrossValidationError(ForestError):
    pass


def _prf_at_half(probas: list[float], labels: list[str]) -> tuple[float, float, float]:
    tp = fp = fn = 0
    for proba, label in zip(probas, labels):
        predicted = proba >= 0.5
        actual = label == "+"
        if predicted and actual:
            tp += 1
        elif predicted:
            fp += 1
        elif actual:
            fn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def _stratified_folds(labels: list[str], k: int, seed: int) -> list[list[int]]:
    rng = np.random.Generator(np.random.PCG64(seed))
    pos = [i for i, lab in enumerate(labels) if lab == "+"]
    neg = [i for i, lab in enumerate(labels) if lab != "+"]
    folds: list[list[int]] = [[] for _ in range(k)]
    for group in (pos, neg):
        shuffled = list(np.array(group)[rng.permutation(len(group))]) if group else []
        for i, idx in enumerate(shuffled):
            folds[i % k].append(int(idx))
    return folds


def _folds_are_usable(labels: list[str], folds: list[list[int]]) -> bool:
    all_indices = set(range(len(labels)))
    for fold in folds:
        fold_labels = {labels[i] for i in fold}
        rest_labels = {labels[i] for i in all_indices - set(fold)}
        if len(fold_labels) < 2 or len(rest_labels) < 2:
            return False
    return True


def cross_validate(rows, grid: Sequence[ForestParams], k: int = 5, seed: int = 0):
    """Stratified k-fold tuning; selects the config with the best mean precision.

    Ties break by higher F1, then fewer trees, then lower depth. Returns the
    winning grid entry (with its own seed intact) and the per-config table.
    """
    rows = list(rows)
    if k < 2:
        raise CrossValidationError("k must be >= 2")
    if not grid:
        raise CrossValidationError("grid must be non-empty")
    labels = [row.label for row in rows]
    if len(rows) < k:
        raise CrossValidationError("not enough rows for the requested fold count")

    folds = _stratified_folds(labels, k, seed)
    if not _folds_are_usable(labels, folds):
        # one re-draw with a different stratification seed, then give up
        folds = _stratified_folds(labels, k, splitmix64(seed))
        if not _folds_are_usable(labels, folds):
            raise CrossValidationError("stratified folds degenerate to a single class")

    table = []
    for config_index, config in enumerate(grid):
        fold_metrics = []
        for fold_index, fold in enumerate(folds):
            holdout = set(fold)
            train_rows = [row for i, row in enumerate(rows) if i not in holdout]
            test_rows = [rows[i] for i in fold]
            fold_seed = mix_seed(mix_seed(seed, config_index), fold_index)
            model = train_forest(train_rows, replace(config, seed=fold_seed))
            probas = predict_proba_many(model, test_rows)
            fold_metrics.append(_prf_at_half(probas, [r.label for r in test_rows]))
        table.append({
            "params": config.to_json(),
            "mean_precision": sum(m[0] for m in fold_metrics) / k,
            "mean_recall": sum(m[1] for m in fold_metrics) / k,
            "mean_f1": sum(m[2] for m in fold_metrics) / k,
        })

    def sort_key(i: int):
        entry = table[i]
        depth = grid[i].max_depth
        return (
            -entry["mean_precision"],
            -entry["mean_f1"],
            grid[i].n_trees,
            math.inf if depth is None else depth,
            i,
        )

    best_index = min(range(len(grid)), key=sort_key)
    return grid[best_index], table
