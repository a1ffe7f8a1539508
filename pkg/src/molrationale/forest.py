"""Random-forest classifier over fingerprint bits.

The positive-class vote fraction of the forest is the property score used by
extraction, merging, fine-tuning and evaluation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .chemgraph import MolGraph
from .fingerprint import DEFAULT_RADIUS, DEFAULT_WIDTH, morgan_fingerprint

DEFAULT_TREES = 100
DEFAULT_MAX_DEPTH = 12

_MODEL_VERSION = 1


class ForestError(ValueError):
    pass


@dataclass
class ForestModel:
    trees: list[dict]
    width: int
    radius: int
    n_trees: int
    max_depth: int
    seed: int

    def to_json(self) -> str:
        doc = {
            "version": _MODEL_VERSION,
            "width": self.width,
            "radius": self.radius,
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "seed": self.seed,
            "trees": self.trees,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ForestModel":
        doc = json.loads(text)
        if doc.get("version") != _MODEL_VERSION:
            raise ForestError(f"unsupported model version {doc.get('version')}")
        return cls(
            trees=doc["trees"],
            width=doc["width"],
            radius=doc["radius"],
            n_trees=doc["n_trees"],
            max_depth=doc["max_depth"],
            seed=doc["seed"],
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "ForestModel":
        with open(path) as fh:
            return cls.from_json(fh.read())


@dataclass
class PropertySpec:
    """A named property constraint: predictor score must reach the threshold."""

    name: str
    model: ForestModel
    threshold: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ForestError(f"threshold must be in [0, 1], got {self.threshold}")

    def score(self, g: MolGraph) -> float:
        return predict_score(self.model, g)

    def is_positive(self, g: MolGraph) -> bool:
        return self.score(g) >= self.threshold


def _gini(pos: np.ndarray, total: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(total > 0, pos / np.maximum(total, 1), 0.0)
    return 2.0 * p * (1.0 - p)


def _build_tree(
    X: np.ndarray, y: np.ndarray, idx: np.ndarray, rng: np.random.Generator,
    max_depth: int, n_candidates: int,
) -> dict:
    n = len(idx)
    pos = int(y[idx].sum())
    if n == 0:
        return {"leaf": 0.0}
    value = pos / n
    if pos == 0 or pos == n or max_depth == 0 or n < 2:
        return {"leaf": value}
    # candidate bits are sampled among those that vary within this node;
    # constant bits cannot split
    col = X[idx].sum(axis=0)
    varying = np.flatnonzero((col > 0) & (col < n))
    if varying.size == 0:
        return {"leaf": value}
    k = min(n_candidates, varying.size)
    bits = np.sort(rng.choice(varying, size=k, replace=False))
    sub = X[np.ix_(idx, bits)]
    n_on = sub.sum(axis=0)
    pos_on = (sub & y[idx, None].astype(bool)).sum(axis=0)
    n_off = n - n_on
    pos_off = pos - pos_on
    parent = _gini(np.array([pos]), np.array([n]))[0]
    children = (n_off * _gini(pos_off, n_off) + n_on * _gini(pos_on, n_on)) / n
    gains = parent - children
    gains[(n_on == 0) | (n_off == 0)] = -1.0
    best = int(np.argmax(gains))
    if gains[best] <= 1e-12:
        return {"leaf": value}
    bit = int(bits[best])
    mask = X[idx, bit]
    left_idx = idx[~mask]
    right_idx = idx[mask]
    return {
        "bit": bit,
        "left": _build_tree(X, y, left_idx, rng, max_depth - 1, n_candidates),
        "right": _build_tree(X, y, right_idx, rng, max_depth - 1, n_candidates),
    }


def train_forest(
    data: list[tuple[MolGraph, int]],
    n_trees: int = DEFAULT_TREES,
    max_depth: int = DEFAULT_MAX_DEPTH,
    seed: int = 0,
    width: int = DEFAULT_WIDTH,
    radius: int = DEFAULT_RADIUS,
) -> ForestModel:
    """Bootstrap-sampled trees with Gini splits over a sqrt(width) random bit
    subset per node. Class balance is handled by a stratified bootstrap. The
    result is a deterministic function of (data, params, seed)."""
    if len(data) < 2:
        raise ForestError("need at least 2 training examples")
    y = np.array([int(label) for _, label in data], dtype=np.int64)
    if y.min() == y.max():
        raise ForestError("training data must contain both classes")
    X = np.zeros((len(data), width), dtype=bool)
    for i, (g, _) in enumerate(data):
        fp = morgan_fingerprint(g, radius=radius, width=width)
        X[i, list(fp.bits)] = True

    pos_idx = np.flatnonzero(y == 1)
    neg_idx = np.flatnonzero(y == 0)
    n_candidates = max(1, int(np.sqrt(width)))
    seeds = np.random.SeedSequence(seed).spawn(n_trees)
    trees = []
    for tree_seed in seeds:
        rng = np.random.default_rng(tree_seed)
        boot = np.concatenate(
            [
                rng.choice(pos_idx, size=len(pos_idx), replace=True),
                rng.choice(neg_idx, size=len(neg_idx), replace=True),
            ]
        )
        trees.append(_build_tree(X, y, boot, rng, max_depth, n_candidates))
    return ForestModel(
        trees=trees, width=width, radius=radius,
        n_trees=n_trees, max_depth=max_depth, seed=seed,
    )


def _walk(tree: dict, bits: frozenset[int]) -> float:
    node = tree
    while "leaf" not in node:
        node = node["right"] if node["bit"] in bits else node["left"]
    return node["leaf"]


def predict_score(m: ForestModel, g: MolGraph) -> float:
    """Mean positive fraction over the trees' leaves; in [0, 1]."""
    fp = morgan_fingerprint(g, radius=m.radius, width=m.width)
    return sum(_walk(t, fp.bits) for t in m.trees) / len(m.trees)


def auroc_from_scores(scores, labels) -> float:
    """Rank-based AUROC with midrank tie handling."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ForestError("AUROC requires both classes")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # midrank, 1-based
        i = j + 1
    rank_sum_pos = ranks[labels == 1].sum()
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auroc(m: ForestModel, data: list[tuple[MolGraph, int]]) -> float:
    scores = [predict_score(m, g) for g, _ in data]
    labels = [label for _, label in data]
    return auroc_from_scores(scores, labels)


def read_property_csv(path) -> tuple[list[str], list[str], list[list[int]]]:
    """Read a 'smiles,label[,label2...]' CSV; returns (property names, smiles, labels)."""
    import csv

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0].strip().lower() != "smiles":
            raise ForestError(f"{path}: first CSV column must be 'smiles'")
        names = [h.strip() for h in header[1:]]
        smiles, labels = [], []
        for line_no, row_data in enumerate(reader, start=2):
            if not row_data:
                continue
            if len(row_data) != len(header):
                raise ForestError(f"{path}:{line_no}: expected {len(header)} columns")
            smiles.append(row_data[0].strip())
            labels.append([int(x) for x in row_data[1:]])
    return names, smiles, labels
