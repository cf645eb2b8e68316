"""Fast-and-frugal action models of other agents, and their bookkeeping.

A *fast-and-frugal tree* is a binary classifier evaluated as an ordered cue
list: each level inspects one feature, one test outcome exits immediately
with a label, the other falls through to the next cue; a final leaf catches
whatever remains.  The leaf budget is the attribute count (39).

A *stacked model* predicts one of the eight action kinds with eight
one-vs-rest FF trees whose binary votes feed a small top-down decision tree
(the combiner).  Induction is deterministic: greedy cue choice maximizing
the balanced accuracy of the single cue on the data remaining at that
level, ties resolved toward the lowest feature index and smallest
threshold; the combiner maximizes information gain with the same
tie-breaking and predicts the lowest-indexed action on count ties.

Agreement trackers keep a sliding window (default 30) of
prediction-matched-observation flags per (agent, model) pair; the windowed
fraction drives keep / switch / learn-a-new-model decisions at threshold
theta (default 0.5).  Incremental updates refit on a retained reservoir
(up to 5,000 examples) plus a fresh buffer (200), keeping the old model
when its held-out accuracy is better; the holdout is every fifth example.

Libraries serialize to a versioned JSON file.
"""

from __future__ import annotations

import json
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from fortdefense.features import CATEGORICAL_FEATURES, N_FEATURES

N_ACTIONS = 8
WINDOW_DEFAULT = 30
THETA_DEFAULT = 0.5
RESERVOIR_SIZE = 5000
BUFFER_SIZE = 200
FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# fast-and-frugal trees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cue:
    """One level of an FF tree.

    The test is ``value == threshold`` for categorical features and
    ``value <= threshold`` otherwise; when the test outcome equals
    ``exit_side`` evaluation stops with ``exit_label``.
    """

    feature: int
    categorical: bool
    threshold: float
    exit_side: bool
    exit_label: int

    def test(self, value: float) -> bool:
        if self.categorical:
            return value == self.threshold
        return value <= self.threshold


@dataclass(frozen=True)
class FFTree:
    cues: tuple[Cue, ...]
    final_label: int

    @property
    def n_leaves(self) -> int:
        return len(self.cues) + 1

    def predict(self, vec: Sequence[float]) -> int:
        for cue in self.cues:
            if cue.test(vec[cue.feature]) == cue.exit_side:
                return cue.exit_label
        return self.final_label

    def predict_traced(self, vec: Sequence[float]) -> tuple[int, list[int]]:
        """Prediction plus the features actually inspected, in order."""
        inspected: list[int] = []
        for cue in self.cues:
            inspected.append(cue.feature)
            if cue.test(vec[cue.feature]) == cue.exit_side:
                return cue.exit_label, inspected
        return self.final_label, inspected


def _majority(pos: int, total: int) -> int:
    """Majority binary label; exact ties resolve to 0 (the lower label)."""
    return 1 if 2 * pos > total else 0


def _balanced_accuracy(pos_l, n_l, pos_r, n_r, pos_total, n_total):
    """Balanced accuracy of the two-sided majority classifier (vectorized)."""
    neg_total = n_total - pos_total
    maj_l = (2 * pos_l > n_l).astype(int)
    maj_r = (2 * pos_r > n_r).astype(int)
    correct_pos = np.where(maj_l == 1, pos_l, 0) + np.where(maj_r == 1, pos_r, 0)
    correct_neg = np.where(maj_l == 0, n_l - pos_l, 0) + np.where(
        maj_r == 0, n_r - pos_r, 0
    )
    return (correct_pos / pos_total + correct_neg / neg_total) / 2


def _best_split_numeric(values: np.ndarray, labels: np.ndarray):
    """Best ``<= threshold`` split -> (balanced_accuracy, threshold) or None."""
    order = np.argsort(values, kind="stable")
    sv, sy = values[order], labels[order]
    boundaries = np.nonzero(sv[:-1] < sv[1:])[0]
    if boundaries.size == 0:
        return None
    prefix = np.cumsum(sy)
    n = len(sy)
    pos_total = int(prefix[-1])
    if pos_total == 0 or pos_total == n:
        return None
    n_l = boundaries + 1
    pos_l = prefix[boundaries]
    ba = _balanced_accuracy(pos_l, n_l, pos_total - pos_l, n - n_l, pos_total, n)
    k = int(np.argmax(ba))  # first max -> smallest threshold on ties
    threshold = (sv[boundaries[k]] + sv[boundaries[k] + 1]) / 2
    return float(ba[k]), float(threshold)


def _best_split_categorical(values: np.ndarray, labels: np.ndarray):
    """Best ``== category`` split -> (balanced_accuracy, category) or None."""
    n = len(labels)
    pos_total = int(labels.sum())
    if pos_total == 0 or pos_total == n:
        return None
    best = None
    for cat in sorted(set(values.tolist())):
        mask = values == cat
        n_l = int(mask.sum())
        if n_l == 0 or n_l == n:
            continue
        pos_l = int(labels[mask].sum())
        ba = float(
            _balanced_accuracy(
                np.array([pos_l]),
                np.array([n_l]),
                np.array([pos_total - pos_l]),
                np.array([n - n_l]),
                pos_total,
                n,
            )[0]
        )
        if best is None or ba > best[0]:
            best = (ba, float(cat))
    return best


def learn_ff_tree(
    X: np.ndarray,
    y: np.ndarray,
    max_leaves: int = N_FEATURES,
    categorical: frozenset[int] = frozenset(),
) -> FFTree:
    """Greedy deterministic FF-tree induction on binary labels."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(y) == 0:
        raise ValueError("cannot learn from an empty example set")
    if max_leaves < 2:
        raise ValueError("max_leaves must be at least 2")
    remaining = np.arange(len(y))
    cues: list[Cue] = []
    while len(cues) < max_leaves - 1:
        labels = y[remaining]
        if labels.min() == labels.max():
            break
        best = None  # (ba, feature, is_cat, threshold)
        for f in range(X.shape[1]):
            vals = X[remaining, f]
            if f in categorical:
                found = _best_split_categorical(vals, labels)
            else:
                found = _best_split_numeric(vals, labels)
            if found is None:
                continue
            ba, threshold = found
            if best is None or ba > best[0] + 1e-12:
                best = (ba, f, f in categorical, threshold)
        if best is None or best[0] <= 0.5 + 1e-12:
            break
        _, f, is_cat, threshold = best
        vals = X[remaining, f]
        test = (vals == threshold) if is_cat else (vals <= threshold)
        for side in (True, False):
            side_labels = labels[test == side]
            assert len(side_labels) > 0
        pos_t, n_t = int(labels[test].sum()), int(test.sum())
        pos_f, n_f = int(labels[~test].sum()), int((~test).sum())
        purity_t = max(pos_t, n_t - pos_t) / n_t
        purity_f = max(pos_f, n_f - pos_f) / n_f
        exit_side = purity_t >= purity_f
        if exit_side:
            exit_label = _majority(pos_t, n_t)
            keep = ~test
        else:
            exit_label = _majority(pos_f, n_f)
            keep = test
        cues.append(Cue(f, is_cat, float(threshold), bool(exit_side), exit_label))
        remaining = remaining[keep]
    labels = y[remaining]
    final_label = _majority(int(labels.sum()), len(labels)) if len(labels) else 0
    return FFTree(tuple(cues), final_label)


def batch_predict(tree: FFTree, X: np.ndarray) -> np.ndarray:
    """Vectorized FF-tree evaluation over the rows of ``X``."""
    n = X.shape[0]
    out = np.full(n, tree.final_label, dtype=int)
    remaining = np.arange(n)
    for cue in tree.cues:
        if remaining.size == 0:
            break
        vals = X[remaining, cue.feature]
        test = (vals == cue.threshold) if cue.categorical else (vals <= cue.threshold)
        exits = test == cue.exit_side
        out[remaining[exits]] = cue.exit_label
        remaining = remaining[~exits]
    return out


# ---------------------------------------------------------------------------
# combiner decision tree (over the 8 expert votes)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CombinerNode:
    """Internal node (feature set, label None) or leaf (feature None)."""

    feature: Optional[int] = None
    label: Optional[int] = None
    low: Optional["CombinerNode"] = None
    high: Optional["CombinerNode"] = None

    def predict(self, votes: Sequence[int]) -> int:
        node = self
        while node.feature is not None:
            node = node.high if votes[node.feature] else node.low
        return node.label


def _entropy(counter: Counter) -> float:
    total = sum(counter.values())
    h = 0.0
    for c in counter.values():
        if c:
            p = c / total
            h -= p * math.log2(p)
    return h


def _majority_action(counter: Counter) -> int:
    return min(counter, key=lambda a: (-counter[a], a))


def _build_combiner(groups: dict, available: tuple[int, ...], depth: int) -> CombinerNode:
    """``groups`` maps vote tuples to Counters of true actions."""
    total = Counter()
    for c in groups.values():
        total.update(c)
    if len(total) == 1 or not available or depth == 0:
        return CombinerNode(label=_majority_action(total))
    n = sum(total.values())
    base = _entropy(total)
    best = None  # (gain, feature)
    for f in available:
        side = {0: Counter(), 1: Counter()}
        for votes, c in groups.items():
            side[votes[f]].update(c)
        cond = sum(
            (sum(side[v].values()) / n) * _entropy(side[v]) for v in (0, 1) if side[v]
        )
        gain = base - cond
        if best is None or gain > best[0] + 1e-12:
            best = (gain, f)
    if best is None or best[0] <= 1e-12:
        return CombinerNode(label=_majority_action(total))
    _, f = best
    rest = tuple(g for g in available if g != f)
    lows = {v: c for v, c in groups.items() if v[f] == 0}
    highs = {v: c for v, c in groups.items() if v[f] == 1}
    fallback = CombinerNode(label=_majority_action(total))
    return CombinerNode(
        feature=f,
        low=_build_combiner(lows, rest, depth - 1) if lows else fallback,
        high=_build_combiner(highs, rest, depth - 1) if highs else fallback,
    )


# ---------------------------------------------------------------------------
# stacked model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StackedModel:
    trees: tuple[FFTree, ...]
    combiner: CombinerNode
    train_count: int

    def predict(self, vec: Sequence[float]) -> int:
        votes = tuple(tree.predict(vec) for tree in self.trees)
        return self.combiner.predict(votes)


def learn_stacked(X: np.ndarray, y: np.ndarray, max_leaves: int = N_FEATURES) -> StackedModel:
    """Train the eight one-vs-rest FF trees plus the combiner."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(y) == 0:
        raise ValueError("cannot learn from an empty example set")
    trees = tuple(
        learn_ff_tree(X, (y == k).astype(int), max_leaves, CATEGORICAL_FEATURES)
        for k in range(N_ACTIONS)
    )
    votes = np.column_stack([batch_predict(t, X) for t in trees])
    groups: dict[tuple[int, ...], Counter] = {}
    for row, label in zip(votes, y):
        groups.setdefault(tuple(int(v) for v in row), Counter())[int(label)] += 1
    combiner = _build_combiner(groups, tuple(range(N_ACTIONS)), N_ACTIONS)
    return StackedModel(trees=trees, combiner=combiner, train_count=len(y))


def predict_action(model: StackedModel, vec: Sequence[float]) -> int:
    return model.predict(vec)


def accuracy(model: StackedModel, X: np.ndarray, y: np.ndarray) -> float:
    if len(y) == 0:
        return 0.0
    hits = sum(1 for row, lab in zip(X, y) if model.predict(row) == int(lab))
    return hits / len(y)


# ---------------------------------------------------------------------------
# agreement tracking and model selection
# ---------------------------------------------------------------------------


class AgreementTracker:
    """Sliding window of prediction-matches-observation flags."""

    def __init__(self, window: int = WINDOW_DEFAULT, flags: Iterable[int] = ()):
        if window < 1:
            raise ValueError("window must be positive")
        self.window = window
        self.flags: deque[int] = deque(flags, maxlen=window)

    @property
    def fraction(self) -> float:
        """Windowed agreement mean; an empty window reports 1.0 so a model
        is trusted until evidence accumulates."""
        if not self.flags:
            return 1.0
        return sum(self.flags) / len(self.flags)

    def update(self, predicted: int, actual: int) -> float:
        self.flags.append(int(predicted == actual))
        return self.fraction


@dataclass
class ModelLibrary:
    models: dict[int, StackedModel] = field(default_factory=dict)
    assignment: dict[int, int] = field(default_factory=dict)
    trackers: dict[tuple[int, int], AgreementTracker] = field(default_factory=dict)

    def tracker(self, agent: int, type_id: int, window: int = WINDOW_DEFAULT) -> AgreementTracker:
        key = (agent, type_id)
        if key not in self.trackers:
            self.trackers[key] = AgreementTracker(window=window)
        return self.trackers[key]

    def next_type_id(self) -> int:
        return max(self.models, default=-1) + 1


def select_or_flag(lib: ModelLibrary, theta: float = THETA_DEFAULT) -> dict:
    """Per assigned agent: keep the current model, switch, or flag for a new
    one.  An untracked (agent, model) pair counts as full agreement."""
    decisions = {}
    for agent in sorted(lib.assignment):
        current = lib.assignment[agent]
        if _fraction(lib, agent, current) >= theta:
            decisions[agent] = ("keep", current)
            continue
        best = None  # (fraction, type_id)
        for type_id in sorted(lib.models):
            frac = _fraction(lib, agent, type_id)
            if frac >= theta and (best is None or frac > best[0]):
                best = (frac, type_id)
        if best is not None:
            decisions[agent] = ("switch", best[1])
        else:
            decisions[agent] = ("flag_new_model", None)
    return decisions


def _fraction(lib: ModelLibrary, agent: int, type_id: int) -> float:
    tracker = lib.trackers.get((agent, type_id))
    return 1.0 if tracker is None else tracker.fraction


# ---------------------------------------------------------------------------
# incremental refit
# ---------------------------------------------------------------------------


def incremental_update(
    model: Optional[StackedModel],
    buffer: Sequence[tuple[Sequence[float], int]],
    reservoir: Optional[Sequence[tuple[Sequence[float], int]]] = None,
    max_leaves: int = N_FEATURES,
) -> StackedModel:
    """Refit on reservoir + buffer; keep the old model if it holds up better.

    Every fifth combined example is held out for the comparison; with no
    prior model (or too few examples to hold any out) the refit is returned
    directly, so an empty reservoir reduces to ``learn_stacked``.
    """
    combined = list(reservoir or []) + list(buffer)
    if not combined:
        raise ValueError("no examples to update from")
    X = np.array([np.asarray(v, dtype=float) for v, _ in combined])
    y = np.array([int(lab) for _, lab in combined], dtype=int)
    if model is None:
        return learn_stacked(X, y, max_leaves)
    hold = np.arange(len(y)) % 5 == 4
    if not hold.any():
        return learn_stacked(X, y, max_leaves)
    new_model = learn_stacked(X[~hold], y[~hold], max_leaves)
    if accuracy(new_model, X[hold], y[hold]) >= accuracy(model, X[hold], y[hold]):
        return new_model
    return model


# ---------------------------------------------------------------------------
# serialization (versioned JSON)
# ---------------------------------------------------------------------------


def _tree_to_dict(tree: FFTree) -> dict:
    return {
        "cues": [
            {
                "feature": c.feature,
                "categorical": c.categorical,
                "threshold": c.threshold,
                "exit_side": c.exit_side,
                "exit_label": c.exit_label,
            }
            for c in tree.cues
        ],
        "final_label": tree.final_label,
    }


def _tree_from_dict(d: dict) -> FFTree:
    return FFTree(
        tuple(
            Cue(c["feature"], c["categorical"], c["threshold"], c["exit_side"], c["exit_label"])
            for c in d["cues"]
        ),
        d["final_label"],
    )


def _node_to_dict(node: CombinerNode) -> dict:
    if node.feature is None:
        return {"label": node.label}
    return {
        "feature": node.feature,
        "low": _node_to_dict(node.low),
        "high": _node_to_dict(node.high),
    }


def _node_from_dict(d: dict) -> CombinerNode:
    if "feature" not in d:
        return CombinerNode(label=d["label"])
    return CombinerNode(
        feature=d["feature"],
        low=_node_from_dict(d["low"]),
        high=_node_from_dict(d["high"]),
    )


def model_to_dict(model: StackedModel) -> dict:
    return {
        "trees": [_tree_to_dict(t) for t in model.trees],
        "combiner": _node_to_dict(model.combiner),
        "train_count": model.train_count,
    }


def model_from_dict(d: dict) -> StackedModel:
    return StackedModel(
        trees=tuple(_tree_from_dict(t) for t in d["trees"]),
        combiner=_node_from_dict(d["combiner"]),
        train_count=d["train_count"],
    )


def save_library(lib: ModelLibrary, path) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "models": {str(t): model_to_dict(m) for t, m in sorted(lib.models.items())},
        "assignment": {str(a): t for a, t in sorted(lib.assignment.items())},
        "trackers": [
            {"agent": a, "type": t, "window": tr.window, "flags": list(tr.flags)}
            for (a, t), tr in sorted(lib.trackers.items())
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_library(path) -> ModelLibrary:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format_version") != FORMAT_VERSION:
        raise ValueError(
            f"unsupported model file version {payload.get('format_version')!r}"
        )
    lib = ModelLibrary()
    for t, d in payload["models"].items():
        lib.models[int(t)] = model_from_dict(d)
    for a, t in payload["assignment"].items():
        lib.assignment[int(a)] = int(t)
    for row in payload["trackers"]:
        lib.trackers[(row["agent"], row["type"])] = AgreementTracker(
            window=row["window"], flags=row["flags"]
        )
    return lib
