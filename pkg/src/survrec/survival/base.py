"""Fitted survival model container, risk prediction and serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

SURVIVAL_KINDS = ("CoxNet", "RSF", "XGBCox")


def check_targets(ds):
    if not getattr(ds, "has_targets", True) or ds.y_time is None:
        raise ValueError("survival dataset has no (time, event) targets")
    x = np.asarray(ds.X, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("feature matrix contains non-finite values")
    return x, np.asarray(ds.y_time, dtype=float), np.asarray(ds.y_event, dtype=bool)


def tree_apply(x32, feature, threshold, left, right, roots):
    """Leaf index reached by every row in every tree.

    Trees are stored as flat node arrays; a node with ``left == -1`` is a
    leaf. ``x32`` is float32, matching how split thresholds were chosen.
    """
    n = x32.shape[0]
    out = np.empty((len(roots), n), dtype=np.int64)
    rows = np.arange(n)
    for t, root in enumerate(roots):
        node = np.full(n, root, dtype=np.int64)
        while True:
            internal = left[node] >= 0
            if not internal.any():
                break
            idx = rows[internal]
            nd = node[internal]
            go_left = x32[idx, feature[nd]] <= threshold[nd]
            node[internal] = np.where(go_left, left[nd], right[nd])
        out[t] = node
    return out


@dataclass(eq=False)
class FittedSurvivalModel:
    """Learned state of one survival model.

    CoxNet: ``coef``, ``mean``, ``scale``. Tree models: flat node arrays
    (``feature``, ``threshold``, ``left``, ``right``, ``value``) and ``roots``;
    RSF also keeps each leaf's Nelson-Aalen step function in ``leaf_times`` /
    ``leaf_chf`` sliced by ``leaf_offset``.
    """

    kind: str
    hyperparameters: dict
    arrays: dict
    n_features: int
    converged: bool = True
    history: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.kind not in SURVIVAL_KINDS:
            raise ValueError(f"unknown survival model kind {self.kind!r}")

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} feature columns, got shape {x.shape}")
        return x

    def leaves(self, x) -> np.ndarray:
        a = self.arrays
        return tree_apply(self._check(x).astype(np.float32), a["feature"], a["threshold"],
                          a["left"], a["right"], a["roots"])

    def tree_risks(self, x) -> np.ndarray:
        """Per-tree contributions, shape ``(n_trees, n_rows)``."""
        if self.kind == "CoxNet":
            raise TypeError("CoxNet has no trees")
        if len(self.arrays["roots"]) == 0:
            return np.zeros((0, np.asarray(x).shape[0]))
        return self.arrays["value"][self.leaves(x)]

    def predict_risk(self, x) -> np.ndarray:
        x = self._check(x)
        a = self.arrays
        if self.kind == "CoxNet":
            return ((x - a["mean"]) / a["scale"]) @ a["coef"]
        per_tree = self.tree_risks(x)
        if per_tree.shape[0] == 0:
            return np.zeros(x.shape[0])
        if self.kind == "RSF":
            return per_tree.mean(axis=0)
        return per_tree.sum(axis=0)

    def predict_cumulative_hazard(self, x, times) -> np.ndarray:
        """Ensemble Nelson-Aalen cumulative hazard (RSF only), shape ``(n_rows, n_times)``."""
        if self.kind != "RSF":
            raise TypeError("cumulative hazard is only available for RSF")
        a = self.arrays
        times = np.asarray(times, dtype=float)
        leaves = self.leaves(x)
        out = np.zeros((leaves.shape[1], len(times)))
        cache = {}
        for t in range(leaves.shape[0]):
            for r, leaf in enumerate(leaves[t]):
                if leaf not in cache:
                    lo, hi = a["leaf_offset"][leaf], a["leaf_offset"][leaf + 1]
                    lt, lc = a["leaf_times"][lo:hi], a["leaf_chf"][lo:hi]
                    pos = np.searchsorted(lt, times, side="right") - 1
                    cache[leaf] = np.where(pos >= 0, lc[np.maximum(pos, 0)], 0.0)
                out[r] += cache[leaf]
        return out / max(leaves.shape[0], 1)


def predict_risk(model: FittedSurvivalModel, x) -> np.ndarray:
    return model.predict_risk(x)


def save_survival_model(model: FittedSurvivalModel, path) -> None:
    meta = {
        "format": "survrec.survival/1",
        "kind": model.kind,
        "hyperparameters": model.hyperparameters,
        "n_features": model.n_features,
        "converged": model.converged,
        "arrays": list(model.arrays),
    }
    payload = {k: np.asarray(v) for k, v in model.arrays.items()}
    payload["__meta__"] = np.array(json.dumps(meta))
    payload["__history__"] = np.asarray(model.history, dtype=float)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_survival_model(path) -> FittedSurvivalModel:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["__meta__"]))
        if meta.get("format") != "survrec.survival/1":
            raise ValueError(f"{path}: not a survival model container")
        arrays = {k: z[k] for k in meta["arrays"]}
        history = z["__history__"]
    return FittedSurvivalModel(meta["kind"], meta["hyperparameters"], arrays, int(meta["n_features"]),
                               bool(meta["converged"]), history)
