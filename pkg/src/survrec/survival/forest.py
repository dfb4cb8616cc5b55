"""Random survival forest: log-rank splits, Nelson-Aalen leaves."""

from __future__ import annotations

import numpy as np

from .base import FittedSurvivalModel, check_targets


def nelson_aalen(time, event):
    """Distinct event times and the cumulative hazard ``sum_{t_j <= t} d_j / R_j`` at each."""
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    ts = np.sort(time)
    ev_times, d = np.unique(time[event], return_counts=True)
    at_risk = len(ts) - np.searchsorted(ts, ev_times, side="left")
    return ev_times, np.cumsum(d / at_risk)


def log_rank_scores(t_sorted, e_sorted, left_masks):
    """Standardised log-rank chi-square for several candidate splits of one node.

    ``left_masks`` is ``(n_candidates, n)`` in the node's time-sorted order.
    Returns ``-inf`` for splits with zero variance.
    """
    n = len(t_sorted)
    groups = np.flatnonzero(np.r_[True, t_sorted[1:] != t_sorted[:-1]])
    deaths = np.add.reduceat(e_sorted.astype(float), groups)
    keep = deaths > 0
    at_risk = (n - groups[keep]).astype(float)
    deaths = deaths[keep]
    lm = left_masks.astype(float)
    rev = np.cumsum(lm[:, ::-1], axis=1)[:, ::-1]
    y_left = rev[:, groups[keep]]
    d_left = np.add.reduceat(lm * e_sorted, groups, axis=1)[:, keep]
    frac = y_left / at_risk
    num = np.sum(d_left - frac * deaths, axis=1)
    ratio = np.divide(at_risk - deaths, at_risk - 1, out=np.zeros_like(at_risk), where=at_risk > 1)
    var = np.sum(frac * (1.0 - frac) * ratio * deaths, axis=1)
    return np.divide(num ** 2, var, out=np.full(len(num), -np.inf), where=var > 1e-12)


def _candidate_thresholds(values, n_thresholds):
    uniq = np.unique(values)
    if len(uniq) < 2:
        return uniq[:0]
    if len(uniq) - 1 <= n_thresholds:
        return uniq[:-1]
    q = np.quantile(values, np.linspace(0.0, 1.0, n_thresholds + 2)[1:-1], method="lower")
    q = np.unique(q.astype(values.dtype))
    return q[q < uniq[-1]]


class _TreeBuilder:
    def __init__(self, x32, time, event, grid, min_samples_leaf, min_samples_split, max_depth,
                 max_features, n_thresholds, rng):
        self.x = x32
        self.time = time
        self.event = event
        self.grid = grid
        self.min_leaf = min_samples_leaf
        self.min_split = min_samples_split
        self.max_depth = max_depth
        self.mtry = max_features
        self.n_thr = n_thresholds
        self.rng = rng
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []
        self.leaf_times, self.leaf_chf = [], []

    def _new_node(self):
        for lst, v in ((self.feature, -2), (self.threshold, np.nan), (self.left, -1),
                       (self.right, -1), (self.value, 0.0)):
            lst.append(v)
        self.leaf_times.append(np.zeros(0))
        self.leaf_chf.append(np.zeros(0))
        return len(self.feature) - 1

    def _make_leaf(self, node, idx):
        ev_t, chf = nelson_aalen(self.time[idx], self.event[idx])
        self.leaf_times[node] = ev_t
        self.leaf_chf[node] = chf
        # risk = sum of the step function over the training event-time grid
        increments = np.diff(np.r_[0.0, chf])
        n_after = len(self.grid) - np.searchsorted(self.grid, ev_t, side="left")
        self.value[node] = float(np.sum(increments * n_after))

    def _best_split(self, idx):
        order = np.argsort(self.time[idx], kind="stable")
        idx = idx[order]
        t, e = self.time[idx], self.event[idx]
        best = (-np.inf, None, None)
        p = self.x.shape[1]
        feats = self.rng.choice(p, size=min(self.mtry, p), replace=False)
        for f in feats:
            col = self.x[idx, f]
            thr = _candidate_thresholds(col, self.n_thr)
            if len(thr) == 0:
                continue
            masks = col[None, :] <= thr[:, None]
            n_left = masks.sum(axis=1)
            ok = (n_left >= self.min_leaf) & (len(idx) - n_left >= self.min_leaf)
            if not ok.any():
                continue
            scores = log_rank_scores(t, e, masks[ok])
            j = int(np.argmax(scores))
            if scores[j] > best[0]:
                best = (scores[j], int(f), float(thr[ok][j]))
        return best

    def build(self, idx):
        root = self._new_node()
        stack = [(root, idx, 0)]
        while stack:
            node, idx, depth = stack.pop()
            split = None
            if (depth < self.max_depth and len(idx) >= self.min_split
                    and len(idx) >= 2 * self.min_leaf and self.event[idx].any()):
                score, f, thr = self._best_split(idx)
                if f is not None and np.isfinite(score):
                    split = (f, thr)
            if split is None:
                self._make_leaf(node, idx)
                continue
            f, thr = split
            go_left = self.x[idx, f] <= thr
            lnode, rnode = self._new_node(), self._new_node()
            self.feature[node], self.threshold[node] = f, thr
            self.left[node], self.right[node] = lnode, rnode
            stack.append((rnode, idx[~go_left], depth + 1))
            stack.append((lnode, idx[go_left], depth + 1))
        return root


def fit_rsf(ds, n_estimators: int = 100, min_samples_leaf: int = 15, min_samples_split: int = 15,
            max_depth: int = 8, seed: int = 0, max_features: int | str | None = "sqrt",
            n_thresholds: int = 32, bootstrap: bool = True) -> FittedSurvivalModel:
    """Bootstrap ensemble of log-rank survival trees.

    Each leaf stores its Nelson-Aalen cumulative hazard; the risk score of a
    leaf is that step function summed over the training event-time grid, and
    the ensemble risk is the mean over trees.
    """
    if n_estimators < 1:
        raise ValueError("n_estimators must be >= 1")
    if min_samples_leaf < 1 or min_samples_split < 2 or max_depth < 0:
        raise ValueError("invalid tree size limits")
    x, time, event = check_targets(ds)
    x32 = x.astype(np.float32)
    n, p = x.shape
    if max_features == "sqrt":
        mtry = max(1, int(np.sqrt(p)))
    elif max_features is None:
        mtry = p
    else:
        mtry = max(1, min(int(max_features), p))
    grid = np.unique(time[event])
    children = np.random.SeedSequence(seed).spawn(int(n_estimators))
    nodes = {k: [] for k in ("feature", "threshold", "left", "right", "value")}
    leaf_times, leaf_chf, roots = [], [], []
    offset = 0
    for child in children:
        rng = np.random.default_rng(child)
        idx = rng.integers(0, n, n) if bootstrap else np.arange(n)
        builder = _TreeBuilder(x32, time, event, grid, int(min_samples_leaf), int(min_samples_split),
                               int(max_depth), mtry, int(n_thresholds), rng)
        builder.build(np.sort(idx))
        left = np.array(builder.left, dtype=np.int64)
        right = np.array(builder.right, dtype=np.int64)
        nodes["feature"].append(np.array(builder.feature, dtype=np.int64))
        nodes["threshold"].append(np.array(builder.threshold, dtype=float))
        nodes["left"].append(np.where(left >= 0, left + offset, -1))
        nodes["right"].append(np.where(right >= 0, right + offset, -1))
        nodes["value"].append(np.array(builder.value, dtype=float))
        leaf_times.extend(builder.leaf_times)
        leaf_chf.extend(builder.leaf_chf)
        roots.append(offset)
        offset += len(left)
    arrays = {k: np.concatenate(v) for k, v in nodes.items()}
    arrays["roots"] = np.array(roots, dtype=np.int64)
    arrays["leaf_offset"] = np.r_[0, np.cumsum([len(t) for t in leaf_times])].astype(np.int64)
    arrays["leaf_times"] = np.concatenate(leaf_times) if leaf_times else np.zeros(0)
    arrays["leaf_chf"] = np.concatenate(leaf_chf) if leaf_chf else np.zeros(0)
    arrays["event_grid"] = grid
    return FittedSurvivalModel(
        "RSF",
        {"n_estimators": int(n_estimators), "min_samples_leaf": int(min_samples_leaf),
         "min_samples_split": int(min_samples_split), "max_depth": int(max_depth), "seed": int(seed),
         "max_features": max_features, "n_thresholds": int(n_thresholds), "bootstrap": bool(bootstrap)},
        arrays, n_features=p)
