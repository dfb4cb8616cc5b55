"""Gradient-boosted Cox model with regression-tree base learners."""

from __future__ import annotations

import numpy as np
from sklearn.tree import DecisionTreeRegressor

from .base import FittedSurvivalModel, check_targets
from .cox import RiskSets, cox_gradient, cox_partial_loglik


def cox_negative_gradient(f, time, event, risk_sets=None) -> np.ndarray:
    """Negative gradient of ``-LL(f)``, i.e. the gradient of the log partial likelihood."""
    return cox_gradient(f, time, event, risk_sets)


def _export_tree(tree: DecisionTreeRegressor, scale: float):
    t = tree.tree_
    return (t.feature.astype(np.int64), t.threshold.astype(float),
            t.children_left.astype(np.int64), t.children_right.astype(np.int64),
            t.value[:, 0, 0] * scale)


def fit_xgb_cox(ds, learning_rate: float = 0.3, n_estimators: int = 100, min_samples_leaf: int = 10,
                min_samples_split: int = 10, max_depth: int = 6, seed: int = 0,
                max_backtracks: int = 30) -> FittedSurvivalModel:
    """Stagewise additive model ``f(x) = sum_b nu_b tree_b(x)`` for the Cox loss.

    Each stage fits a least-squares tree to the pseudo-response and adds it
    with multiplier ``learning_rate``; the multiplier is halved when that
    step would raise the training loss, so ``-LL`` never increases.
    """
    if not 0.0 < learning_rate <= 1.0:
        raise ValueError("learning_rate must be in (0, 1]")
    if n_estimators < 0:
        raise ValueError("n_estimators must be >= 0")
    x, time, event = check_targets(ds)
    rs = RiskSets(time, event)
    x32 = x.astype(np.float32)
    seeds = np.random.SeedSequence(seed).generate_state(max(int(n_estimators), 1))
    f = np.zeros(len(time))
    loss = -cox_partial_loglik(f, time, event, rs)
    history = [loss]
    parts = {k: [] for k in ("feature", "threshold", "left", "right", "value")}
    roots = []
    offset = 0
    for b in range(int(n_estimators)):
        resid = cox_negative_gradient(f, time, event, rs)
        tree = DecisionTreeRegressor(max_depth=int(max_depth), min_samples_split=int(min_samples_split),
                                     min_samples_leaf=int(min_samples_leaf),
                                     random_state=int(seeds[b]))
        tree.fit(x32, resid)
        step = tree.predict(x32)
        nu = float(learning_rate)
        for _ in range(max_backtracks):
            cand = -cox_partial_loglik(f + nu * step, time, event, rs)
            if cand <= loss:
                break
            nu *= 0.5
        else:
            nu = 0.0
            cand = loss
        f = f + nu * step
        loss = cand
        history.append(loss)
        feat, thr, left, right, value = _export_tree(tree, nu)
        internal = left >= 0
        left = np.where(internal, left + offset, -1)
        right = np.where(internal, right + offset, -1)
        for k, v in zip(parts, (feat, thr, left, right, value)):
            parts[k].append(v)
        roots.append(offset)
        offset += len(feat)
    arrays = {k: (np.concatenate(v) if v else np.zeros(0, dtype=np.int64 if k in ("feature", "left", "right") else float))
              for k, v in parts.items()}
    arrays["roots"] = np.array(roots, dtype=np.int64)
    return FittedSurvivalModel(
        "XGBCox",
        {"learning_rate": float(learning_rate), "n_estimators": int(n_estimators),
         "min_samples_leaf": int(min_samples_leaf), "min_samples_split": int(min_samples_split),
         "max_depth": int(max_depth), "seed": int(seed)},
        arrays, n_features=x.shape[1], history=np.array(history))
