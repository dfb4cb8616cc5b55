"""Concordance index and cross-validated model selection."""

from __future__ import annotations

import logging
from typing import Mapping

import numpy as np

logger = logging.getLogger(__name__)


def concordance_counts(time, event, risk):
    """``(concordant, tied_risk, comparable)`` over pairs with ``event_i`` and ``t_i < t_j``.

    Subjects are swept in decreasing time; a Fenwick tree over risk ranks holds
    everyone whose time is strictly larger than the current tie group.
    """
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    risk = np.asarray(risk, dtype=float)
    n = len(time)
    uniq, rank = np.unique(risk, return_inverse=True)
    size = len(uniq)
    tree = np.zeros(size + 1, dtype=np.int64)

    def add(i):
        i += 1
        while i <= size:
            tree[i] += 1
            i += i & -i

    def prefix(i):  # count of inserted ranks < i
        s = 0
        while i > 0:
            s += tree[i]
            i -= i & -i
        return s

    order = np.argsort(-time, kind="stable")
    concordant = tied = comparable = 0
    inserted = 0
    pos = 0
    while pos < n:
        end = pos
        while end < n and time[order[end]] == time[order[pos]]:
            end += 1
        group = order[pos:end]
        for i in group:
            if event[i]:
                r = int(rank[i])
                below = prefix(r)
                at_or_below = prefix(r + 1)
                concordant += below
                tied += at_or_below - below
                comparable += inserted
        for i in group:
            add(int(rank[i]))
        inserted += len(group)
        pos = end
    return concordant, tied, comparable


def c_index(time, event, risk) -> float:
    """Share of comparable pairs where the earlier event has the higher risk; risk ties count 1/2."""
    concordant, tied, comparable = concordance_counts(time, event, risk)
    if comparable == 0:
        raise ValueError("no comparable pairs")
    return (concordant + 0.5 * tied) / comparable


def c_index_bruteforce(time, event, risk) -> float:
    """O(n^2) pair enumeration; reference for :func:`c_index`."""
    concordant = tied = comparable = 0
    n = len(time)
    for i in range(n):
        if not event[i]:
            continue
        for j in range(n):
            if time[i] < time[j]:
                comparable += 1
                if risk[i] > risk[j]:
                    concordant += 1
                elif risk[i] == risk[j]:
                    tied += 1
    if comparable == 0:
        raise ValueError("no comparable pairs")
    return (concordant + 0.5 * tied) / comparable


def fit_survival(kind: str, ds, hyperparameters: Mapping | None = None, seed: int = 0):
    """Dispatch to the CoxNet, RSF or XGBCox fitter."""
    from .boosting import fit_xgb_cox
    from .cox import fit_coxnet
    from .forest import fit_rsf

    params = dict(hyperparameters or {})
    key = kind.lower()
    if key == "coxnet":
        return fit_coxnet(ds, **params)
    if key == "rsf":
        params.setdefault("seed", seed)
        return fit_rsf(ds, **params)
    if key in ("xgb", "xgbcox"):
        params.setdefault("seed", seed)
        return fit_xgb_cox(ds, **params)
    raise ValueError(f"unknown survival model kind {kind!r}; expected CoxNet, RSF or XGB")


def kfold_indices(n: int, folds: int, seed: int):
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, folds)


def cv_c_index(ds, kind: str, hyperparameters: Mapping | None = None, folds: int = 5,
               seed: int = 0, report: list | None = None) -> float:
    """Mean held-out C-index over a seeded ``folds``-way partition of ``ds``.

    Folds whose training part has no events or whose held-out part has no
    comparable pairs are skipped with a warning. ``report`` collects
    ``(fold, c_index)`` rows when given.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    parts = kfold_indices(len(ds), folds, seed)
    scores = []
    for f, test_idx in enumerate(parts):
        train_idx = np.sort(np.concatenate([p for g, p in enumerate(parts) if g != f]))
        test_idx = np.sort(test_idx)
        train = ds.subset(train_idx)
        test = ds.subset(test_idx)
        if not train.y_event.any():
            logger.warning("fold %d skipped: no events in training part", f)
            continue
        model = fit_survival(kind, train, hyperparameters, seed=seed + f)
        try:
            score = c_index(test.y_time, test.y_event, model.predict_risk(test.X))
        except ValueError:
            logger.warning("fold %d skipped: no comparable pairs", f)
            continue
        scores.append(score)
        if report is not None:
            report.append((f, score))
    if not scores:
        raise ValueError("no usable folds")
    return float(np.mean(scores))
