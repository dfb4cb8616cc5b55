"""Item-item linear models: EASE (closed form) and SLIM (coordinate descent)."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .base import FittedRecommender, as_csr


def fit_ease(e, l2_norm: float = 500.0) -> FittedRecommender:
    """Closed-form shallow autoencoder with a zero-diagonal constraint."""
    if l2_norm <= 0:
        raise ValueError("l2_norm must be > 0")
    e = as_csr(e)
    gram = (e.T @ e).toarray()
    gram[np.diag_indices_from(gram)] += l2_norm
    p = np.linalg.inv(gram)
    b = -p / np.diag(p)
    np.fill_diagonal(b, 0.0)
    return FittedRecommender("EASE", {"l2_norm": float(l2_norm)},
                             {"coefficients": b, "n_users": np.array(e.shape[0])})


def slim_objective(gram, w, l1_norm, l2_norm, diag_target) -> float:
    """Sum over columns of ``1/2 w'Gw - g_j'w + 1/2 G_jj + l1|w| + l2/2 |w|^2``.

    ``gram`` is ``E'E / m``, so this equals ``1/(2m) |E - EW|^2`` plus penalties.
    """
    fit = 0.5 * np.sum(w * (gram @ w)) - np.sum(gram * w) + 0.5 * diag_target
    return float(fit + l1_norm * np.sum(np.abs(w)) + 0.5 * l2_norm * np.sum(w ** 2))


def slim_coordinate_descent(gram, l1_norm, l2_norm, max_iter=100, tol=1e-4, w=None):
    """Non-negative elastic net for every column of ``W`` at once.

    Column ``j`` regresses item ``j`` on all others (``W[j, j] = 0``). Each
    sweep updates coordinate ``k`` of every column exactly, keeping ``G W``
    current, so the objective never increases.
    """
    n = gram.shape[0]
    w = np.zeros((n, n)) if w is None else np.array(w, dtype=float)
    gw = gram @ w
    diag_target = float(np.trace(gram))
    history = [slim_objective(gram, w, l1_norm, l2_norm, diag_target)]
    for _ in range(int(max_iter)):
        for k in range(n):
            denom = gram[k, k] + l2_norm
            if denom <= 0:
                continue
            num = gram[k, :] - gw[k, :] + gram[k, k] * w[k, :] - l1_norm
            new = np.maximum(num / denom, 0.0)
            new[k] = 0.0
            delta = new - w[k, :]
            if np.any(delta):
                w[k, :] = new
                gw += np.outer(gram[:, k], delta)
        history.append(slim_objective(gram, w, l1_norm, l2_norm, diag_target))
        prev, cur = history[-2], history[-1]
        if prev - cur <= tol * max(abs(prev), 1e-12):
            break
    return w, np.array(history)


def fit_slim(e, topk: int = 100, l1_norm: float = 1e-3, l2_norm: float = 1e-2,
             max_iter: int = 100, tol: float = 1e-4) -> FittedRecommender:
    """Sparse linear method: non-negative, zero-diagonal item-item coefficients.

    Per item ``j`` minimises ``1/(2m) |E_j - E w_j|^2 + l1_norm |w_j|_1
    + l2_norm / 2 |w_j|^2``; then keeps the ``topk`` largest entries per column.
    """
    if topk < 1:
        raise ValueError("topk must be >= 1")
    if l1_norm < 0 or l2_norm < 0 or (l1_norm == 0 and l2_norm == 0):
        raise ValueError("penalties must be >= 0 and not both 0")
    e = as_csr(e)
    m = e.shape[0]
    gram = (e.T @ e).toarray() / m
    w, history = slim_coordinate_descent(gram, l1_norm, l2_norm, max_iter, tol)
    n = w.shape[0]
    if topk < n:
        order = np.argsort(-w, axis=0, kind="stable")
        drop = order[topk:, :]
        w[drop, np.arange(n)[None, :]] = 0.0
    coef = sp.csr_matrix(w)
    coef.eliminate_zeros()
    return FittedRecommender(
        "SLIM",
        {"topk": int(topk), "l1_norm": float(l1_norm), "l2_norm": float(l2_norm),
         "max_iter": int(max_iter), "tol": float(tol)},
        {"coefficients": coef, "n_users": np.array(m)}, history=history)
