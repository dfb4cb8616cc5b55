"""Latent-factor recommenders: PureSVD, NMF (HALS) and implicit weighted ALS."""

from __future__ import annotations

import numpy as np

from .base import FittedRecommender, as_csr


def fit_svd(e, n_factors: int = 10) -> FittedRecommender:
    """Truncated SVD of the enrollment matrix; scores are the rank-k reconstruction."""
    e = as_csr(e)
    m, n = e.shape
    if not 1 <= n_factors <= min(m, n):
        raise ValueError(f"n_factors must be in [1, {min(m, n)}], got {n_factors}")
    u, s, vt = np.linalg.svd(e.toarray(), full_matrices=False)
    k = int(n_factors)
    return FittedRecommender("SVD", {"n_factors": k},
                             {"user_factors": u[:, :k] * s[:k], "item_factors": vt[:k].T.copy()})


def nmf_objective(e, p, q, alpha, l1_ratio) -> float:
    resid = e - p @ q.T
    l1 = alpha * l1_ratio
    l2 = alpha * (1.0 - l1_ratio)
    return float(0.5 * np.sum(resid ** 2) + l1 * (p.sum() + q.sum())
                 + 0.5 * l2 * (np.sum(p ** 2) + np.sum(q ** 2)))


def _hals_sweep(a, b, w, l1, l2):
    """One exact pass over the columns of ``w`` for ``min 1/2|X - w h'|^2 + penalties``.

    ``a = X h`` and ``b = h'h`` are held fixed; each column update is the exact
    non-negative minimiser given the rest.
    """
    for k in range(w.shape[1]):
        denom = b[k, k] + l2
        if denom <= 0:
            w[:, k] = 0.0
            continue
        num = a[:, k] - w @ b[:, k] + w[:, k] * b[k, k] - l1
        w[:, k] = np.maximum(num / denom, 0.0)


def fit_nmf(e, n_factors: int = 50, l1_ratio: float = 0.5, alpha: float = 0.01,
            max_iter: int = 200, tol: float = 1e-6, seed: int = 0) -> FittedRecommender:
    """Elastic-net regularised NMF by hierarchical alternating least squares.

    Minimises ``1/2 |E - P Q'|^2 + alpha * l1_ratio * (sum P + sum Q)
    + alpha * (1 - l1_ratio) / 2 * (|P|^2 + |Q|^2)`` with ``P, Q >= 0``.
    """
    if n_factors < 1:
        raise ValueError("n_factors must be >= 1")
    if not 0.0 <= l1_ratio <= 1.0:
        raise ValueError("l1_ratio must be in [0, 1]")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    x = as_csr(e).toarray()
    m, n = x.shape
    k = int(n_factors)
    rng = np.random.default_rng(seed)
    scale = max(x.mean(), 1e-12) / k
    p = rng.uniform(0.0, 1.0, (m, k)) * scale
    q = rng.uniform(0.0, 1.0, (n, k)) * scale
    l1 = alpha * l1_ratio
    l2 = alpha * (1.0 - l1_ratio)
    history = [nmf_objective(x, p, q, alpha, l1_ratio)]
    for _ in range(int(max_iter)):
        _hals_sweep(x @ q, q.T @ q, p, l1, l2)
        _hals_sweep(x.T @ p, p.T @ p, q, l1, l2)
        history.append(nmf_objective(x, p, q, alpha, l1_ratio))
        if history[-2] - history[-1] <= tol * max(abs(history[-2]), 1e-12):
            break
    return FittedRecommender(
        "NMF",
        {"n_factors": k, "l1_ratio": float(l1_ratio), "alpha": float(alpha),
         "max_iter": int(max_iter), "seed": int(seed)},
        {"user_factors": p, "item_factors": q}, history=np.array(history))


def wrmf_objective(x, c, users, items, regularization) -> float:
    resid = x - users @ items.T
    return float(np.sum(c * resid ** 2)
                 + regularization * (np.sum(users ** 2) + np.sum(items ** 2)))


def _als_half_step(conf_extra, fixed, regularization):
    """Solve every row's ridge system exactly given the other side's factors.

    ``conf_extra`` is the sparse ``C - 1`` matrix; its pattern is the positive set.
    """
    k = fixed.shape[1]
    gram = fixed.T @ fixed + regularization * np.eye(k)
    out = np.zeros((conf_extra.shape[0], k))
    indptr, indices, data = conf_extra.indptr, conf_extra.indices, conf_extra.data
    for r in range(conf_extra.shape[0]):
        idx = indices[indptr[r]:indptr[r + 1]]
        w = data[indptr[r]:indptr[r + 1]]
        y = fixed[idx]
        a = gram + (y.T * w) @ y
        b = y.T @ (1.0 + w)
        out[r] = np.linalg.solve(a, b)
    return out


def fit_wrmf(e, n_factors: int = 50, regularization: float = 0.01, epochs: int = 15,
             confidence_weight: float = 40.0, seed: int = 0) -> FittedRecommender:
    """Implicit-feedback weighted matrix factorization by alternating least squares.

    Observed cells carry confidence ``1 + confidence_weight`` with target 1,
    the rest confidence 1 with target 0. Item factors are initialised from the
    seed; user factors come from the first exact half-step, so the result does
    not depend on user order.
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if regularization <= 0:
        raise ValueError("regularization must be > 0")
    if n_factors < 1:
        raise ValueError("n_factors must be >= 1")
    e = as_csr(e)
    e.data[:] = 1.0
    m, n = e.shape
    k = int(n_factors)
    rng = np.random.default_rng(seed)
    items = rng.normal(0.0, 0.1 / np.sqrt(k), (n, k))
    conf_u = e.copy()
    conf_u.data[:] = float(confidence_weight)
    conf_i = conf_u.T.tocsr()
    dense = e.toarray()
    c = 1.0 + confidence_weight * dense
    history = []
    users = np.zeros((m, k))
    for _ in range(int(epochs)):
        users = _als_half_step(conf_u, items, regularization)
        items = _als_half_step(conf_i, users, regularization)
        history.append(wrmf_objective(dense, c, users, items, regularization))
    return FittedRecommender(
        "WRMF",
        {"n_factors": k, "regularization": float(regularization), "epochs": int(epochs),
         "confidence_weight": float(confidence_weight), "seed": int(seed)},
        {"user_factors": users, "item_factors": items}, history=np.array(history))
