"""User- and item-based nearest neighbours with shrunk cosine similarity."""

from __future__ import annotations

import numpy as np

from .base import FittedRecommender, as_csr, top_k_neighbors


def shrunk_cosine(vectors, shrink: float = 0.0) -> np.ndarray:
    """Row-by-row similarity ``a.b / (|a||b| + shrink)``; zero rows give 0."""
    v = as_csr(vectors)
    dots = (v @ v.T).toarray()
    norms = np.sqrt(np.asarray(v.multiply(v).sum(axis=1)).ravel())
    denom = np.outer(norms, norms) + shrink
    return np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)


def _check(n_neighbors, shrink):
    if n_neighbors < 1:
        raise ValueError("n_neighbors must be >= 1")
    if shrink < 0:
        raise ValueError("shrink must be >= 0")


def fit_uknn(e, n_neighbors: int = 100, shrink: float = 10.0) -> FittedRecommender:
    """Score ``(u, i)`` as the similarity-weighted vote of ``u``'s neighbours."""
    _check(n_neighbors, shrink)
    e = as_csr(e)
    sim = top_k_neighbors(shrunk_cosine(e, shrink), int(n_neighbors))
    return FittedRecommender("UKNN", {"n_neighbors": int(n_neighbors), "shrink": float(shrink)},
                             {"similarity": sim, "n_items": np.array(e.shape[1])})


def fit_iknn(e, n_neighbors: int = 100, shrink: float = 10.0) -> FittedRecommender:
    """Score ``(u, i)`` from ``u``'s enrollments among the neighbours of ``i``."""
    _check(n_neighbors, shrink)
    e = as_csr(e)
    sim = top_k_neighbors(shrunk_cosine(e.T, shrink), int(n_neighbors))
    return FittedRecommender("IKNN", {"n_neighbors": int(n_neighbors), "shrink": float(shrink)},
                             {"similarity": sim, "n_users": np.array(e.shape[0])})
