"""Shared fitted-model container, candidate scoring and top-l ranking."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from ..rerank import Entry, RankedList

KINDS = ("UKNN", "IKNN", "SVD", "NMF", "WRMF", "EASE", "SLIM")


def as_csr(e) -> sp.csr_matrix:
    if sp.issparse(e):
        out = sp.csr_matrix(e, dtype=float, copy=True)
    else:
        out = sp.csr_matrix(np.asarray(e, dtype=float))
    out.sum_duplicates()
    out.sort_indices()
    return out


@dataclass(eq=False)
class FittedRecommender:
    """Learned state of one CF model.

    ``arrays`` holds the model-specific parameters: ``similarity`` (KNN, sparse),
    ``user_factors``/``item_factors`` (SVD, NMF, WRMF) or ``coefficients``
    (EASE, SLIM; sparse for SLIM). ``history`` records the training objective
    after each outer iteration for the iterative solvers.
    """

    kind: str
    hyperparameters: dict
    arrays: dict
    users: tuple = ()
    courses: tuple = ()
    history: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown recommender kind {self.kind!r}")

    @property
    def shape(self) -> tuple[int, int]:
        a = self.arrays
        if self.kind == "UKNN":
            return a["similarity"].shape[0], int(a["n_items"])
        if self.kind == "IKNN":
            return int(a["n_users"]), a["similarity"].shape[0]
        if self.kind in ("SVD", "NMF", "WRMF"):
            return a["user_factors"].shape[0], a["item_factors"].shape[0]
        return int(a["n_users"]), a["coefficients"].shape[0]

    def predict(self, e) -> np.ndarray:
        """Dense score matrix for every (user, course) of the fit-time axes."""
        e = as_csr(e)
        if e.shape != self.shape:
            raise ValueError(f"enrollment matrix shape {e.shape} does not match model {self.shape}")
        a = self.arrays
        if self.kind == "UKNN":
            scores = a["similarity"] @ e
        elif self.kind == "IKNN":
            scores = e @ a["similarity"].T
        elif self.kind in ("SVD", "NMF", "WRMF"):
            scores = a["user_factors"] @ a["item_factors"].T
        else:
            scores = e @ a["coefficients"]
        scores = scores.toarray() if sp.issparse(scores) else np.asarray(scores)
        return np.asarray(scores, dtype=float)


@dataclass(eq=False)
class ScoredCandidates:
    """Scores of the unobserved cells; observed cells are masked out."""

    scores: np.ndarray
    candidate: np.ndarray

    def for_user(self, u: int) -> list[tuple[int, float]]:
        idx = np.flatnonzero(self.candidate[u])
        return [(int(i), float(self.scores[u, i])) for i in idx]


def score_unobserved(model: FittedRecommender, e, exclude=None) -> ScoredCandidates:
    """Score exactly the zero cells of ``e`` (and of ``exclude``, if given)."""
    e = as_csr(e)
    scores = model.predict(e)
    if not np.all(np.isfinite(scores)):
        raise FloatingPointError(f"{model.kind} produced non-finite scores")
    candidate = e.toarray() == 0
    if exclude is not None:
        candidate &= as_csr(exclude).toarray() == 0
    return ScoredCandidates(scores, candidate)


def rank_top_l(c: ScoredCandidates, l: int, users=None) -> dict[int, RankedList]:
    """Per user, the ``l`` best candidates by descending score, ties by course index."""
    if l < 1:
        raise ValueError("l must be >= 1")
    users = range(c.scores.shape[0]) if users is None else users
    out = {}
    for u in users:
        idx = np.flatnonzero(c.candidate[u])
        s = c.scores[u, idx]
        order = np.lexsort((idx, -s))[:l]
        out[int(u)] = RankedList(int(u), tuple(
            Entry(int(idx[j]), p, cf_score=float(s[j])) for p, j in enumerate(order, start=1)))
    return out


def top_k_neighbors(sim: np.ndarray, k: int) -> sp.csr_matrix:
    """Keep the ``k`` largest entries per row (ties by column index), self excluded."""
    sim = np.array(sim, dtype=float)
    np.fill_diagonal(sim, -np.inf)
    n = sim.shape[0]
    k = min(k, n - 1)
    rows, cols, vals = [], [], []
    if k > 0:
        order = np.argsort(-sim, axis=1, kind="stable")[:, :k]
        rows = np.repeat(np.arange(n), k)
        cols = order.ravel()
        vals = sim[rows, cols]
    out = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    out.eliminate_zeros()
    return out


def save_recommender(model: FittedRecommender, path) -> None:
    """Write a self-describing ``.npz`` container; sparse arrays stored as CSR triplets."""
    payload = {}
    sparse_keys = []
    for key, arr in model.arrays.items():
        if sp.issparse(arr):
            arr = sp.csr_matrix(arr)
            sparse_keys.append(key)
            payload[f"{key}__data"] = arr.data
            payload[f"{key}__indices"] = arr.indices
            payload[f"{key}__indptr"] = arr.indptr
            payload[f"{key}__shape"] = np.array(arr.shape)
        else:
            payload[key] = np.asarray(arr)
    meta = {
        "format": "survrec.recommender/1",
        "kind": model.kind,
        "hyperparameters": model.hyperparameters,
        "users": list(model.users),
        "courses": list(model.courses),
        "dense": [k for k in model.arrays if k not in sparse_keys],
        "sparse": sparse_keys,
    }
    payload["__meta__"] = np.array(json.dumps(meta))
    payload["__history__"] = np.asarray(model.history, dtype=float)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_recommender(path) -> FittedRecommender:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["__meta__"]))
        if meta.get("format") != "survrec.recommender/1":
            raise ValueError(f"{path}: not a recommender container")
        arrays: dict = {k: z[k] for k in meta["dense"]}
        for k in meta["sparse"]:
            shape = tuple(int(s) for s in z[f"{k}__shape"])
            arrays[k] = sp.csr_matrix((z[f"{k}__data"], z[f"{k}__indices"], z[f"{k}__indptr"]), shape=shape)
        history = z["__history__"]
    return FittedRecommender(meta["kind"], meta["hyperparameters"], arrays,
                             tuple(meta["users"]), tuple(meta["courses"]), history)


def fit_recommender(kind: str, e, hyperparameters: Mapping | None = None, seed: int = 0,
                    users=(), courses=()) -> FittedRecommender:
    """Dispatch by model kind; unknown hyperparameter names raise ``TypeError``."""
    from . import factor, knn, linear

    fitters = {
        "UKNN": knn.fit_uknn, "IKNN": knn.fit_iknn,
        "SVD": factor.fit_svd, "NMF": factor.fit_nmf, "WRMF": factor.fit_wrmf,
        "EASE": linear.fit_ease, "SLIM": linear.fit_slim,
    }
    kind = kind.upper()
    if kind not in fitters:
        raise ValueError(f"unknown recommender kind {kind!r}; expected one of {', '.join(KINDS)}")
    params = dict(hyperparameters or {})
    if kind in ("NMF", "WRMF"):
        params.setdefault("seed", seed)
    model = fitters[kind](e, **params)
    model.users = tuple(users)
    model.courses = tuple(courses)
    return model
