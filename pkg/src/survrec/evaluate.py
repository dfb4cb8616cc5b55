"""NDCG@k, time-decayed NDCG-t@k and results tables."""

from __future__ import annotations

import csv
import logging
from typing import Callable, Mapping, Sequence

import numpy as np

from .data import InteractionMatrix
from .rerank import RankedList, Variant

logger = logging.getLogger(__name__)

Relevance = dict[int, dict[int, float]]


def ndcg_at_k(ranked: Sequence[int], relevance: Mapping[int, float], k: int) -> float:
    """``DCG@k / IDCG@k`` with gain ``rel`` and discount ``log2(position + 1)``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    gains = np.array([relevance.get(c, 0.0) for c in list(ranked)[:k]], dtype=float)
    dcg = float(np.sum(gains / np.log2(np.arange(2, len(gains) + 2))))
    ideal = np.sort(np.array([v for v in relevance.values() if v > 0], dtype=float))[::-1][:k]
    if len(ideal) == 0:
        raise ValueError("no relevant items")
    idcg = float(np.sum(ideal / np.log2(np.arange(2, len(ideal) + 2))))
    return dcg / idcg


def binary_relevance(test: InteractionMatrix) -> Relevance:
    rel: Relevance = {}
    for u, c in zip(test.rows.tolist(), test.cols.tolist()):
        rel.setdefault(u, {})[c] = 1.0
    return rel


def decayed_gain(time: float, completed: bool) -> float:
    """Completed: ``1 - t/2`` (fast completion scores higher); dropout: ``t/2``."""
    return 1.0 - 0.5 * time if completed else 0.5 * time


def time_decayed_relevance(test: InteractionMatrix,
                           gain: Callable[[float, bool], float] = decayed_gain) -> Relevance:
    rel: Relevance = {}
    for u, c, t, done in zip(test.rows.tolist(), test.cols.tolist(), test.times.tolist(),
                             test.completed.tolist()):
        rel.setdefault(u, {})[c] = float(gain(t, done))
    return rel


def mean_metric(lists: Mapping[int, RankedList], relevance: Relevance, k: int,
                users: Sequence[int] | None = None) -> tuple[float, int]:
    """Mean NDCG@k over users; returns ``(mean, n_excluded)``.

    Users without any positive relevance are excluded and counted.
    """
    users = sorted(relevance) if users is None else users
    values = []
    excluded = 0
    for u in users:
        if u not in lists:
            raise KeyError(f"no recommendations for user {u}")
        rel = relevance.get(u, {})
        if not any(v > 0 for v in rel.values()):
            excluded += 1
            continue
        values.append(ndcg_at_k(lists[u].courses, rel, k))
    if excluded:
        logger.warning("%d users without relevant items excluded from the mean", excluded)
    return (float(np.mean(values)) if values else float("nan")), excluded


def evaluate_run(recommendations: Mapping[Variant, Mapping[int, RankedList]], test: InteractionMatrix,
                 ks: Sequence[int], dataset: str = "", model: str = "") -> list[dict]:
    """One row per (variant, k) with mean ``ndcg`` and ``ndcg_t``.

    ``recommendations`` maps each re-ranking variant to per-user lists that
    are at least ``max(ks)`` long where possible.
    """
    rel_bin = binary_relevance(test)
    rel_t = time_decayed_relevance(test)
    users = sorted(rel_bin)
    rows = []
    for variant, lists in recommendations.items():
        missing = [u for u in users if u not in lists]
        if missing:
            raise KeyError(f"no recommendations for user {missing[0]}")
        for k in ks:
            ndcg, _ = mean_metric(lists, rel_bin, k, users)
            ndcg_t, _ = mean_metric(lists, rel_t, k, users)
            rows.append({"dataset": dataset, "model": model, "variant": variant.label, "k": int(k),
                         "ndcg": ndcg, "ndcg_t": ndcg_t})
    return rows


METRIC_FIELDS = ("dataset", "model", "variant", "k", "ndcg", "ndcg_t")


def write_metrics_csv(rows: Sequence[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRIC_FIELDS)
        for r in rows:
            writer.writerow([r["dataset"], r["model"], r["variant"], r["k"],
                             f"{r['ndcg']:.6f}", f"{r['ndcg_t']:.6f}"])


def format_table(rows: Sequence[dict]) -> str:
    """Plain-text table: one line per (k, dataset, model), ndcg and ndcg-t per variant."""
    variants = [v.label for v in Variant]
    present = [v for v in variants if any(r["variant"] == v for r in rows)]
    keyed = {(r["k"], r["dataset"], r["model"], r["variant"]): r for r in rows}
    groups = sorted({(r["k"], r["dataset"], r["model"]) for r in rows})
    head = ["Top", "Dataset", "CF Model"] + [f"ndcg {v}" for v in present] + [f"ndcg-t {v}" for v in present]
    body = []
    for k, ds, model in groups:
        line = [str(k), ds, model]
        for metric in ("ndcg", "ndcg_t"):
            for v in present:
                r = keyed.get((k, ds, model, v))
                line.append("" if r is None else f"{r[metric]:.3f}")
        body.append(line)
    widths = [max(len(head[j]), *(len(b[j]) for b in body)) if body else len(head[j]) for j in range(len(head))]
    fmt = lambda cells: "  ".join(c.rjust(w) if j >= 3 else c.ljust(w) for j, (c, w) in enumerate(zip(cells, widths)))
    lines = [fmt(head), "  ".join("-" * w for w in widths)] + [fmt(b) for b in body]
    return "\n".join(lines) + "\n"
