"""Survival covariates built from the training interactions."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import InteractionMatrix

ENROLL_OFFSET = 0.01


class EventDefinition(enum.Enum):
    DROPOUT = "dropout"
    COMPLETION = "completion"


@dataclass(frozen=True, eq=False)
class PcaProjection:
    mean: np.ndarray
    components: np.ndarray  # (n_components, n_features), orthonormal rows
    explained_variance: np.ndarray
    total_variance: float
    degenerate: bool = False

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def retained_variance_fraction(self) -> float:
        if self.total_variance <= 0:
            return 1.0
        return float(self.explained_variance.sum() / self.total_variance)

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.mean.shape[0]:
            raise ValueError(f"expected {self.mean.shape[0]} columns, got {x.shape[-1]}")
        return (x - self.mean) @ self.components.T


def fit_pca(vectors, variance_target: float = 0.80) -> PcaProjection:
    """Mean-centred PCA keeping the fewest components reaching ``variance_target``.

    Zero-variance input yields a zero-component projection with ``degenerate`` set.
    """
    x = np.asarray(vectors, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("fit_pca needs a 2-D array with at least 2 rows")
    mean = x.mean(axis=0)
    xc = x - mean
    _, s, vt = np.linalg.svd(xc, full_matrices=False)
    var = s ** 2 / (x.shape[0] - 1)
    total = float(var.sum())
    if total <= 1e-14 * max(1.0, float(np.abs(x).max()) ** 2):
        return PcaProjection(mean, np.zeros((0, x.shape[1])), np.zeros(0), 0.0, degenerate=True)
    ratio = np.cumsum(var) / total
    n_keep = int(np.searchsorted(ratio, variance_target - 1e-12, side="left")) + 1
    n_keep = min(n_keep, len(var))
    comps = vt[:n_keep].copy()
    # deterministic sign: largest-magnitude loading positive
    flip = np.sign(comps[np.arange(n_keep), np.argmax(np.abs(comps), axis=1)])
    comps *= flip[:, None]
    return PcaProjection(mean, comps, var[:n_keep].copy(), total)


def interaction_vectors(train: InteractionMatrix) -> np.ndarray:
    """Dense user x course matrix: ``+(t + eps)`` completed, ``-(t + eps)`` dropout, 0 otherwise."""
    out = np.zeros(train.shape)
    mag = train.times + ENROLL_OFFSET
    out[train.rows, train.cols] = np.where(train.completed, mag, -mag)
    return out


def user_summary_matrix(train: InteractionMatrix) -> np.ndarray:
    """Per user ``[count, completion share, mean completion time, mean dropout time]``.

    Missing means fall back to the global training mean of that outcome.
    """
    m = train.shape[0]
    done = train.completed
    count = np.bincount(train.rows, minlength=m).astype(float)
    n_done = np.bincount(train.rows[done], minlength=m).astype(float)
    n_drop = count - n_done
    sum_done = np.bincount(train.rows[done], weights=train.times[done], minlength=m)
    sum_drop = np.bincount(train.rows[~done], weights=train.times[~done], minlength=m)
    g_done = float(train.times[done].mean()) if done.any() else 0.5
    g_drop = float(train.times[~done].mean()) if (~done).any() else 0.5
    g_share = float(done.mean()) if train.nnz else 0.5
    share = np.divide(n_done, count, out=np.full(m, g_share), where=count > 0)
    avg_done = np.divide(sum_done, n_done, out=np.full(m, g_done), where=n_done > 0)
    avg_drop = np.divide(sum_drop, n_drop, out=np.full(m, g_drop), where=n_drop > 0)
    return np.column_stack([count, share, avg_done, avg_drop])


def user_summary_features(train: InteractionMatrix, user: int) -> np.ndarray:
    return user_summary_matrix(train)[user]


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    rows: np.ndarray  # (n, 2) user/course index pairs
    X: np.ndarray
    feature_names: tuple[str, ...]
    event_definition: EventDefinition
    y_time: np.ndarray | None = None
    y_event: np.ndarray | None = None

    def __len__(self):
        return self.X.shape[0]

    @property
    def has_targets(self) -> bool:
        return self.y_time is not None

    def with_event_definition(self, definition: EventDefinition) -> "SurvivalDataset":
        event = self.y_event
        if event is not None and definition is not self.event_definition:
            event = ~event
        return SurvivalDataset(self.rows, self.X, self.feature_names, definition, self.y_time, event)

    def subset(self, idx) -> "SurvivalDataset":
        idx = np.asarray(idx)
        return SurvivalDataset(self.rows[idx], self.X[idx], self.feature_names, self.event_definition,
                               None if self.y_time is None else self.y_time[idx],
                               None if self.y_event is None else self.y_event[idx])

    def to_csv(self, path, users: Sequence[str] | None = None, courses: Sequence[str] | None = None):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            head = ["user_id", "item_id", *self.feature_names]
            if self.has_targets:
                head += ["time", "event"]
            writer.writerow(head)
            for r in range(len(self)):
                u, c = self.rows[r]
                row = [users[u] if users else int(u), courses[c] if courses else int(c)]
                row += [repr(float(v)) for v in self.X[r]]
                if self.has_targets:
                    row += [repr(float(self.y_time[r])), int(self.y_event[r])]
                writer.writerow(row)


class FeatureBuilder:
    """Covariates from the training cells only.

    Per pair: user summary, PCA of the user's interaction vector, PCA of the
    course's interaction vector, and the course's raw duration in days.
    """

    def __init__(self, train: InteractionMatrix, variance_target: float = 0.80):
        self.train = train
        vectors = interaction_vectors(train)
        self.user_pca = fit_pca(vectors, variance_target)
        self.course_pca = fit_pca(vectors.T, variance_target)
        self.user_block = np.column_stack([user_summary_matrix(train), self.user_pca.transform(vectors)])
        self.course_block = np.column_stack([self.course_pca.transform(vectors.T),
                                             train.course_duration])
        self.feature_names = tuple(
            ["n_courses", "completion_share", "avg_completion_time", "avg_dropout_time"]
            + [f"user_pc{j + 1}" for j in range(self.user_pca.n_components)]
            + [f"course_pc{j + 1}" for j in range(self.course_pca.n_components)]
            + ["course_duration"])
        self._cells = {(int(r), int(c)): j for j, (r, c) in enumerate(zip(train.rows, train.cols))}

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def build(self, pairs, event_definition: EventDefinition) -> SurvivalDataset:
        """Dataset for ``(user, course)`` index pairs; targets only if all pairs are training cells."""
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        m, n = self.train.shape
        if len(pairs) and (pairs[:, 0].min() < 0 or pairs[:, 0].max() >= m
                           or pairs[:, 1].min() < 0 or pairs[:, 1].max() >= n):
            raise KeyError("pair references an unknown user or course")
        x = np.hstack([self.user_block[pairs[:, 0]], self.course_block[pairs[:, 1]]])
        cell = [self._cells.get((int(u), int(c))) for u, c in pairs]
        y_time = y_event = None
        if len(pairs) and all(j is not None for j in cell):
            cell = np.array(cell)
            y_time = self.train.times[cell].copy()
            done = self.train.completed[cell]
            y_event = done.copy() if event_definition is EventDefinition.COMPLETION else ~done
        return SurvivalDataset(pairs, x, self.feature_names, event_definition, y_time, y_event)

    def training_dataset(self, event_definition: EventDefinition) -> SurvivalDataset:
        return self.build(np.column_stack([self.train.rows, self.train.cols]), event_definition)


def build_survival_dataset(train: InteractionMatrix, pairs, event_definition: EventDefinition,
                           builder: FeatureBuilder | None = None) -> SurvivalDataset:
    builder = builder or FeatureBuilder(train)
    return builder.build(pairs, event_definition)
