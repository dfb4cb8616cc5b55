"""Interaction records, cold-start filtering, time normalization and splitting."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

HEADER = ("user_id", "item_id", "elapsed_days", "event")
SPLIT_PARTS = ("train", "validation", "test")


class DataError(ValueError):
    """Raised for malformed input or datasets that cannot be processed."""


class Event(enum.Enum):
    COMPLETED = "c"
    DROPOUT = "d"


@dataclass(frozen=True)
class InteractionRecord:
    user: str
    course: str
    elapsed_days: float
    event: Event


def _read_text(source) -> IO[str]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"), newline="")
    probe = source.read(0)
    if isinstance(probe, bytes):
        return io.TextIOWrapper(source, encoding="utf-8", newline="")
    return source


def load_interactions(source) -> list[InteractionRecord]:
    """Parse a ``user_id,item_id,elapsed_days,event`` CSV.

    ``source`` may be a path, raw bytes, or a binary/text stream. Extra
    columns after the four required ones are ignored, so split files (which
    carry ``normalized_time``) load too.
    """
    stream = _read_text(source)
    try:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("line 1: empty input, expected header") from None
        header = [h.strip() for h in header]
        if tuple(header[:4]) != HEADER:
            raise DataError(f"line 1: expected header {','.join(HEADER)}, got {','.join(header)}")
        records = []
        seen = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 4:
                raise DataError(f"line {lineno}: expected 4 columns, got {len(row)}")
            user, course, days, code = (c.strip() for c in row[:4])
            if not user or not course:
                raise DataError(f"line {lineno}: empty user_id or item_id")
            try:
                elapsed = float(days)
            except ValueError:
                raise DataError(f"line {lineno}: non-numeric elapsed_days {days!r}") from None
            if not math.isfinite(elapsed) or elapsed < 0:
                raise DataError(f"line {lineno}: elapsed_days must be finite and >= 0, got {days!r}")
            try:
                event = Event(code)
            except ValueError:
                raise DataError(f"line {lineno}: unknown event code {code!r} (expected 'c' or 'd')") from None
            key = (user, course)
            if key in seen:
                raise DataError(f"line {lineno}: duplicate pair ({user}, {course}), first seen on line {seen[key]}")
            seen[key] = lineno
            records.append(InteractionRecord(user, course, elapsed, event))
        return records
    finally:
        if isinstance(source, (str, os.PathLike)):
            stream.close()
        elif isinstance(stream, io.TextIOWrapper):
            stream.detach()


def write_interactions(records: Iterable[InteractionRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADER)
        for r in records:
            writer.writerow([r.user, r.course, repr(float(r.elapsed_days)), r.event.value])


def filter_cold_start(records: Sequence[InteractionRecord], min_interactions: int = 5,
                      min_completions: int = 3) -> list[InteractionRecord]:
    """Drop cold users and courses until nothing else changes.

    A user survives with at least ``min_interactions`` interactions of which at
    least ``min_completions`` are completions; a course survives with at least
    ``min_interactions`` interactions.
    """
    if not (min_interactions >= min_completions >= 0):
        raise ValueError("require min_interactions >= min_completions >= 0")
    current = list(records)
    while True:
        n_user = Counter(r.user for r in current)
        n_done = Counter(r.user for r in current if r.event is Event.COMPLETED)
        kept = [r for r in current
                if n_user[r.user] >= min_interactions and n_done[r.user] >= min_completions]
        n_course = Counter(r.course for r in kept)
        kept = [r for r in kept if n_course[r.course] >= min_interactions]
        if len(kept) == len(current):
            break
        current = kept
    if not current:
        raise DataError("dataset eliminated by filter")
    return current


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Sparse user x course matrix of (normalized time, event) cells.

    Cells are stored as parallel arrays sorted by (row, col). ``course_min`` /
    ``course_max`` hold the raw per-course elapsed-day range of the full
    normalized dataset and travel with every split part.
    """

    users: tuple[str, ...]
    courses: tuple[str, ...]
    rows: np.ndarray
    cols: np.ndarray
    times: np.ndarray
    completed: np.ndarray
    raw_days: np.ndarray
    course_min: np.ndarray
    course_max: np.ndarray

    def __post_init__(self):
        order = np.lexsort((self.cols, self.rows))
        for name in ("rows", "cols", "times", "completed", "raw_days"):
            arr = np.asarray(getattr(self, name))[order].copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name in ("course_min", "course_max"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.users), len(self.courses)

    @property
    def nnz(self) -> int:
        return len(self.rows)

    @property
    def sparsity(self) -> float:
        m, n = self.shape
        return 1.0 - self.nnz / (m * n) if m * n else 1.0

    @property
    def course_duration(self) -> np.ndarray:
        return self.course_max - self.course_min

    def user_index(self) -> dict[str, int]:
        return {u: i for i, u in enumerate(self.users)}

    def course_index(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.courses)}

    def subset(self, mask: np.ndarray) -> "InteractionMatrix":
        """Matrix on the same axes holding only the cells selected by ``mask``."""
        mask = np.asarray(mask, dtype=bool)
        return InteractionMatrix(self.users, self.courses, self.rows[mask], self.cols[mask],
                                 self.times[mask], self.completed[mask], self.raw_days[mask],
                                 self.course_min, self.course_max)

    def to_csr(self, values: np.ndarray | None = None) -> sp.csr_matrix:
        data = np.ones(self.nnz) if values is None else np.asarray(values, dtype=float)
        return sp.csr_matrix((data, (self.rows, self.cols)), shape=self.shape)

    def cell_keys(self) -> set[tuple[int, int]]:
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    def records(self) -> list[InteractionRecord]:
        return [InteractionRecord(self.users[r], self.courses[c], float(d),
                                  Event.COMPLETED if done else Event.DROPOUT)
                for r, c, d, done in zip(self.rows, self.cols, self.raw_days, self.completed)]


def normalize_times(records: Sequence[InteractionRecord],
                    users: Sequence[str] | None = None,
                    courses: Sequence[str] | None = None) -> InteractionMatrix:
    """Build the interaction matrix with per-course min-max normalized times.

    Axes default to order of first appearance. A course whose raw times are
    all equal gets 0.5 for every cell.
    """
    if users is None:
        users = list(dict.fromkeys(r.user for r in records))
    if courses is None:
        courses = list(dict.fromkeys(r.course for r in records))
    uidx = {u: i for i, u in enumerate(users)}
    cidx = {c: i for i, c in enumerate(courses)}
    rows = np.array([uidx[r.user] for r in records], dtype=np.int64)
    cols = np.array([cidx[r.course] for r in records], dtype=np.int64)
    raw = np.array([r.elapsed_days for r in records], dtype=float)
    completed = np.array([r.event is Event.COMPLETED for r in records], dtype=bool)

    n = len(courses)
    cmin = np.full(n, np.inf)
    cmax = np.full(n, -np.inf)
    np.minimum.at(cmin, cols, raw)
    np.maximum.at(cmax, cols, raw)
    empty = ~np.isfinite(cmin)
    cmin[empty] = 0.0
    cmax[empty] = 0.0
    span = (cmax - cmin)[cols]
    times = np.full(len(raw), 0.5)
    ok = span > 0
    times[ok] = (raw[ok] - cmin[cols][ok]) / span[ok]
    return InteractionMatrix(tuple(users), tuple(courses), rows, cols, times, completed, raw, cmin, cmax)


def binarize(m: InteractionMatrix) -> sp.csr_matrix:
    """Enrollment matrix: 1 wherever ``m`` has a cell."""
    return m.to_csr()


@dataclass(frozen=True, eq=False)
class DatasetSplit:
    train: InteractionMatrix
    validation: InteractionMatrix
    test: InteractionMatrix

    def parts(self):
        return dict(zip(SPLIT_PARTS, (self.train, self.validation, self.test)))


def split(m: InteractionMatrix, seed: int, n_test: int = 3, n_validation: int = 1) -> DatasetSplit:
    """Per-user holdout: ``n_test`` test cells (one guaranteed completed), then
    ``n_validation`` validation cells, the rest for training."""
    rng = np.random.default_rng(seed)
    part = np.zeros(m.nnz, dtype=np.int8)  # 0 train, 1 validation, 2 test
    starts = np.searchsorted(m.rows, np.arange(len(m.users) + 1))
    for u in range(len(m.users)):
        cells = np.arange(starts[u], starts[u + 1])
        if len(cells) == 0:
            continue
        done = cells[m.completed[cells]]
        if len(cells) < n_test + n_validation or len(done) < 1:
            raise DataError(f"user {m.users[u]!r} has too few cells to split "
                            f"({len(cells)} cells, {len(done)} completed)")
        first = rng.choice(done)
        rest = cells[cells != first]
        others = rng.choice(rest, size=n_test - 1, replace=False)
        part[first] = 2
        part[others] = 2
        remaining = cells[part[cells] == 0]
        part[rng.choice(remaining, size=n_validation, replace=False)] = 1
    return DatasetSplit(m.subset(part == 0), m.subset(part == 1), m.subset(part == 2))


def save_split(s: DatasetSplit, directory, seed: int | None = None) -> None:
    """Write train/validation/test CSVs plus a manifest holding the axes."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, part in s.parts().items():
        with open(directory / f"{name}.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(HEADER + ("normalized_time",))
            for r, c, d, done, t in zip(part.rows, part.cols, part.raw_days, part.completed, part.times):
                writer.writerow([part.users[r], part.courses[c], repr(float(d)),
                                 "c" if done else "d", repr(float(t))])
    manifest = {
        "seed": seed,
        "users": list(s.train.users),
        "courses": list(s.train.courses),
        "course_min": s.train.course_min.tolist(),
        "course_max": s.train.course_max.tolist(),
        "counts": {name: part.nnz for name, part in s.parts().items()},
    }
    with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")


def load_split(directory) -> DatasetSplit:
    directory = Path(directory)
    with open(directory / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    users = tuple(manifest["users"])
    courses = tuple(manifest["courses"])
    uidx = {u: i for i, u in enumerate(users)}
    cidx = {c: i for i, c in enumerate(courses)}
    cmin = np.array(manifest["course_min"], dtype=float)
    cmax = np.array(manifest["course_max"], dtype=float)
    parts = []
    for name in SPLIT_PARTS:
        path = directory / f"{name}.csv"
        records = load_interactions(path)
        times = defaultdict(float)
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                times[(row["user_id"], row["item_id"])] = float(row["normalized_time"])
        try:
            rows = np.array([uidx[r.user] for r in records], dtype=np.int64)
            cols = np.array([cidx[r.course] for r in records], dtype=np.int64)
        except KeyError as exc:
            raise DataError(f"{path}: id {exc.args[0]!r} not in manifest") from None
        parts.append(InteractionMatrix(
            users, courses, rows, cols,
            np.array([times[(r.user, r.course)] for r in records], dtype=float),
            np.array([r.event is Event.COMPLETED for r in records], dtype=bool),
            np.array([r.elapsed_days for r in records], dtype=float), cmin, cmax))
    return DatasetSplit(*parts)


def dataset_summary(m: InteractionMatrix) -> dict:
    n_users, n_courses = m.shape
    per_user_done = np.bincount(m.rows[m.completed], minlength=n_users)
    per_user_drop = np.bincount(m.rows[~m.completed], minlength=n_users)
    return {
        "users": n_users,
        "items": n_courses,
        "interactions": m.nnz,
        "sparsity": m.sparsity,
        "avg_completed_per_user": float(per_user_done.mean()) if n_users else 0.0,
        "avg_dropout_per_user": float(per_user_drop.mean()) if n_users else 0.0,
    }
