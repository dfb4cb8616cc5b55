"""Risk rankings, rank aggregation and re-ranking of CF candidate lists."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np


class Direction(enum.Enum):
    ASCENDING = "ascending"   # dropout model: low risk first
    DESCENDING = "descending"  # completion model: high risk first


class Variant(enum.Enum):
    BASELINE = "baseline"
    D = "D"
    C = "C"
    DC = "DC"

    @property
    def label(self) -> str:
        return "Baseline" if self is Variant.BASELINE else f"+{self.value}"


@dataclass(frozen=True)
class Entry:
    course: int
    position: int
    cf_score: float | None = None
    dropout_rank: int | None = None
    completion_rank: int | None = None
    aggregate_rank: float | None = None


@dataclass(frozen=True)
class RankedList:
    user: int
    entries: tuple[Entry, ...]

    def __post_init__(self):
        courses = [e.course for e in self.entries]
        if len(set(courses)) != len(courses):
            raise ValueError(f"user {self.user}: duplicate courses in ranked list")
        if [e.position for e in self.entries] != list(range(1, len(self.entries) + 1)):
            raise ValueError(f"user {self.user}: positions must be 1..n without gaps")

    @property
    def courses(self) -> list[int]:
        return [e.course for e in self.entries]

    def __len__(self):
        return len(self.entries)

    def position_of(self) -> dict[int, int]:
        return {e.course: e.position for e in self.entries}


def _renumber(user: int, entries: Sequence[Entry]) -> RankedList:
    return RankedList(user, tuple(replace(e, position=p) for p, e in enumerate(entries, start=1)))


def rank_by_risk(user: int, courses: Sequence[int], risks: Sequence[float],
                 direction: Direction) -> RankedList:
    """Order candidate courses by predicted risk; ties go to the lower course index."""
    courses = np.asarray(courses, dtype=np.int64)
    risks = np.asarray(risks, dtype=float)
    key = risks if direction is Direction.ASCENDING else -risks
    order = np.lexsort((courses, key))
    field = "dropout_rank" if direction is Direction.ASCENDING else "completion_rank"
    entries = [Entry(int(courses[j]), p, **{field: p}) for p, j in enumerate(order, start=1)]
    return RankedList(user, tuple(entries))


def aggregate_ranks(l_c: RankedList, l_d: RankedList) -> RankedList:
    """Average each course's completion and dropout positions.

    Sorted by mean position, ties broken by dropout position then course index.
    """
    pos_c = l_c.position_of()
    pos_d = l_d.position_of()
    if set(pos_c) != set(pos_d):
        raise ValueError(f"user {l_c.user}: completion and dropout lists cover different courses")
    rows = sorted(pos_c, key=lambda c: ((pos_c[c] + pos_d[c]) / 2.0, pos_d[c], c))
    entries = [Entry(c, 0, dropout_rank=pos_d[c], completion_rank=pos_c[c],
                     aggregate_rank=(pos_c[c] + pos_d[c]) / 2.0) for c in rows]
    return _renumber(l_c.user, entries)


def re_rank(l_cf: RankedList, l_sa: RankedList, k: int) -> RankedList:
    """Keep the CF candidate pool, take the survival list's order, cut at ``k``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    pool = {e.course: e for e in l_cf.entries}
    sa_courses = {e.course for e in l_sa.entries}
    missing = set(pool) - sa_courses
    if missing:
        raise ValueError(f"user {l_cf.user}: survival ranking lacks CF candidates {sorted(missing)}")
    picked = []
    for e in l_sa.entries:
        if e.course in pool:
            picked.append(replace(e, cf_score=pool[e.course].cf_score))
            if len(picked) == k:
                break
    return _renumber(l_cf.user, picked)


def truncate(l: RankedList, k: int) -> RankedList:
    return RankedList(l.user, l.entries[:k])


def merge_provenance(final: RankedList, *sources: RankedList) -> RankedList:
    """Fill missing provenance fields of ``final`` from other lists of the same user."""
    lookup: dict[int, dict] = {}
    for src in sources:
        for e in src.entries:
            d = lookup.setdefault(e.course, {})
            for name in ("cf_score", "dropout_rank", "completion_rank", "aggregate_rank"):
                v = getattr(e, name)
                if v is not None and d.get(name) is None:
                    d[name] = v
    entries = []
    for e in final.entries:
        fill = {name: v for name, v in lookup.get(e.course, {}).items() if getattr(e, name) is None}
        entries.append(replace(e, **fill))
    return RankedList(final.user, tuple(entries))


def final_lists(variant: Variant, cf_lists: Mapping[int, RankedList], k: int,
                completion: Mapping[int, RankedList] | None = None,
                dropout: Mapping[int, RankedList] | None = None) -> dict[int, RankedList]:
    """Apply one re-ranking variant to every user's CF top-l list."""
    out = {}
    for u, l_cf in cf_lists.items():
        if variant is Variant.BASELINE:
            out[u] = truncate(l_cf, k)
            continue
        if variant is Variant.C:
            l_sa = completion[u]
        elif variant is Variant.D:
            l_sa = dropout[u]
        else:
            l_sa = aggregate_ranks(completion[u], dropout[u])
        sources = [s[u] for s in (completion, dropout) if s is not None]
        out[u] = merge_provenance(re_rank(l_cf, l_sa, k), *sources)
    return out


EXPORT_HEADER = ("user_id", "position", "item_id", "cf_score", "dropout_rank",
                 "completion_rank", "aggregate_rank")


def export_rows(lists: Mapping[int, RankedList], users: Sequence[str], courses: Sequence[str]):
    """Rows of the delimited recommendation export, users in index order."""
    def fmt(v):
        return "" if v is None else repr(v)

    for u in sorted(lists):
        for e in lists[u].entries:
            yield (users[u], e.position, courses[e.course], fmt(e.cf_score), fmt(e.dropout_rank),
                   fmt(e.completion_rank), fmt(e.aggregate_rank))
