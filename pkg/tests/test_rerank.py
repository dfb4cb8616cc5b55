import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from survrec.rerank import (Direction, Entry, RankedList, Variant, aggregate_ranks, export_rows,
                            final_lists, rank_by_risk, re_rank)


def cf_list(user, courses, scores=None):
    scores = scores or [float(len(courses) - j) for j in range(len(courses))]
    return RankedList(user, tuple(Entry(c, p, cf_score=s) for p, (c, s) in enumerate(zip(courses, scores), 1)))


def sa_list(user, courses, direction=Direction.DESCENDING):
    n = len(courses)
    return rank_by_risk(user, courses, [n - j for j in range(n)] if direction is Direction.DESCENDING
                        else list(range(n)), direction)


def test_ranked_list_validation():
    with pytest.raises(ValueError):
        RankedList(0, (Entry(1, 1), Entry(1, 2)))
    with pytest.raises(ValueError):
        RankedList(0, (Entry(1, 1), Entry(2, 3)))


def test_rank_by_risk_directions():
    assert rank_by_risk(0, [0, 1], [2.0, 1.0], Direction.DESCENDING).courses == [0, 1]
    assert rank_by_risk(0, [0, 1], [2.0, 1.0], Direction.ASCENDING).courses == [1, 0]
    assert rank_by_risk(0, [5, 2, 9], [1.0, 1.0, 1.0], Direction.ASCENDING).courses == [2, 5, 9]


def test_rank_by_risk_stable_sort_oracle(rng):
    courses = rng.permutation(40)[:20]
    risks = np.round(rng.random(20), 1)
    got = rank_by_risk(0, courses, risks, Direction.DESCENDING)
    exp = sorted(zip(courses.tolist(), risks.tolist()), key=lambda cr: (-cr[1], cr[0]))
    assert got.courses == [c for c, _ in exp]
    assert [e.completion_rank for e in got.entries] == list(range(1, 21))


def test_aggregate_examples():
    l_c = RankedList(0, (Entry(10, 1), Entry(11, 2), Entry(12, 3)))
    l_d = RankedList(0, (Entry(10, 1), Entry(12, 2), Entry(11, 3)))
    agg = aggregate_ranks(l_c, l_d)
    # course 10: (1,1) -> 1.0; course 11: (2,3) -> 2.5; course 12: (3,2) -> 2.5, dropout 2 wins
    assert agg.courses == [10, 12, 11]
    assert agg.entries[0].aggregate_rank == 1.0


def test_aggregate_tie_by_dropout_position():
    l_c = RankedList(0, (Entry(1, 1), Entry(2, 2), Entry(3, 3)))
    l_d = RankedList(0, (Entry(3, 1), Entry(2, 2), Entry(1, 3)))
    # (1,3) -> 2.0 and (2,2) -> 2.0; course 2 has dropout rank 2 < 3
    assert aggregate_ranks(l_c, l_d).courses[:2] == [3, 2] and aggregate_ranks(l_c, l_d).courses[2] == 1


def test_aggregate_mismatch():
    with pytest.raises(ValueError):
        aggregate_ranks(RankedList(0, (Entry(1, 1),)), RankedList(0, (Entry(2, 1),)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_aggregate_oracle_and_symmetry(seed):
    r = np.random.default_rng(seed)
    courses = r.permutation(12)
    l_c = RankedList(0, tuple(Entry(int(c), p) for p, c in enumerate(r.permutation(courses), 1)))
    l_d = RankedList(0, tuple(Entry(int(c), p) for p, c in enumerate(r.permutation(courses), 1)))
    pc, pd = l_c.position_of(), l_d.position_of()
    agg = aggregate_ranks(l_c, l_d)
    assert agg.courses == sorted(pc, key=lambda c: ((pc[c] + pd[c]) / 2, pd[c], c))
    means = [(e.aggregate_rank) for e in agg.entries]
    swapped = [(e.aggregate_rank) for e in aggregate_ranks(l_d, l_c).entries]
    assert means == swapped


def test_re_rank_worked_case():
    l_cf = cf_list(0, [3, 4, 5])
    l_sa = RankedList(0, tuple(Entry(c, p) for p, c in enumerate([5, 3, 6, 4], 1)))
    out = re_rank(l_cf, l_sa, 2)
    assert out.courses == [5, 3]
    assert out.entries[0].cf_score == l_cf.entries[2].cf_score


def test_re_rank_l_equals_k_and_identity():
    l_cf = cf_list(0, [7, 1, 4])
    l_sa = RankedList(0, tuple(Entry(c, p) for p, c in enumerate([4, 9, 1, 7], 1)))
    assert re_rank(l_cf, l_sa, 3).courses == [4, 1, 7]
    same = RankedList(0, tuple(Entry(c, p) for p, c in enumerate([7, 1, 4], 1)))
    assert re_rank(l_cf, same, 2).courses == [7, 1]


def test_re_rank_errors():
    l_cf = cf_list(0, [1, 2])
    with pytest.raises(ValueError):
        re_rank(l_cf, sa_list(0, [1, 2]), 0)
    with pytest.raises(ValueError):
        re_rank(l_cf, sa_list(0, [1]), 1)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 8))
def test_re_rank_subset_and_order(seed, k):
    r = np.random.default_rng(seed)
    pool = r.permutation(30)[:10].tolist()
    sa_order = r.permutation(30).tolist()
    out = re_rank(cf_list(0, pool), RankedList(0, tuple(Entry(c, p) for p, c in enumerate(sa_order, 1))), k)
    assert set(out.courses) <= set(pool) and len(out) == k
    pos = {c: i for i, c in enumerate(sa_order)}
    assert [pos[c] for c in out.courses] == sorted(pos[c] for c in out.courses)
    assert out.courses == [c for c in sa_order if c in pool][:k]


def test_final_lists_variants_and_provenance():
    cf_lists = {0: cf_list(0, [2, 0, 1])}
    comp = {0: rank_by_risk(0, [0, 1, 2, 3], [0.1, 0.9, 0.5, 2.0], Direction.DESCENDING)}
    drop = {0: rank_by_risk(0, [0, 1, 2, 3], [0.3, 0.2, 0.1, 0.0], Direction.ASCENDING)}
    assert final_lists(Variant.BASELINE, cf_lists, 2)[0].courses == [2, 0]
    assert final_lists(Variant.C, cf_lists, 2, comp, drop)[0].courses == [1, 2]
    assert final_lists(Variant.D, cf_lists, 2, comp, drop)[0].courses == [2, 1]
    dc = final_lists(Variant.DC, cf_lists, 3, comp, drop)[0]
    # aggregates: course 3 -> 1.0, 1 -> 2.5, 2 -> 2.5 (better dropout rank), 0 -> 4.0
    assert dc.courses == [2, 1, 0]
    for e in dc.entries:
        assert None not in (e.cf_score, e.dropout_rank, e.completion_rank, e.aggregate_rank)
    for e in final_lists(Variant.C, cf_lists, 3, comp, drop)[0].entries:
        assert e.cf_score is not None and e.completion_rank is not None


def test_export_rows():
    lists = {0: cf_list(0, [1, 0], [0.5, 0.25])}
    rows = list(export_rows(lists, ["alice"], ["x", "y"]))
    assert rows == [("alice", 1, "y", "0.5", "", "", ""), ("alice", 2, "x", "0.25", "", "", "")]


def test_variant_labels():
    assert [v.label for v in Variant] == ["Baseline", "+D", "+C", "+DC"]
