import io
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from survrec import data
from survrec.data import DataError, Event, InteractionRecord

from conftest import make_records


def _csv(*rows):
    return "\n".join(["user_id,item_id,elapsed_days,event", *rows]) + "\n"


def test_load_two_rows():
    recs = data.load_interactions(io.StringIO(_csv("a,x,3.5,c", "b,x,0,d")))
    assert recs == [InteractionRecord("a", "x", 3.5, Event.COMPLETED),
                    InteractionRecord("b", "x", 0.0, Event.DROPOUT)]


def test_load_bytes_and_binary_stream():
    raw = _csv("a,x,1,c").encode()
    assert data.load_interactions(raw) == data.load_interactions(io.BytesIO(raw))


@pytest.mark.parametrize("row, msg", [
    ("a,x,1,x", "line 3: unknown event"),
    ("a,x,-1,c", "line 3"),
    ("a,x,abc,c", "line 3: non-numeric"),
    ("a,x,1", "line 3: expected 4 columns"),
    ("b,y,2,c", "line 3: duplicate"),
])
def test_load_errors_name_line(row, msg):
    text = _csv("b,y,2,c", row)
    with pytest.raises(DataError, match=msg):
        data.load_interactions(io.StringIO(text))


def test_bad_header():
    with pytest.raises(DataError, match="line 1"):
        data.load_interactions(io.StringIO("u,i,t,e\na,b,1,c\n"))


def test_write_load_roundtrip(tmp_path, rng):
    recs = make_records(rng)
    data.write_interactions(recs, tmp_path / "x.csv")
    assert data.load_interactions(tmp_path / "x.csv") == recs


def _R(u, c, done=True):
    return InteractionRecord(u, c, 1.0, Event.COMPLETED if done else Event.DROPOUT)


def test_filter_thresholds():
    # u0 has 4 interactions, u1 has 6 but only 2 completions, u2..u6 qualify
    recs = [_R("u0", f"c{j}") for j in range(4)]
    recs += [_R("u1", f"c{j}", done=j < 2) for j in range(6)]
    recs += [_R(f"u{u}", f"c{j}") for u in range(2, 7) for j in range(5)]
    kept = data.filter_cold_start(recs)
    users = {r.user for r in kept}
    assert "u0" not in users and "u1" not in users
    assert users == {f"u{u}" for u in range(2, 7)}


def test_filter_everything_removed():
    with pytest.raises(DataError, match="dataset eliminated by filter"):
        data.filter_cold_start([_R("a", "x")])


def test_filter_bad_thresholds():
    with pytest.raises(ValueError):
        data.filter_cold_start([_R("a", "x")], min_interactions=2, min_completions=3)


def _oracle_filter(recs, mi=5, mc=3):
    # alternate single-criterion passes until nothing changes
    cur = set(recs)
    changed = True
    while changed:
        changed = False
        for _ in range(2):
            n = Counter(r.user for r in cur)
            d = Counter(r.user for r in cur if r.event is Event.COMPLETED)
            bad = {u for u in n if n[u] < mi or d[u] < mc}
            if bad:
                cur = {r for r in cur if r.user not in bad}
                changed = True
            nc = Counter(r.course for r in cur)
            badc = {c for c in nc if nc[c] < mi}
            if badc:
                cur = {r for r in cur if r.course not in badc}
                changed = True
    return cur


@pytest.mark.parametrize("seed", range(5))
def test_filter_matches_alternating_oracle(seed):
    recs = make_records(np.random.default_rng(seed), n_users=20, n_courses=10, p=0.5)
    try:
        got = set(data.filter_cold_start(recs))
    except DataError:
        got = set()
    assert got == _oracle_filter(recs)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_filter_idempotent(seed):
    recs = make_records(np.random.default_rng(seed), n_users=15, n_courses=9, p=0.7)
    try:
        once = data.filter_cold_start(recs)
    except DataError:
        return
    assert data.filter_cold_start(once) == once


def test_normalize_min_max():
    recs = [InteractionRecord(f"u{j}", "x", t, Event.COMPLETED) for j, t in enumerate([2.0, 7.0, 12.0])]
    recs += [InteractionRecord(f"u{j}", "y", 5.0, Event.DROPOUT) for j in range(3)]
    m = data.normalize_times(recs)
    x = m.times[m.cols == m.courses.index("x")]
    assert sorted(x.tolist()) == [0.0, 0.5, 1.0]
    assert np.all(m.times[m.cols == m.courses.index("y")] == 0.5)
    assert m.course_min.tolist() == [2.0, 5.0]
    assert m.course_duration.tolist() == [10.0, 0.0]


def test_normalize_random_per_course_range(rng):
    recs = make_records(rng, n_users=10, n_courses=5, p=1.0)[:50]
    m = data.normalize_times(recs)
    for c in range(len(m.courses)):
        t = m.times[m.cols == c]
        raw = m.raw_days[m.cols == c]
        if raw.max() > raw.min():
            assert t.min() == 0.0 and t.max() == 1.0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 100), st.floats(0, 1000), st.integers(0, 1000))
def test_normalize_affine_invariant(a, b, seed):
    recs = make_records(np.random.default_rng(seed), n_users=8, n_courses=4)
    if not recs:
        return
    moved = [InteractionRecord(r.user, r.course, a * r.elapsed_days + b, r.event) for r in recs]
    np.testing.assert_allclose(data.normalize_times(moved).times, data.normalize_times(recs).times,
                               atol=1e-9)


def test_binarize():
    recs = [InteractionRecord("u", "c", 0.3, Event.DROPOUT)]
    e = data.binarize(data.normalize_times(recs))
    assert e.nnz == 1 and e.toarray().tolist() == [[1.0]]
    empty = data.normalize_times(recs).subset(np.zeros(1, bool))
    assert data.binarize(empty).nnz == 0


def test_binarize_same_sparsity(rng):
    m = data.normalize_times(make_records(rng))
    e = data.binarize(m)
    assert set(zip(*e.nonzero())) == m.cell_keys()
    assert 1 - e.nnz / (m.shape[0] * m.shape[1]) == m.sparsity
    assert np.all(e.data == 1)


def test_matrix_read_only(rng):
    m = data.normalize_times(make_records(rng))
    with pytest.raises(ValueError):
        m.times[0] = 3.0


def test_split_five_cells():
    recs = [InteractionRecord("u", f"c{j}", float(j), Event.COMPLETED if j < 3 else Event.DROPOUT)
            for j in range(5)]
    s = data.split(data.normalize_times(recs), seed=0)
    assert (s.train.nnz, s.validation.nnz, s.test.nnz) == (1, 1, 3)
    assert s.test.completed.any()


def _split_input(seed, n_users=100):
    rng = np.random.default_rng(seed)
    recs = []
    for u in range(n_users):
        k = int(rng.integers(5, 15))
        cs = rng.choice(30, k, replace=False)
        done = rng.permutation(k) < max(3, int(rng.integers(0, k + 1)))
        recs += [InteractionRecord(f"u{u}", f"c{c}", float(rng.integers(0, 50)),
                                   Event.COMPLETED if d else Event.DROPOUT) for c, d in zip(cs, done)]
    return data.normalize_times(recs)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_split_invariants(seed):
    m = _split_input(seed)
    s = data.split(m, seed=seed)
    tr, va, te = s.train.cell_keys(), s.validation.cell_keys(), s.test.cell_keys()
    assert not (tr & va) and not (tr & te) and not (va & te)
    assert tr | va | te == m.cell_keys()
    assert np.all(np.bincount(s.test.rows, minlength=100) == 3)
    assert np.all(np.bincount(s.validation.rows, minlength=100) == 1)
    assert np.all(np.bincount(s.test.rows[s.test.completed], minlength=100) >= 1)


def test_split_deterministic():
    m = _split_input(4)
    a, b = data.split(m, seed=11), data.split(m, seed=11)
    assert a.test.cell_keys() == b.test.cell_keys()
    assert a.validation.cell_keys() == b.validation.cell_keys()
    assert data.split(m, seed=12).test.cell_keys() != a.test.cell_keys()


def test_split_too_few_cells():
    recs = [InteractionRecord("lonely", f"c{j}", 1.0, Event.COMPLETED) for j in range(3)]
    with pytest.raises(DataError, match="lonely"):
        data.split(data.normalize_times(recs), seed=0)


def test_save_load_split(tmp_path):
    s = data.split(_split_input(5, 30), seed=1)
    data.save_split(s, tmp_path, seed=1)
    back = data.load_split(tmp_path)
    for name, part in s.parts().items():
        other = back.parts()[name]
        assert other.users == part.users and other.courses == part.courses
        for f in ("rows", "cols", "times", "completed", "raw_days", "course_min", "course_max"):
            np.testing.assert_array_equal(getattr(other, f), getattr(part, f))


def test_summary(rng):
    m = data.normalize_times(make_records(rng))
    s = data.dataset_summary(m)
    assert s["users"] == m.shape[0] and s["items"] == m.shape[1]
    assert 0.0 <= s["sparsity"] <= 1.0
