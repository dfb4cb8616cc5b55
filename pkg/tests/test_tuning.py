import numpy as np
import pytest

from survrec import tuning
from survrec.tuning import Param, SearchSpace, default_spaces, random_search


def test_table_ranges():
    s = default_spaces()
    assert (s["UKNN"]["n_neighbors"].low, s["UKNN"]["n_neighbors"].high, s["UKNN"]["n_neighbors"].type) == (20, 800, "int")
    assert (s["UKNN"]["shrink"].low, s["UKNN"]["shrink"].high, s["UKNN"]["shrink"].type) == (0, 1000, "real")
    ease = s["EASE"]["l2_norm"]
    assert (ease.low, ease.high, ease.scale) == (1.0, 1e7, "log")
    assert (s["SLIM"]["l1_norm"].low, s["SLIM"]["l1_norm"].high) == (1e-5, 1.0)
    assert (s["XGB"]["learning_rate"].low, s["XGB"]["learning_rate"].high) == (0.1, 1.0)
    assert set(s) == {"UKNN", "IKNN", "SVD", "NMF", "WRMF", "EASE", "SLIM", "CoxNet", "RSF", "XGB"}


def test_samples_within_bounds():
    rng = np.random.default_rng(0)
    p = default_spaces()["EASE"]["l2_norm"]
    draws = [p.sample(rng) for _ in range(10_000)]
    assert min(draws) >= 1.0 and max(draws) <= 1e7
    for space in default_spaces().values():
        for _ in range(200):
            params = space.sample(rng)
            for prm in space.params:
                assert prm.low <= params[prm.name] <= prm.high
                if prm.type == "int":
                    assert isinstance(params[prm.name], int)


def test_param_validation():
    with pytest.raises(ValueError):
        Param("x", 2, 1)
    with pytest.raises(ValueError):
        Param("x", 0, 1, scale="log")


SPACE = SearchSpace("toy", (Param("a", 0.0, 1.0), Param("b", 1, 100, type="int")))


def test_budget_one_and_validation():
    res = random_search(SPACE, 1, lambda p: p["a"], seed=3)
    assert len(res.trials) == 1 and res.best is res.trials[0]
    with pytest.raises(ValueError):
        random_search(SPACE, 0, lambda p: 0.0)


def test_deterministic_and_best_dominates():
    a = random_search(SPACE, 20, lambda p: -abs(p["a"] - 0.3), seed=5)
    b = random_search(SPACE, 20, lambda p: -abs(p["a"] - 0.3), seed=5)
    assert [t.params for t in a.trials] == [t.params for t in b.trials]
    assert all(a.best.objective >= t.objective for t in a.trials)
    # each trial is reproducible from (seed, index) alone
    assert SPACE.sample(tuning.trial_rng(5, 7)) == a.trials[7].params


def test_failures_are_logged_and_skipped():
    def objective(p):
        if p["b"] % 2:
            raise RuntimeError("odd")
        return p["a"]

    res = random_search(SPACE, 30, objective, seed=1)
    failed = [t for t in res.trials if t.failed]
    assert failed and all(t.error == "odd" for t in failed)
    assert not res.best.failed
    with pytest.raises(RuntimeError):
        random_search(SPACE, 3, lambda p: 1 / 0, seed=1)


def test_ties_go_to_earliest():
    res = random_search(SPACE, 10, lambda p: 1.0, seed=2)
    assert res.best.trial == 0


def test_beats_median_sanity():
    wins = 0
    for seed in range(100):
        res = random_search(SPACE, 20, lambda p: -((p["a"] - 0.7) ** 2), seed=seed)
        wins += res.best.objective > np.median([t.objective for t in res.trials])
    assert wins >= 95


def test_logs(tmp_path):
    res = random_search(SPACE, 3, lambda p: p["a"], seed=0)
    tuning.write_trial_log(res, SPACE, tmp_path / "log.csv")
    lines = (tmp_path / "log.csv").read_text().splitlines()
    assert lines[0] == "trial,a,b,objective,failed" and len(lines) == 4
    assert float(lines[1].split(",")[3]) == res.trials[0].objective
    tuning.write_best_config({"cf": {"kind": "toy", "hyperparameters": res.best.params}}, tmp_path / "b.json")
    assert "hyperparameters" in (tmp_path / "b.json").read_text()
