"""Seeded random search over the hyperparameter boxes of every model."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Param:
    name: str
    low: float
    high: float
    scale: str = "linear"  # or "log"
    type: str = "real"  # or "int"

    def __post_init__(self):
        if self.low > self.high:
            raise ValueError(f"{self.name}: low > high")
        if self.scale == "log" and self.low <= 0:
            raise ValueError(f"{self.name}: log scale needs a positive lower bound")

    def sample(self, rng: np.random.Generator):
        if self.type == "int":
            if self.scale == "log":
                v = int(round(math.exp(rng.uniform(math.log(self.low), math.log(self.high)))))
            else:
                v = int(rng.integers(int(self.low), int(self.high) + 1))
            return min(max(v, int(self.low)), int(self.high))
        if self.scale == "log":
            v = math.exp(rng.uniform(math.log(self.low), math.log(self.high)))
        else:
            v = float(rng.uniform(self.low, self.high))
        return min(max(v, self.low), self.high)


@dataclass(frozen=True)
class SearchSpace:
    model: str
    params: tuple[Param, ...]

    def sample(self, rng: np.random.Generator) -> dict:
        return {p.name: p.sample(rng) for p in self.params}

    def __getitem__(self, name: str) -> Param:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)


def default_spaces() -> dict[str, SearchSpace]:
    # CoxNet alpha lives in (0, 1); the log-scale box starts at 1e-4.
    knn = (Param("n_neighbors", 20, 800, type="int"), Param("shrink", 0, 1000))
    tree10 = (Param("min_samples_leaf", 10, 20, type="int"), Param("min_samples_split", 10, 20, type="int"))
    return {s.model: s for s in (
        SearchSpace("UKNN", knn),
        SearchSpace("IKNN", knn),
        SearchSpace("SVD", (Param("n_factors", 3, 50, type="int"),)),
        SearchSpace("NMF", (Param("n_factors", 10, 300, type="int"), Param("l1_ratio", 0.1, 0.9))),
        SearchSpace("WRMF", (Param("epochs", 10, 200, type="int"), Param("n_factors", 10, 100, type="int"),
                             Param("regularization", 1e-5, 1e-1, scale="log"))),
        SearchSpace("EASE", (Param("l2_norm", 1e0, 1e7, scale="log"),)),
        SearchSpace("SLIM", (Param("topk", 50, 600, type="int"), Param("l1_norm", 1e-5, 1.0, scale="log"),
                             Param("l2_norm", 1e-3, 1.0, scale="log"))),
        SearchSpace("CoxNet", (Param("alpha", 1e-4, 1.0 - 1e-9, scale="log"),)),
        SearchSpace("RSF", (Param("n_estimators", 25, 100, type="int"), *tree10,
                            Param("max_depth", 2, 12, type="int"))),
        SearchSpace("XGB", (Param("learning_rate", 0.1, 1.0), Param("n_estimators", 25, 200, type="int"),
                            Param("min_samples_leaf", 5, 20, type="int"),
                            Param("min_samples_split", 5, 20, type="int"),
                            Param("max_depth", 2, 20, type="int"))),
    )}


@dataclass
class TrialResult:
    trial: int
    params: dict
    objective: float
    seed: int
    wall_time: float
    failed: bool = False
    error: str = ""


@dataclass
class SearchResult:
    best: TrialResult
    trials: list[TrialResult] = field(default_factory=list)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(trial)])


def random_search(space: SearchSpace, budget: int, objective: Callable[[dict], float],
                  seed: int = 0) -> SearchResult:
    """Evaluate ``budget`` independent samples and keep the highest objective.

    A trial whose objective raises is logged as failed and the search goes
    on; ties go to the earlier trial.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    trials = []
    for t in range(int(budget)):
        params = space.sample(trial_rng(seed, t))
        start = time.perf_counter()
        try:
            value = float(objective(params))
            if math.isnan(value):
                raise ValueError("objective returned NaN")
            res = TrialResult(t, params, value, seed, time.perf_counter() - start)
        except Exception as exc:  # noqa: BLE001 - a failed trial must not stop the search
            logger.warning("trial %d failed: %s", t, exc)
            res = TrialResult(t, params, float("-inf"), seed, time.perf_counter() - start,
                              failed=True, error=str(exc))
        trials.append(res)
    ok = [r for r in trials if not r.failed]
    if not ok:
        raise RuntimeError(f"all {budget} trials failed for {space.model}")
    best = max(ok, key=lambda r: (r.objective, -r.trial))
    return SearchResult(best, trials)


def write_trial_log(result: SearchResult, space: SearchSpace, path) -> None:
    names = [p.name for p in space.params]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trial", *names, "objective", "failed"])
        for r in result.trials:
            writer.writerow([r.trial, *(repr(r.params[n]) for n in names),
                             repr(r.objective), int(r.failed)])


def write_best_config(best: Mapping[str, Mapping], path) -> None:
    """``{"cf": {"kind": ..., "hyperparameters": {...}}, ...}`` as JSON."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(best, fh, indent=1, sort_keys=True)
        fh.write("\n")
