"""The three-step pipeline: CF candidates, survival rankings, re-ranking, evaluation."""

from __future__ import annotations

import csv
import json
import logging
from contextlib import contextmanager, nullcontext
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import cf, data, rerank, survival, tuning
from .config import ExperimentConfig, stage_seed, thread_limit
from .evaluate import binary_relevance, evaluate_run, format_table, mean_metric, write_metrics_csv
from .features import EventDefinition, FeatureBuilder
from .rerank import Direction, RankedList, Variant

logger = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def stage(name: str):
    logger.info("stage %s", name)
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def candidate_exclusion(split: data.DatasetSplit, target: str):
    """Known cells that are not candidates when ranking for ``target``."""
    other = split.test if target == "validation" else split.validation
    return other.to_csr()


def prepare_split(records, cfg: ExperimentConfig) -> data.DatasetSplit:
    kept = data.filter_cold_start(records, cfg.min_interactions, cfg.min_completions)
    matrix = data.normalize_times(kept)
    return data.split(matrix, stage_seed(cfg.seed, "split"))


def fit_cf_stage(split: data.DatasetSplit, kind: str, params: dict, seed: int) -> cf.FittedRecommender:
    return cf.fit_recommender(kind, data.binarize(split.train), params, seed=seed,
                              users=split.train.users, courses=split.train.courses)


def cf_candidates(model: cf.FittedRecommender, split: data.DatasetSplit, target: str = "test"):
    return cf.score_unobserved(model, data.binarize(split.train), candidate_exclusion(split, target))


def validation_ndcg(model, split: data.DatasetSplit, k: int) -> float:
    lists = cf.rank_top_l(cf_candidates(model, split, "validation"), k)
    value, _ = mean_metric(lists, binary_relevance(split.validation), k)
    return value


def tune_cf(split, kind: str, k: int, budget: int, seed: int):
    space = tuning.default_spaces()[kind]

    def objective(params):
        return validation_ndcg(fit_cf_stage(split, kind, params, seed), split, k)

    return space, tuning.random_search(space, budget, objective, seed)


def _space_key(kind: str) -> str:
    return {"coxnet": "CoxNet", "rsf": "RSF", "xgb": "XGB", "xgbcox": "XGB"}[kind.lower()]


def tune_sa(ds, kind: str, budget: int, folds: int, seed: int):
    space = tuning.default_spaces()[_space_key(kind)]

    def objective(params):
        return survival.cv_c_index(ds, kind, params, folds=folds, seed=seed)

    return space, tuning.random_search(space, budget, objective, seed)


@dataclass
class SurvivalRankings:
    completion: dict[int, RankedList]
    dropout: dict[int, RankedList]


def survival_rankings(builder: FeatureBuilder, completion_model, dropout_model,
                      candidates: cf.ScoredCandidates) -> SurvivalRankings:
    """Risk-rank every candidate course of every user under both event models."""
    users, courses = np.nonzero(candidates.candidate)
    pairs = np.column_stack([users, courses])
    ds = builder.build(pairs, EventDefinition.COMPLETION)
    risk_c = completion_model.predict_risk(ds.X)
    risk_d = dropout_model.predict_risk(ds.X)
    bounds = np.searchsorted(users, np.arange(candidates.scores.shape[0] + 1))
    out_c, out_d = {}, {}
    for u in range(candidates.scores.shape[0]):
        lo, hi = bounds[u], bounds[u + 1]
        out_c[u] = rerank.rank_by_risk(u, courses[lo:hi], risk_c[lo:hi], Direction.DESCENDING)
        out_d[u] = rerank.rank_by_risk(u, courses[lo:hi], risk_d[lo:hi], Direction.ASCENDING)
    return SurvivalRankings(out_c, out_d)


def recommend(candidates: cf.ScoredCandidates, sa: SurvivalRankings | None, k: int, l: int,
              variants) -> dict[Variant, dict[int, RankedList]]:
    l_cf = cf.rank_top_l(candidates, l)
    out = {}
    for v in variants:
        if v is not Variant.BASELINE and sa is None:
            raise ValueError(f"variant {v.value} needs survival rankings")
        out[v] = rerank.final_lists(v, l_cf, k, sa.completion if sa else None, sa.dropout if sa else None)
    return out


def write_recommendations(lists, users, courses, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(rerank.EXPORT_HEADER)
        writer.writerows(rerank.export_rows(lists, users, courses))


def read_recommendations(path, users, courses) -> dict[int, RankedList]:
    uidx = {u: i for i, u in enumerate(users)}
    cidx = {c: i for i, c in enumerate(courses)}
    rows: dict[int, list] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for r in csv.DictReader(fh):
            opt = lambda key, cast: cast(r[key]) if r[key] != "" else None
            rows.setdefault(uidx[r["user_id"]], []).append(rerank.Entry(
                cidx[r["item_id"]], int(r["position"]), opt("cf_score", float), opt("dropout_rank", int),
                opt("completion_rank", int), opt("aggregate_rank", float)))
    return {u: RankedList(u, tuple(sorted(e, key=lambda x: x.position))) for u, e in rows.items()}


def _limit_threads():
    n = thread_limit()
    if n is None:
        return nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def run_pipeline(cfg: ExperimentConfig, records=None) -> list[dict]:
    """Run every stage and write artifacts under ``cfg.output``.

    Writes the split (CSV + manifest), fitted models, per-variant
    recommendation lists, ``metrics.csv`` and ``metrics.txt``; returns the
    metric rows. ``records`` skips reading ``cfg.dataset`` from disk.
    """
    with _limit_threads():
        return _run(cfg, records)


def _run(cfg: ExperimentConfig, records) -> list[dict]:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    with stage("load"):
        if records is None:
            cfg.validate(check_paths=True)
            records = data.load_interactions(cfg.dataset)
    with stage("split"):
        split = prepare_split(records, cfg)
        data.save_split(split, out / "split", seed=cfg.seed)
    best: dict = {}

    with stage("cf"):
        cf_seed = stage_seed(cfg.seed, "cf")
        kind = cfg.cf.kind.upper()
        params = cfg.cf.params_for()
        if cfg.cf.tune:
            space, result = tune_cf(split, kind, max(cfg.ks), cfg.tune_budget, stage_seed(cfg.seed, "tune-cf"))
            tuning.write_trial_log(result, space, out / "tune_cf.csv")
            params = result.best.params
        cf_model = fit_cf_stage(split, kind, params, cf_seed)
        cf.save_recommender(cf_model, out / "cf_model.npz")
        best["cf"] = {"kind": kind, "hyperparameters": params}
        candidates = cf_candidates(cf_model, split, "test")

    sa_rank = None
    if any(v is not Variant.BASELINE for v in cfg.variants):
        with stage("sa"):
            builder = FeatureBuilder(split.train)
            models = {}
            for event, definition in (("completion", EventDefinition.COMPLETION),
                                      ("dropout", EventDefinition.DROPOUT)):
                ds = builder.training_dataset(definition)
                params = cfg.sa.params_for(event)
                if cfg.sa.tune:
                    space, result = tune_sa(ds, cfg.sa.kind, cfg.tune_budget, cfg.cv_folds,
                                            stage_seed(cfg.seed, f"tune-sa-{event}"))
                    tuning.write_trial_log(result, space, out / f"tune_sa_{event}.csv")
                    params = {**result.best.params, **cfg.sa.params_for(event)}
                models[event] = survival.fit_survival(cfg.sa.kind, ds, params,
                                                      seed=stage_seed(cfg.seed, f"sa-{event}"))
                survival.save_survival_model(models[event], out / f"sa_{event}.npz")
                best[f"sa_{event}"] = {"kind": cfg.sa.kind, "hyperparameters": params}
            sa_rank = survival_rankings(builder, models["completion"], models["dropout"], candidates)
    tuning.write_best_config(best, out / "best_config.json")

    with stage("rerank+evaluate"):
        rows = []
        for k in cfg.ks:
            lists = recommend(candidates, sa_rank, k, cfg.list_length(k), cfg.variants)
            for v, per_user in lists.items():
                write_recommendations(per_user, split.train.users, split.train.courses,
                                      out / f"recommendations_{v.value}_top{k}.csv")
            rows.extend(evaluate_run(lists, split.test, [k], dataset=cfg.label, model=kind))
        write_metrics_csv(rows, out / "metrics.csv")
        (out / "metrics.txt").write_text(format_table(rows), encoding="utf-8")
        with open(out / "config.json", "w", encoding="utf-8") as fh:
            json.dump(cfg.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")
    return rows
