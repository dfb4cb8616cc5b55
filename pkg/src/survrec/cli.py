"""Command-line entry point: ``survrec <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from . import cf, data, pipeline, survival, tuning
from .config import ExperimentConfig, load_config, stage_seed
from .evaluate import evaluate_run, format_table, write_metrics_csv
from .features import EventDefinition, FeatureBuilder
from .rerank import Variant
from .synth import generate_synthetic

logger = logging.getLogger("survrec")

EVENTS = {"completion": EventDefinition.COMPLETION, "dropout": EventDefinition.DROPOUT}


def _params(text: str | None) -> dict:
    """``'{"topk": 100}'`` or ``topk=100,l1_norm=0.001`` (values parsed as YAML scalars)."""
    if not text:
        return {}
    text = text.strip()
    if text.startswith("{"):
        return dict(json.loads(text))
    out = {}
    for item in text.split(","):
        key, sep, value = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected key=value, got {item!r}")
        out[key.strip()] = yaml.safe_load(value)
    return out


def _cmd_synth(args) -> None:
    text = generate_synthetic(args.users, args.courses, latent_dim=args.latent_dim, seed=args.seed,
                              density=args.density, hazard_effect=args.hazard_effect)
    if args.output == "-":
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text, encoding="utf-8")


def _cmd_preprocess(args) -> None:
    kept = data.filter_cold_start(data.load_interactions(args.input), args.min_interactions, args.min_completions)
    data.write_interactions(kept, args.output)
    summary = data.dataset_summary(data.normalize_times(kept))
    print(json.dumps(summary, indent=1))


def _cmd_split(args) -> None:
    cfg = ExperimentConfig(dataset=args.input, seed=args.seed, min_interactions=args.min_interactions,
                           min_completions=args.min_completions)
    s = pipeline.prepare_split(data.load_interactions(args.input), cfg)
    data.save_split(s, args.output, seed=args.seed)
    print(json.dumps({name: part.nnz for name, part in s.parts().items()}))


def _cmd_fit_cf(args) -> None:
    s = data.load_split(args.split)
    model = pipeline.fit_cf_stage(s, args.model.upper(), _params(args.params), stage_seed(args.seed, "cf"))
    cf.save_recommender(model, args.output)


def _cmd_fit_sa(args) -> None:
    s = data.load_split(args.split)
    ds = FeatureBuilder(s.train).training_dataset(EVENTS[args.event])
    model = survival.fit_survival(args.model, ds, _params(args.params),
                                  seed=stage_seed(args.seed, f"sa-{args.event}"))
    survival.save_survival_model(model, args.output)


def _cmd_recommend(args) -> None:
    s = data.load_split(args.split)
    model = cf.load_recommender(args.cf_model)
    if tuple(model.courses) != tuple(s.train.courses) or tuple(model.users) != tuple(s.train.users):
        raise SystemExit("cf model axes do not match the split")
    candidates = pipeline.cf_candidates(model, s, "test")
    variants = [Variant(v) for v in args.variants]
    sa = None
    if any(v is not Variant.BASELINE for v in variants):
        if not (args.sa_completion and args.sa_dropout):
            raise SystemExit("re-ranking variants need --sa-completion and --sa-dropout")
        sa = pipeline.survival_rankings(FeatureBuilder(s.train), survival.load_survival_model(args.sa_completion),
                                        survival.load_survival_model(args.sa_dropout), candidates)
    l = args.l if args.l is not None else 3 * args.k
    if l < args.k:
        raise SystemExit(f"l = {l} must be >= k = {args.k}")
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for v, lists in pipeline.recommend(candidates, sa, args.k, l, variants).items():
        pipeline.write_recommendations(lists, s.train.users, s.train.courses,
                                       out / f"recommendations_{v.value}_top{args.k}.csv")


def _cmd_evaluate(args) -> None:
    s = data.load_split(args.split)
    recs = {}
    for item in args.recommendations:
        variant, sep, path = item.partition("=")
        if not sep:
            raise SystemExit(f"expected VARIANT=PATH, got {item!r}")
        recs[Variant(variant)] = pipeline.read_recommendations(path, s.train.users, s.train.courses)
    rows = evaluate_run(recs, s.test, args.k, dataset=args.dataset_name, model=args.model_name)
    if args.output:
        write_metrics_csv(rows, args.output)
    sys.stdout.write(format_table(rows))


def _cmd_tune(args) -> None:
    s = data.load_split(args.split)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    kind = args.model
    if kind.upper() in cf.KINDS:
        space, result = pipeline.tune_cf(s, kind.upper(), args.k, args.budget, stage_seed(args.seed, "tune-cf"))
        log, key = out / "tune_cf.csv", "cf"
    else:
        ds = FeatureBuilder(s.train).training_dataset(EVENTS[args.event])
        space, result = pipeline.tune_sa(ds, kind, args.budget, args.folds,
                                         stage_seed(args.seed, f"tune-sa-{args.event}"))
        log, key = out / f"tune_sa_{args.event}.csv", f"sa_{args.event}"
    tuning.write_trial_log(result, space, log)
    tuning.write_best_config({key: {"kind": kind, "hyperparameters": result.best.params,
                                    "objective": result.best.objective}}, out / "best_config.json")
    print(json.dumps({"best": result.best.params, "objective": result.best.objective}))


def _cmd_run(args) -> None:
    overrides = {
        "dataset": args.dataset, "output": args.output, "seed": args.seed, "k": args.k, "l": args.l,
        "cf.kind": args.cf, "sa.kind": args.sa, "variants": args.variants, "tune_budget": args.tune_budget,
        "dataset_name": args.dataset_name,
    }
    if args.k is not None and args.ks is None:
        overrides["ks"] = [args.k]
    if args.ks is not None:
        overrides["ks"] = args.ks
    if args.cf_params is not None:
        overrides["cf.hyperparameters"] = "tune" if args.cf_params == "tune" else _params(args.cf_params)
    if args.sa_params is not None:
        overrides["sa.hyperparameters"] = "tune" if args.sa_params == "tune" else _params(args.sa_params)
    cfg = load_config(args.config, overrides)
    rows = pipeline.run_pipeline(cfg)
    sys.stdout.write(format_table(rows))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="survrec", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic interaction CSV")
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--users", type=int, default=500)
    p.add_argument("--courses", type=int, default=60)
    p.add_argument("--latent-dim", type=int, default=5)
    p.add_argument("--density", type=float, default=0.22, help="target enrollment rate")
    p.add_argument("--hazard-effect", type=float, default=3.0, help="affinity weight in both hazards")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    def filters(p):
        p.add_argument("--min-interactions", type=int, default=5)
        p.add_argument("--min-completions", type=int, default=3)

    p = sub.add_parser("preprocess", help="apply the cold-start filter")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    filters(p)
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("split", help="filter, normalize and split into train/validation/test")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    filters(p)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("fit-cf", help="fit a recommender on a split's training part")
    p.add_argument("--split", required=True)
    p.add_argument("--model", required=True, choices=[k.lower() for k in cf.KINDS] + list(cf.KINDS))
    p.add_argument("--params", help="JSON object or key=value list")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_fit_cf)

    p = sub.add_parser("fit-sa", help="fit a survival model for one event definition")
    p.add_argument("--split", required=True)
    p.add_argument("--model", required=True, help="CoxNet, RSF or XGB")
    p.add_argument("--event", required=True, choices=sorted(EVENTS))
    p.add_argument("--params")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_fit_sa)

    p = sub.add_parser("recommend", help="write top-k lists for the test users")
    p.add_argument("--split", required=True)
    p.add_argument("--cf-model", required=True)
    p.add_argument("--sa-completion")
    p.add_argument("--sa-dropout")
    p.add_argument("--variants", nargs="+", default=[v.value for v in Variant], choices=[v.value for v in Variant])
    p.add_argument("-k", type=int, default=5)
    p.add_argument("-l", type=int)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=_cmd_recommend)

    p = sub.add_parser("evaluate", help="NDCG and NDCG-t of recommendation files")
    p.add_argument("--split", required=True)
    p.add_argument("recommendations", nargs="+", metavar="VARIANT=PATH")
    p.add_argument("-k", type=int, nargs="+", default=[5])
    p.add_argument("--dataset-name", default="")
    p.add_argument("--model-name", default="")
    p.add_argument("-o", "--output", help="metrics CSV path")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("tune", help="random search for one model")
    p.add_argument("--split", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--event", choices=sorted(EVENTS), default="completion")
    p.add_argument("--budget", type=int, default=50)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("-k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("run", help="full pipeline from a config file; flags override it")
    p.add_argument("config", nargs="?")
    p.add_argument("--dataset")
    p.add_argument("--dataset-name")
    p.add_argument("-o", "--output")
    p.add_argument("--seed", type=int)
    p.add_argument("-k", type=int)
    p.add_argument("--ks", type=int, nargs="+")
    p.add_argument("-l", type=int)
    p.add_argument("--cf")
    p.add_argument("--cf-params", help='JSON, key=value list, or "tune"')
    p.add_argument("--sa")
    p.add_argument("--sa-params", help='JSON, key=value list, or "tune"')
    p.add_argument("--variants", nargs="+", choices=[v.value for v in Variant])
    p.add_argument("--tune-budget", type=int)
    p.set_defaults(func=_cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except pipeline.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (data.DataError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
