"""Experiment configuration: YAML file plus command-line overrides.

Schema (all keys optional except ``dataset``)::

    dataset: path/to/interactions.csv
    dataset_name: XuetangX          # label used in the metrics table
    seed: 0
    k: 5                            # final list length
    ks: [3, 5]                      # evaluate several list lengths (default [k])
    l: null                         # initial CF list length (default 3 * k)
    min_interactions: 5
    min_completions: 3
    cf:
      kind: SLIM                    # UKNN IKNN SVD NMF WRMF EASE SLIM
      hyperparameters: {topk: 380}  # or the string "tune"
    sa:
      kind: XGB                     # CoxNet RSF XGB
      hyperparameters: {}           # shared by both events, or "tune"
      completion: {}                # per-event overrides
      dropout: {}
    variants: [baseline, D, C, DC]
    tune_budget: 50
    cv_folds: 5
    output: runs/example
"""

from __future__ import annotations

import os
import zlib
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .rerank import Variant

THREADS_ENV = "SURVREC_THREADS"


def stage_seed(seed: int, stage: str) -> int:
    """Sub-seed for one pipeline stage: ``SeedSequence([seed, crc32(stage)])``."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(stage.encode("utf-8"))])
    return int(ss.generate_state(1)[0])


@dataclass
class ModelChoice:
    kind: str
    hyperparameters: dict | str = field(default_factory=dict)
    completion: dict = field(default_factory=dict)
    dropout: dict = field(default_factory=dict)

    @property
    def tune(self) -> bool:
        return self.hyperparameters == "tune"

    def params_for(self, event: str | None = None) -> dict:
        base = {} if self.tune else dict(self.hyperparameters)
        if event == "completion":
            base.update(self.completion)
        elif event == "dropout":
            base.update(self.dropout)
        return base


@dataclass
class ExperimentConfig:
    dataset: str
    output: str = "runs/default"
    dataset_name: str = ""
    seed: int = 0
    k: int = 5
    ks: list = field(default_factory=list)
    l: int | None = None
    min_interactions: int = 5
    min_completions: int = 3
    cf: ModelChoice = field(default_factory=lambda: ModelChoice("SLIM"))
    sa: ModelChoice = field(default_factory=lambda: ModelChoice("XGB"))
    variants: list = field(default_factory=lambda: [v.value for v in Variant])
    tune_budget: int = 50
    cv_folds: int = 5

    def __post_init__(self):
        if isinstance(self.cf, dict):
            self.cf = ModelChoice(**self.cf)
        if isinstance(self.sa, dict):
            self.sa = ModelChoice(**self.sa)
        if not self.ks:
            self.ks = [self.k]
        self.ks = [int(v) for v in self.ks]
        self.variants = [Variant(v) if not isinstance(v, Variant) else v for v in self.variants]
        self.validate()

    def validate(self, check_paths: bool = False) -> None:
        if self.k < 1 or any(v < 1 for v in self.ks):
            raise ValueError("k must be >= 1")
        for kk in self.ks:
            if self.list_length(kk) < kk:
                raise ValueError(f"l = {self.list_length(kk)} must be >= k = {kk}")
        if check_paths and not Path(self.dataset).exists():
            raise FileNotFoundError(f"dataset {self.dataset} does not exist")

    def list_length(self, k: int) -> int:
        return int(self.l) if self.l is not None else 3 * int(k)

    @property
    def label(self) -> str:
        return self.dataset_name or Path(self.dataset).stem

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, ModelChoice):
                v = {"kind": v.kind, "hyperparameters": v.hyperparameters,
                     "completion": v.completion, "dropout": v.dropout}
            elif f.name == "variants":
                v = [x.value for x in v]
            out[f.name] = v
        return out


def _set_path(d: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    for key in keys[:-1]:
        d = d.setdefault(key, {})
    d[keys[-1]] = value


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a YAML config and apply ``{"dotted.key": value}`` overrides on top."""
    data: dict = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        base = Path(path).parent
        for key in ("dataset", "output"):
            if key in data and not Path(str(data[key])).is_absolute():
                data[key] = str(base / data[key])
    for key, value in (overrides or {}).items():
        if value is not None:
            _set_path(data, key, value)
    if "dataset" not in data:
        raise ValueError("config needs a 'dataset' path")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return ExperimentConfig(**data)


def thread_limit() -> int | None:
    value = os.environ.get(THREADS_ENV)
    return int(value) if value else None
