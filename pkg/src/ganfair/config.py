"""Experiment configuration: TOML (or JSON) files mapped onto dataclasses."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .data import (GroupAssigner, GroupedDataset, check_proportions, default_assigner,
                   default_prototypes, make_gaussian_mixture, make_inverted_patches,
                   ring_centers)
from .ensemble import EnsembleConfig
from .numerics import Rng
from .training import TrainConfig

DATASET_KINDS = ("two-mode", "ring", "mixture", "patches")
MODEL_KINDS = ("gan", "cgan", "ensemble")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class DatasetSpec:
    kind: str = "two-mode"
    proportions: tuple = (0.5, 0.5)
    n: int = 2000
    seed: int = 0
    centers: tuple = ()
    sigma: float = 0.5
    ring_k: int = 8
    radius: float = 3.0
    noise_sigma: float = 0.05
    margin: float = 0.1

    def build(self) -> GroupedDataset:
        rng = Rng(self.seed)
        if self.kind == "two-mode":
            return make_gaussian_mixture([[-3.0, 0.0], [3.0, 0.0]], self.sigma, self.proportions, self.n, rng)
        if self.kind == "ring":
            return make_gaussian_mixture(ring_centers(self.ring_k, self.radius), self.sigma,
                                         self.proportions, self.n, rng)
        if self.kind == "mixture":
            return make_gaussian_mixture(np.asarray(self.centers), self.sigma, self.proportions, self.n, rng)
        return make_inverted_patches(default_prototypes(), self.proportions, self.n,
                                     self.noise_sigma, rng, self.margin)

    @property
    def name(self) -> str:
        return f"{self.kind}[{'/'.join(f'{p:g}' for p in self.proportions)}]"


@dataclass
class ExperimentConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    model: str = "gan"
    train: TrainConfig = field(default_factory=TrainConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    seeds: tuple = (0,)
    eval_draws: int = 1000
    purity_draws: int = 500
    assigner: str = "auto"
    target: str | tuple = "declared"
    out: str = ""
    parallel: int = 1
    scatter: bool = True

    def assigner_for(self, ds: GroupedDataset) -> GroupAssigner:
        return default_assigner(ds) if self.assigner == "auto" else GroupAssigner.parse(self.assigner)

    def target_for(self, ds: GroupedDataset) -> tuple:
        if self.target == "declared":
            return tuple(ds.proportions)
        if self.target == "uniform":
            return tuple([1.0 / ds.k] * ds.k)
        return tuple(self.target)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["train"] = self.train.to_dict()
        d["ensemble"]["train"] = self.train.to_dict()
        return d


def _coerce(cls, section: dict, prefix: str, **overrides):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in section.items():
        if key not in known:
            raise ConfigError(f"{prefix}.{key}", "unknown key")
        if isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[key] = value
    kwargs.update(overrides)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        # name the key the message mentions, else the section
        bad = next((k for k in kwargs if k in str(exc)), None)
        raise ConfigError(f"{prefix}.{bad}" if bad else prefix, str(exc)) from exc


def from_dict(raw: dict) -> ExperimentConfig:
    raw = dict(raw)
    allowed = {"experiment", "dataset", "train", "ensemble", "assigner"}
    for key in raw:
        if key not in allowed:
            raise ConfigError(key, "unknown section")

    ds_raw = dict(raw.get("dataset", {}))
    kind = ds_raw.get("kind", "two-mode")
    if kind not in DATASET_KINDS:
        raise ConfigError("dataset.kind", f"must be one of {DATASET_KINDS}")
    if "proportions" not in ds_raw and kind == "ring":
        k = int(ds_raw.get("ring_k", 8))
        ds_raw["proportions"] = [1.0 / k] * k
    if kind == "two-mode" and "sigma" not in ds_raw:
        ds_raw["sigma"] = 0.5
    if kind == "ring" and "sigma" not in ds_raw:
        ds_raw["sigma"] = 0.3
    try:
        check_proportions(ds_raw.get("proportions", (0.5, 0.5)))
    except ValueError as exc:
        raise ConfigError("dataset.proportions", str(exc)) from exc
    dataset = _coerce(DatasetSpec, ds_raw, "dataset")
    expected_k = {"two-mode": 2, "patches": 2, "ring": dataset.ring_k,
                  "mixture": len(dataset.centers)}[kind]
    if len(dataset.proportions) != expected_k:
        raise ConfigError("dataset.proportions", f"expected {expected_k} entries for kind {kind!r}")

    tr_raw = dict(raw.get("train", {}))
    if "noise_dim" not in tr_raw and kind == "patches":
        tr_raw["noise_dim"] = 8
    train = _coerce(TrainConfig, tr_raw, "train")
    ensemble = _coerce(EnsembleConfig, dict(raw.get("ensemble", {})), "ensemble", train=train)

    ex = dict(raw.get("experiment", {}))
    asg = raw.get("assigner", {})
    if isinstance(asg, dict):
        kind_a = asg.get("kind", "auto")
        if kind_a == "mean-threshold":
            ex["assigner"] = f"mean-threshold:{asg.get('tau', 0.5)}"
        elif kind_a == "nearest-center":
            centers = asg.get("centers")
            if not centers:
                raise ConfigError("assigner.centers", "nearest-center needs centers")
            ex["assigner"] = GroupAssigner.nearest_center(centers).describe()
        elif kind_a != "auto":
            raise ConfigError("assigner.kind", f"unknown assigner {kind_a!r}")
    cfg = _coerce(ExperimentConfig, ex, "experiment", dataset=dataset, train=train, ensemble=ensemble)

    if cfg.model not in MODEL_KINDS:
        raise ConfigError("experiment.model", f"must be one of {MODEL_KINDS}")
    seeds = tuple(int(s) for s in cfg.seeds)
    if not seeds or len(set(seeds)) != len(seeds) or min(seeds) < 0:
        raise ConfigError("experiment.seeds", "need a non-empty list of distinct non-negative seeds")
    cfg.seeds = seeds
    if cfg.eval_draws < 1:
        raise ConfigError("experiment.eval_draws", "must be at least 1")
    if cfg.parallel < 1:
        raise ConfigError("experiment.parallel", "must be at least 1")
    if isinstance(cfg.target, tuple):
        if len(cfg.target) != len(dataset.proportions):
            raise ConfigError("experiment.target", "one entry per group required")
        try:
            check_proportions(cfg.target)
        except ValueError as exc:
            raise ConfigError("experiment.target", str(exc)) from exc
    elif cfg.target not in ("declared", "uniform"):
        raise ConfigError("experiment.target", "use 'declared', 'uniform' or a list")
    if cfg.assigner != "auto":
        try:
            GroupAssigner.parse(cfg.assigner)
        except ValueError as exc:
            raise ConfigError("experiment.assigner", str(exc)) from exc
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        raw = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(str(path), f"cannot parse: {exc}") from exc
    return from_dict(raw)
