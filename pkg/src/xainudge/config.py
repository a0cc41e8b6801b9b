"""Experiment configuration: a versioned YAML schema validated field by field.

Defaults reproduce the published hyperparameters; the bundled recipes in
``xainudge/recipes`` override the ones that need a desk-scale budget.
"""

import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .exceptions import ConfigError

SCHEMA_VERSION = 1


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class CsvSource(_Section):
    path: str
    feature_columns: List[str] = Field(min_length=1)
    label_column: str
    group_column: str
    categorical_columns: List[str] = []
    id_column: Optional[str] = None
    label_map: Optional[Dict[str, int]] = None
    group_vocab: Optional[List[str]] = None
    task_kind: Literal["census", "recidivism", "bias", "toxicity", "synthetic"] = "synthetic"


class TaskConfig(_Section):
    kind: Literal["census", "recidivism", "bias", "toxicity", "synthetic", "csv"] = "census"
    n_instances: int = Field(2000, ge=20)
    n_features: Optional[int] = Field(None, ge=1, le=15)
    groups: Optional[List[str]] = None
    split: Tuple[float, float, float] = (0.5, 0.2, 0.3)
    csv: Optional[CsvSource] = None

    @model_validator(mode="after")
    def _consistent(self):
        if abs(sum(self.split) - 1.0) > 1e-9 or min(self.split) <= 0:
            raise ValueError("split fractions must be positive and sum to 1")
        if self.kind == "csv" and self.csv is None:
            raise ValueError("kind 'csv' needs a csv section")
        if self.kind == "synthetic" and (self.n_features is None or not self.groups or len(self.groups) != 2):
            raise ValueError("kind 'synthetic' needs n_features and exactly two groups")
        return self


class AIModelConfig(_Section):
    num_trees: int = Field(100, ge=1)
    max_depth: int = Field(8, ge=1)


class AugmentConfig(_Section):
    mask_frac: float = Field(0.3, ge=0, le=1)
    amp_frac: float = Field(0.2, ge=0, le=1)
    amp_factor: float = 2.0

    @model_validator(mode="after")
    def _disjoint(self):
        if self.mask_frac + self.amp_frac > 1:
            raise ValueError("mask_frac + amp_frac must not exceed 1")
        return self


class ExplainConfig(_Section):
    background_size: int = Field(64, ge=1)
    lime_samples: int = Field(500, ge=10)
    lime_kernel_width: float = Field(0.75, gt=0)
    augment: AugmentConfig = AugmentConfig()


class PopulationConfig(_Section):
    # None means: use the suite's default
    distortion_sd: Optional[float] = Field(None, ge=0)
    noise_sd: Optional[float] = Field(None, ge=0)
    anchor_range: Tuple[float, float] = (0.2, 0.6)
    sensitivity_range: Tuple[float, float] = (0.5, 1.5)
    attention_k: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _ranges(self):
        lo, hi = self.anchor_range
        if not 0 <= lo <= hi <= 1:
            raise ValueError("anchor_range must satisfy 0 <= low <= high <= 1")
        lo, hi = self.sensitivity_range
        if not 0 <= lo <= hi:
            raise ValueError("sensitivity_range must satisfy 0 <= low <= high")
        return self


class SimLogConfig(_Section):
    participants: int = Field(80, ge=1)
    tasks_per_participant: int = Field(15, ge=1)
    mix: Dict[Literal["shapley", "lime", "augmented"], float] = {"shapley": 1.0, "lime": 1.0, "augmented": 1.0}
    population: PopulationConfig = PopulationConfig()

    @model_validator(mode="after")
    def _mix(self):
        if any(v < 0 for v in self.mix.values()) or sum(self.mix.values()) <= 0:
            raise ValueError("mix weights must be non-negative with a positive sum")
        return self


class BehaviorConfig(_Section):
    hidden_dim: int = Field(64, ge=1)
    learning_rate: float = Field(1e-4, gt=0)
    batch_size: int = Field(128, ge=1)
    epochs: int = Field(10, ge=1)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)
    cv_folds: int = Field(5, ge=0)
    # cross-validate on a seeded subsample of this many records (None: all)
    cv_records: Optional[int] = Field(None, ge=2)

    def train_kwargs(self):
        return self.model_dump(exclude={"cv_folds", "cv_records"})


class ManipulationSection(_Section):
    mode: Literal["adversarial", "benign"] = "adversarial"
    step_size: float = Field(0.01, gt=0)
    tradeoff: float = Field(0.01, ge=0)
    threshold: float = Field(0.1, gt=0)
    max_rounds: int = Field(100, ge=1)
    restarts: int = Field(5, ge=1)
    init_low: float = -1.0
    init_high: float = 1.0
    hinge_margin: float = Field(0.05, ge=0)
    box: Optional[float] = Field(1.0, gt=0)
    target_map: Optional[Dict[str, Literal[-1, 1]]] = None
    panel_size: int = Field(101, ge=1)
    combiner_alpha: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _init(self):
        if not self.init_low < self.init_high:
            raise ValueError("init_low must be < init_high")
        return self

    def optimizer_kwargs(self):
        return self.model_dump(include={
            "step_size", "tradeoff", "threshold", "max_rounds", "restarts",
            "init_low", "init_high", "hinge_margin", "box",
        })


class EvaluationConfig(_Section):
    participants: int = Field(60, ge=1)
    tasks_per_participant: int = Field(15, ge=1)
    conditions: List[Literal["shapley", "lime", "augmented", "manipulated"]] = ["shapley", "lime", "manipulated"]
    num_perms: int = Field(10000, ge=1000)
    group_order: Optional[Tuple[str, str]] = None
    population: Optional[PopulationConfig] = None

    @model_validator(mode="after")
    def _conditions(self):
        if len(set(self.conditions)) != len(self.conditions) or not self.conditions:
            raise ValueError("conditions must be nonempty and unique")
        return self


class ExperimentConfig(_Section):
    schema_version: Literal[1] = SCHEMA_VERSION
    seed: int = Field(0, ge=0)
    task: TaskConfig = TaskConfig()
    ai_model: AIModelConfig = AIModelConfig()
    explain: ExplainConfig = ExplainConfig()
    sim_log: SimLogConfig = SimLogConfig()
    behavior: BehaviorConfig = BehaviorConfig()
    manipulation: ManipulationSection = ManipulationSection()
    evaluation: EvaluationConfig = EvaluationConfig()

    def config_hash(self):
        """12-hex digest of everything except the seed, which keys run directories separately."""
        body = self.model_dump(mode="json", exclude={"seed"})
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:12]

    def with_seed(self, seed):
        return self.model_copy(update={"seed": seed}) if seed is not None else self


def _format_errors(err):
    lines = []
    for item in err.errors():
        loc = ".".join(str(p) for p in item["loc"]) or "<root>"
        lines.append(f"{loc}: {item['msg']}")
    return "; ".join(lines)


def parse_config(data):
    """Validate a mapping; raises :class:`ConfigError` naming every offending field."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: unsupported version {version!r} (expected {SCHEMA_VERSION})")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from None


def recipe_names():
    return sorted(p.name[:-5] for p in resources.files("xainudge.recipes").iterdir() if p.name.endswith(".yaml"))


def load_config(source):
    """Load a YAML config from a path, or a bundled recipe by name."""
    path = Path(source)
    if path.exists():
        text = path.read_text()
    elif str(source) in recipe_names():
        text = resources.files("xainudge.recipes").joinpath(f"{source}.yaml").read_text()
    else:
        raise ConfigError(f"config {source!r} not found (bundled recipes: {', '.join(recipe_names())})")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    return parse_config(data)
