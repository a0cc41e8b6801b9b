"""Simulated human-AI decision experiments with manipulated feature attributions."""

from .behavior import BehaviorModel, cross_validate, encode, encode_records, train
from .config import ExperimentConfig, load_config, parse_config
from .data import BehaviorRecord, CsvSchema, Dataset, Explanation, MinMaxNormalizer, TaskInstance, load_csv, split
from .exceptions import (
    ConfigError,
    ContractError,
    ExplainerError,
    MissingArtifactError,
    OptimizationError,
    ParseError,
    SchemaError,
    StageError,
    StratificationError,
    VocabularyError,
    XaiNudgeError,
)
from .explainers import augment, exact_shapley, lime_explain, rescale_max_abs
from .manipulation import ExplanationManipulator, ManipulationConfig, ManipulationResult, consistency_loss, manipulate
from .metrics import Undefined, fairness_diff, fpr_fnr, mean_ci, permutation_test, reliance
from .models import LogisticModel, RandomForestVoter, train_forest
from .pipeline import Run, run_experiment
from .simulation import SimDM, adoption_probability, assisted_decision, generate_logs, independent_decision, sample_population
from .targets import CombineModel, adversarial_target, combine, fit_combiner, weighted_vote_baseline
from .tasks import SUITES, make_task

__version__ = "0.1.0"
