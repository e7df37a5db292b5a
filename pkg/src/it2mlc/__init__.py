"""Interval type-2 fuzzy neural networks for multi-label classification."""

from .data import Dataset, DatasetStats, SplitSpec, load_dataset, parse_arff, parse_csv, split, stats
from .errors import InputError, It2Error, NumericError, ParseError, ShapeError, StateError
from .fuzzifier import FuzzifierEstimator
from .harness import ExperimentConfig, ablation, lambda_sweep, prepare_data, run_pipeline
from .it2 import (
    FuzzifierPair,
    It2Label,
    Prediction,
    build_interval,
    defuzzify,
    derive_fuzzifiers,
    it2_loss,
    type1_binarize,
    type1_loss,
)
from .membership import MembershipHead
from .metrics import MetricsReport, evaluate
from .model import BinaryRelevance, It2Classifier, ModelParams

__version__ = "0.1.0"
