"""Structured dictionary learning with alternative training samples."""

from .bench import ExperimentConfig, grid_search, make_synthetic, run_experiment
from .classifier import Coding, LinearClassifier, evaluate, predict, train_classifier
from .coding import OmpParams, omp_code, omp_code_batch, ridge_code, soft_threshold
from .core import (
    Dictionary,
    EsdlParams,
    LabeledMatrix,
    SolverReport,
    build_ideal_matrix,
    esdl_objective,
    sdl_l1_objective,
)
from .data import (
    ImageMeta,
    SplitSpec,
    half_split_alternative,
    load_matrix,
    mirror_samples,
    normalize_columns,
    save_matrix,
    train_test_split,
)
from .errors import ConfigError, DataError, NumericalError, StructDictError
from .esdl import esdl_train, update_coefficients, update_dictionary
from .ksvd import KsvdParams, init_dictionary_per_class, ksvd_train
from .sdl_l1 import AdmmParams, admm_update_x, admm_update_z, sdl_l1_train

__version__ = "0.1.0"
