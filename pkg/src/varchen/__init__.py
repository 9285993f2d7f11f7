"""Variance-reduced stochastic damped L-BFGS with monitored eigenvalue bounds."""

from .bounds import MonitorConfig, SpectrumBounds, check_and_flush, estimate_lg, lemma1_bounds, theorem1_bounds
from .datasets import Dataset, DatasetParseError, load_csv, load_dataset, load_libsvm, synthetic_binary
from .memory import CurvaturePair, LbfgsMemory, clamp_scaling, compute_theta, damp_pair, scaling_parameter
from .optimizer import OptimizerConfig, RunTrace, Schedule, run, step_size
from .problems import (FiniteSumProblem, LogisticRegression, Quadratic, SigmoidSVM,
                       SyntheticIllConditioned, logistic_regression, sigmoid_svm,
                       synthetic_illconditioned)

__version__ = "0.1.0"
