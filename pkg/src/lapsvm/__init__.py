"""Laplacian Support Vector Machines trained in the primal.

Semi-supervised kernel classifiers built on manifold regularization: an
L2-hinge primal objective over labeled points plus ambient (RKHS) and
intrinsic (graph Laplacian) penalties, solved either exactly by Newton's
method or approximately by early-stopped preconditioned conjugate gradient.
Includes LapRLSC and supervised baselines, synthetic benchmark generators,
the split/cross-validation protocol, and a CLI experiment harness.
"""

from lapsvm.kernels import KernelSpec, GramMatrix, eval_kernel, gram, cross_gram
from lapsvm.graph import GraphSpec, Laplacian, knn_adjacency, laplacian, intrinsic_norm
from lapsvm.core import Problem, PrimalState
from lapsvm.solvers import (
    NewtonConfig,
    PcgConfig,
    SolveReport,
    StopReason,
    newton_solve,
    pcg_solve,
    line_search,
)
from lapsvm.stopping import StopRule, StopContext
from lapsvm.data import Dataset, SplitPlan, generate_g50c, generate_two_moons, load_dataset, make_splits
from lapsvm.models import TrainedModel, train_lapsvm, train_laprlsc, predict, error_rate

__all__ = [
    "KernelSpec",
    "GramMatrix",
    "eval_kernel",
    "gram",
    "cross_gram",
    "GraphSpec",
    "Laplacian",
    "knn_adjacency",
    "laplacian",
    "intrinsic_norm",
    "Problem",
    "PrimalState",
    "NewtonConfig",
    "PcgConfig",
    "SolveReport",
    "StopReason",
    "newton_solve",
    "pcg_solve",
    "line_search",
    "StopRule",
    "StopContext",
    "Dataset",
    "SplitPlan",
    "generate_g50c",
    "generate_two_moons",
    "load_dataset",
    "make_splits",
    "TrainedModel",
    "train_lapsvm",
    "train_laprlsc",
    "predict",
    "error_rate",
]

__version__ = "0.1.0"
