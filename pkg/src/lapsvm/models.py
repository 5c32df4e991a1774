"""User-facing classifiers: LapSVM (Newton or PCG), LapRLSC, supervised baselines.

Training operates on a partitioned dataset and uses only the L and U points
to build the kernel and the graph; V and T stay out of sample. Internally
points are reordered labeled-first, which is the convention every solver
expects. Binary problems (labels exactly {-1, +1}) train a single
classifier; anything else trains one-vs-all with argmax prediction. Setting
gamma_i = 0 recovers the purely supervised L2-hinge SVM / RLSC baselines,
since the unlabeled coefficients vanish at the optimum.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from lapsvm import solvers
from lapsvm.core import PrimalState, Problem
from lapsvm.data import Dataset, LABELED, UNLABELED, VALIDATION
from lapsvm.graph import GraphSpec, knn_adjacency, laplacian
from lapsvm.kernels import KernelSpec, cross_gram, gram
from lapsvm.solvers import NewtonConfig, PcgConfig, SolveReport

MODEL_FORMAT_TAG = "lapsvm-model/1"


@dataclass
class TrainedModel:
    """Per-class coefficient vectors with everything needed for out-of-sample use."""

    kernel_spec: KernelSpec
    classes: list[int]
    coefficients: list[np.ndarray]  # one alpha vector (length n) per entry
    biases: list[float]
    train_points: np.ndarray
    solve_reports: list[SolveReport | None]
    train_index_map: np.ndarray | None = None  # original dataset indices, labeled-first

    @property
    def is_binary(self) -> bool:
        return len(self.coefficients) == 1


@dataclass(frozen=True)
class TrainingArtifacts:
    """Precomputed per-split matrices shared by every classifier variant."""

    problem_points: np.ndarray
    gram_values: np.ndarray
    lap: object | None
    labels: np.ndarray  # original integer labels, labeled-first order
    l: int
    index_map: np.ndarray


def _binary_class_list(labels: np.ndarray) -> list[int] | None:
    present = np.unique(labels)
    if present.size == 2 and set(present.tolist()) == {-1, 1}:
        return [1]
    return None


def prepare_training(
    dataset: Dataset,
    kernel_spec: KernelSpec,
    graph_spec: GraphSpec | None,
    ridge: float = 0.0,
    need_graph: bool = True,
) -> TrainingArtifacts:
    """Assemble the Gram matrix and Laplacian over the L and U points only."""
    lab_idx = dataset.role_indices(LABELED)
    unlab_idx = dataset.role_indices(UNLABELED)
    if lab_idx.size == 0:
        raise ValueError("no labeled training points in this split")
    index_map = np.concatenate([lab_idx, unlab_idx])
    pts = dataset.points[index_map]
    labels = dataset.labels[index_map]
    k = gram(kernel_spec, pts, ridge=ridge)
    lap = None
    if need_graph:
        if graph_spec is None:
            raise ValueError("graph_spec is required when gamma_i > 0")
        w = knn_adjacency(pts, graph_spec)
        lap = laplacian(w, graph_spec)
    return TrainingArtifacts(
        problem_points=pts,
        gram_values=k.values,
        lap=lap,
        labels=labels,
        l=int(lab_idx.size),
        index_map=index_map,
    )


def _binary_targets(labels: np.ndarray, l: int, positive) -> np.ndarray:
    y = np.zeros(labels.shape[0])
    y[:l] = np.where(labels[:l] == positive, 1.0, -1.0)
    return y


def _check_class_coverage(labels: np.ndarray, l: int, classes: np.ndarray) -> None:
    seen = set(np.unique(labels[:l]).tolist())
    missing = [c for c in classes.tolist() if c not in seen]
    if missing:
        raise ValueError(f"classes {missing} have no labeled examples in this split")


def _solve_one(
    problem: Problem,
    solver: str,
    newton_config: NewtonConfig | None,
    pcg_config: PcgConfig | None,
) -> SolveReport:
    if solver == "newton":
        return solvers.newton_solve(problem, newton_config)
    if solver == "pcg":
        return solvers.pcg_solve(problem, pcg_config)
    raise ValueError(f"unknown solver {solver!r}; expected 'newton' or 'pcg'")


def _validation_inputs(dataset, artifacts, kernel_spec, positive):
    """Cross-gram and +-1 labels of the V set for validation-based stop rules."""
    v_idx = dataset.role_indices(VALIDATION)
    if v_idx.size == 0:
        raise ValueError("the selected stop rule requires a validation set in the split")
    kv = cross_gram(kernel_spec, artifacts.problem_points, dataset.points[v_idx])
    yv = np.where(dataset.labels[v_idx] == positive, 1.0, -1.0)
    return kv, yv


def train_lapsvm(
    dataset: Dataset,
    kernel_spec: KernelSpec,
    graph_spec: GraphSpec | None,
    gamma_a: float,
    gamma_i: float,
    solver: str = "newton",
    newton_config: NewtonConfig | None = None,
    pcg_config: PcgConfig | None = None,
    ridge: float = 0.0,
    artifacts: TrainingArtifacts | None = None,
) -> TrainedModel:
    """Train a (possibly multiclass) LapSVM on the L and U points of a split.

    ``artifacts`` lets callers reuse precomputed Gram/Laplacian matrices
    across classifiers and solvers, which also keeps them out of timed
    regions in benchmarks.
    """
    if artifacts is None:
        artifacts = prepare_training(dataset, kernel_spec, graph_spec, ridge, need_graph=gamma_i > 0)
    labels, l = artifacts.labels, artifacts.l
    classes = np.unique(dataset.labels)
    _check_class_coverage(labels, l, classes)

    binary = _binary_class_list(dataset.labels)
    class_list = binary if binary is not None else [int(c) for c in classes.tolist()]

    coefficients, biases, reports = [], [], []
    base_pcg = pcg_config or PcgConfig()
    for positive in class_list:
        y = _binary_targets(labels, l, positive)
        problem = Problem(
            K=artifacts.gram_values,
            L=artifacts.lap if gamma_i > 0 else None,
            y=y,
            l=l,
            gamma_a=gamma_a,
            gamma_i=gamma_i,
        )
        cfg = base_pcg
        if solver == "pcg" and cfg.stop_rule.needs_validation and cfg.validation_gram is None:
            kv, yv = _validation_inputs(dataset, artifacts, kernel_spec, positive)
            cfg = dataclasses.replace(cfg, validation_gram=kv, validation_labels=yv)
        report = _solve_one(problem, solver, newton_config, cfg)
        coefficients.append(report.final_state.alpha.copy())
        biases.append(float(report.final_state.b))
        reports.append(report)

    return TrainedModel(
        kernel_spec=kernel_spec,
        classes=class_list,
        coefficients=coefficients,
        biases=biases,
        train_points=artifacts.problem_points,
        solve_reports=reports,
        train_index_map=artifacts.index_map,
    )


def train_laprlsc(
    dataset: Dataset,
    kernel_spec: KernelSpec,
    graph_spec: GraphSpec | None,
    gamma_a: float,
    gamma_i: float,
    ridge: float = 0.0,
    artifacts: TrainingArtifacts | None = None,
) -> TrainedModel:
    """Laplacian RLSC: squared loss on labeled points, one linear solve per class.

    Realized as the L2-hinge system with the error set frozen to all labeled
    points, which is exactly the squared loss and reuses the Newton solver.
    """
    if artifacts is None:
        artifacts = prepare_training(dataset, kernel_spec, graph_spec, ridge, need_graph=gamma_i > 0)
    labels, l = artifacts.labels, artifacts.l
    classes = np.unique(dataset.labels)
    _check_class_coverage(labels, l, classes)

    binary = _binary_class_list(dataset.labels)
    class_list = binary if binary is not None else [int(c) for c in classes.tolist()]

    coefficients, biases = [], []
    for positive in class_list:
        y = _binary_targets(labels, l, positive)
        problem = Problem(
            K=artifacts.gram_values,
            L=artifacts.lap if gamma_i > 0 else None,
            y=y,
            l=l,
            gamma_a=gamma_a,
            gamma_i=gamma_i,
        )
        state = solvers.frozen_error_set_solve(problem)
        coefficients.append(state.alpha.copy())
        biases.append(float(state.b))

    return TrainedModel(
        kernel_spec=kernel_spec,
        classes=class_list,
        coefficients=coefficients,
        biases=biases,
        train_points=artifacts.problem_points,
        solve_reports=[None] * len(class_list),
        train_index_map=artifacts.index_map,
    )


def predict(model: TrainedModel, points) -> tuple[np.ndarray, np.ndarray]:
    """Decisions and raw scores for out-of-sample points.

    Binary models return sign(f) with f = 0 mapped to +1. Multiclass models
    return the argmax class, ties broken by the lowest class index.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[1] != model.train_points.shape[1]:
        raise ValueError(
            f"query dimension {pts.shape[1]} != training dimension {model.train_points.shape[1]}"
        )
    kq = cross_gram(model.kernel_spec, model.train_points, pts)
    scores = np.column_stack([kq @ a + b for a, b in zip(model.coefficients, model.biases)])
    if model.is_binary:
        s = scores[:, 0]
        return np.where(s >= 0.0, 1, -1).astype(int), s
    winners = np.argmax(scores, axis=1)  # first max wins: lowest class index on ties
    decisions = np.asarray(model.classes, dtype=int)[winners]
    return decisions, scores


def error_rate(decisions, truth, macro: bool = False) -> float:
    """Percentage of wrong decisions; macro averages the per-class rates.

    The macro rate 100 * (1 - TP/2 - TN/2) is defined for +-1 binary labels
    only, with TP/TN the true-positive and true-negative rates.
    """
    d = np.asarray(decisions)
    t = np.asarray(truth)
    if d.shape != t.shape:
        raise ValueError(f"decision/truth lengths differ: {d.shape} vs {t.shape}")
    if not macro:
        return 100.0 * float(np.mean(d != t))
    present = set(np.unique(t).tolist())
    if not present <= {-1, 1}:
        raise ValueError("macro error rate is defined for binary +-1 labels only")
    if present != {-1, 1}:
        raise ValueError("macro error rate needs both classes present in the truth")
    tp = float(np.mean(d[t == 1] == 1))
    tn = float(np.mean(d[t == -1] == -1))
    return 100.0 * (1.0 - tp / 2.0 - tn / 2.0)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def save_model(model: TrainedModel, path: str) -> None:
    """Write a self-describing JSON model file; coefficients round-trip bit-exactly."""
    doc = {
        "format": MODEL_FORMAT_TAG,
        "kernel": {
            "kind": model.kernel_spec.kind,
            "sigma": model.kernel_spec.sigma,
            "degree": model.kernel_spec.degree,
            "offset": model.kernel_spec.offset,
            "distance_exponent": model.kernel_spec.distance_exponent,
        },
        "classes": [int(c) for c in model.classes],
        "per_class": [
            {"bias": b, "alpha": a.tolist()} for a, b in zip(model.coefficients, model.biases)
        ],
        "train_points": model.train_points.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path: str) -> TrainedModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT_TAG:
        raise ValueError(f"{path}: not a model file (format tag {doc.get('format')!r})")
    spec = KernelSpec(**doc["kernel"])
    return TrainedModel(
        kernel_spec=spec,
        classes=[int(c) for c in doc["classes"]],
        coefficients=[np.array(e["alpha"], dtype=float) for e in doc["per_class"]],
        biases=[float(e["bias"]) for e in doc["per_class"]],
        train_points=np.array(doc["train_points"], dtype=float),
        solve_reports=[None] * len(doc["per_class"]),
    )
