"""Datasets, synthetic generators, file formats, and the split protocol.

A Dataset is an (n, m) point matrix with integer class labels and an
optional per-point partition role: L (labeled training), U (unlabeled
training), V (validation), T (test). The splitter realizes the evaluation
protocol: stratified 4-fold cross-validation, the fold generation
randomized 3 times for 12 splits total; within each split one fold is the
test set and L/V are drawn at random from the remaining folds with at
least one example per class each, everything else becoming U. Unlabeled
points keep their true labels so harnesses can report err(U), but training
code only ever sees their features.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

LABELED = "L"
UNLABELED = "U"
VALIDATION = "V"
TEST = "T"

ROLES = (LABELED, UNLABELED, VALIDATION, TEST)


class DataFormatError(ValueError):
    """Raised for unparseable or inconsistent dataset files."""


@dataclass(frozen=True)
class Dataset:
    """Point cloud with labels and an optional L/U/V/T partition."""

    points: np.ndarray
    labels: np.ndarray
    partition: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        labels = np.asarray(self.labels)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labels.astype(int))
        if pts.ndim != 2:
            raise ValueError(f"points must be 2-D, got shape {pts.shape}")
        if labels.shape != (pts.shape[0],):
            raise ValueError("labels length must match number of points")
        if self.partition is not None:
            part = np.asarray(self.partition, dtype="<U1")
            object.__setattr__(self, "partition", part)
            if part.shape != (pts.shape[0],):
                raise ValueError("partition length must match number of points")
            bad = set(part.tolist()) - set(ROLES)
            if bad:
                raise ValueError(f"unknown partition roles: {sorted(bad)}")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def n_features(self) -> int:
        return self.points.shape[1]

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def role_indices(self, role: str) -> np.ndarray:
        if self.partition is None:
            raise ValueError("dataset has no partition; run the splitter first")
        return np.flatnonzero(self.partition == role)

    def with_partition(self, partition: np.ndarray) -> "Dataset":
        return replace(self, partition=np.asarray(partition, dtype="<U1"))


@dataclass(frozen=True)
class SplitPlan:
    """Cross-validation plan: folds x randomizations splits with (|L|, |V|) sizes.

    folds=1 handles datasets with a fixed, pre-assigned test partition: the
    existing T role is kept and only the training pool is re-subdivided.
    """

    n_labeled: int
    n_validation: int
    folds: int = 4
    randomizations: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.folds < 1:
            raise ValueError(f"folds must be >= 1, got {self.folds}")
        if self.randomizations < 1:
            raise ValueError(f"randomizations must be >= 1, got {self.randomizations}")
        if self.n_labeled < 1:
            raise ValueError("need at least one labeled point")
        if self.n_validation < 0:
            raise ValueError("validation size must be >= 0")


# ---------------------------------------------------------------------------
# synthetic generators
# ---------------------------------------------------------------------------

# Two equal-prior unit-variance Gaussians misclassify at rate Phi(-d/2) where
# d is the mean separation; d = 2 * 1.6448536... places the Bayes error at 5%.
_G50C_SEPARATION = 3.2897072539029457
G50C_DIM = 50


def generate_g50c(n: int = 550, seed: int = 0) -> Dataset:
    """Two isotropic unit-covariance Gaussians in 50 dimensions, Bayes error 5%.

    Classes are balanced (floor/ceil of n/2) and the means differ only along
    the first coordinate, so the Bayes rule is a threshold on x[0].
    """
    if n < 2:
        raise ValueError(f"need n >= 2 points, got {n}")
    rng = np.random.default_rng(seed)
    n_neg = n // 2
    n_pos = n - n_neg
    labels = np.concatenate([-np.ones(n_neg, dtype=int), np.ones(n_pos, dtype=int)])
    points = rng.standard_normal((n, G50C_DIM))
    points[:, 0] += labels * (_G50C_SEPARATION / 2.0)
    order = rng.permutation(n)
    return Dataset(points=points[order], labels=labels[order])


def generate_two_moons(n: int = 200, noise: float = 0.0, seed: int = 0) -> Dataset:
    """Two interleaved unit half-circles with Gaussian jitter.

    The upper moon is centered at the origin, the lower at (1, 0.5); with
    noise = 0 every point lies exactly on its half-circle.
    """
    if n < 4:
        raise ValueError(f"need n >= 4 points, got {n}")
    rng = np.random.default_rng(seed)
    n_up = n // 2
    n_down = n - n_up
    t_up = np.linspace(0.0, np.pi, n_up)
    t_down = np.linspace(0.0, np.pi, n_down)
    points = np.concatenate(
        [
            np.column_stack([np.cos(t_up), np.sin(t_up)]),
            np.column_stack([1.0 - np.cos(t_down), 0.5 - np.sin(t_down)]),
        ]
    )
    if noise > 0:
        points = points + rng.normal(scale=noise, size=points.shape)
    labels = np.concatenate([np.ones(n_up, dtype=int), -np.ones(n_down, dtype=int)])
    order = rng.permutation(n)
    return Dataset(points=points[order], labels=labels[order])


def scarce_label_split(dataset: Dataset, per_class: int = 1, n_validation: int = 0, seed: int = 0) -> Dataset:
    """Semi-supervised demo partition: per_class labeled points, optional V, rest U."""
    rng = np.random.default_rng(seed)
    part = np.full(dataset.n, UNLABELED, dtype="<U1")
    for cls in dataset.classes:
        idx = np.flatnonzero(dataset.labels == cls)
        if idx.size < per_class:
            raise ValueError(f"class {cls} has only {idx.size} points, need {per_class} labeled")
        part[rng.choice(idx, size=per_class, replace=False)] = LABELED
    if n_validation:
        pool = np.flatnonzero(part == UNLABELED)
        if pool.size < n_validation:
            raise ValueError("not enough points left for the validation set")
        part[rng.choice(pool, size=n_validation, replace=False)] = VALIDATION
    return dataset.with_partition(part)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def _parse_int_label(token: str, path: str, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        try:
            val = float(token)
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: label {token!r} is not an integer") from None
        if val != int(val):
            raise DataFormatError(f"{path}:{lineno}: label {token!r} is not an integer") from None
        return int(val)


def _load_csv(path: str) -> Dataset:
    rows = []
    labels = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise DataFormatError(f"{path}:{lineno}: expected features and a trailing label column")
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise DataFormatError(
                    f"{path}:{lineno}: inconsistent column count {len(parts)} (expected {width})"
                )
            try:
                rows.append([float(v) for v in parts[:-1]])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: bad feature value ({exc})") from None
            labels.append(_parse_int_label(parts[-1], path, lineno))
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return Dataset(points=np.array(rows), labels=np.array(labels))


def _load_libsvm(path: str) -> Dataset:
    entries = []
    labels = []
    max_index = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            labels.append(_parse_int_label(parts[0], path, lineno))
            feats = {}
            for item in parts[1:]:
                try:
                    idx_str, val_str = item.split(":", 1)
                    idx = int(idx_str)
                    val = float(val_str)
                except ValueError:
                    raise DataFormatError(f"{path}:{lineno}: bad feature entry {item!r}") from None
                if idx < 1:
                    raise DataFormatError(f"{path}:{lineno}: feature indices are 1-based, got {idx}")
                feats[idx] = val
                max_index = max(max_index, idx)
            entries.append(feats)
    if not entries:
        raise DataFormatError(f"{path}: no data rows")
    points = np.zeros((len(entries), max_index))
    for i, feats in enumerate(entries):
        for idx, val in feats.items():
            points[i, idx - 1] = val
    return Dataset(points=points, labels=np.array(labels))


def load_dataset(path: str, fmt: str = "csv") -> Dataset:
    """Load a dataset file; fmt is "csv" (trailing integer label) or "libsvm"."""
    if fmt == "csv":
        return _load_csv(path)
    if fmt == "libsvm":
        return _load_libsvm(path)
    raise DataFormatError(f"unknown dataset format {fmt!r}; expected 'csv' or 'libsvm'")


def save_dataset(dataset: Dataset, path: str, fmt: str = "csv") -> None:
    """Write points+labels in a loadable format (partition roles are not stored)."""
    with open(path, "w", encoding="utf-8") as fh:
        if fmt == "csv":
            for row, label in zip(dataset.points, dataset.labels):
                fh.write(",".join(repr(v) for v in row) + f",{label}\n")
        elif fmt == "libsvm":
            for row, label in zip(dataset.points, dataset.labels):
                feats = " ".join(f"{j + 1}:{repr(v)}" for j, v in enumerate(row) if v != 0)
                fh.write(f"{label} {feats}".rstrip() + "\n")
        else:
            raise DataFormatError(f"unknown dataset format {fmt!r}; expected 'csv' or 'libsvm'")


def export_split_manifest(dataset: Dataset, path: str) -> None:
    """Write the point indices of each partition role, one role per line."""
    if dataset.partition is None:
        raise ValueError("dataset has no partition to export")
    with open(path, "w", encoding="utf-8") as fh:
        for role in ROLES:
            idx = " ".join(str(i) for i in dataset.role_indices(role))
            fh.write(f"{role}: {idx}".rstrip() + "\n")


def load_split_manifest(dataset: Dataset, path: str) -> Dataset:
    """Apply a manifest produced by :func:`export_split_manifest` to a dataset."""
    part = np.full(dataset.n, "", dtype="<U1")
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                role, _, rest = line.partition(":")
                role = role.strip()
                indices = [int(v) for v in rest.split()]
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: bad manifest line") from None
            if role not in ROLES:
                raise DataFormatError(f"{path}:{lineno}: unknown role {role!r}")
            for i in indices:
                if not 0 <= i < dataset.n:
                    raise DataFormatError(f"{path}:{lineno}: index {i} out of range")
                if part[i] != "":
                    raise DataFormatError(f"{path}:{lineno}: index {i} assigned twice")
                part[i] = role
    if (part == "").any():
        missing = int(np.flatnonzero(part == "")[0])
        raise DataFormatError(f"{path}: point {missing} has no role")
    return dataset.with_partition(part)


# ---------------------------------------------------------------------------
# split protocol
# ---------------------------------------------------------------------------


def _stratified_folds(labels: np.ndarray, folds: int, rng: np.random.Generator) -> np.ndarray:
    """Deal each class round-robin into folds after a shuffle; returns fold ids."""
    fold_of = np.empty(labels.shape[0], dtype=int)
    start = 0
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = rng.permutation(idx)
        fold_of[idx] = (np.arange(idx.size) + start) % folds
        start += idx.size  # rotate so small classes spread across folds
    return fold_of


def _draw_with_class_cover(
    pool: np.ndarray, labels: np.ndarray, size: int, rng: np.random.Generator, what: str
) -> np.ndarray:
    """Pick ``size`` indices from pool with >= 1 per class, no other balancing."""
    classes = np.unique(labels)
    if size < classes.size:
        raise ValueError(f"{what} size {size} cannot cover all {classes.size} classes")
    chosen = []
    for cls in classes:
        members = pool[labels[pool] == cls]
        if members.size == 0:
            raise ValueError(f"class {cls} has no points available for the {what} set")
        chosen.append(rng.choice(members))
    chosen = np.array(chosen)
    rest = np.setdiff1d(pool, chosen, assume_unique=False)
    extra = size - chosen.size
    if extra > rest.size:
        raise ValueError(f"not enough points to draw the {what} set")
    if extra:
        chosen = np.concatenate([chosen, rng.choice(rest, size=extra, replace=False)])
    return chosen


def make_splits(dataset: Dataset, plan: SplitPlan) -> list[Dataset]:
    """Materialize every split of the cross-validation plan as a partitioned dataset."""
    n = dataset.n
    labels = dataset.labels
    splits = []
    for r in range(plan.randomizations):
        rng = np.random.default_rng([plan.seed, r])
        if plan.folds > 1:
            fold_of = _stratified_folds(labels, plan.folds, rng)
            test_sets = [np.flatnonzero(fold_of == f) for f in range(plan.folds)]
        else:
            if dataset.partition is None:
                raise ValueError("folds=1 requires a dataset with a pre-assigned T role")
            test_sets = [dataset.role_indices(TEST)]
        for test_idx in test_sets:
            part = np.full(n, UNLABELED, dtype="<U1")
            part[test_idx] = TEST
            pool = np.flatnonzero(part != TEST)
            lab = _draw_with_class_cover(pool, labels, plan.n_labeled, rng, "labeled")
            part[lab] = LABELED
            if plan.n_validation:
                pool = np.flatnonzero(part == UNLABELED)
                val = _draw_with_class_cover(pool, labels, plan.n_validation, rng, "validation")
                part[val] = VALIDATION
            splits.append(dataset.with_partition(part))
    return splits


def bayes_error_g50c() -> float:
    """Expected error of the optimal rule on the G50C construction (5%)."""
    return 100.0 * 0.5 * math.erfc(_G50C_SEPARATION / 2.0 / math.sqrt(2.0))
