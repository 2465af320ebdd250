"""Domain types and shared numerics.

Labels are 0-based class indices. A crowd label set is stored sparsely in
COO form: one row per observed (instance, worker, class) triple, sorted by
instance then worker. Unobserved labels are simply absent.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

SIMPLEX_TOL = 1e-9


class InvalidInputError(ValueError):
    """Raised when an argument violates an operation's preconditions."""


class EmptyEvidenceError(ValueError):
    """Raised when an instance has no observed crowd labels."""


class MissingEstimateError(KeyError):
    """Raised when a learned performance lookup has no entry."""


class UnavailableSideInformationError(ValueError):
    """Raised when a risk estimator needs inputs that were not supplied."""


class DegenerateFoldError(ValueError):
    """Raised when a fold carries no usable evidence."""


def argmax_tiebreak(v) -> int:
    """Index of the maximum; ties go to the lowest index."""
    arr = np.asarray(v)
    if arr.size == 0:
        raise InvalidInputError("argmax of an empty array")
    # np.argmax already returns the first occurrence
    return int(np.argmax(arr))


def rowwise_argmax(m: np.ndarray) -> np.ndarray:
    """Lowest-index argmax of each row."""
    return np.argmax(np.asarray(m), axis=1)


@dataclass(frozen=True)
class ClassLabel:
    index: int
    num_classes: int

    def __post_init__(self):
        if self.num_classes < 2:
            raise InvalidInputError("num_classes must be >= 2")
        if not 0 <= self.index < self.num_classes:
            raise InvalidInputError(
                f"class index {self.index} outside [0, {self.num_classes})"
            )

    def __index__(self) -> int:
        return self.index

    def __int__(self) -> int:
        return self.index

    def one_hot(self) -> np.ndarray:
        e = np.zeros(self.num_classes)
        e[self.index] = 1.0
        return e


@dataclass(frozen=True, eq=False)
class ProbabilityVector:
    """A point on the probability simplex.

    Pass ``normalize=True`` to rescale a non-negative vector first; the
    simplex check is applied afterwards either way.
    """

    probs: np.ndarray
    normalize: bool = field(default=False, repr=False)

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).ravel()
        if p.size < 1:
            raise InvalidInputError("empty probability vector")
        if np.any(~np.isfinite(p)) or np.any(p < 0):
            raise InvalidInputError(f"entries must be finite and non-negative: {p}")
        if self.normalize:
            s = p.sum()
            if s <= 0:
                raise InvalidInputError("cannot normalize a zero vector")
            p = p / s
        if abs(p.sum() - 1.0) > SIMPLEX_TOL:
            raise InvalidInputError(f"entries sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __len__(self) -> int:
        return self.probs.size

    def __getitem__(self, i):
        return self.probs[i]

    def __iter__(self):
        return iter(self.probs)

    def __eq__(self, other):
        if not isinstance(other, ProbabilityVector):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())

    @property
    def num_classes(self) -> int:
        return self.probs.size

    def argmax(self) -> int:
        return argmax_tiebreak(self.probs)

    @classmethod
    def one_hot(cls, index: int, num_classes: int) -> "ProbabilityVector":
        return cls(ClassLabel(index, num_classes).one_hot())


def zero_one_loss(y, y_hat) -> int:
    """0 if both vectors have the same (lowest-index) argmax, else 1."""
    a = np.asarray(y, dtype=float)
    b = np.asarray(y_hat, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidInputError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return int(argmax_tiebreak(a) != argmax_tiebreak(b))


@dataclass(frozen=True)
class EqualPerformance:
    """Every worker is assumed to label correctly with the same probability p."""

    p: float = 0.8
    num_classes: int | None = None

    def __post_init__(self):
        if not self.p <= 1.0:
            raise InvalidInputError(f"p={self.p} must be <= 1")
        if self.num_classes is not None and not self.p > 1.0 / self.num_classes:
            raise InvalidInputError(f"p={self.p} must exceed 1/C")
        if self.p <= 0:
            raise InvalidInputError(f"p={self.p} must be positive")

    def check(self, num_classes: int) -> None:
        if not self.p > 1.0 / num_classes:
            raise InvalidInputError(f"p={self.p} must exceed 1/C={1.0 / num_classes}")


@dataclass(frozen=True)
class LearnedPerformance:
    """Per (instance, worker) accuracy estimates, e.g. outputs of h."""

    table: Mapping[tuple[int, int], float]

    def __post_init__(self):
        for key, value in self.table.items():
            if not 0.0 <= value <= 1.0:
                raise InvalidInputError(f"accuracy {value} at {key} outside [0, 1]")

    def lookup(self, instance: int, worker: int) -> float:
        try:
            return float(self.table[(instance, worker)])
        except KeyError:
            raise MissingEstimateError((instance, worker)) from None


PerformanceEstimate = EqualPerformance | LearnedPerformance


class CrowdLabelSet:
    """Sparse N x M assignment of class labels from workers to instances."""

    def __init__(self, instances, workers, labels, num_instances: int,
                 num_workers: int, num_classes: int):
        inst = np.asarray(instances, dtype=np.int64).ravel()
        work = np.asarray(workers, dtype=np.int64).ravel()
        lab = np.asarray(labels, dtype=np.int64).ravel()
        if not (inst.size == work.size == lab.size):
            raise InvalidInputError("instances, workers and labels differ in length")
        if num_classes < 2:
            raise InvalidInputError("num_classes must be >= 2")
        if inst.size:
            if inst.min() < 0 or inst.max() >= num_instances:
                raise InvalidInputError("instance index out of range")
            if work.min() < 0 or work.max() >= num_workers:
                raise InvalidInputError("worker index out of range")
            if lab.min() < 0 or lab.max() >= num_classes:
                raise InvalidInputError("class index out of range")
        order = np.lexsort((work, inst))
        inst, work, lab = inst[order], work[order], lab[order]
        dup = (np.diff(inst) == 0) & (np.diff(work) == 0)
        if np.any(dup):
            i = int(np.flatnonzero(dup)[0])
            raise InvalidInputError(
                f"duplicate label for instance {inst[i]}, worker {work[i]}"
            )
        for arr in (inst, work, lab):
            arr.setflags(write=False)
        self.instances = inst
        self.workers = work
        self.labels = lab
        self.num_instances = int(num_instances)
        self.num_workers = int(num_workers)
        self.num_classes = int(num_classes)

    @classmethod
    def from_entries(cls, entries: Iterable[tuple[int, int, int]], num_instances: int,
                     num_workers: int, num_classes: int) -> "CrowdLabelSet":
        rows = [(int(n), int(m), int(c)) for n, m, c in entries]
        arr = np.array(rows, dtype=np.int64).reshape(-1, 3)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], num_instances, num_workers, num_classes)

    def __len__(self) -> int:
        return self.instances.size

    def __eq__(self, other):
        if not isinstance(other, CrowdLabelSet):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.instances, other.instances)
            and np.array_equal(self.workers, other.workers)
            and np.array_equal(self.labels, other.labels)
        )

    def __repr__(self):
        n, m, c = self.shape
        return f"CrowdLabelSet(N={n}, M={m}, C={c}, labels={len(self)})"

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.num_instances, self.num_workers, self.num_classes

    def entries(self) -> Iterator[tuple[int, int, int]]:
        return zip(self.instances.tolist(), self.workers.tolist(), self.labels.tolist())

    def labels_of(self, instance: int) -> list[tuple[int, int]]:
        """Observed (worker, class) pairs of one instance."""
        lo, hi = np.searchsorted(self.instances, [instance, instance + 1])
        return list(zip(self.workers[lo:hi].tolist(), self.labels[lo:hi].tolist()))

    def labels_per_instance(self) -> np.ndarray:
        return np.bincount(self.instances, minlength=self.num_instances)

    def vote_counts(self) -> np.ndarray:
        """N x C matrix of label counts."""
        counts = np.zeros((self.num_instances, self.num_classes))
        np.add.at(counts, (self.instances, self.labels), 1.0)
        return counts

    def select(self, mask) -> "CrowdLabelSet":
        mask = np.asarray(mask, dtype=bool)
        return CrowdLabelSet(self.instances[mask], self.workers[mask], self.labels[mask],
                             *self.shape)

    def for_instances(self, indices) -> np.ndarray:
        """Boolean mask of entries whose instance is in ``indices``."""
        return np.isin(self.instances, np.asarray(indices))

    def label_noise(self, true_labels) -> float:
        """Fraction of observed labels that disagree with the true class."""
        if len(self) == 0:
            return float("nan")
        y = np.asarray(true_labels)
        return float(np.mean(self.labels != y[self.instances]))

    def subset(self, indices) -> "CrowdLabelSet":
        """Labels of the given instances, renumbered to 0..len(indices)-1."""
        idx = np.asarray(indices, dtype=np.int64)
        pos = np.full(self.num_instances, -1, dtype=np.int64)
        pos[idx] = np.arange(idx.size)
        mask = pos[self.instances] >= 0
        return CrowdLabelSet(pos[self.instances[mask]], self.workers[mask], self.labels[mask],
                             idx.size, self.num_workers, self.num_classes)


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    crowd_labels: CrowdLabelSet
    true_labels: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] != self.crowd_labels.num_instances:
            raise InvalidInputError(
                f"{x.shape[0]} feature rows but {self.crowd_labels.num_instances} instances"
            )
        object.__setattr__(self, "features", x)
        if self.true_labels is not None:
            y = np.asarray(self.true_labels, dtype=np.int64).ravel()
            if y.size != x.shape[0]:
                raise InvalidInputError("true_labels length differs from N")
            if y.size and (y.min() < 0 or y.max() >= self.num_classes):
                raise InvalidInputError("true label out of range")
            object.__setattr__(self, "true_labels", y)

    @property
    def num_instances(self) -> int:
        return self.features.shape[0]

    @property
    def num_classes(self) -> int:
        return self.crowd_labels.num_classes

    @property
    def num_workers(self) -> int:
        return self.crowd_labels.num_workers

    def with_crowd_labels(self, crowd_labels: CrowdLabelSet) -> "Dataset":
        return Dataset(self.features, crowd_labels, self.true_labels)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        y = None if self.true_labels is None else self.true_labels[idx]
        return Dataset(self.features[idx], self.crowd_labels.subset(idx), y)


@dataclass(frozen=True)
class SplitPlan:
    """K (train, validation) index pairs over the same N instances."""

    folds: tuple[tuple[np.ndarray, np.ndarray], ...]
    num_instances: int

    def __post_init__(self):
        if len(self.folds) < 1:
            raise InvalidInputError("a split plan needs at least one fold")
        everything = np.arange(self.num_instances)
        for k, (train, val) in enumerate(self.folds):
            both = np.concatenate([train, val])
            if both.size != self.num_instances or not np.array_equal(np.sort(both), everything):
                raise InvalidInputError(
                    f"fold {k}: train and validation must partition all instances"
                )

    @property
    def k(self) -> int:
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)

    def __len__(self):
        return len(self.folds)


def as_label_pairs(instance_labels: Sequence) -> list[tuple[int, int]]:
    """Normalize (worker, ClassLabel|int) pairs to plain ints."""
    return [(int(w), int(c)) for w, c in instance_labels]
