"""Synthetic data, simulated crowds and noisy-label dataset variants."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .core import CrowdLabelSet, Dataset, InvalidInputError


class Variant(str, Enum):
    WORST1 = "worst-1"
    WORST2 = "worst-2"
    WORSTV = "worst-v"
    RAND1 = "rand-1"
    RAND2 = "rand-2"
    RANDV = "rand-v"
    FULL = "full"

    @property
    def worst(self) -> bool:
        return self.value.startswith("worst")

    @property
    def keep(self) -> int | None:
        """Labels kept per instance; None for a per-instance random count."""
        suffix = self.value.rsplit("-", 1)[-1]
        return int(suffix) if suffix.isdigit() else None


def class_means(num_classes: int, dim: int, separation: float) -> np.ndarray:
    """Class centers with nearest-neighbour distance ``separation``.

    Uses a regular simplex when ``dim >= C - 1``, otherwise evenly spaced
    points on a circle (or a line when ``dim == 1``).
    """
    C = num_classes
    if dim >= C - 1:
        centered = np.eye(C) - 1.0 / C
        basis = np.linalg.svd(centered)[2][: C - 1]       # orthonormal rows spanning the simplex
        pts = centered @ basis.T                          # C x (C-1), pairwise dist sqrt(2)
        pts *= separation / np.sqrt(2.0)
        out = np.zeros((C, dim))
        out[:, : C - 1] = pts
        return out
    if dim == 1:
        return (np.arange(C) * separation)[:, None].astype(float)
    radius = separation / (2.0 * np.sin(np.pi / C))
    ang = 2 * np.pi * np.arange(C) / C
    out = np.zeros((C, dim))
    out[:, 0], out[:, 1] = radius * np.cos(ang), radius * np.sin(ang)
    return out


def gaussian_blobs(n: int, num_classes: int, dim: int, separation: float,
                   seed: int) -> Dataset:
    """Class-balanced unit-variance Gaussian clusters.

    The returned dataset carries true labels and an empty crowd; attach one
    with ``simulate_crowd`` and ``Dataset.with_crowd_labels``.
    """
    if n < num_classes:
        raise InvalidInputError("need at least one instance per class")
    if dim < 1:
        raise InvalidInputError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    y = np.arange(n) % num_classes
    rng.shuffle(y)
    X = class_means(num_classes, dim, separation)[y] + rng.standard_normal((n, dim))
    empty = CrowdLabelSet([], [], [], n, 0, num_classes)
    return Dataset(X, empty, y)


def worker_confusions(accuracies: Sequence[float], num_classes: int) -> list[np.ndarray]:
    """Symmetric-noise confusion matrices with the given diagonals."""
    mats = []
    for a in accuracies:
        q = np.full((num_classes, num_classes), (1.0 - a) / (num_classes - 1))
        np.fill_diagonal(q, a)
        mats.append(q)
    return mats


def simulate_crowd(true_labels, confusions: Sequence, coverage: float, seed: int,
                   num_classes: int | None = None) -> CrowdLabelSet:
    """Each worker labels each instance with probability ``coverage``,
    drawing from the confusion row of the instance's true class.

    ``true_labels`` may also be a :class:`Dataset` carrying true labels.
    """
    if isinstance(true_labels, Dataset):
        if true_labels.true_labels is None:
            raise InvalidInputError("dataset has no true labels")
        true_labels = true_labels.true_labels
    y = np.asarray(true_labels, dtype=np.int64)
    mats = [np.asarray(q, dtype=float) for q in confusions]
    C = mats[0].shape[0] if num_classes is None else num_classes
    if any(q.shape != (C, C) for q in mats):
        raise InvalidInputError("every confusion matrix must be C x C")
    if not 0 < coverage <= 1:
        raise InvalidInputError("coverage must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    inst, work, lab = [], [], []
    for m, q in enumerate(mats):
        observed = rng.random(y.size) < coverage
        u = rng.random(y.size)
        cum = np.cumsum(q, axis=1)[y]
        drawn = np.minimum((u[:, None] >= cum).sum(axis=1), C - 1)
        rows = np.flatnonzero(observed)
        inst.append(rows)
        work.append(np.full(rows.size, m))
        lab.append(drawn[rows])
    return CrowdLabelSet(np.concatenate(inst), np.concatenate(work), np.concatenate(lab),
                         y.size, len(mats), C)


def make_variant(labels: CrowdLabelSet, true_labels, kind: Variant | str,
                 seed: int) -> CrowdLabelSet:
    """Subsample each instance's labels.

    ``worst-*`` keeps incorrect labels first (random order among incorrect,
    then among correct); ``rand-*`` keeps a uniform random subset. The
    ``-v`` suffix keeps a count drawn uniformly from [1, available].
    Worker ids stay unchanged, so some workers may end up with no labels.
    """
    kind = Variant(kind)
    if kind is Variant.FULL:
        return labels
    if kind.worst and true_labels is None:
        raise InvalidInputError(f"{kind.value} needs true labels")
    rng = np.random.default_rng(seed)
    y = None if true_labels is None else np.asarray(true_labels)
    bounds = np.searchsorted(labels.instances, np.arange(labels.num_instances + 1))
    keep = np.zeros(len(labels), dtype=bool)
    for n in range(labels.num_instances):
        lo, hi = bounds[n], bounds[n + 1]
        avail = hi - lo
        if avail == 0:
            continue
        k = kind.keep if kind.keep is not None else int(rng.integers(1, avail + 1))
        order = rng.permutation(avail)
        if kind.worst:
            correct = labels.labels[lo:hi][order] == y[n]
            order = order[np.argsort(correct, kind="stable")]
        keep[lo + order[:min(k, avail)]] = True
    return labels.select(keep)


def aggregation_noise(labels: CrowdLabelSet, true_labels) -> float:
    """Fraction of majority-vote labels (lowest index on ties) that are wrong."""
    counts = labels.vote_counts()
    has = counts.sum(axis=1) > 0
    mv = np.argmax(counts[has], axis=1)
    return float(np.mean(mv != np.asarray(true_labels)[has]))


@dataclass(frozen=True)
class BlobScenario:
    """Synthetic crowd study setting; defaults match the desk-scale benchmark."""

    num_train: int = 600
    num_test: int = 600
    num_classes: int = 3
    dim: int = 2
    separation: float = 3.0
    accuracies: tuple[float, ...] = tuple(np.linspace(0.55, 0.95, 8).tolist())
    coverage: float = 1.0
    variant: str = "rand-2"

    def base(self, seed: int) -> tuple[Dataset, Dataset, int]:
        """(train set with the full crowd, test set, seed for variant draws)."""
        streams = np.random.SeedSequence(seed).generate_state(3)
        n = self.num_train + self.num_test
        data = gaussian_blobs(n, self.num_classes, self.dim, self.separation, int(streams[0]))
        crowd = simulate_crowd(data, worker_confusions(self.accuracies, self.num_classes),
                               self.coverage, int(streams[1]), self.num_classes)
        full = data.with_crowd_labels(crowd)
        return (full.subset(np.arange(self.num_train)), full.subset(np.arange(self.num_train, n)),
                int(streams[2]))

    def build(self, seed: int) -> tuple[Dataset, Dataset, CrowdLabelSet]:
        """(train set with the variant's labels, test set, full train crowd)."""
        train, test, vseed = self.base(seed)
        labels = make_variant(train.crowd_labels, train.true_labels, self.variant, vseed)
        return train.with_crowd_labels(labels), test, train.crowd_labels
