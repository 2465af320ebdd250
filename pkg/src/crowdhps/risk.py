"""Empirical risk estimators over a cross-validation split.

Every fold contributes 1/K to a risk, whatever its size. Within a fold the
zero-one losses are averaged with the fold's own normalizer (its size, the
summed aggregation weights, or the summed crowd weights).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (
    CrowdLabelSet,
    DegenerateFoldError,
    InvalidInputError,
    SplitPlan,
    UnavailableSideInformationError,
)
from .hpo import HpcCandidate
from .posterior import WeightScheme, batch_log_posterior, normalize_log_rows

DEFAULT_EQUAL_P = 0.8


class PerfMode(str, Enum):
    EQUAL = "equal"
    LEARNED = "learned"


class CrowdWeightScheme(str, Enum):
    UNIFORM = "uniform"
    CONFIDENCE_EQUAL = "confidence_equal"
    CONFIDENCE_LEARNED = "confidence_learned"


@dataclass(frozen=True, eq=False)
class FoldPredictions:
    """Model outputs on one validation fold.

    ``data_probs`` has one row per entry of ``val_indices``. ``crowd_probs``
    and ``accuracies`` have one row per observed crowd label of the fold, in
    the crowd label set's (instance, worker) order.
    """

    val_indices: np.ndarray
    data_probs: np.ndarray
    crowd_probs: np.ndarray | None = None
    accuracies: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class EvaluationBundle:
    split_plan: SplitPlan
    folds: tuple[FoldPredictions, ...]
    crowd_labels: CrowdLabelSet
    true_labels: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "folds", tuple(self.folds))
        if len(self.folds) != self.split_plan.k:
            raise InvalidInputError(
                f"{len(self.folds)} fold predictions for {self.split_plan.k} folds"
            )
        for k, ((_, val), fp) in enumerate(zip(self.split_plan, self.folds)):
            if not np.array_equal(np.asarray(fp.val_indices), val):
                raise InvalidInputError(f"fold {k}: predictions do not cover its validation set")
            if np.asarray(fp.data_probs).shape[0] != len(val):
                raise InvalidInputError(f"fold {k}: {len(val)} instances but "
                                        f"{np.asarray(fp.data_probs).shape[0]} predictions")

    @property
    def num_classes(self) -> int:
        return self.crowd_labels.num_classes


@dataclass(frozen=True)
class _FoldLabels:
    group: np.ndarray        # local instance position of each label
    workers: np.ndarray
    labels: np.ndarray
    num_instances: int


def _fold_labels(bundle: EvaluationBundle, k: int) -> _FoldLabels:
    crowd = bundle.crowd_labels
    val = bundle.split_plan.folds[k][1]
    mask = crowd.for_instances(val)
    pos = np.full(crowd.num_instances, -1, dtype=np.int64)
    pos[val] = np.arange(len(val))
    return _FoldLabels(pos[crowd.instances[mask]], crowd.workers[mask], crowd.labels[mask],
                       len(val))


def _accuracy(fp: FoldPredictions, fl: _FoldLabels, mode: PerfMode, p: float, k: int):
    if mode is PerfMode.EQUAL:
        return p
    if fp.accuracies is None:
        raise UnavailableSideInformationError(f"fold {k}: learned performances missing")
    acc = np.asarray(fp.accuracies, dtype=float)
    if acc.shape != fl.labels.shape:
        raise InvalidInputError(f"fold {k}: {acc.size} accuracies for {fl.labels.size} labels")
    return acc


def _check_equal_p(p: float, C: int):
    if not 1.0 / C < p <= 1.0:
        raise InvalidInputError(f"equal performance p={p} must lie in (1/C, 1]")


def true_risk(bundle: EvaluationBundle) -> float:
    if bundle.true_labels is None:
        raise UnavailableSideInformationError("true labels are required for the true risk")
    y = np.asarray(bundle.true_labels)
    per_fold = []
    for (_, val), fp in zip(bundle.split_plan, bundle.folds):
        pred = np.argmax(np.asarray(fp.data_probs), axis=1)
        per_fold.append(np.mean(pred != y[val]))
    return float(np.mean(per_fold))


def naive_default_risk(candidate: HpcCandidate, default: HpcCandidate) -> int:
    return int(not candidate.same_config(default))


def aggregation_risk(bundle: EvaluationBundle, perf_mode: PerfMode | str = PerfMode.EQUAL,
                     weight_scheme: WeightScheme | str = WeightScheme.UNIFORM,
                     p: float = DEFAULT_EQUAL_P) -> float:
    """Risk of the data classifier against MAP-aggregated crowd labels.

    Validation instances without any crowd label get weight zero.
    """
    mode, scheme = PerfMode(perf_mode), WeightScheme(weight_scheme)
    C = bundle.num_classes
    _check_equal_p(p, C)
    per_fold = []
    for k, fp in enumerate(bundle.folds):
        fl = _fold_labels(bundle, k)
        acc = _accuracy(fp, fl, mode, p, k)
        lp = batch_log_posterior(fl.group, fl.labels, acc, fl.num_instances, C)
        observed = np.bincount(fl.group, minlength=fl.num_instances) > 0
        z_bar = np.argmax(lp, axis=1)
        if scheme is WeightScheme.UNIFORM:
            w = observed.astype(float)
        else:
            w = np.where(observed, normalize_log_rows(lp).max(axis=1), 0.0)
        total = np.sum(w)
        if not total > 0:
            raise DegenerateFoldError(f"fold {k}: aggregation weights sum to zero")
        loss = np.argmax(np.asarray(fp.data_probs), axis=1) != z_bar
        per_fold.append(np.sum(w * loss) / total)
    return float(np.mean(per_fold))


def crowd_risk(bundle: EvaluationBundle,
               weight_scheme: CrowdWeightScheme | str = CrowdWeightScheme.UNIFORM,
               p: float = DEFAULT_EQUAL_P) -> float:
    """Risk of the crowd-label model against the raw crowd labels."""
    scheme = CrowdWeightScheme(weight_scheme)
    C = bundle.num_classes
    _check_equal_p(p, C)
    per_fold = []
    for k, fp in enumerate(bundle.folds):
        fl = _fold_labels(bundle, k)
        if fp.crowd_probs is None:
            raise UnavailableSideInformationError(f"fold {k}: crowd-label predictions missing")
        g = np.asarray(fp.crowd_probs)
        if g.shape[0] != fl.labels.size:
            raise InvalidInputError(f"fold {k}: {g.shape[0]} crowd predictions for "
                                    f"{fl.labels.size} labels")
        if scheme is CrowdWeightScheme.UNIFORM:
            v = np.ones(fl.labels.size)
        else:
            mode = (PerfMode.EQUAL if scheme is CrowdWeightScheme.CONFIDENCE_EQUAL
                    else PerfMode.LEARNED)
            acc = _accuracy(fp, fl, mode, p, k)
            post = normalize_log_rows(
                batch_log_posterior(fl.group, fl.labels, acc, fl.num_instances, C))
            v = post[fl.group, fl.labels]
        total = np.sum(v)
        if not total > 0:
            raise DegenerateFoldError(f"fold {k}: crowd weights sum to zero")
        loss = np.argmax(g, axis=1) != fl.labels
        per_fold.append(np.sum(v * loss) / total)
    return float(np.mean(per_fold))


def risk_deviation(estimated: float, true: float) -> float:
    return estimated - true
