"""Posterior true-label estimation from crowd labels.

With a uniform class prior and a per-label Bernoulli likelihood (the worker
is correct with probability ``a``, otherwise spreads ``1 - a`` evenly over
the other ``C - 1`` classes), the log-posterior of class ``c`` is::

    sum_{labels = c} ln a  +  sum_{labels != c} ln((1 - a) / (C - 1))

All batched routines below take flat label arrays plus a ``group`` array
mapping every label to its instance (row) so thousands of instances are
handled in one pass.
"""
from __future__ import annotations

from enum import Enum
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .core import (
    EmptyEvidenceError,
    EqualPerformance,
    InvalidInputError,
    LearnedPerformance,
    ProbabilityVector,
    argmax_tiebreak,
    as_label_pairs,
)

ACCURACY_CLAMP = 1e-6


class WeightScheme(str, Enum):
    UNIFORM = "uniform"
    CONFIDENCE = "confidence"


def clamp_accuracy(a):
    return np.clip(np.asarray(a, dtype=float), ACCURACY_CLAMP, 1.0 - ACCURACY_CLAMP)


def vote_log_weight(a, num_classes: int):
    """ln(a (C-1) / (1-a)), the weight of one vote cast with accuracy a."""
    a = clamp_accuracy(a)
    return np.log(a * (num_classes - 1) / (1.0 - a))


def batch_log_posterior(group, labels, accuracy, num_groups: int, num_classes: int):
    """Unnormalized log-posteriors, one row per group.

    Rows without any label are all zeros (uniform). ``accuracy`` is either a
    scalar (equal performances) or one value per label.
    """
    group = np.asarray(group, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    a = clamp_accuracy(np.broadcast_to(np.asarray(accuracy, dtype=float), labels.shape))
    log_hit = np.log(a)
    log_miss = np.log((1.0 - a) / (num_classes - 1))
    hit = np.zeros((num_groups, num_classes))
    miss_on = np.zeros((num_groups, num_classes))
    miss_all = np.zeros(num_groups)
    np.add.at(hit, (group, labels), log_hit)
    np.add.at(miss_on, (group, labels), log_miss)
    np.add.at(miss_all, group, log_miss)
    # class c collects the miss term of every label not cast for c
    return hit + (miss_all[:, None] - miss_on)


def normalize_log_rows(log_post):
    """Row-wise softmax via log-sum-exp."""
    log_post = np.asarray(log_post, dtype=float)
    return np.exp(log_post - logsumexp(log_post, axis=1, keepdims=True))


def batch_vote_scores(group, labels, accuracy, num_groups: int, num_classes: int):
    """Per-group, per-class sums of vote log-weights."""
    labels = np.asarray(labels, dtype=np.int64)
    w = np.broadcast_to(vote_log_weight(accuracy, num_classes), labels.shape)
    scores = np.zeros((num_groups, num_classes))
    np.add.at(scores, (np.asarray(group, dtype=np.int64), labels), w)
    return scores


def _prepare(instance_labels, perf, num_classes: int, instance: int):
    pairs = as_label_pairs(instance_labels)
    if num_classes < 2:
        raise InvalidInputError("num_classes must be >= 2")
    if not pairs:
        raise EmptyEvidenceError(f"instance {instance} has no observed labels")
    workers = [w for w, _ in pairs]
    if len(set(workers)) != len(workers):
        raise InvalidInputError("a worker may label an instance at most once")
    labels = np.array([c for _, c in pairs], dtype=np.int64)
    if labels.min() < 0 or labels.max() >= num_classes:
        raise InvalidInputError("class index out of range")
    if isinstance(perf, EqualPerformance):
        perf.check(num_classes)
        acc = np.full(labels.size, perf.p)
    elif isinstance(perf, LearnedPerformance):
        acc = np.array([perf.lookup(instance, w) for w in workers])
    else:
        raise InvalidInputError(f"unknown performance estimate {perf!r}")
    return workers, labels, acc


def log_posterior(instance_labels, perf, num_classes: int, instance: int = 0) -> np.ndarray:
    _, labels, acc = _prepare(instance_labels, perf, num_classes, instance)
    return batch_log_posterior(np.zeros(labels.size, dtype=np.int64), labels, acc, 1,
                               num_classes)[0]


def posterior_class_probs(instance_labels, perf, num_classes: int,
                          instance: int = 0) -> ProbabilityVector:
    """Normalized posterior over the classes given one instance's labels.

    ``instance_labels`` is a sequence of ``(worker, class)`` pairs;
    ``instance`` is only used to look up learned accuracies.
    """
    lp = log_posterior(instance_labels, perf, num_classes, instance)
    return ProbabilityVector(normalize_log_rows(lp[None, :])[0], normalize=True)


def aggregate_label(instance_labels, perf, num_classes: int, instance: int = 0) -> int:
    """MAP class under the posterior (lowest index on ties)."""
    return argmax_tiebreak(log_posterior(instance_labels, perf, num_classes, instance))


def weighted_vote_score(instance_labels, perf: LearnedPerformance, num_classes: int,
                        instance: int = 0) -> np.ndarray:
    if not isinstance(perf, LearnedPerformance):
        raise InvalidInputError("weighted_vote_score needs learned performances")
    _, labels, acc = _prepare(instance_labels, perf, num_classes, instance)
    return batch_vote_scores(np.zeros(labels.size, dtype=np.int64), labels, acc, 1,
                             num_classes)[0]


def aggregation_weight(instance_labels, perf, num_classes: int,
                       scheme: WeightScheme | str = WeightScheme.UNIFORM,
                       instance: int = 0) -> float:
    scheme = WeightScheme(scheme)
    if scheme is WeightScheme.UNIFORM:
        return 1.0
    return float(np.max(posterior_class_probs(instance_labels, perf, num_classes, instance)))


def crowd_weight(instance_labels, worker: int, perf, num_classes: int,
                 scheme: WeightScheme | str = WeightScheme.UNIFORM,
                 instance: int = 0) -> float:
    pairs = as_label_pairs(instance_labels)
    assigned = [c for w, c in pairs if w == worker]
    if not assigned:
        raise InvalidInputError(f"worker {worker} has no label for instance {instance}")
    if WeightScheme(scheme) is WeightScheme.UNIFORM:
        return 1.0
    post = posterior_class_probs(pairs, perf, num_classes, instance)
    return float(post[assigned[0]])


# -- general Bayes, used to show why the production path avoids it ----------

def bernoulli_likelihoods(labels: Sequence[int], accuracy, num_classes: int) -> np.ndarray:
    """L x C matrix with entry (l, c) = Pr(label l | true class c)."""
    labels = np.asarray(labels, dtype=np.int64)
    a = np.broadcast_to(np.asarray(accuracy, dtype=float), labels.shape)[:, None]
    hit = np.arange(num_classes)[None, :] == labels[:, None]
    return np.where(hit, a, (1.0 - a) / (num_classes - 1))


def bayes_log_posterior(log_prior, log_likelihoods) -> np.ndarray:
    """log prior_c + sum_l log Pr(label l | c), unnormalized."""
    return np.asarray(log_prior, dtype=float) + np.sum(log_likelihoods, axis=0)


def prop1_counterexample(num_classes: int, labels: Sequence[int], target_class: int,
                         likelihoods=None) -> ProbabilityVector:
    """A class prior that forces the MAP estimate to ``target_class``.

    ``likelihoods`` is an L x C matrix of strictly positive label
    likelihoods (default: Bernoulli with accuracy 0.8). The returned prior
    puts mass ``(1 + eps) / 2 > eps`` on the target, where
    ``eps = l_max / (l_max + l_target)`` and ``l_c`` is the joint likelihood
    of all labels under class ``c``; whatever the labels say, the prior wins.
    """
    if likelihoods is None:
        likelihoods = bernoulli_likelihoods(labels, 0.8, num_classes)
    lik = np.asarray(likelihoods, dtype=float)
    if lik.ndim != 2 or lik.shape[1] != num_classes or lik.shape[0] < 1:
        raise InvalidInputError("likelihoods must be a non-empty L x C matrix")
    if np.any(lik <= 0):
        raise InvalidInputError("likelihoods must be strictly positive")
    log_l = np.log(lik).sum(axis=0)
    others = np.delete(log_l, target_class)
    # eps = l_max / (l_max + l_k) = 1 / (1 + exp(ln l_k - ln l_max))
    eps = 1.0 / (1.0 + np.exp(log_l[target_class] - others.max()))
    mass = 0.5 * (1.0 + eps)
    prior = np.full(num_classes, (1.0 - mass) / (num_classes - 1))
    prior[target_class] = mass
    return ProbabilityVector(prior, normalize=True)


def prop1_threshold(num_classes: int, likelihoods, target_class: int) -> float:
    log_l = np.log(np.asarray(likelihoods, dtype=float)).sum(axis=0)
    return float(1.0 / (1.0 + np.exp(log_l[target_class] - np.delete(log_l, target_class).max())))


def prop2_counterexample(num_classes: int, labels: Sequence[int], target_class: int,
                         strength: float = 0.9) -> list[np.ndarray]:
    """Per-label full confusion matrices that force the MAP to ``target_class``.

    One C x C row-stochastic matrix per observed label: the target row puts
    ``strength`` on the label actually given, every other row puts a small
    mass there. Under a uniform prior the target then has the largest joint
    likelihood no matter what the labels are.
    """
    C = num_classes
    low = (1.0 - strength) / 2.0
    mats = []
    for z in labels:
        z = int(z)
        q = np.empty((C, C))
        for c in range(C):
            if c == target_class:
                on = strength
            else:
                on = low
            q[c, :] = (1.0 - on) / (C - 1)
            q[c, z] = on
        mats.append(q)
    return mats


def confusion_likelihoods(labels: Sequence[int], confusions: Sequence[np.ndarray]) -> np.ndarray:
    """L x C likelihood matrix read off per-label confusion matrices (column z)."""
    return np.stack([np.asarray(q)[:, int(z)] for z, q in zip(labels, confusions)])

