"""Desk-scale learning-from-crowds learners.

Every trained model exposes the three prediction interfaces the risk
estimators consume:

* ``predict_proba(X)``: true-class probabilities, one row per instance;
* ``crowd_proba(X, workers)``: label distribution a worker would assign;
* ``worker_accuracy(X, workers)``: probability that the worker is correct.

Two-stage learners aggregate the crowd labels first and then fit a
multinomial logistic regression. The one-stage learner trains the classifier
jointly with one confusion matrix per worker through ``g = Q^T f``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from scipy.special import log_softmax, logsumexp, softmax

from .core import (
    CrowdLabelSet,
    Dataset,
    DegenerateFoldError,
    EmptyEvidenceError,
    InvalidInputError,
    ProbabilityVector,
)
from .hpo import (
    Fixed,
    HpcCandidate,
    LogUniformReal,
    ParamSpec,
    SearchSpace,
    UniformCategorical,
    UniformReal,
)


class DivergenceError(RuntimeError):
    pass


class DegenerateSliceError(ValueError):
    pass


# -- confusion-matrix linkage ---------------------------------------------

class ConfusionMatrix:
    """Row c is the distribution of assigned labels given true class c."""

    def __init__(self, rows):
        q = np.array(rows, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise InvalidInputError(f"confusion matrix must be square, got {q.shape}")
        for row in q:
            ProbabilityVector(row)
        q.setflags(write=False)
        self.rows = q

    def __array__(self, dtype=None, copy=None):
        return self.rows if dtype is None else self.rows.astype(dtype)

    def __repr__(self):
        return f"ConfusionMatrix({self.rows.tolist()})"

    @property
    def num_classes(self) -> int:
        return self.rows.shape[0]

    @classmethod
    def symmetric(cls, accuracy: float, num_classes: int) -> "ConfusionMatrix":
        """Diagonal ``accuracy``, remaining mass spread evenly off the diagonal."""
        q = np.full((num_classes, num_classes), (1.0 - accuracy) / (num_classes - 1))
        np.fill_diagonal(q, accuracy)
        return cls(q)


def _qf(q, f):
    q = np.asarray(q, dtype=float)
    f = np.asarray(f, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1] or f.shape != (q.shape[0],):
        raise InvalidInputError(f"dimension mismatch: Q {q.shape}, f {f.shape}")
    return q, f


def link_crowd_probs(q, f) -> ProbabilityVector:
    """g = Q^T f."""
    q, f = _qf(q, f)
    return ProbabilityVector(q.T @ f, normalize=True)


def link_accuracy(q, f) -> float:
    """h = sum_c f_c Q_cc."""
    q, f = _qf(q, f)
    return float(f @ np.diag(q))


def marginal_alignment(f, g) -> float:
    """h = f^T g, agreement between true-label and worker-label predictions."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != g.shape or f.ndim != 1:
        raise InvalidInputError(f"dimension mismatch: {f.shape} vs {g.shape}")
    return float(f @ g)


def normalize_union_slice(union_probs, worker: int, num_classes: int) -> ProbabilityVector:
    """Renormalize the block of a (C*M)-vector that belongs to ``worker`` (0-based)."""
    u = np.asarray(union_probs, dtype=float).ravel()
    C = num_classes
    if u.size % C:
        raise InvalidInputError(f"length {u.size} is not a multiple of C={C}")
    if not 0 <= worker < u.size // C:
        raise InvalidInputError(f"worker {worker} out of range")
    block = u[worker * C:(worker + 1) * C]
    s = block.sum()
    if not s > 0:
        raise DegenerateSliceError(f"worker {worker} slice sums to {s}")
    return ProbabilityVector(block / s, normalize=True)


# -- Dawid-Skene ------------------------------------------------------------

@dataclass
class DawidSkeneResult:
    posteriors: np.ndarray          # N x C
    confusions: np.ndarray          # M x C x C
    class_prior: np.ndarray         # C
    log_likelihoods: list[float]    # smoothed objective after each M-step
    history: list[dict] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.log_likelihoods)

    def confusion(self, worker: int) -> ConfusionMatrix:
        return ConfusionMatrix(self.confusions[worker])


def _ds_m_step(labels: CrowdLabelSet, T: np.ndarray, alpha: float):
    N, M, C = labels.shape
    prior = (T.sum(axis=0) + alpha) / (N + C * alpha)
    counts = np.zeros((M, C, C))
    # counts[m, c, k] += T[n, c] for every label (n, m, k)
    np.add.at(counts, (labels.workers, slice(None), labels.labels), T[labels.instances])
    counts += alpha
    confusions = counts / counts.sum(axis=2, keepdims=True)
    return prior, confusions


def _ds_log_joint(labels: CrowdLabelSet, prior, confusions):
    N, _, C = labels.shape
    lj = np.tile(np.log(prior), (N, 1))
    np.add.at(lj, labels.instances, np.log(confusions[labels.workers, :, labels.labels]))
    return lj


def _ds_objective(lj, prior, confusions, alpha):
    # log p(Z | theta) + log Dirichlet(alpha + 1) prior on pi and each row
    return float(logsumexp(lj, axis=1).sum()
                 + alpha * np.log(prior).sum()
                 + alpha * np.log(confusions).sum())


def dawid_skene(labels: CrowdLabelSet, num_classes: int | None = None, max_iters: int = 100,
                tol: float = 1e-6, alpha: float = 1.0, record_history: bool = False
                ) -> DawidSkeneResult:
    """EM estimate of true-label posteriors and per-worker confusion matrices.

    Initialized from majority-vote soft counts; confusion rows and the class
    prior get additive smoothing ``alpha``. Each iteration is an M-step
    followed by an E-step; iteration stops once the largest posterior change
    drops below ``tol``. ``log_likelihoods`` holds the smoothed (MAP)
    objective evaluated after each M-step, which EM never decreases.
    """
    C = labels.num_classes if num_classes is None else num_classes
    if C < 2:
        raise InvalidInputError("num_classes must be >= 2")
    counts = labels.vote_counts()
    per = counts.sum(axis=1)
    if np.any(per == 0):
        n = int(np.flatnonzero(per == 0)[0])
        raise EmptyEvidenceError(f"instance {n} has no labels")
    T = counts / per[:, None]
    result = DawidSkeneResult(T, np.empty((labels.num_workers, C, C)), np.empty(C), [])
    for _ in range(max_iters):
        prior, confusions = _ds_m_step(labels, T, alpha)
        lj = _ds_log_joint(labels, prior, confusions)
        result.log_likelihoods.append(_ds_objective(lj, prior, confusions, alpha))
        T_new = np.exp(lj - logsumexp(lj, axis=1, keepdims=True))
        if record_history:
            result.history.append(
                {"class_prior": prior, "confusions": confusions, "posteriors": T_new}
            )
        delta = np.max(np.abs(T_new - T))
        T = T_new
        result.class_prior, result.confusions = prior, confusions
        if delta < tol:
            result.converged = True
            break
    result.posteriors = T
    return result


# -- multinomial logistic regression ----------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 32
    weight_decay: float = 0.0
    dropout: float = 0.0            # accepted for parity, no effect on a linear model
    scheduler: str = "cosine"
    confusion_init: float = 2.0     # diagonal logit bonus of one-stage confusions

    @classmethod
    def from_candidate(cls, hpc: HpcCandidate) -> "TrainConfig":
        v = hpc.values
        kwargs = {k: v[k] for k in cls.__dataclass_fields__ if k in v}
        for k in ("epochs", "batch_size"):
            if k in kwargs:
                kwargs[k] = int(kwargs[k])
        return cls(**kwargs)

    def lr_at(self, step: int, total: int) -> float:
        if self.scheduler == "cosine":
            return self.learning_rate * 0.5 * (1.0 + math.cos(math.pi * step / max(total, 1)))
        if self.scheduler == "constant":
            return self.learning_rate
        raise InvalidInputError(f"unknown scheduler {self.scheduler!r}")


def _design(X):
    X = np.asarray(X, dtype=float)
    return np.hstack([X, np.ones((X.shape[0], 1))])


class LinearClassifier:
    """Softmax regression; ``weights`` is C x (D + 1) with the bias last."""

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float)
        if not np.all(np.isfinite(w)):
            raise DivergenceError("non-finite classifier weights")
        self.weights = w

    @classmethod
    def init(cls, num_classes: int, num_features: int, rng) -> "LinearClassifier":
        return cls(0.01 * rng.standard_normal((num_classes, num_features + 1)))

    def logits(self, X):
        return _design(X) @ self.weights.T

    def predict_proba(self, X):
        return softmax(self.logits(X), axis=1)


def _batches(n: int, batch_size: int, rng):
    perm = rng.permutation(n)
    for s in range(0, n, batch_size):
        yield perm[s:s + batch_size]


def _check_finite(loss: float, hpc: HpcCandidate | None, where: str):
    if not math.isfinite(loss):
        desc = hpc.describe() if hpc is not None else "?"
        raise DivergenceError(f"{where}: non-finite loss with hyperparameters {desc}")


def fit_soft_targets(X, targets, config: TrainConfig, rng, hpc=None) -> LinearClassifier:
    """Mini-batch gradient descent on cross-entropy against soft targets."""
    Xd = _design(X)
    Y = np.asarray(targets, dtype=float)
    n, C = Y.shape
    W = 0.01 * rng.standard_normal((C, Xd.shape[1]))
    steps_per_epoch = math.ceil(n / config.batch_size)
    total, step = config.epochs * steps_per_epoch, 0
    for _ in range(config.epochs):
        for idx in _batches(n, config.batch_size, rng):
            xb, yb = Xd[idx], Y[idx]
            logp = log_softmax(xb @ W.T, axis=1)
            loss = -np.sum(yb * logp) / len(idx)
            _check_finite(loss, hpc, "two-stage training")
            grad = (np.exp(logp) - yb).T @ xb / len(idx)
            grad[:, :-1] += config.weight_decay * W[:, :-1]
            W -= config.lr_at(step, total) * grad
            step += 1
    return LinearClassifier(W)


# -- one-stage confusion learner --------------------------------------------

def _padded_labels(labels: CrowdLabelSet, rows):
    """Per-row worker/label matrices padded to the max label count, plus mask."""
    rows = np.asarray(rows)
    pos = np.full(labels.num_instances, -1)
    pos[rows] = np.arange(rows.size)
    keep = pos[labels.instances] >= 0
    inst = pos[labels.instances[keep]]
    work, lab = labels.workers[keep], labels.labels[keep]
    per = np.bincount(inst, minlength=rows.size)
    width = max(int(per.max()) if per.size else 0, 1)
    start = np.concatenate([[0], np.cumsum(per)[:-1]])
    slot = np.arange(inst.size) - start[inst]
    W = np.zeros((rows.size, width), dtype=np.int64)
    Z = np.zeros((rows.size, width), dtype=np.int64)
    mask = np.zeros((rows.size, width), dtype=bool)
    W[inst, slot], Z[inst, slot], mask[inst, slot] = work, lab, True
    return W, Z, mask


def joint_loss_and_grad(weights, conf_logits, Xd, workers, labels, mask, weight_decay=0.0):
    """Mean crowd-label cross-entropy through g = Q^T f, with gradients.

    ``Xd`` is the design matrix (bias column included); ``workers``,
    ``labels``, ``mask`` are B x L padded arrays. Returns
    ``(loss, d_weights, d_conf_logits)``.
    """
    B, L = workers.shape
    C = weights.shape[0]
    f = softmax(Xd @ weights.T, axis=1)                         # B x C
    Q = softmax(conf_logits, axis=2)                            # M x C x C
    Qz = Q[workers, :, labels]                                  # B x L x C : Q[m, c, z]
    g_z = np.einsum("bc,blc->bl", f, Qz)                        # B x L
    n_obs = mask.sum()
    safe = np.where(mask, g_z, 1.0)
    loss = -np.sum(np.log(safe)[mask]) / n_obs
    wd_w = weights[:, :-1]
    loss += 0.5 * weight_decay * np.sum(wd_w ** 2)
    r = np.where(mask, 1.0 / safe, 0.0) / n_obs                 # B x L
    # dL/da_j = sum_l f_j (1 - Q[m, j, z] / g_z)
    da = f * mask.sum(axis=1, keepdims=True) / n_obs - f * np.einsum("bl,blc->bc", r, Qz)
    d_weights = da.T @ Xd
    d_weights[:, :-1] += weight_decay * wd_w
    # dL/dlogit[m, c, j] = -(f_c / g_z) Q[m,c,z] ([j == z] - Q[m,c,j])
    coef = -(r[:, :, None] * f[:, None, :] * Qz)                # B x L x C
    d_conf = np.zeros_like(conf_logits)
    onehot = np.eye(C)[labels]                                  # B x L x C(j)
    Qrows = Q[workers]                                          # B x L x C(c) x C(j)
    contrib = coef[..., None] * (onehot[:, :, None, :] - Qrows)
    contrib[~mask] = 0.0
    np.add.at(d_conf, workers[mask], contrib[mask])
    return float(loss), d_weights, d_conf


@dataclass
class TrainedModel:
    classifier: LinearClassifier
    confusions: np.ndarray | None   # M x C x C, None when the learner has no crowd model

    def predict_proba(self, X):
        return self.classifier.predict_proba(X)

    @property
    def has_crowd_model(self) -> bool:
        return self.confusions is not None

    def _need_crowd(self):
        if self.confusions is None:
            raise InvalidInputError("this learner has no crowd-label or worker-accuracy model")

    def crowd_proba(self, X, workers, f=None):
        """g for each (x_i, workers_i) pair."""
        self._need_crowd()
        f = self.predict_proba(X) if f is None else f
        return np.einsum("bc,bck->bk", f, self.confusions[np.asarray(workers)])

    def worker_accuracy(self, X, workers, f=None):
        """h for each (x_i, workers_i) pair."""
        self._need_crowd()
        f = self.predict_proba(X) if f is None else f
        diag = np.diagonal(self.confusions, axis1=1, axis2=2)[np.asarray(workers)]
        return np.sum(f * diag, axis=1)


class LearnerKind(str, Enum):
    MV = "mv"
    DS = "ds"
    CONFUSION = "confusion"


@dataclass(frozen=True)
class LearnerSpec:
    kind: LearnerKind
    hyperparameters: HpcCandidate

    def __post_init__(self):
        object.__setattr__(self, "kind", LearnerKind(self.kind))


def default_search_space(kind: LearnerKind | str = LearnerKind.CONFUSION) -> SearchSpace:
    """General search space of the benchmark, adapted to plain gradient descent.

    The weight-decay default sits at the lower bound of its log-uniform range.
    """
    kind = LearnerKind(kind)
    params = [
        ParamSpec("optimizer", Fixed("sgd")),
        ParamSpec("scheduler", Fixed("cosine")),
        ParamSpec("epochs", UniformCategorical((5, 30, 50))),
        ParamSpec("batch_size", UniformCategorical((16, 32, 64))),
        ParamSpec("learning_rate", LogUniformReal("1e-4", "1e-1")),
        ParamSpec("weight_decay", LogUniformReal("1e-6", "1e-3")),
        ParamSpec("dropout", UniformReal("0.0", "0.5")),
    ]
    default = {"optimizer": "sgd", "scheduler": "cosine", "epochs": 30, "batch_size": 32,
               "learning_rate": 1e-3, "weight_decay": 1e-6, "dropout": 0.0}
    if kind is LearnerKind.CONFUSION:
        params.append(ParamSpec("confusion_init", Fixed(2.0)))
        default["confusion_init"] = 2.0
    return SearchSpace(tuple(params), HpcCandidate(default, origin="default"))


def majority_vote_targets(labels: CrowdLabelSet, rows) -> np.ndarray:
    """One-hot majority vote (lowest index on ties) for the given rows."""
    counts = labels.vote_counts()[rows]
    out = np.zeros_like(counts)
    out[np.arange(len(rows)), np.argmax(counts, axis=1)] = 1.0
    return out


def train(spec: LearnerSpec, dataset: Dataset, train_idx, seed: int) -> TrainedModel:
    """Fit one learner on the training rows of ``dataset``.

    Rows without any crowd label carry no training signal and are skipped.
    Overflow shows up as a :class:`DivergenceError`, not as numpy warnings.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        return _train(spec, dataset, train_idx, seed)


def _train(spec: LearnerSpec, dataset: Dataset, train_idx, seed: int) -> TrainedModel:
    train_idx = np.asarray(train_idx, dtype=np.int64)
    if train_idx.size == 0:
        raise DegenerateFoldError("empty training fold")
    crowd = dataset.crowd_labels
    labeled = train_idx[crowd.labels_per_instance()[train_idx] > 0]
    if labeled.size == 0:
        raise DegenerateFoldError("no crowd labels in the training fold")
    config = TrainConfig.from_candidate(spec.hyperparameters)
    rng = np.random.default_rng(seed)
    X = dataset.features[labeled]
    hpc = spec.hyperparameters
    C, M = dataset.num_classes, dataset.num_workers

    if spec.kind is LearnerKind.MV:
        clf = fit_soft_targets(X, majority_vote_targets(crowd, labeled), config, rng, hpc)
        return TrainedModel(clf, None)

    if spec.kind is LearnerKind.DS:
        sub = crowd.select(crowd.for_instances(labeled))
        pos = np.full(crowd.num_instances, -1)
        pos[labeled] = np.arange(labeled.size)
        local = CrowdLabelSet(pos[sub.instances], sub.workers, sub.labels, labeled.size, M, C)
        ds = dawid_skene(local, C)
        clf = fit_soft_targets(X, ds.posteriors, config, rng, hpc)
        return TrainedModel(clf, ds.confusions)

    return _train_confusion(X, crowd, labeled, config, rng, hpc, C, M)


def _train_confusion(X, crowd, rows, config, rng, hpc, C, M) -> TrainedModel:
    Xd = _design(X)
    workers, labels, mask = _padded_labels(crowd, rows)
    W = 0.01 * rng.standard_normal((C, Xd.shape[1]))
    logits = np.tile(config.confusion_init * np.eye(C), (M, 1, 1))
    n = Xd.shape[0]
    total = config.epochs * math.ceil(n / config.batch_size)
    step = 0
    for _ in range(config.epochs):
        for idx in _batches(n, config.batch_size, rng):
            loss, gW, gQ = joint_loss_and_grad(W, logits, Xd[idx], workers[idx], labels[idx],
                                               mask[idx], config.weight_decay)
            _check_finite(loss, hpc, "one-stage training")
            lr = config.lr_at(step, total)
            W -= lr * gW
            logits -= lr * gQ
            step += 1
    if not (np.all(np.isfinite(W)) and np.all(np.isfinite(logits))):
        raise DivergenceError(f"non-finite parameters with hyperparameters {hpc.describe()}")
    return TrainedModel(LinearClassifier(W), softmax(logits, axis=2))
