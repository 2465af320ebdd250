"""One hyperparameter-selection study: sample, cross-validate, select, test."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, DegenerateFoldError, InvalidInputError
from .criteria import CriteriaResult, CriterionId, evaluate_all_criteria
from .hpo import HpcCandidate, SearchSpace, kfold_split, sample_candidates, task_seed
from .lfc import DivergenceError, LearnerKind, LearnerSpec, TrainedModel, train
from .report import standard_error
from .risk import EvaluationBundle, FoldPredictions

log = logging.getLogger(__name__)

# keeps the seed streams of validation and test training apart
_CV_STREAM, _TEST_STREAM, _SPLIT_STREAM = 0, 1, 2


@dataclass(frozen=True)
class StudyConfig:
    learner: LearnerKind
    space: SearchSpace
    budget: int = 17
    folds: int = 5
    test_seeds: int = 5
    seed: int = 0
    p: float = 0.8
    parallelism: int = 1
    def_data: HpcCandidate | None = None

    def __post_init__(self):
        object.__setattr__(self, "learner", LearnerKind(self.learner))
        if self.test_seeds < 1:
            raise InvalidInputError("test_seeds must be >= 1")
        if self.parallelism < 1:
            raise InvalidInputError("parallelism must be >= 1")


@dataclass
class StudyResult:
    config: StudyConfig
    candidates: list[HpcCandidate]
    criteria: CriteriaResult
    failures: dict[int, str]
    test_losses: dict[CriterionId, np.ndarray]       # criterion -> R test losses
    candidate_test_losses: dict[int, np.ndarray] = field(default_factory=dict)

    def winner(self, criterion: CriterionId | str) -> HpcCandidate:
        c = CriterionId(criterion)
        i = self.criteria.winners[c]
        return self.config.def_data if i == -1 else self.candidates[i]

    def mean_test_loss(self, criterion: CriterionId | str) -> float:
        return float(np.mean(self.test_losses[CriterionId(criterion)]))


def fold_predictions(model: TrainedModel, dataset: Dataset, val) -> FoldPredictions:
    """Model outputs on a validation fold, crowd outputs aligned with its labels."""
    val = np.asarray(val, dtype=np.int64)
    X = dataset.features
    f_val = model.predict_proba(X[val])
    if not model.has_crowd_model:
        return FoldPredictions(val, f_val)
    crowd = dataset.crowd_labels
    mask = crowd.for_instances(val)
    pos = np.full(crowd.num_instances, -1, dtype=np.int64)
    pos[val] = np.arange(val.size)
    rows = pos[crowd.instances[mask]]
    workers = crowd.workers[mask]
    f = f_val[rows]
    return FoldPredictions(val, f_val, model.crowd_proba(None, workers, f=f),
                           model.worker_accuracy(None, workers, f=f))


def _cv_task(args):
    learner, cand, dataset, train_idx, val_idx, seed = args
    try:
        model = train(LearnerSpec(learner, cand), dataset, train_idx, seed)
        fp = fold_predictions(model, dataset, val_idx)
    except (DivergenceError, DegenerateFoldError, FloatingPointError) as exc:
        return None, f"{type(exc).__name__}: {exc}"
    if not np.all(np.isfinite(fp.data_probs)):
        return None, "non-finite validation predictions"
    return fp, None


def _test_task(args):
    learner, cand, train_set, X_test, y_test, seed = args
    try:
        model = train(LearnerSpec(learner, cand), train_set, np.arange(train_set.num_instances),
                      seed)
    except (DivergenceError, DegenerateFoldError, FloatingPointError):
        return np.nan
    pred = np.argmax(model.predict_proba(X_test), axis=1)
    return float(np.mean(pred != y_test))


def _run_tasks(fn, tasks, parallelism):
    # results come back in task order, so parallelism never changes outputs
    if parallelism == 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * parallelism))))


def run_study(config: StudyConfig, train_set: Dataset, test_set: Dataset) -> StudyResult:
    """Cross-validate every candidate, apply all criteria and test each winner.

    ``test_set`` needs true labels. Candidates failing on any fold are
    excluded from selection; the reason is logged and kept in ``failures``.
    """
    if test_set.true_labels is None:
        raise InvalidInputError("the test set needs true labels")
    candidates = sample_candidates(config.space, config.budget)
    plan = kfold_split(train_set.num_instances, config.folds,
                       task_seed(config.seed, _SPLIT_STREAM))
    tasks = [(config.learner, cand, train_set, tr, val,
              task_seed(config.seed, _CV_STREAM, i, k))
             for i, cand in enumerate(candidates) for k, (tr, val) in enumerate(plan)]
    outputs = _run_tasks(_cv_task, tasks, config.parallelism)

    bundles: list[EvaluationBundle | None] = []
    failures: dict[int, str] = {}
    K = plan.k
    for i, cand in enumerate(candidates):
        chunk = outputs[i * K:(i + 1) * K]
        reasons = [f"fold {k}: {r}" for k, (_, r) in enumerate(chunk) if r is not None]
        if reasons:
            failures[i] = "; ".join(reasons)
            log.warning("candidate %d (%s) failed: %s", i, cand.describe(), failures[i])
            bundles.append(None)
            continue
        bundles.append(EvaluationBundle(plan, tuple(fp for fp, _ in chunk),
                                        train_set.crowd_labels, train_set.true_labels))

    result = evaluate_all_criteria(bundles, candidates, default=candidates[0],
                                   def_data=config.def_data, p=config.p)

    # test-evaluate each distinct winner once
    needed = sorted(set(result.winners.values()))
    R = config.test_seeds
    y_test = np.asarray(test_set.true_labels)
    test_tasks = []
    for i in needed:
        cand = config.def_data if i == -1 else candidates[i]
        test_tasks += [(config.learner, cand, train_set, test_set.features, y_test,
                        task_seed(config.seed, _TEST_STREAM, i + 1, r)) for r in range(R)]
    losses = _run_tasks(_test_task, test_tasks, config.parallelism)
    per_cand = {i: np.array(losses[j * R:(j + 1) * R]) for j, i in enumerate(needed)}
    test_losses = {c: per_cand[i] for c, i in result.winners.items()}
    return StudyResult(config, candidates, result, failures, test_losses, per_cand)


def winner_rows(study: StudyResult) -> list[tuple[str, int, float, float]]:
    """(criterion, candidate_id, test_loss_mean, test_loss_se) in registry order."""
    rows = []
    for c in CriterionId:
        if c not in study.test_losses:
            continue
        losses = study.test_losses[c]
        rows.append((c.value, study.criteria.winners[c], float(np.mean(losses)),
                     float(standard_error(losses))))
    return rows
