"""Hyperparameter selection for learning from crowds without true labels."""
from .core import (
    ClassLabel,
    CrowdLabelSet,
    Dataset,
    EqualPerformance,
    LearnedPerformance,
    ProbabilityVector,
    SplitPlan,
)
from .criteria import CriterionId, RiskTable, evaluate_all_criteria
from .hpo import HpcCandidate, SearchSpace, sample_candidates
from .lfc import LearnerKind, LearnerSpec, default_search_space, train
from .simulate import BlobScenario
from .study import StudyConfig, run_study

__version__ = "0.1.0"

__all__ = [
    "BlobScenario", "ClassLabel", "CrowdLabelSet", "CriterionId", "Dataset", "EqualPerformance",
    "HpcCandidate", "LearnedPerformance", "LearnerKind", "LearnerSpec", "ProbabilityVector",
    "RiskTable", "SearchSpace", "SplitPlan", "StudyConfig", "default_search_space",
    "evaluate_all_criteria",
    "run_study", "sample_candidates", "train",
]
