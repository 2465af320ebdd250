"""Hyperparameter selection criteria and the Borda-count ensemble."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import InvalidInputError
from .hpo import HpcCandidate
from .posterior import WeightScheme
from .risk import (
    CrowdWeightScheme,
    EvaluationBundle,
    PerfMode,
    aggregation_risk,
    crowd_risk,
    naive_default_risk,
    true_risk,
)


class CriterionId(str, Enum):
    TRUE = "true"
    DEF = "def"
    DEF_DATA = "def-data"
    AEU = "aeu"
    AEC = "aec"
    ALU = "alu"
    ALC = "alc"
    CXU = "cxu"
    CEC = "cec"
    CLC = "clc"
    ENS = "ens"

    @property
    def is_member(self) -> bool:
        return self in MEMBERS


# fixed column order of every risk table
MEMBERS: tuple[CriterionId, ...] = (
    CriterionId.AEU, CriterionId.AEC, CriterionId.ALU, CriterionId.ALC,
    CriterionId.CXU, CriterionId.CEC, CriterionId.CLC,
)
ALL_CRITERIA: tuple[CriterionId, ...] = tuple(CriterionId)

# (risk level, performance mode, weighting) per member
MEMBER_SETTINGS = {
    CriterionId.AEU: ("aggregation", PerfMode.EQUAL, WeightScheme.UNIFORM),
    CriterionId.AEC: ("aggregation", PerfMode.EQUAL, WeightScheme.CONFIDENCE),
    CriterionId.ALU: ("aggregation", PerfMode.LEARNED, WeightScheme.UNIFORM),
    CriterionId.ALC: ("aggregation", PerfMode.LEARNED, WeightScheme.CONFIDENCE),
    CriterionId.CXU: ("crowd", None, CrowdWeightScheme.UNIFORM),
    CriterionId.CEC: ("crowd", PerfMode.EQUAL, CrowdWeightScheme.CONFIDENCE_EQUAL),
    CriterionId.CLC: ("crowd", PerfMode.LEARNED, CrowdWeightScheme.CONFIDENCE_LEARNED),
}


def member_risk(criterion: CriterionId | str, bundle: EvaluationBundle, p: float = 0.8) -> float:
    level, mode, scheme = MEMBER_SETTINGS[CriterionId(criterion)]
    if level == "aggregation":
        return aggregation_risk(bundle, mode, scheme, p=p)
    return crowd_risk(bundle, scheme, p=p)


def member_available(criterion: CriterionId, bundle: EvaluationBundle) -> bool:
    level, mode, _ = MEMBER_SETTINGS[criterion]
    fp = bundle.folds[0]
    if level == "crowd" and fp.crowd_probs is None:
        return False
    if mode is PerfMode.LEARNED and fp.accuracies is None:
        return False
    return True


def rank_column(risks) -> np.ndarray:
    """Competition ranks: 1 + number of strictly smaller risks."""
    r = np.asarray(risks, dtype=float).ravel()
    if r.size == 0:
        raise InvalidInputError("cannot rank an empty column")
    return 1 + np.searchsorted(np.sort(r), r, side="left")


@dataclass
class RiskTable:
    """|candidates| x J member risks, columns in ``columns`` order."""

    candidates: list[HpcCandidate]
    risks: np.ndarray
    columns: tuple[CriterionId, ...] = MEMBERS

    def __post_init__(self):
        self.risks = np.asarray(self.risks, dtype=float).reshape(len(self.candidates), -1)
        self.columns = tuple(CriterionId(c) for c in self.columns)
        if self.risks.shape[1] != len(self.columns):
            raise InvalidInputError("risk matrix width differs from the column list")
        if np.any(np.isnan(self.risks)):
            raise InvalidInputError("risk table has missing entries")

    def column(self, criterion: CriterionId | str) -> np.ndarray:
        return self.risks[:, self.columns.index(CriterionId(criterion))]

    def ranks(self) -> np.ndarray:
        return np.column_stack([rank_column(self.risks[:, j]) for j in range(len(self.columns))])

    def subset(self, members: Iterable[CriterionId | str]) -> "RiskTable":
        members = [CriterionId(m) for m in members]
        idx = [self.columns.index(m) for m in members]
        return RiskTable(self.candidates, self.risks[:, idx], tuple(members))


def borda_risk(table: RiskTable) -> np.ndarray:
    """Per-candidate sum of competition ranks across the table's columns."""
    return table.ranks().sum(axis=1)


def select_winner_index(risks) -> int:
    r = np.asarray(risks, dtype=float).ravel()
    if r.size == 0:
        raise InvalidInputError("no candidates to select from")
    return int(np.argmin(r))


def select_winner(risks, candidates: Sequence[HpcCandidate]) -> HpcCandidate:
    if len(risks) != len(candidates):
        raise InvalidInputError("risks and candidates differ in length")
    return candidates[select_winner_index(risks)]


def ensemble_subset(table: RiskTable, members: Iterable[CriterionId | str]) -> int:
    """Index of the Borda winner over a subset of member columns."""
    members = list(members)
    if not members:
        raise InvalidInputError("ensemble needs at least one member")
    return select_winner_index(borda_risk(table.subset(members)))


@dataclass
class CriteriaResult:
    table: RiskTable | None
    winners: dict[CriterionId, int]     # criterion -> candidate index
    true_risks: np.ndarray | None = None
    ensemble_scores: np.ndarray | None = None
    def_data: HpcCandidate | None = None
    evaluated: np.ndarray = field(default=None)   # original indices of evaluated candidates


def evaluate_all_criteria(bundles: Sequence[EvaluationBundle | None],
                          candidates: Sequence[HpcCandidate],
                          default: HpcCandidate | None = None,
                          def_data: HpcCandidate | None = None,
                          p: float = 0.8) -> CriteriaResult:
    """Fill the risk table and pick one winner per applicable criterion.

    ``bundles[i]`` belongs to ``candidates[i]``; ``None`` marks a failed
    candidate, which no criterion may select. Members whose inputs the
    learner cannot provide are dropped; ENS is only formed when all seven
    members are present. DEF-DATA is an externally chosen configuration and
    is passed through as ``def_data``; its winner index is -1.
    """
    if len(bundles) != len(candidates):
        raise InvalidInputError("one bundle per candidate is required")
    default = candidates[0] if default is None else default
    ok = np.array([b is not None for b in bundles])
    if not ok.any():
        raise InvalidInputError("every candidate failed")
    idx = np.flatnonzero(ok)
    evaluated = [bundles[i] for i in idx]
    cands = [candidates[i] for i in idx]

    winners: dict[CriterionId, int] = {}
    naive = [naive_default_risk(c, default) for c in cands]
    winners[CriterionId.DEF] = int(idx[select_winner_index(naive)])

    true_risks = None
    if all(b.true_labels is not None for b in evaluated):
        true_risks = np.array([true_risk(b) for b in evaluated])
        winners[CriterionId.TRUE] = int(idx[select_winner_index(true_risks)])

    present = [m for m in MEMBERS if all(member_available(m, b) for b in evaluated)]
    table = None
    ens = None
    if present:
        risks = np.array([[member_risk(m, b, p) for m in present] for b in evaluated])
        table = RiskTable(cands, risks, tuple(present))
        for j, m in enumerate(present):
            winners[m] = int(idx[select_winner_index(risks[:, j])])
        if len(present) == len(MEMBERS):
            ens = borda_risk(table)
            winners[CriterionId.ENS] = int(idx[select_winner_index(ens)])
    if def_data is not None:
        winners[CriterionId.DEF_DATA] = -1
    return CriteriaResult(table, winners, true_risks, ens, def_data, idx)
