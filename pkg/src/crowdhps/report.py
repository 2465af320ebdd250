"""Study-level comparison metrics: ranks, loss reductions, Kendall tau-b, win rates."""
from __future__ import annotations

import numpy as np

from .core import InvalidInputError
from .criteria import rank_column


class UndefinedReductionError(ValueError):
    pass


class UndefinedCorrelationError(ValueError):
    pass


def loss_reduction(baseline_loss: float, loss: float) -> tuple[float, float]:
    """(absolute reduction in percentage points, relative reduction in percent)."""
    if baseline_loss == 0:
        raise UndefinedReductionError("relative reduction undefined for a zero baseline")
    diff = baseline_loss - loss
    return diff * 100.0, diff / baseline_loss * 100.0


def kendall_tau_b(a, b) -> float:
    """Kendall rank correlation with the tau-b tie correction."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size or a.size < 2:
        raise InvalidInputError("need two equal-length sequences of at least 2 values")
    iu = np.triu_indices(a.size, k=1)
    sa = np.sign(a[:, None] - a[None, :])[iu]
    sb = np.sign(b[:, None] - b[None, :])[iu]
    prod = sa * sb
    concordant_minus_discordant = prod.sum()
    untied_a = np.count_nonzero(sa)
    untied_b = np.count_nonzero(sb)
    if untied_a == 0 or untied_b == 0:
        raise UndefinedCorrelationError("tau-b is undefined when one side is all ties")
    return float(concordant_minus_discordant / np.sqrt(float(untied_a) * float(untied_b)))


def win_rate_matrix(losses) -> np.ndarray:
    """Cell (i, j): percent of experiments where entity i has strictly lower
    loss than entity j. The diagonal is NaN."""
    L = np.asarray(losses, dtype=float)
    if L.ndim != 2 or np.any(np.isnan(L)):
        raise InvalidInputError("losses must be a complete entity x experiment matrix")
    wins = (L[:, None, :] < L[None, :, :]).mean(axis=2) * 100.0
    np.fill_diagonal(wins, np.nan)
    return wins


def mean_rank(losses) -> tuple[np.ndarray, np.ndarray]:
    """Mean competition rank per entity and its standard error over experiments."""
    L = np.asarray(losses, dtype=float)
    if L.ndim != 2 or np.any(np.isnan(L)):
        raise InvalidInputError("losses must be a complete entity x experiment matrix")
    ranks = np.column_stack([rank_column(L[:, x]) for x in range(L.shape[1])]).astype(float)
    return ranks.mean(axis=1), standard_error(ranks, axis=1)


def standard_error(values, axis=-1) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    n = v.shape[axis]
    if n < 2:
        return np.zeros(np.delete(v.shape, axis)) if v.ndim > 1 else np.float64(0.0)
    return v.std(axis=axis, ddof=1) / np.sqrt(n)
