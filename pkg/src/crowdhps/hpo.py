"""Search spaces, quasi-random candidate generation and cross-validation splits."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.stats import qmc

from .core import InvalidInputError, SplitPlan

# scipy ships the Joe-Kuo 6.21201 direction numbers
MAX_SOBOL_DIM = 21201


class UnsupportedDimensionError(InvalidInputError):
    pass


def _num(x) -> float:
    # bounds may come in as decimal strings from a manifest
    return float(Decimal(x)) if isinstance(x, str) else float(x)


@dataclass(frozen=True)
class UniformReal:
    lo: float
    hi: float
    low_open: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lo", _num(self.lo))
        object.__setattr__(self, "hi", _num(self.hi))
        if not self.lo < self.hi:
            raise InvalidInputError(f"need lo < hi, got [{self.lo}, {self.hi}]")

    def __call__(self, u: float) -> float:
        if self.low_open:
            u = max(u, np.finfo(float).eps)
        return self.lo + u * (self.hi - self.lo)

    def contains(self, v) -> bool:
        if self.low_open:
            return self.lo < v <= self.hi
        return self.lo <= v <= self.hi


@dataclass(frozen=True)
class LogUniformReal:
    lo: float
    hi: float

    def __post_init__(self):
        object.__setattr__(self, "lo", _num(self.lo))
        object.__setattr__(self, "hi", _num(self.hi))
        if not 0 < self.lo < self.hi:
            raise InvalidInputError(f"need 0 < lo < hi, got [{self.lo}, {self.hi}]")

    def __call__(self, u: float) -> float:
        a, b = math.log10(self.lo), math.log10(self.hi)
        return 10.0 ** (a + u * (b - a))

    def contains(self, v) -> bool:
        # 10**log10(x) can drift by an ulp
        return self.lo * (1 - 1e-12) <= v <= self.hi * (1 + 1e-12)


@dataclass(frozen=True)
class UniformCategorical:
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise InvalidInputError("categorical domain must be non-empty")

    def __call__(self, u: float):
        i = min(int(math.floor(u * len(self.values))), len(self.values) - 1)
        return self.values[i]

    def contains(self, v) -> bool:
        return v in self.values


@dataclass(frozen=True)
class Fixed:
    value: Any

    def contains(self, v) -> bool:
        return v == self.value


ParamKind = UniformReal | LogUniformReal | UniformCategorical | Fixed


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: ParamKind

    @property
    def sampled(self) -> bool:
        return not isinstance(self.kind, Fixed)


@dataclass(frozen=True)
class HpcCandidate:
    """One hyperparameter configuration.

    ``origin`` is ``"default"`` or ``"sobol:<i>"``; equality of configurations
    (ignoring origin) is :meth:`same_config`.
    """

    values: Mapping[str, Any]
    origin: str = "default"

    def __post_init__(self):
        object.__setattr__(self, "values", dict(self.values))

    def __getitem__(self, name):
        return self.values[name]

    def __hash__(self):
        return hash((tuple(sorted((k, repr(v)) for k, v in self.values.items())), self.origin))

    def same_config(self, other: "HpcCandidate") -> bool:
        return self.values == other.values

    def describe(self) -> str:
        return ", ".join(f"{k}={v!r}" for k, v in self.values.items())


@dataclass(frozen=True)
class SearchSpace:
    params: tuple[ParamSpec, ...]
    default: HpcCandidate = field(default=None)

    def __post_init__(self):
        params = tuple(self.params)
        object.__setattr__(self, "params", params)
        names = [p.name for p in params]
        if len(set(names)) != len(names):
            raise InvalidInputError(f"duplicate parameter names in {names}")
        if self.default is None:
            raise InvalidInputError("a search space needs a default configuration")
        default = self.default
        if not isinstance(default, HpcCandidate):
            default = HpcCandidate(default, origin="default")
            object.__setattr__(self, "default", default)
        if set(default.values) != set(names):
            raise InvalidInputError(
                f"default covers {sorted(default.values)}, space declares {sorted(names)}"
            )
        for p in params:
            if not p.kind.contains(default[p.name]):
                raise InvalidInputError(
                    f"default {p.name}={default[p.name]!r} outside its domain"
                )

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    @property
    def sampled_dim(self) -> int:
        return sum(p.sampled for p in self.params)

    def contains(self, candidate: HpcCandidate) -> bool:
        return all(p.kind.contains(candidate[p.name]) for p in self.params)


def sobol_points(dim: int, count: int) -> np.ndarray:
    """First ``count`` unscrambled Sobol points in [0, 1)^dim, zero point skipped."""
    if dim < 1 or count < 1:
        raise InvalidInputError("dim and count must be >= 1")
    if dim > MAX_SOBOL_DIM:
        raise UnsupportedDimensionError(f"Sobol direction numbers stop at dim {MAX_SOBOL_DIM}")
    engine = qmc.Sobol(d=dim, scramble=False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        pts = engine.random(count + 1)
    return pts[1:]


def materialize(space: SearchSpace, point: Sequence[float], origin: str = "sobol") -> HpcCandidate:
    point = np.asarray(point, dtype=float).ravel()
    if point.size != space.sampled_dim:
        raise InvalidInputError(
            f"point has {point.size} coordinates, space samples {space.sampled_dim}"
        )
    values, i = {}, 0
    for p in space.params:
        if isinstance(p.kind, Fixed):
            values[p.name] = p.kind.value
            continue
        v = p.kind(float(point[i]))
        values[p.name] = v.item() if isinstance(v, np.generic) else v
        i += 1
    return HpcCandidate(values, origin=origin)


def sample_candidates(space: SearchSpace, budget: int) -> list[HpcCandidate]:
    """Default first, then ``budget - 1`` Sobol candidates."""
    if budget < 1:
        raise InvalidInputError("budget must be >= 1")
    candidates = [space.default]
    if budget == 1:
        return candidates
    if space.sampled_dim == 0:
        return candidates + [HpcCandidate(space.default.values, origin=f"sobol:{i}")
                             for i in range(budget - 1)]
    pts = sobol_points(space.sampled_dim, budget - 1)
    candidates += [materialize(space, u, origin=f"sobol:{i}") for i, u in enumerate(pts)]
    return candidates


def kfold_split(n: int, k: int, seed: int) -> SplitPlan:
    if not 1 <= k <= n:
        raise InvalidInputError(f"need 1 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    chunks = np.array_split(perm, k)
    folds = []
    for i, val in enumerate(chunks):
        if k == 1:
            train = np.array([], dtype=np.int64)
        else:
            train = np.concatenate([c for j, c in enumerate(chunks) if j != i])
        folds.append((np.sort(train), np.sort(val)))
    return SplitPlan(tuple(folds), n)


def task_seed(*keys: int) -> int:
    """Deterministic 32-bit seed derived from integer keys."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def space_from_manifest(doc: Mapping[str, Any]) -> SearchSpace:
    """Build a space from ``{"params": {name: {...}}, "default": {...}}``.

    Each param entry has ``kind`` in {uniform, loguniform, categorical, fixed}
    and either ``low``/``high`` (decimal strings preferred), ``values`` or
    ``value``. ``uniform`` accepts ``low_open: true`` for a (low, high] range.
    """
    if "params" not in doc or "default" not in doc:
        raise InvalidInputError("search space manifest needs 'params' and 'default'")
    params = []
    for name, entry in doc["params"].items():
        kind = entry.get("kind")
        try:
            if kind == "uniform":
                spec = UniformReal(entry["low"], entry["high"], bool(entry.get("low_open", False)))
            elif kind == "loguniform":
                spec = LogUniformReal(entry["low"], entry["high"])
            elif kind == "categorical":
                spec = UniformCategorical(tuple(entry["values"]))
            elif kind == "fixed":
                spec = Fixed(entry["value"])
            else:
                raise InvalidInputError(f"params.{name}.kind: unknown kind {kind!r}")
        except KeyError as exc:
            raise InvalidInputError(f"params.{name}: missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if str(exc).startswith(f"params.{name}"):
                raise
            raise InvalidInputError(f"params.{name}: {exc}") from None
        params.append(ParamSpec(name, spec))
    default = {}
    for p in params:
        if p.name not in doc["default"]:
            raise InvalidInputError(f"default.{p.name}: missing")
        v = doc["default"][p.name]
        if isinstance(p.kind, (UniformReal, LogUniformReal)):
            try:
                v = _num(v)
            except (TypeError, ValueError):
                raise InvalidInputError(f"default.{p.name}: not a number: {v!r}") from None
        if not p.kind.contains(v):
            raise InvalidInputError(f"default.{p.name}: {v!r} lies outside its domain")
        default[p.name] = v
    return SearchSpace(tuple(params), HpcCandidate(default, origin="default"))


def space_to_manifest(space: SearchSpace) -> dict:
    params = {}
    for p in space.params:
        k = p.kind
        if isinstance(k, UniformReal):
            entry = {"kind": "uniform", "low": repr(k.lo), "high": repr(k.hi)}
            if k.low_open:
                entry["low_open"] = True
        elif isinstance(k, LogUniformReal):
            entry = {"kind": "loguniform", "low": repr(k.lo), "high": repr(k.hi)}
        elif isinstance(k, UniformCategorical):
            entry = {"kind": "categorical", "values": list(k.values)}
        else:
            entry = {"kind": "fixed", "value": k.value}
        params[p.name] = entry
    return {"params": params, "default": dict(space.default.values)}
