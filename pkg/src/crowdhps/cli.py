"""Command line entry point: ``crowdhps simulate|study|report``.

Values come from the YAML config, then command line flags override them.
Environment variables are never consulted.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .core import Dataset, InvalidInputError
from .criteria import MEMBERS, CriterionId
from .hpo import HpcCandidate, space_from_manifest, space_to_manifest
from .lfc import LearnerKind, default_search_space
from .report import (
    UndefinedCorrelationError,
    UndefinedReductionError,
    kendall_tau_b,
    loss_reduction,
    mean_rank,
    win_rate_matrix,
)
from .simulate import BlobScenario, Variant, aggregation_noise, make_variant
from .study import StudyConfig, StudyResult, run_study, winner_rows

log = logging.getLogger("crowdhps")

ConfigError = io.ConfigError


def _get(doc: dict, key: str, kind, default=None, required=False, where=""):
    name = f"{where}{key}"
    if key not in doc or doc[key] is None:
        if required:
            raise ConfigError(f"field '{name}': required")
        return default
    value = doc[key]
    try:
        if kind is float:
            return float(value)
        if kind is int:
            if isinstance(value, bool) or float(value) != int(value):
                raise ValueError
            return int(value)
        if kind is str:
            if not isinstance(value, str):
                raise ValueError
            return value
        if kind is dict:
            if not isinstance(value, dict):
                raise ValueError
            return value
        if kind is list:
            if not isinstance(value, list):
                raise ValueError
            return value
    except (TypeError, ValueError):
        raise ConfigError(f"field '{name}': expected {kind.__name__}, got {value!r}") from None
    raise AssertionError(kind)


def _rel(config_path, path) -> Path:
    """Config paths are relative to the config file's directory."""
    p = Path(path)
    return p if p.is_absolute() else Path(config_path).parent / p


# -- simulate ----------------------------------------------------------------

def _scenario_from_config(doc: dict) -> BlobScenario:
    blobs = _get(doc, "blobs", dict, {})
    workers = _get(doc, "workers", dict, {})
    base = BlobScenario()
    accs = _get(workers, "accuracies", list, list(base.accuracies), where="workers.")
    try:
        accs = tuple(float(a) for a in accs)
    except (TypeError, ValueError):
        raise ConfigError("field 'workers.accuracies': expected a list of numbers") from None
    C = _get(blobs, "num_classes", int, base.num_classes, where="blobs.")
    if not accs or any(not 0.0 <= a <= 1.0 for a in accs):
        raise ConfigError("field 'workers.accuracies': values must lie in [0, 1]")
    try:
        return BlobScenario(
            num_train=_get(blobs, "num_train", int, base.num_train, where="blobs."),
            num_test=_get(blobs, "num_test", int, base.num_test, where="blobs."),
            num_classes=C,
            dim=_get(blobs, "dim", int, base.dim, where="blobs."),
            separation=_get(blobs, "separation", float, base.separation, where="blobs."),
            accuracies=accs,
            coverage=_get(workers, "coverage", float, base.coverage, where="workers."),
        )
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None


def cmd_simulate(config_path, out=None, seed=None) -> Path:
    """Write train/test features, true labels, the full crowd and every variant."""
    doc = io.load_yaml(config_path)
    seed = _get(doc, "seed", int, 0) if seed is None else seed
    out = Path(out) if out is not None else _rel(config_path, _get(doc, "output", str, required=True))
    scenario = _scenario_from_config(doc)
    variants = _get(doc, "variants", list, [v.value for v in Variant])
    try:
        variants = [Variant(v) for v in variants]
    except ValueError as exc:
        raise ConfigError(f"field 'variants': {exc}") from None

    try:
        train, test, vseed = scenario.base(seed)
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None
    for name, part in (("train", train), ("test", test)):
        io.write_features(out / name / "features.csv", part.features)
        io.write_true_labels(out / name / "true_labels.csv", part.true_labels)
        io.write_crowd_labels(out / name / "crowd_labels.csv", part.crowd_labels)
    stats = {}
    for v in variants:
        labels = make_variant(train.crowd_labels, train.true_labels, v, vseed)
        io.write_crowd_labels(out / "train" / "variants" / f"{v.value}.csv", labels)
        stats[v.value] = {"labels": len(labels),
                          "label_noise": labels.label_noise(train.true_labels),
                          "aggregation_noise": aggregation_noise(labels, train.true_labels)}
    io.write_json(out / "dataset.json", {
        "seed": seed, "num_classes": scenario.num_classes, "num_workers": len(scenario.accuracies),
        "num_features": scenario.dim, "num_train": scenario.num_train,
        "num_test": scenario.num_test, "variants": stats,
    })
    log.info("wrote dataset to %s", out)
    return out


# -- study -------------------------------------------------------------------

def load_split(directory, crowd_file=None, num_workers=None, num_classes=None) -> Dataset:
    directory = Path(directory)
    X = io.read_features(directory / "features.csv")
    y = None
    if (directory / "true_labels.csv").exists():
        y = io.read_true_labels(directory / "true_labels.csv", X.shape[0])
    crowd_path = Path(crowd_file) if crowd_file is not None else directory / "crowd_labels.csv"
    if crowd_path.exists():
        crowd = io.read_crowd_labels(crowd_path, X.shape[0], num_workers, num_classes)
    else:
        crowd = io.CrowdLabelSet([], [], [], X.shape[0], num_workers or 0, num_classes or 2)
    return Dataset(X, crowd, y)


def _study_config(doc: dict, args) -> tuple[StudyConfig, dict]:
    def pick(flag, key, kind, default):
        v = getattr(args, flag, None) if args is not None else None
        return v if v is not None else _get(doc, key, kind, default)

    try:
        learner = LearnerKind(_get(doc, "learner", str, "confusion"))
    except ValueError:
        raise ConfigError(f"field 'learner': expected one of "
                          f"{[k.value for k in LearnerKind]}") from None
    manifest = _get(doc, "space", dict)
    try:
        space = default_search_space(learner) if manifest is None else space_from_manifest(manifest)
    except InvalidInputError as exc:
        raise ConfigError(f"field 'space': {exc}") from None
    def_data = _get(doc, "def_data", dict)
    if def_data is not None:
        values = dict(space.default.values)
        values.update(def_data)
        def_data = HpcCandidate(values, origin="def-data")
    try:
        cfg = StudyConfig(
            learner=learner, space=space,
            budget=pick("budget", "budget", int, 17),
            folds=pick("folds", "folds", int, 5),
            test_seeds=pick("test_seeds", "test_seeds", int, 5),
            seed=pick("seed", "seed", int, 0),
            p=_get(doc, "equal_accuracy", float, 0.8),
            parallelism=pick("parallelism", "parallelism", int, 1),
            def_data=def_data,
        )
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None
    return cfg, {"space": space_to_manifest(space)}


def write_study(study: StudyResult, out, meta: dict | None = None) -> Path:
    out = Path(out)
    table = study.criteria.table
    columns = [c for c in CriterionId if c is not CriterionId.DEF_DATA]
    rows = []
    for i, cand in enumerate(study.candidates):
        row = [i, cand.origin]
        pos = np.flatnonzero(study.criteria.evaluated == i)
        for c in columns:
            if not pos.size:
                row.append("failed")
            elif c is CriterionId.TRUE:
                row.append("" if study.criteria.true_risks is None
                           else study.criteria.true_risks[pos[0]])
            elif c is CriterionId.DEF:
                row.append(int(not cand.same_config(study.candidates[0])))
            elif c is CriterionId.ENS:
                row.append("" if study.criteria.ensemble_scores is None
                           else int(study.criteria.ensemble_scores[pos[0]]))
            elif table is not None and c in table.columns:
                row.append(table.column(c)[pos[0]])
            else:
                row.append("")
        rows.append(row)
    io.write_csv(out / "risk_table.csv", ["candidate_id", "origin"] + [c.value for c in columns],
                 rows)
    winners = winner_rows(study)
    io.write_csv(out / "winners.csv",
                 ["criterion", "candidate_id", "test_loss_mean", "test_loss_se"], winners)
    io.write_csv(out / "candidates.csv", ["candidate_id", "origin", "hyperparameters"],
                 [(i, c.origin, c.describe()) for i, c in enumerate(study.candidates)])
    cfg = study.config
    summary = {
        "learner": cfg.learner.value, "budget": cfg.budget, "folds": cfg.folds,
        "test_seeds": cfg.test_seeds, "seed": cfg.seed, "equal_accuracy": cfg.p,
        "criteria": [w[0] for w in winners],
        "failures": {str(k): v for k, v in sorted(study.failures.items())},
        "test_losses": {c.value: [float(x) for x in v] for c, v in study.test_losses.items()},
    }
    summary.update(meta or {})
    io.write_json(out / "summary.json", summary)
    _write_report(out / "report", [summary], baselines=None)
    return out


def cmd_study(config_path, out=None, args=None) -> Path:
    doc = io.load_yaml(config_path)
    data = _get(doc, "data", str, required=True)
    data_dir = _rel(config_path, data)
    out = Path(out) if out is not None else _rel(config_path, _get(doc, "output", str, required=True))
    cfg, meta = _study_config(doc, args)
    variant = _get(doc, "variant", str)
    crowd_file = None
    if variant is not None:
        try:
            crowd_file = data_dir / "train" / "variants" / f"{Variant(variant).value}.csv"
        except ValueError:
            raise ConfigError(f"field 'variant': unknown variant {variant!r}") from None
    info = io.read_json(data_dir / "dataset.json") if (data_dir / "dataset.json").exists() else {}
    M, C = info.get("num_workers"), info.get("num_classes")
    train = load_split(data_dir / "train", crowd_file, M, C)
    test = load_split(data_dir / "test", None, train.num_workers, train.num_classes)
    study = run_study(cfg, train, test)
    meta.update({"data": str(data), "variant": variant or "crowd_labels"})
    return write_study(study, out, meta)


# -- report ------------------------------------------------------------------

def _loss_matrix(summaries: list[dict]) -> tuple[list[str], np.ndarray]:
    schema = summaries[0]["criteria"]
    for s in summaries[1:]:
        if s["criteria"] != schema:
            raise InvalidInputError(f"schema mismatch across studies: {schema} vs {s['criteria']}")
    L = np.array([[np.mean(s["test_losses"][c]) for s in summaries] for c in schema])
    return schema, L


def _study_key(s: dict):
    return s.get("data"), s.get("variant"), s.get("seed")


def _write_report(out, summaries: list[dict], baselines: list[dict] | None) -> None:
    names, L = _loss_matrix(summaries)
    out = Path(out)
    means, ses = mean_rank(L)
    io.write_csv(out / "mean_ranks.csv", ["criterion", "mean_rank", "rank_se"],
                 zip(names, means.tolist(), ses.tolist()))

    def reductions(base_losses):
        rows = []
        for i, c in enumerate(names):
            pp, pct = [], []
            for x in range(L.shape[1]):
                try:
                    a, r = loss_reduction(base_losses[x], L[i, x])
                except UndefinedReductionError:
                    a, r = (base_losses[x] - L[i, x]) * 100.0, float("nan")
                pp.append(a)
                pct.append(r)
            rows.append((c, float(np.mean(pp)), float(np.nanmean(pct)) if not
                         np.all(np.isnan(pct)) else float("nan")))
        return rows

    header = ["criterion", "absolute_pp", "relative_pct"]
    io.write_csv(out / "reductions_vs_def.csv", header, reductions(L[names.index("def")]))
    if baselines:
        by_key = {_study_key(b): b for b in baselines}
        base = []
        for s in summaries:
            b = by_key.get(_study_key(s))
            if b is None:
                raise InvalidInputError(f"no mv baseline study for {_study_key(s)}")
            base.append(float(np.mean(b["test_losses"]["def"])))
        io.write_csv(out / "reductions_vs_mv_def.csv", header, reductions(np.array(base)))

    tau_rows = []
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            try:
                tau = kendall_tau_b(L[i], L[j])
            except (UndefinedCorrelationError, InvalidInputError):
                tau = float("nan")
            tau_rows.append((names[i], names[j], tau))
    io.write_csv(out / "kendall_tau_b.csv", ["criterion_a", "criterion_b", "tau_b"], tau_rows)
    W = win_rate_matrix(L)
    io.write_csv(out / "win_rate.csv", ["criterion"] + names,
                 [[names[i]] + W[i].tolist() for i in range(len(names))])


def cmd_report(study_paths, out, mv_baselines=()) -> Path:
    if not study_paths:
        raise InvalidInputError("need at least one study directory")
    summaries = [io.read_json(Path(p) / "summary.json") for p in study_paths]
    baselines = [io.read_json(Path(p) / "summary.json") for p in mv_baselines] or None
    _write_report(out, summaries, baselines)
    names, L = _loss_matrix(summaries)
    io.write_json(Path(out) / "summary.json", {
        "studies": [str(p) for p in study_paths],
        "criteria": names,
        "mean_test_loss": dict(zip(names, L.mean(axis=1).tolist())),
        "ensemble_complete": all(m.value in names for m in MEMBERS),
    })
    return Path(out)


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crowdhps",
                                     description="Hyperparameter selection studies on crowd labels.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic crowdsourced dataset")
    p.add_argument("config", help="YAML config")
    p.add_argument("--out", help="output directory (overrides config 'output')")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("study", help="run one hyperparameter-selection study")
    p.add_argument("config", help="YAML config")
    p.add_argument("--out", help="output directory (overrides config 'output')")
    p.add_argument("--seed", type=int)
    p.add_argument("--folds", type=int, metavar="K")
    p.add_argument("--budget", type=int, metavar="L", help="candidates including the default")
    p.add_argument("--test-seeds", type=int, metavar="R")
    p.add_argument("--parallelism", type=int, metavar="P")

    p = sub.add_parser("report", help="aggregate completed studies")
    p.add_argument("studies", nargs="+", help="study output directories")
    p.add_argument("--out", required=True)
    p.add_argument("--mv-baseline", nargs="*", default=[], metavar="DIR",
                   help="mv studies providing the mv[DEF] baseline, matched by data/variant/seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            path = cmd_simulate(args.config, args.out, args.seed)
        elif args.command == "study":
            path = cmd_study(args.config, args.out, args)
        else:
            path = cmd_report(args.studies, args.out, args.mv_baseline)
    except (InvalidInputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
