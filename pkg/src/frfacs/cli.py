"""Command-line entry point: ``frfacs {simulate,train,cv,ablate,grid}``.

Every flag can also be supplied through an environment variable named
``FRFACS_<FLAG>`` (upper case, dashes as underscores), e.g.
``FRFACS_WORKERS=8``. A flag given on the command line wins over the
environment, which wins over the config file.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from ._random import SPLIT_STREAM, derive_seed
from .bench import (
    RECOMMENDED_GRIDS,
    ExperimentConfig,
    GridSpec,
    ablation_specs,
    grid_search,
    run_ablation,
    run_models,
    stratified_split,
    write_reports,
)
from .errors import FrfacsError
from .fdata import load_dataset
from .forest import ForestConfig, fit_forest
from .metrics import evaluate
from .simgen import get_scenario, generate, scenario_manifest

logger = logging.getLogger("frfacs")

ENV_PREFIX = "FRFACS_"


def _env(name: str, cast=str):
    raw = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    if raw is None or raw == "":
        return None
    return cast(raw)


def _add(p: argparse.ArgumentParser, flag: str, cast=str, required=False, help=None):
    default = _env(flag, cast)
    p.add_argument(
        f"--{flag}",
        type=cast,
        default=default,
        required=required and default is None,
        help=help,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frfacs", description="Functional random forests for imbalanced curve classification.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a simulated scenario as CSV")
    _add(p, "scenario", required=True, help="scenario name, e.g. t2_noise0.05_r5_m10_smote or n500")
    _add(p, "out", required=True, help="output directory")
    _add(p, "seed", int, help="simulation seed (default 0)")
    _add(p, "n", int, help="override the sample size")

    p = sub.add_parser("train", help="fit on a stratified split, report on the held-out part, save the model")
    _add(p, "data", required=True, help="dataset CSV")
    _add(p, "config", help="JSON with ForestConfig fields (or an experiment file with a 'model' key)")
    _add(p, "out", required=True, help="output directory")
    _add(p, "split", float, help="training fraction (default 0.7)")
    _add(p, "seed", int, help="seed for the split and the forest")
    _add(p, "workers", int, help="parallel workers for tree fitting")

    for name, help_text in (
        ("cv", "repeated stratified cross-validation"),
        ("ablate", "plain RF / +dynamic weights / +SMOTE / full comparison"),
        ("grid", "nested grid search"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add(p, "config", required=True, help="experiment JSON")
        _add(p, "out", help="output directory (overrides output_dir)")
        _add(p, "workers", int, help="parallel workers")
        _add(p, "seed", int, help="master seed")
        _add(p, "repeats", int)
        _add(p, "folds", int)
    return parser


def _experiment(args) -> ExperimentConfig:
    exp = ExperimentConfig.load(args.config)
    overrides = {
        "output_dir": args.out,
        "workers": args.workers,
        "master_seed": args.seed,
        "repeats": args.repeats,
        "cv_folds": args.folds,
    }
    return replace(exp, **{k: v for k, v in overrides.items() if v is not None})


def cmd_simulate(args) -> int:
    sc = get_scenario(args.scenario, seed=args.seed or 0)
    if args.n is not None:
        sc = replace(sc, sim=replace(sc.sim, n=args.n))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    generate(sc.sim).to_csv(out / f"{sc.name}.csv")
    (out / f"{sc.name}.json").write_text(scenario_manifest([sc]) + "\n", encoding="utf-8")
    print(out / f"{sc.name}.csv")
    return 0


def cmd_train(args) -> int:
    data = load_dataset(args.data)
    model_cfg: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        model_cfg = raw.get("model", raw) if isinstance(raw, dict) else {}
    seed = args.seed if args.seed is not None else 0
    cfg = ForestConfig.from_dict(dict(model_cfg, seed=seed))
    train_idx, test_idx = stratified_split(data.labels, args.split or 0.7, derive_seed(seed, SPLIT_STREAM, 0))
    train, test = data.subset(train_idx), data.subset(test_idx)
    model = fit_forest(train, cfg, n_jobs=args.workers or 1)
    counts = train.class_counts()
    minority = int(min((c for c in range(data.n_classes) if counts[c] > 0), key=lambda c: counts[c]))
    pred, proba = model.predict(test)
    score = proba[:, minority] if data.n_classes == 2 else None
    rep = evaluate(test.labels, pred, data.n_classes, minority, score)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model.json")
    payload = {
        "report": rep.to_dict(),
        "train_size": int(train_idx.size),
        "test_size": int(test_idx.size),
        "label_names": list(data.label_names),
        "warnings": model.metadata.get("warnings", []),
    }
    (out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps(rep.scalars(), sort_keys=True))
    return 0


def _print_summary(name: str, summary: dict) -> None:
    for metric, s in summary.items():
        sd = "nan" if s["sd"] is None else f"{s['sd']:.4f}"
        print(f"{name:>16s}  {metric:<18s} {s['mean']:.4f} +/- {sd}")


def cmd_cv(args) -> int:
    exp = _experiment(args)
    data = exp.load_data()
    specs = exp.model_specs()
    results = run_models(data, specs, exp.cv_config())
    payload = {"experiment": exp.to_dict(), "variants": []}
    for spec, res in zip(specs, results):
        payload["variants"].append(dict(res.to_dict(), model=spec.to_dict()))
        _print_summary(spec.name, res.summary())
    records = [r for res in results for r in res.records]
    paths = write_reports(exp.output_dir, exp.scenario_name, payload, records)
    print(paths["csv"])
    return 0


def cmd_ablate(args) -> int:
    exp = _experiment(args)
    data = exp.load_data()
    specs = ablation_specs(exp.forest_config())
    if exp.fknn is not None:
        specs.append(exp.model_specs()[-1])
    res = run_ablation(data, exp.forest_config(), exp.cv_config(), specs)
    payload = dict(res.to_dict(), experiment=exp.to_dict(), models=[s.to_dict() for s in specs])
    records = [r for v in res.results for r in v.records]
    for v in res.results:
        _print_summary(v.variant, v.summary())
    paths = write_reports(exp.output_dir, exp.scenario_name, payload, records)
    print(paths["csv"])
    return 0


def cmd_grid(args) -> int:
    exp = _experiment(args)
    if exp.grid is None:
        raise FrfacsError("experiment has no 'grid' entry")
    grid = exp.grid
    if isinstance(grid, str):
        if grid not in RECOMMENDED_GRIDS:
            raise FrfacsError(f"unknown recommended grid {grid!r}; choose from {sorted(RECOMMENDED_GRIDS)}")
        grid = RECOMMENDED_GRIDS[grid]
    data = exp.load_data()
    res = grid_search(data, GridSpec(grid), exp.cv_config(), exp.forest_config(), train_fraction=exp.split or 0.7)
    out = Path(exp.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{exp.scenario_name}_grid.json"
    path.write_text(json.dumps(dict(res.to_dict(), experiment=exp.to_dict()), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps({"best_params": res.best_params, "holdout": res.holdout}, sort_keys=True))
    print(path)
    return 0


COMMANDS = {"simulate": cmd_simulate, "train": cmd_train, "cv": cmd_cv, "ablate": cmd_ablate, "grid": cmd_grid}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (FrfacsError, ValueError, KeyError, OSError) as exc:
        print(f"frfacs {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
