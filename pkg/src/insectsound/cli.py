"""Command-line interface.

Subcommands: synth-fixture, segment, augment, extract, evaluate, project.
Every command validates its configuration before doing any work, locks its
output directory against concurrent runs, and writes a config-echo
provenance block next to each output. Outputs are byte-identical across
reruns with the same inputs and seed.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .augmentation import augment, get_preset
from .config import RunConfig
from .evaluation import run_experiment, write_report_csv, write_report_json
from .features import MfccConfig, build_dataset
from .manifest import load_manifest
from .projection import TsneParams, embedding_report, tsne, write_embedding_csv
from .segmentation import duration_stats, min_segment_duration
from .store import InstanceStore, build_store, load_store, save_store
from .synth import generate_fixture

LOCK_NAME = ".insectsound.lock"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_COMPLETED_WITH_FAILURES = 3


@contextlib.contextmanager
def output_lock(out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise RuntimeError(
            f"output directory {out_dir} is in use (lock file {lock} exists; "
            "remove it if the previous run crashed)"
        ) from None
    os.close(fd)
    try:
        yield
    finally:
        lock.unlink(missing_ok=True)


def _write_meta(path: Path, echo: dict, command: str) -> None:
    meta = dict(echo)
    meta["command"] = command
    Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=1))


def _config_from_args(args) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {}
    for name in ("w_seconds", "sample_rate", "balanced_i", "top_k", "models",
                 "augmentation", "aggregation", "seed"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        config = dataclasses.replace(config, **overrides)
    config.validate()
    return config


def _parse_top_k(values) -> list:
    return [v if v == "full" else int(v) for v in values]


def cmd_synth_fixture(args) -> int:
    out = Path(args.out)
    with output_lock(out):
        manifest = generate_fixture(out, seed=args.seed if args.seed is not None else 0)
    print(f"fixture written: {manifest}")
    return EXIT_OK


def cmd_segment(args) -> int:
    config = _config_from_args(args)
    manifest = load_manifest(args.manifest)
    out = Path(args.out)
    with output_lock(out):
        store = build_store(manifest, config.w_seconds, config.sample_rate)
        save_store(store, out, config_echo=config.echo())
        stats = duration_stats(store.spans)
        report = {
            "config_echo": config.echo(),
            "window_samples": store.window_samples,
            "min_segment_duration_s": min_segment_duration(store.spans),
            "discarded_segments": store.discarded_segments,
            "instances": len(store.instances),
            "per_class": {
                label: {
                    "count": s.count,
                    "min_s": s.min_s,
                    "q1_s": s.q1_s,
                    "median_s": s.median_s,
                    "q3_s": s.q3_s,
                    "max_s": s.max_s,
                    "outliers": s.outliers,
                }
                for label, s in stats.items()
            },
        }
        (out / "duration_stats.json").write_text(json.dumps(report, indent=1))
    print(
        f"instance store written: {out} ({len(store.instances)} instances, "
        f"{store.discarded_segments} segments discarded as shorter than one window)"
    )
    return EXIT_OK


def cmd_augment(args) -> int:
    config = _config_from_args(args)
    spec = get_preset(config.augmentation)
    if spec is None:
        raise ValueError("augment command needs --augmentation wide or narrow, not none")
    store = load_store(args.store)
    if any(inst.augmentation is not None for inst in store.instances):
        raise ValueError(f"store {args.store} already contains augmented instances")
    out = Path(args.out)
    with output_lock(out):
        expanded = []
        for inst in store.instances:
            expanded.extend(augment(inst, spec, store.sample_rate))
        out_store = InstanceStore(
            instances=expanded,
            clip_info=store.clip_info,
            sample_rate=store.sample_rate,
            window_samples=store.window_samples,
            w_seconds=store.w_seconds,
            discarded_segments=store.discarded_segments,
        )
        save_store(out_store, out, config_echo=config.echo())
    print(
        f"augmented store written: {out} "
        f"({len(store.instances)} -> {len(expanded)} instances, factor {spec.expansion_factor})"
    )
    return EXIT_OK


def cmd_extract(args) -> int:
    config = _config_from_args(args)
    store = load_store(args.store)
    out = Path(args.out)
    with output_lock(out.parent if out.suffix else out):
        dataset = build_dataset(
            store.instances, MfccConfig(aggregation=config.aggregation), store.sample_rate
        )
        dataset.to_csv(out)
        _write_meta(out, config.echo(), "extract")
    print(f"dataset written: {out} ({dataset.n_rows} rows x {dataset.width} features)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = _config_from_args(args)
    store = load_store(args.store)
    out = Path(args.out)
    with output_lock(out):
        report = run_experiment(store, config)
        csv_path = out / "report.csv"
        write_report_csv(report, csv_path)
        _write_meta(csv_path, config.echo(), "evaluate")
        write_report_json(report, out / "report.json")
    ok = len(report.cells) - report.n_failed
    print(f"evaluation grid: {ok} cells ok, {report.n_failed} failed -> {out}")
    for avg in report.averages:
        print(
            f"  {avg['model']} k={avg['k']} i={avg['i']} "
            f"augmented={avg['augmented']}: mean accuracy "
            f"{avg['mean_accuracy']:.4f} over {avg['n_folds']} folds"
        )
    return EXIT_COMPLETED_WITH_FAILURES if report.n_failed else EXIT_OK


def cmd_project(args) -> int:
    config = _config_from_args(args)
    store = load_store(args.store)
    if any(inst.augmentation is not None for inst in store.instances):
        raise ValueError("project expects an unaugmented store; use --augmented instead")
    out = Path(args.out)
    mfcc_config = MfccConfig(aggregation=config.aggregation)
    params = TsneParams(seed=config.seed)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 777]))

    def subsample(items, limit):
        if len(items) <= limit:
            return list(items)
        keep = sorted(rng.choice(len(items), size=limit, replace=False))
        return [items[p] for p in keep]

    with output_lock(out):
        originals = subsample(store.instances, args.max_points)
        dataset = build_dataset(originals, mfcc_config, store.sample_rate)
        coords, _ = tsne(dataset.features, params)
        for group in ("class", "clip"):
            rows = embedding_report(coords, dataset.labels, dataset.clip_ids, group_by=group)
            path = out / f"embedding_by_{group}.csv"
            write_embedding_csv(rows, path)
            _write_meta(path, config.echo(), "project")
        if args.augmented:
            spec = get_preset(config.augmentation)
            if spec is None:
                raise ValueError("--augmented needs an augmentation preset, not 'none'")
            expanded = []
            for inst in originals:
                expanded.extend(augment(inst, spec, store.sample_rate))
            expanded = subsample(expanded, args.max_points)
            aug_ds = build_dataset(expanded, mfcc_config, store.sample_rate)
            coords_aug, _ = tsne(aug_ds.features, params)
            rows = embedding_report(coords_aug, aug_ds.labels, aug_ds.clip_ids, group_by="class")
            path = out / "embedding_augmented.csv"
            write_embedding_csv(rows, path)
            _write_meta(path, config.echo(), "project")
    print(f"embeddings written to {out}")
    return EXIT_OK


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run-config file; flags override its fields")
    p.add_argument("--w-seconds", dest="w_seconds", type=float, default=None)
    p.add_argument("--sample-rate", dest="sample_rate", type=int, default=None)
    p.add_argument("--balanced-i", dest="balanced_i", type=int, nargs="+", default=None)
    p.add_argument("--top-k", dest="top_k", nargs="+", default=None,
                   help="feature counts; integers or 'full'")
    p.add_argument("--models", nargs="+", default=None)
    p.add_argument("--augmentation", choices=["wide", "narrow", "none"], default=None)
    p.add_argument("--aggregation", choices=["mean", "flatten"], default=None)
    p.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="insectsound",
        description="Insect sound classification pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-fixture", help="generate the synthetic 4-class fixture")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth_fixture)

    p = sub.add_parser("segment", help="window manifest audio into an instance store")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("augment", help="write an augmented copy of an instance store")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("extract", help="extract the feature dataset CSV from a store")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("evaluate", help="run the leave-one-clip-out experiment grid")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("project", help="t-SNE plot-data CSVs from a store")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--augmented", action="store_true",
                   help="also embed the augmented training view")
    p.add_argument("--max-points", type=int, default=1000,
                   help="subsample cap before the O(N^2) embedding")
    _add_config_flags(p)
    p.set_defaults(func=cmd_project)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "top_k", None) is not None:
        args.top_k = _parse_top_k(args.top_k)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
