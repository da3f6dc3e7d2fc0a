"""Command line entry points.

Exit codes: 0 success, 1 usage/config errors, 2 numeric failures during a
run.  Every subcommand takes a config file; commands that resume from a
checkpoint rebuild the frozen world from the config (same seed, same bytes)
and then overwrite the trainable blocks.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .checkpoint import load_checkpoint
from .config import ExperimentConfig, load_config
from .errors import ConfigError, DataError, NumericError, SamplingError, ShapeError, TapeError
from .metrics import harmonic_mean
from .profiling import profile_deltas, write_embedding_dump

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit2(f"error: {message}")


class SystemExit2(Exception):
    pass


def _build_parser() -> _Parser:
    parser = _Parser(prog="deltaprompt",
                     description="Conditional prompt learning with delta-token decoupling")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the training protocol")
    p_train.add_argument("config", help="experiment config file")
    p_train.add_argument("--out", help="output directory (overrides config)")
    p_train.add_argument("--seed", type=int, help="master seed (overrides config)")
    p_train.add_argument("--no-figures", action="store_true", help="skip figure rendering")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on one split")
    p_eval.add_argument("checkpoint")
    p_eval.add_argument("config")
    p_eval.add_argument("--split", choices=("base", "new"), required=True)

    p_prof = sub.add_parser("profile", help="silhouette-profile a checkpoint's delta tokens")
    p_prof.add_argument("checkpoint")
    p_prof.add_argument("config")
    p_prof.add_argument("--out", help="output directory (overrides config)")
    p_prof.add_argument("--no-figures", action="store_true", help="skip figure rendering")

    p_exp = sub.add_parser("export-embeddings", help="dump delta-token embeddings to CSV")
    p_exp.add_argument("checkpoint")
    p_exp.add_argument("config")
    p_exp.add_argument("out", help="destination CSV path")

    p_sweep = sub.add_parser("sweep", help="serial grid over training options")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--grid", action="append", default=[],
                         metavar="KEY=V1,V2,...",
                         help="grid axis; keys: alpha, constraint_mode, weighted_sampling")
    p_sweep.add_argument("--out", help="output directory (overrides config)")
    return parser


def _load(config_path: str, seed: int | None = None, out: str | None = None) -> ExperimentConfig:
    config = load_config(config_path)
    if seed is not None:
        config.seed = seed
    if out is not None:
        config.out_dir = out
    return config.validate()


def _restore(checkpoint_path: str, config: ExperimentConfig):
    from .train import load_model

    if not Path(checkpoint_path).is_file():
        raise ConfigError(f"checkpoint not found: {checkpoint_path}")
    return load_model(config, load_checkpoint(checkpoint_path))


def _cmd_train(args) -> int:
    from .figures import render_training_figures
    from .train import train

    config = _load(args.config, seed=args.seed, out=args.out)
    result = train(config, out_dir=config.out_dir)
    if not args.no_figures:
        render_training_figures(result.metrics, config.out_dir)
    m = result.metrics
    print(f"seed {m.seed}: base {m.base_accuracy:.4f}  new {m.new_accuracy:.4f}  "
          f"harmonic {m.harmonic:.4f}  ({m.wall_clock_seconds:.1f}s)")
    print(f"artifacts in {config.out_dir}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    from .train import evaluate

    config = _load(args.config)
    ds, _, model = _restore(args.checkpoint, config)
    accuracy = evaluate(model, ds, args.split)
    print(f"{args.split} accuracy: {accuracy:.6f}")
    return EXIT_OK


def _profile_checkpoint(config: ExperimentConfig, checkpoint: str):
    ds, _, model = _restore(checkpoint, config)
    report, points = profile_deltas(
        model, ds, ds.base_classes, config.profile_samples, config.epochs, config.seed
    )
    return report, points


def _cmd_profile(args) -> int:
    from .figures import render_profile_figures

    config = _load(args.config, out=args.out)
    report, points = _profile_checkpoint(config, args.checkpoint)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "overall_silhouette": report.overall,
        "per_augmentation": {a.value: s for a, s in report.per_label.items()},
        "counts": {a.value: c for a, c in report.counts.items()},
        "n_images": points.n_images,
        "sample_request_capped": points.capped,
    }
    report_path = out / "silhouette_report.json"
    with open(report_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_embedding_dump(out / "delta_embeddings.csv", points, config.epochs)
    if not args.no_figures:
        render_profile_figures(report, points, out)
    print(f"overall silhouette {report.overall:+.4f} over {points.n_images} images")
    print(f"report in {out}")
    return EXIT_OK


def _cmd_export(args) -> int:
    config = _load(args.config)
    _, points = _profile_checkpoint(config, args.checkpoint)
    dest = Path(args.out)
    if dest.parent and not dest.parent.exists():
        dest.parent.mkdir(parents=True, exist_ok=True)
    write_embedding_dump(dest, points, config.epochs)
    print(f"wrote {len(points.augmentations)} rows to {dest}")
    return EXIT_OK


_GRID_KEYS = ("alpha", "constraint_mode", "weighted_sampling")


def _parse_grid(specs: list[str]) -> list[tuple[str, list[str]]]:
    axes = []
    for spec in specs:
        key, _, raw = spec.partition("=")
        key = key.strip()
        if not raw or key not in _GRID_KEYS:
            raise ConfigError(
                f"bad grid axis {spec!r}; expected KEY=V1,V2 with KEY in {_GRID_KEYS}"
            )
        axes.append((key, [v.strip() for v in raw.split(",") if v.strip()]))
    if not axes:
        raise ConfigError("sweep needs at least one --grid axis")
    return axes


def _cmd_sweep(args) -> int:
    import itertools
    from dataclasses import replace

    from .train import train

    config = _load(args.config, out=args.out)
    axes = _parse_grid(args.grid)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for combo in itertools.product(*(values for _, values in axes)):
        overrides = {}
        for (key, _), value in zip(axes, combo):
            if key == "alpha":
                overrides[key] = float(value)
            elif key == "weighted_sampling":
                overrides[key] = value.lower() in ("on", "true", "yes", "1")
            else:
                overrides[key] = value
        run_config = replace(config, **overrides).validate()
        tag = "_".join(f"{k}-{v}" for (k, _), v in zip(axes, combo))
        result = train(run_config, out_dir=out / tag)
        m = result.metrics
        rows.append([tag] + [str(v) for v in combo]
                    + [repr(m.base_accuracy), repr(m.new_accuracy), repr(m.harmonic),
                       repr(m.final_silhouette())])
        print(f"{tag}: base {m.base_accuracy:.4f} new {m.new_accuracy:.4f} "
              f"harmonic {m.harmonic:.4f}")
    table = out / "sweep.csv"
    with open(table, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run"] + [key for key, _ in axes]
                        + ["base_acc", "new_acc", "harmonic_mean", "final_silhouette"])
        writer.writerows(rows)
    print(f"sweep table in {table}")
    return EXIT_OK


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "profile": _cmd_profile,
    "export-embeddings": _cmd_export,
    "sweep": _cmd_sweep,
}


def run_cli(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit2 as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, DataError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, ShapeError, TapeError, SamplingError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    raise SystemExit(run_cli())


if __name__ == "__main__":
    main()
