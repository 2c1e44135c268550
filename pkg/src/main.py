import argparse
import logging
import sys

from .config import Config
from .errors import ConfigError, FeelSimError, InfeasibleProblemError
from .experiment.config import SWEEP_AXES, dump_config, load_config, preset_config
from .experiment.runner import run, sweep
from .feedback.recorder import RunRecorder

# Process-level settings a CLI flag may override on the Config instance
CONFIG_OVERRIDES = ("log_level", "database_url", "output_dir", "workers", "preset")


def parse_sweep(text: str) -> tuple[str, list[float]]:
    """'AXIS=v1,v2,...' -> (axis, values)."""
    axis, sep, raw = text.partition("=")
    axis = axis.strip()
    if not sep or axis not in SWEEP_AXES:
        raise ConfigError(f"expected AXIS=v1,v2,... with AXIS in {', '.join(SWEEP_AXES)}, got {text!r}",
                          field="--sweep")
    items = [item.strip() for item in raw.split(",") if item.strip()]
    try:
        return axis, [float(item) for item in items]
    except ValueError as exc:
        raise ConfigError(f"invalid sweep value in {raw!r}", field="--sweep") from exc


def experiment_overrides(args) -> dict[str, str]:
    """Command-line flags that map onto experiment config keys."""
    overrides = {}
    if getattr(args, "scheme", None):
        overrides["run.schemes"] = args.scheme
    if getattr(args, "seed", None):
        overrides["run.seeds"] = args.seed
    if getattr(args, "rounds", None) is not None:
        overrides["train.rounds"] = str(args.rounds)
    if getattr(args, "out", None):
        overrides["run.output"] = args.out
    if getattr(args, "workers", None) is not None:
        overrides["run.workers"] = str(args.workers)
    return overrides


def main(cfg_override=None) -> int:
    cfg = Config()

    # Override config with CLI args if provided
    if cfg_override:
        for key in CONFIG_OVERRIDES:
            value = getattr(cfg_override, key, None)
            if value is None:
                continue
            if key == "log_level":
                value = getattr(logging, str(value).upper(), logging.INFO)
            setattr(cfg, key, value)

    # Configure logging
    logging.basicConfig(level=cfg.log_level, format='%(asctime)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s')

    dump_name = getattr(cfg_override, "dump_preset", None)
    try:
        if dump_name:
            print(dump_config(preset_config(dump_name)))
            return 0

        experiment = load_config(
            getattr(cfg_override, "config", None),
            preset=cfg.preset,
            overrides=experiment_overrides(cfg_override) if cfg_override else None,
            defaults={"run.workers": cfg.workers},
        )
        output_dir = experiment.run.output or cfg.output_dir
        recorder = RunRecorder(output_dir, database_url=cfg.database_url)
        trace = bool(getattr(cfg_override, "trace", False))
        try:
            sweep_arg = getattr(cfg_override, "sweep", None)
            if sweep_arg:
                axis, values = parse_sweep(sweep_arg)
                _, status = sweep(experiment, axis, values, recorder, trace=trace)
            else:
                status = run(experiment, recorder, trace=trace).exit_status
        finally:
            recorder.close()
    except InfeasibleProblemError as exc:
        logging.error(f"No feasible decision (binding constraint: {exc.binding_constraint}): {exc}")
        return 2
    except FeelSimError as exc:
        logging.error(f"Experiment failed: {exc}")
        return 1

    if status:
        logging.warning(f"Finished with status {status}; outputs in {output_dir}")
    else:
        logging.info(f"All runs feasible; outputs in {output_dir}")
    return status


def main_cli():
    parser = argparse.ArgumentParser(description="Federated edge learning pruning simulator and optimizer")
    parser.add_argument("--config", type=str, help="Experiment config file (section.key = value lines).")
    parser.add_argument("--preset", type=str, help="Named preset the config file is layered on (default: desk).")
    parser.add_argument("--scheme", type=str, help="Scheme name, or a comma-separated list of schemes.")
    parser.add_argument("--seed", type=str, help="Seed, or a comma-separated list of seeds.")
    parser.add_argument("--rounds", type=int, help="Number of training rounds.")
    parser.add_argument("--out", type=str, help="Output directory for CSV files.")
    parser.add_argument("--sweep", type=str, help="Sweep one axis: AXIS=v1,v2,... with AXIS in sigma, E0, T0.")
    parser.add_argument("--dump-preset", dest="dump_preset", type=str, help="Print a preset in config grammar and exit.")
    parser.add_argument("--database-url", dest="database_url", type=str, help="SQLAlchemy URL for run persistence.")
    parser.add_argument("--trace", action="store_true", help="Write the optimizer trace CSV for every run.")
    parser.add_argument("--workers", type=int, help="Parallel runs (overrides FEEL_WORKERS).")
    parser.add_argument("--log_level", "--log-level", dest="log_level", type=str,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"], help="Logging level.")
    args = parser.parse_args()
    sys.exit(main(cfg_override=args))


if __name__ == "__main__":
    main_cli()
