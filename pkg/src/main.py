"""
Main entry point for the camb-depth toolkit.

ARCHITECTURE OVERVIEW:
======================
1. CONFIG: flags, an optional JSON config file and the environment are merged
   into one immutable RunConfig, validated before anything is built
2. DATA: samples come from a DepthSource (synthetic scenes or a dataset directory)
3. SERVICES: the training service runs the network, loss and optimizer; the
   verification service runs the finite-difference suite
4. OUTPUT: checkpoints, loss logs, metric tables and depth maps are written to disk

COMMANDS:
=========
- synth:     write a synthetic dataset directory (ppm/pfm pairs + manifest.json)
- train:     train the network, write a checkpoint and a per-step loss log
- eval:      score a checkpoint on held-out scenes or a dataset directory
- infer:     predict a depth map (.pfm) for every image of a dataset directory
- gradcheck: compare autodiff against finite differences, per operation and end to end

CONFIGURATION PRECEDENCE:
=========================
command-line flags > JSON config file (--config) > environment > defaults

ENVIRONMENT VARIABLES READ:
===========================
- CAMB_SEED: seed used when neither a flag nor the config file sets one
- LOG_LEVEL: default log level (DEBUG, INFO, WARNING, ERROR)
- GITHUB_OUTPUT: when set, gradcheck writes its action outputs there

EXIT CODES:
===========
0 success, 1 unexpected failure, 2 configuration error, 3 IO or format error,
4 numerical failure (shape, domain, contract, evaluation or gradient check)
"""

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from .interfaces.depth_source import DepthSource
from .interfaces.errors import CambError, ConfigError, NumericalError
from .models.config import AblationFlags, Command, LossConfig, ModelConfig, RunConfig, SceneSpec
from .providers.directory_dataset import MANIFEST, DirectoryDepthSource
from .providers.synthetic_scenes import SyntheticSceneSource
from .services.reporting import format_table, metric_rows, write_metrics_csv, write_metrics_json
from .services.trainer import (
    DepthTrainingService,
    TrainingResult,
    params_from_checkpoint,
    predict_depth,
    write_loss_log,
)
from .services.verification import check_names, run_gradient_suite
from .utils.checkpoint import load_checkpoint, save_checkpoint
from .utils.image_io import write_pfm, write_ppm
from .utils.logger import get_logger, set_log_level

CHECKPOINT_NAME = "model.ckpt"
LOSS_LOG_NAME = "loss_log.csv"
METRICS_CSV = "metrics.csv"
METRICS_JSON = "metrics.json"
HELD_OUT_SEED_OFFSET = 1_000_000

EXIT_CODES = {"config": 2, "io": 3, "numerical": 4}

MODEL_KEYS = ("stage_channels", "reduction", "p", "dtype")
LOSS_KEYS = ("alpha", "beta", "theta", "block_size", "depth_range", "ssim_k1", "ssim_k2")
ABLATION_KEYS = ("no_camb", "no_grad_loss", "no_diag", "no_ssim_weight", "l1_depth")
SCENE_KEYS = ("n_shapes", "depth_max")
RUN_KEYS = (
    "lr",
    "batch_size",
    "steps",
    "seed",
    "zeta",
    "eta",
    "train_count",
    "eval_count",
    "count",
    "data_root",
    "checkpoint",
    "out",
    "metric_set",
    "gt_as_pred",
    "log_every",
    "checks",
)
SETTING_KEYS = frozenset(MODEL_KEYS + LOSS_KEYS + ABLATION_KEYS + SCENE_KEYS + RUN_KEYS + ("size", "log_level"))

logger = get_logger(__name__)


def _channel_list(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _name_list(text: str) -> Tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _common_options() -> argparse.ArgumentParser:
    """Options shared by every command; defaults are None so unset flags can be told apart."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file whose keys are long flag names with underscores")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR (default: $LOG_LEVEL or INFO)")

    training = common.add_argument_group("training")
    training.add_argument("--lr", type=float, help=f"Adam learning rate (default: {RunConfig.lr})")
    training.add_argument("--batch-size", type=int, help=f"samples per step (default: {RunConfig.batch_size})")
    training.add_argument("--steps", type=int, help=f"optimizer steps (default: {RunConfig.steps})")
    training.add_argument("--seed", type=int, help=f"master seed (default: $CAMB_SEED or {RunConfig.seed})")
    training.add_argument("--zeta", type=float, help=f"vertical flip probability (default: {RunConfig.zeta})")
    training.add_argument("--eta", type=float, help=f"horizontal flip probability (default: {RunConfig.eta})")
    training.add_argument("--log-every", type=int, help=f"steps between progress lines (default: {RunConfig.log_every})")

    loss = common.add_argument_group("loss")
    loss.add_argument("--alpha", type=float, help=f"depth term weight (default: {LossConfig.alpha})")
    loss.add_argument("--beta", type=float, help=f"gradient term weight (default: {LossConfig.beta})")
    loss.add_argument("--theta", type=float, help=f"log offset of the error function (default: {LossConfig.theta})")
    loss.add_argument("--block-size", type=int, help=f"pixel block size b (default: {LossConfig.block_size})")
    loss.add_argument(
        "--depth-range", type=float, help=f"depth range L of the SSIM constants (default: --depth-max, {LossConfig.depth_range})"
    )
    loss.add_argument("--ssim-k1", type=float, help=f"SSIM constant k1 (default: {LossConfig.ssim_k1})")
    loss.add_argument("--ssim-k2", type=float, help=f"SSIM constant k2 (default: {LossConfig.ssim_k2})")

    model = common.add_argument_group("model")
    model.add_argument("--p", type=float, help=f"power-average pooling exponent (default: {ModelConfig.p})")
    model.add_argument("--reduction", type=int, help=f"CAMB reduction ratio (default: {ModelConfig.reduction})")
    model.add_argument(
        "--stage-channels",
        type=_channel_list,
        help=f"encoder widths, comma separated (default: {','.join(map(str, ModelConfig.stage_channels))})",
    )
    model.add_argument("--dtype", choices=("float32", "float64"), help=f"parameter dtype (default: {ModelConfig.dtype})")

    ablation = common.add_argument_group("ablation")
    for key, text in (
        ("no_camb", "skip connections without CAMB blocks"),
        ("no_grad_loss", "drop the gradient loss term"),
        ("no_diag", "drop the diagonal gradient direction"),
        ("no_ssim_weight", "fix the SSIM weight lambda to 1"),
        ("l1_depth", "plain L1 instead of the logarithmic depth loss"),
    ):
        ablation.add_argument(f"--{key.replace('_', '-')}", action="store_true", default=None, help=f"{text} (default: off)")

    data = common.add_argument_group("data")
    data.add_argument("--data-root", help="dataset directory of <id>.ppm + <id>.pfm pairs (default: synthetic scenes)")
    data.add_argument("--train-count", type=int, help=f"synthetic training scenes (default: {RunConfig.train_count})")
    data.add_argument("--eval-count", type=int, help=f"held-out synthetic scenes (default: {RunConfig.eval_count})")
    data.add_argument("--count", type=int, help=f"scenes written by synth (default: {RunConfig.count})")
    data.add_argument("--size", type=int, help=f"synthetic scene height and width (default: {SceneSpec.height})")
    data.add_argument("--n-shapes", type=int, help=f"rectangles per scene (default: {SceneSpec.n_shapes})")
    data.add_argument("--depth-max", type=float, help=f"background depth (default: {SceneSpec.depth_max})")

    paths = common.add_argument_group("paths and outputs")
    paths.add_argument("--checkpoint", help=f"checkpoint file (train default: <out>/{CHECKPOINT_NAME})")
    paths.add_argument("--out", help="output directory")
    paths.add_argument("--metric-set", choices=("kitti", "nyu"), help=f"metric columns (default: {RunConfig.metric_set})")
    paths.add_argument("--gt-as-pred", action="store_true", default=None, help="score ground truth against itself (default: off)")
    paths.add_argument("--checks", type=_name_list, help=f"gradcheck subset, comma separated (default: all of {','.join(check_names())})")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="camb-depth", description="Monocular depth estimation with CAMB attention.")
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = _common_options()
    for command, text in (
        (Command.SYNTH, "write a synthetic dataset directory"),
        (Command.TRAIN, "train and write a checkpoint plus loss log"),
        (Command.EVAL, "score a checkpoint and write the metric table"),
        (Command.INFER, "predict a depth map for every image of --data-root"),
        (Command.GRADCHECK, "verify gradients against finite differences"),
    ):
        subparsers.add_parser(command.value, parents=[common], help=text, description=text)
    return parser


def _read_config_file(path: str) -> Dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}", "config") from None
    except ValueError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}", "config") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object", "config")
    return data


def resolve_settings(args: argparse.Namespace, environ: Optional[Dict[str, str]] = None) -> Dict[str, Any]:
    """Merge config file, environment and flags, later sources winning."""
    environ = os.environ if environ is None else environ
    settings: Dict[str, Any] = _read_config_file(args.config) if args.config else {}

    if "seed" not in settings and environ.get("CAMB_SEED"):
        try:
            settings["seed"] = int(environ["CAMB_SEED"])
        except ValueError:
            raise ConfigError(f"CAMB_SEED must be an integer, got {environ['CAMB_SEED']!r}", "config") from None

    for key in SETTING_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value

    unknown = sorted(set(settings) - SETTING_KEYS)
    if unknown:
        raise ConfigError(f"unknown settings: {', '.join(unknown)}", "config")
    return settings


def build_run_config(command: Command, settings: Dict[str, Any]) -> RunConfig:
    def pick(keys: Sequence[str]) -> Dict[str, Any]:
        return {key: settings[key] for key in keys if key in settings}

    try:
        ablation = AblationFlags(**{key: bool(value) for key, value in pick(ABLATION_KEYS).items()})
        model_values = pick(MODEL_KEYS)
        if "stage_channels" in model_values:
            model_values["stage_channels"] = tuple(int(c) for c in model_values["stage_channels"])
        run_values = pick(RUN_KEYS)
        if "checks" in run_values:
            run_values["checks"] = tuple(run_values["checks"])
        scene = SceneSpec(seed=int(run_values.get("seed", RunConfig.seed)), **pick(SCENE_KEYS))
        if "size" in settings:
            scene = replace(scene, height=int(settings["size"]), width=int(settings["size"]))
        model = ModelConfig(**model_values, use_camb=not ablation.no_camb, initial_depth=scene.depth_max / 2)
        loss_values = pick(LOSS_KEYS)
        loss_values.setdefault("depth_range", scene.depth_max)
        return RunConfig(
            command=command, model=model, loss=LossConfig(**loss_values), ablation=ablation, scene=scene, **run_values
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid setting: {exc}", "config") from None


def _writable_dir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(f"output directory {path} is not writable")
    return path


def _training_source(config: RunConfig) -> DepthSource:
    if config.data_root:
        return DirectoryDepthSource(config.data_root)
    return SyntheticSceneSource(config.scene, config.train_count)


def _evaluation_source(config: RunConfig) -> DepthSource:
    if config.data_root:
        return DirectoryDepthSource(config.data_root)
    held_out = replace(config.scene, seed=config.scene.seed + HELD_OUT_SEED_OFFSET)
    return SyntheticSceneSource(held_out, config.eval_count)


def cmd_synth(config: RunConfig) -> List[str]:
    """Write ``count`` scenes as ppm/pfm pairs plus a manifest; returns the ids."""
    out = _writable_dir(Path(config.out))
    source = SyntheticSceneSource(config.scene, config.count)

    logger.info(f"Phase 2: Writing {config.count} scenes to {out}")
    for sample in source:
        write_ppm(out / f"{sample.id}.ppm", sample.image)
        write_pfm(out / f"{sample.id}.pfm", sample.depth)

    manifest = {
        "ids": source.ids,
        "count": config.count,
        "scene": {
            "seed": config.scene.seed,
            "height": config.scene.height,
            "width": config.scene.width,
            "n_shapes": config.scene.n_shapes,
            "depth_max": config.scene.depth_max,
        },
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    logger.info(f"Wrote {len(source.ids)} samples and {MANIFEST}")
    return source.ids


def cmd_train(config: RunConfig) -> TrainingResult:
    """Train, then write the checkpoint and the per-step loss log."""
    out = Path(config.out) if config.out else None
    checkpoint_path = Path(config.checkpoint) if config.checkpoint else out / CHECKPOINT_NAME
    log_path = out / LOSS_LOG_NAME if out else checkpoint_path.with_suffix(".csv")
    _writable_dir(checkpoint_path.parent)
    _writable_dir(log_path.parent)

    logger.info("Phase 2: Preparing training data")
    source = _training_source(config)
    logger.info(f"{len(source)} training samples, ablation: {config.ablation.describe()}")

    logger.info(f"Phase 3: Training for {config.steps} steps")
    result = DepthTrainingService(config).train(source)

    logger.info("Phase 4: Writing checkpoint and loss log")
    save_checkpoint(result.params, result.adam_state, checkpoint_path)
    write_loss_log(log_path, result.history)
    logger.info(f"Checkpoint: {checkpoint_path} ({result.params.count()} parameters), log: {log_path}")
    return result


def cmd_eval(config: RunConfig) -> List[Tuple[str, List[float]]]:
    """Print (and with --out, write) per-image rows plus the pooled and image-mean rows."""
    out = _writable_dir(Path(config.out)) if config.out else None

    logger.info("Phase 2: Loading model and evaluation data")
    params = None
    if not config.gt_as_pred:
        params = params_from_checkpoint(load_checkpoint(config.checkpoint))
    source = _evaluation_source(config)

    logger.info(f"Phase 3: Evaluating {len(source)} samples")
    ids, reports = DepthTrainingService(config).evaluate(params, source)
    rows = metric_rows(ids, reports, config.metric_set)
    print(format_table(rows, config.metric_set))

    if out:
        logger.info("Phase 4: Writing metric tables")
        write_metrics_csv(out / METRICS_CSV, rows, config.metric_set)
        write_metrics_json(out / METRICS_JSON, ids, reports, config.metric_set)
    return rows


def cmd_infer(config: RunConfig) -> List[Path]:
    """One predicted depth map per input image, named after the image id."""
    if Path(config.out).resolve() == Path(config.data_root).resolve():
        raise ConfigError("--out must differ from --data-root, predictions would replace ground truth", "config")
    out = _writable_dir(Path(config.out))

    logger.info("Phase 2: Loading model and input images")
    params = params_from_checkpoint(load_checkpoint(config.checkpoint))
    source = DirectoryDepthSource(config.data_root)

    logger.info(f"Phase 3: Predicting {len(source)} depth maps")
    written = []
    for index, sample_id in enumerate(source.ids):
        path = out / f"{sample_id}.pfm"
        write_pfm(path, predict_depth(params, source.image(index)))
        written.append(path)
    logger.info(f"Wrote {len(written)} depth maps to {out}")
    return written


def _write_action_outputs(outputs: Dict[str, str]) -> None:
    """GitHub Actions outputs via $GITHUB_OUTPUT, stdout for local runs."""
    github_output = os.getenv("GITHUB_OUTPUT")
    if github_output:
        with open(github_output, "a") as handle:
            for key, value in outputs.items():
                if "\n" in value:
                    handle.write(f"{key}<<CAMB_EOF\n{value}\nCAMB_EOF\n")
                else:
                    handle.write(f"{key}={value}\n")
    else:
        for key, value in outputs.items():
            print(f"{key}={value}")


def cmd_gradcheck(config: RunConfig) -> List[str]:
    """Run the finite-difference suite; any failing check is a numerical error."""
    logger.info("Phase 2: Running gradient checks")
    results = run_gradient_suite(config.seed, config.checks or None)
    report = [result.describe() for result in results]
    failed = [result for result in results if not result.passed]
    _write_action_outputs({"passed": "false" if failed else "true", "report": "\n".join(report)})
    if failed:
        detail = "; ".join(f"{r.name} ({', '.join(r.failing)})" for r in failed)
        raise NumericalError(f"{len(failed)} of {len(results)} gradient checks failed: {detail}", "gradcheck")
    logger.info(f"All {len(results)} gradient checks passed")
    return report


COMMANDS: Dict[Command, Callable[[RunConfig], Any]] = {
    Command.SYNTH: cmd_synth,
    Command.TRAIN: cmd_train,
    Command.EVAL: cmd_eval,
    Command.INFER: cmd_infer,
    Command.GRADCHECK: cmd_gradcheck,
}


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, CambError):
        return EXIT_CODES.get(error.exit_class, 1)
    if isinstance(error, OSError):
        return EXIT_CODES["io"]
    return 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse, validate, dispatch; returns the process exit code.

    Configuration problems are reported before any model is built.
    """
    args = build_parser().parse_args(argv)
    if args.log_level:
        set_log_level(args.log_level)

    try:
        logger.info(f"Phase 1: Resolving configuration for '{args.command}'")
        settings = resolve_settings(args)
        if "log_level" in settings:
            set_log_level(str(settings.pop("log_level")))
        config = build_run_config(Command(args.command), settings)
        config.validate()
        logger.debug(f"Run configuration: {config}")

        COMMANDS[config.command](config)
        logger.info(f"Command '{args.command}' completed")
        return 0

    except (CambError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return exit_code_for(e)
    except Exception as e:
        logger.exception(f"{args.command} failed unexpectedly: {type(e).__name__}: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
