"""Command-line orchestrator - wires data, training, evaluation and scoring."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError

from src.config.constants import DEFAULT_COUNTS, DEFAULT_IMAGE_SIZE, DEFAULT_VAL_COUNTS, DEFAULT_VOCAB
from src.data.dataset import Dataset
from src.data.synthetic import generate_pretraining_corpus, generate_synthetic
from src.data.tokenizer import extend_vocab, tokenize
from src.evaluation.ablation import ablate
from src.evaluation.evaluator import evaluate, threshold_for
from src.evaluation.metrics import format_table_row
from src.models.enums import Category, Precision
from src.models.exceptions import CladError, UsageError
from src.models.schemas import Config, ScoreResult
from src.monitoring.logger import setup_logging
from src.scoring.anomaly import score_sample
from src.scoring.grad_cam import heatmap_to_pgm, localize
from src.storage.dataset_store import load_dataset, write_dataset
from src.storage.pnm import read_pnm
from src.storage.report_store import ReportStorage
from src.training.checkpoint import load_checkpoint, save_checkpoint
from src.training.trainer import fit

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

# Flag name -> Config field
CONFIG_FLAGS = {
    "seed": "seed",
    "epochs_pretrain": "epochs_pretrain",
    "epochs_finetune": "epochs_finetune",
    "lr": "lr",
    "batch_size": "batch_size",
    "precision": "precision",
}


def emit(payload: Dict[str, Any]) -> None:
    """Print one compact JSON line on stdout."""
    print(json.dumps(payload, separators=(",", ":")), flush=True)


def _int_list(expected: Optional[int] = None):
    def parse(text: str) -> List[int]:
        try:
            values = [int(part) for part in text.split(",") if part.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")
        if expected is not None and len(values) != expected:
            raise argparse.ArgumentTypeError(f"expected {expected} comma-separated integers, got '{text}'")
        if any(v < 0 for v in values):
            raise argparse.ArgumentTypeError(f"values must be non-negative, got '{text}'")
        return values
    return parse


class CladOrchestrator:
    """Runs each CLI subcommand against the library."""

    # ------------------------------------------------------------------
    # Configuration
    # ------------------------------------------------------------------

    def build_config(
        self,
        config_path: Optional[Path],
        overrides: Dict[str, Any],
        datasets: Sequence[Dataset] = ()
    ) -> Config:
        """Config from flags > config file > defaults.

        Image size and channels come from the target dataset; the vocabulary
        is extended with every dataset descriptor.

        Args:
            config_path: Optional JSON config file
            overrides: Field values given as flags (None values are ignored)
            datasets: Target dataset first, then pretraining datasets

        Returns:
            Validated Config
        """
        values: Dict[str, Any] = {}
        if config_path is not None:
            try:
                values = json.loads(Path(config_path).read_text(encoding="utf-8"))
            except json.JSONDecodeError as e:
                raise UsageError(f"{config_path}: invalid JSON config ({e})") from e
            if not isinstance(values, dict):
                raise UsageError(f"{config_path}: config must be a JSON object")

        for field, value in overrides.items():
            if value is not None:
                values[field] = value
        if datasets:
            values["image_size"] = datasets[0].image_size
            values["channels"] = datasets[0].channels
            vocab = values.get("vocab") or list(DEFAULT_VOCAB)
            values["vocab"] = extend_vocab(vocab, [d.descriptor for d in datasets])

        try:
            return Config.model_validate(values)
        except ValidationError as e:
            raise UsageError(f"invalid configuration: {e.errors()[0]['loc']}: {e.errors()[0]['msg']}") from e

    @staticmethod
    def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
        return {field: getattr(args, flag, None) for flag, field in CONFIG_FLAGS.items()}

    # ------------------------------------------------------------------
    # Subcommands
    # ------------------------------------------------------------------

    def gen_data(self, args: argparse.Namespace) -> int:
        dataset = generate_synthetic(
            seed=args.seed,
            category=args.category,
            counts=args.counts,
            image_size=args.size,
            val_counts=args.val_counts,
            channels=args.channels,
        )
        root = write_dataset(dataset, args.out)
        emit({
            "out": str(root),
            "category": dataset.category,
            **{split: len(samples) for split, samples in dataset.splits()},
        })
        return EXIT_OK

    def train(self, args: argparse.Namespace) -> int:
        data = load_dataset(args.data)
        pretrain = [load_dataset(path) for path in args.pretrain or []]
        config = self.build_config(args.config, self._overrides(args), [data, *pretrain])

        if not pretrain and config.epochs_pretrain > 0:
            logger.info(f"No --pretrain given; generating the other synthetic categories (seed={config.seed})")
            pretrain = generate_pretraining_corpus(
                config.seed,
                data.category,
                counts=(len(data.train_normal), 0, 0),
                image_size=data.image_size,
                channels=data.channels,
            )

        state = fit(config, pretrain, data)
        state.threshold = threshold_for(state.params, data.with_vocab(config.vocab), config)
        path = save_checkpoint(state, args.out)
        final = state.history[-1].loss if state.history else None
        emit({
            "checkpoint": str(path),
            "epochs": state.epoch,
            "steps": state.step,
            "final_loss": final.total if final else None,
            "threshold": state.threshold,
        })
        return EXIT_OK

    def eval(self, args: argparse.Namespace) -> int:
        data = load_dataset(args.data)
        storage = ReportStorage(args.report)

        if args.ablate:
            if args.ckpt:
                config = load_checkpoint(args.ckpt).config
            else:
                config = self.build_config(args.config, self._overrides(args), [data])
            result = ablate(config, data, args.seeds)
            storage.write_ablation(result)
            for name, s in result.variants.items():
                row = format_table_row(name, s.image_auc_mean, s.image_auc_std, s.pixel_auc_mean, s.pixel_auc_std)
                logger.info(row)
            emit({
                name: {"image_auc_mean": s.image_auc_mean, "image_auc_std": s.image_auc_std}
                for name, s in result.variants.items()
            })
            return EXIT_OK

        if not args.ckpt:
            raise UsageError("eval needs --ckpt (or --ablate)")
        state = load_checkpoint(args.ckpt)
        report = evaluate(state.params, data, state.config, threshold=state.threshold)
        storage.write_report(report)
        emit({
            "image_auc": report.image_auc,
            "pixel_auc": report.pixel_auc,
            "iou": report.iou,
            "threshold": report.threshold,
        })
        return EXIT_OK

    def _score_inputs(self, args: argparse.Namespace):
        state = load_checkpoint(args.ckpt)
        image = read_pnm(args.image)
        tokens = tokenize(args.text, state.config.vocab)
        threshold = args.threshold if args.threshold is not None else state.threshold
        return state, image, tokens, threshold

    @staticmethod
    def _result_payload(result: ScoreResult) -> Dict[str, Any]:
        return result.model_dump(mode="json")

    def score(self, args: argparse.Namespace) -> int:
        state, image, tokens, threshold = self._score_inputs(args)
        result = score_sample(state.params, image, tokens, state.config, threshold)
        emit(self._result_payload(result))
        return EXIT_OK

    def localize(self, args: argparse.Namespace) -> int:
        state, image, tokens, threshold = self._score_inputs(args)
        result, heatmap, pixel_scores = localize(state.params, image, tokens, state.config, threshold)
        heatmap_to_pgm(pixel_scores, args.out)
        logger.info(f"Heatmap from a {heatmap.source_resolution} activation map written to {args.out}")
        emit(self._result_payload(result))
        return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subparser per command."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--log-level",
        type=str,
        default=argparse.SUPPRESS,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level (default: CLAD_LOG_LEVEL or INFO)"
    )

    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--config", type=Path, default=None, help="JSON config file")
    training.add_argument("--seed", type=int, default=None, help="Override config seed")
    training.add_argument("--epochs-pretrain", type=int, default=None, help="Override pretraining epochs")
    training.add_argument("--epochs-finetune", type=int, default=None, help="Override fine-tuning epochs")
    training.add_argument("--lr", type=float, default=None, help="Override learning rate")
    training.add_argument("--batch-size", type=int, default=None, help="Override batch size")
    training.add_argument(
        "--precision",
        type=str,
        default=None,
        choices=[p.value for p in Precision],
        help="Override floating point precision"
    )

    parser = argparse.ArgumentParser(
        prog="clad",
        description="Contrastive vision-language anomaly detection",
        parents=[common],
    )
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-data", parents=[common], help="Generate a synthetic dataset")
    gen.add_argument("--seed", type=int, default=42, help="Generator seed")
    gen.add_argument("--category", required=True, choices=[c.value for c in Category], help="Texture category")
    gen.add_argument("--out", type=Path, required=True, help="Dataset root to write")
    gen.add_argument("--counts", type=_int_list(3), default=list(DEFAULT_COUNTS),
                     help="train,test_normal,test_anomalous counts")
    gen.add_argument("--val-counts", type=_int_list(2), default=list(DEFAULT_VAL_COUNTS),
                     help="val_normal,val_anomalous counts")
    gen.add_argument("--size", type=int, default=DEFAULT_IMAGE_SIZE, help="Image side length")
    gen.add_argument("--channels", type=int, default=1, choices=[1, 3], help="1 (PGM) or 3 (PPM)")

    train = commands.add_parser("train", parents=[common, training], help="Train and write a checkpoint")
    train.add_argument("--data", type=Path, required=True, help="Target dataset root")
    train.add_argument("--out", type=Path, required=True, help="Checkpoint path")
    train.add_argument("--pretrain", type=Path, nargs="+", action="extend", default=None,
                       help="Pretraining dataset roots (default: generated synthetic categories)")

    ev = commands.add_parser("eval", parents=[common, training], help="Evaluate a checkpoint or run the ablation")
    ev.add_argument("--data", type=Path, required=True, help="Dataset root")
    ev.add_argument("--ckpt", type=Path, default=None, help="Checkpoint path")
    ev.add_argument("--report", type=Path, required=True, help="Report JSON path (CSV written alongside)")
    ev.add_argument("--ablate", action="store_true", help="Run the four-variant ablation")
    ev.add_argument("--seeds", type=_int_list(), default=[0, 1, 2, 3, 4], help="Ablation seeds")

    for name, help_text in (("score", "Score one image"), ("localize", "Score and localize one image")):
        sub = commands.add_parser(name, parents=[common], help=help_text)
        sub.add_argument("--ckpt", type=Path, required=True, help="Checkpoint path")
        sub.add_argument("--image", type=Path, required=True, help="PGM/PPM image")
        sub.add_argument("--text", type=str, required=True, help="Object description")
        sub.add_argument("--threshold", type=float, default=None, help="Override the checkpoint threshold")
        if name == "localize":
            sub.add_argument("--out", type=Path, required=True, help="Heatmap PGM path")

    return parser


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one subcommand and map errors to exit codes.

    Args:
        argv: Arguments without the program name (default: sys.argv[1:])

    Returns:
        0 on success, 1 on runtime or integrity errors, 2 on usage errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK

    setup_logging(log_level=getattr(args, "log_level", None))
    orchestrator = CladOrchestrator()
    handlers = {
        "gen-data": orchestrator.gen_data,
        "train": orchestrator.train,
        "eval": orchestrator.eval,
        "score": orchestrator.score,
        "localize": orchestrator.localize,
    }

    try:
        return handlers[args.command](args)
    except UsageError as e:
        logger.error(f"{args.command}: {e}")
        print(f"clad {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (CladError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"clad {args.command}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> int:
    """Main entry point for CLI."""
    return run_cli()


if __name__ == "__main__":
    exit(main())
