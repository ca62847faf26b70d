"""Command-line frontend.

Verbs: train, sample, evaluate, compare. Flags can be combined with a JSON
config file (``--config``); explicit flags win. Exit codes: 0 success,
1 usage / invalid configuration, 2 data or file-format problems,
3 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import RunConfig
from .errors import (CheckpointError, ContractError, DataFormatError,
                     DimensionError, NumericalDegeneracyError)
from .runner import cmd_compare, cmd_evaluate, cmd_sample, cmd_train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures through our exit codes
        raise _UsageError(message)


def _add_config_args(p: argparse.ArgumentParser, training: bool = True) -> None:
    p.add_argument("--config", help="JSON file with RunConfig fields (flags win)")
    p.add_argument("--dataset", choices=("mnist", "medmnist"))
    p.add_argument("--images-path", help="IDX image file (mnist)")
    p.add_argument("--labels-path", help="IDX label file (mnist)")
    p.add_argument("--npz-path", help="NPZ archive (medmnist)")
    p.add_argument("--split", choices=("train", "test"))
    p.add_argument("--class-label", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--extractor", choices=("pixel_pca", "fixed_random_conv"))
    p.add_argument("--output-dir")
    if training:
        p.add_argument("--model", choices=("classical", "quantum"))
        p.add_argument("--ansatz", choices=("paper_literal", "ry_variational"))
        p.add_argument("--epochs", type=int)
        p.add_argument("--batch-size", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--timesteps", type=int)
        p.add_argument("--s", type=float, dest="s")
        p.add_argument("--beta-clip", type=float)
        p.add_argument("--normalize-alpha-bar", action=argparse.BooleanOptionalAction)
        p.add_argument("--ema-beta", type=float)
        p.add_argument("--max-train-images", type=int)
        p.add_argument("--n-qubits", type=int)
        p.add_argument("--n-layers", type=int)
        p.add_argument("--skip-connections", action=argparse.BooleanOptionalAction)
        p.add_argument("--init-gain", type=float)
        p.add_argument("--sample-grid-n", type=int)
        p.add_argument("--sample-cols", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--eval-samples", type=int)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_json_file(args.config) if args.config else RunConfig()
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    overrides = {name: value for name, value in vars(args).items()
                 if name in fields and value is not None}
    return cfg.replace(**overrides).validate()


def build_parser() -> _Parser:
    parser = _Parser(prog="qcdiff",
                     description="Hybrid quantum-classical diffusion engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one model variant")
    _add_config_args(p_train)

    p_sample = sub.add_parser("sample", help="draw EMA samples from a checkpoint")
    p_sample.add_argument("checkpoint")
    p_sample.add_argument("-n", "--num", type=int, default=16)
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--cols", type=int, default=4)
    p_sample.add_argument("--output-dir")

    p_eval = sub.add_parser("evaluate", help="score a samples dump against the dataset")
    p_eval.add_argument("samples", help="samples dump written by the sample command")
    p_eval.add_argument("--output", help="metrics JSONL output path")
    _add_config_args(p_eval, training=False)

    p_cmp = sub.add_parser("compare", help="train and evaluate both variants")
    _add_config_args(p_cmp)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "train":
            result = cmd_train(_config_from_args(args))
            print(f"run directory: {result.run_dir}")
            for epoch, loss in enumerate(result.epoch_losses, start=1):
                print(f"epoch {epoch}: mean_loss={loss:.6f}")
            print(f"best checkpoint (epoch {result.best_epoch}): {result.checkpoint_path}")
        elif args.command == "sample":
            png_path, dump_path = cmd_sample(args.checkpoint, args.num, args.seed,
                                             output_dir=args.output_dir, cols=args.cols)
            print(f"grid: {png_path}")
            print(f"dump: {dump_path}")
        elif args.command == "evaluate":
            records = cmd_evaluate(args.samples, _config_from_args(args),
                                   output_path=args.output)
            for record in records:
                print(record.to_json_line())
        elif args.command == "compare":
            _, table = cmd_compare(_config_from_args(args))
            print(table, end="")
        return EXIT_OK
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ContractError, DimensionError) as exc:
        print(f"invalid request: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, CheckpointError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalDegeneracyError as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def entrypoint() -> None:
    sys.exit(main())
