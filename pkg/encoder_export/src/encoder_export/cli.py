"""CLI: export a pretrained encoder checkpoint to the interchange model
format and generate probe fixtures."""

import argparse
import json
import sys

from .adapter import ContractError
from .export import ExportError, ExportSpec, export_model


def build_parser():
    parser = argparse.ArgumentParser(prog="encoder-export")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="export a checkpoint to TorchScript + metadata")
    p.add_argument("--checkpoint", required=True, help="encoder checkpoint as distributed")
    p.add_argument("--out", required=True, help="output TorchScript model path")
    p.add_argument("--probes", type=int, default=5, help="number of parity fixtures")
    p.add_argument(
        "--factory",
        default="",
        help="'module:callable' building the bare model when the checkpoint is a state_dict",
    )
    p.add_argument("--dim", type=int, default=0, help="expected embedding dimension D")
    p.add_argument(
        "--format",
        choices=["pt2", "torchscript"],
        default="pt2",
        help="interchange format; torchscript only for graphs torch.export cannot capture",
    )
    p.add_argument(
        "--allow-pickle",
        action="store_true",
        help="permit loading fully-pickled module checkpoints (trusted sources only)",
    )
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    spec = ExportSpec(
        checkpoint_path=args.checkpoint,
        output_path=args.out,
        probe_count=args.probes,
        factory=args.factory,
        allow_pickle=args.allow_pickle,
        expected_dim=args.dim,
        format=args.format,
    )
    try:
        model_path, metadata = export_model(spec)
    except (ExportError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"model": str(model_path), **metadata}, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
