"""Launch the reference server around a checkpoint."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import uvicorn

from .app import create_app
from .predictor import SamCheckpointPredictor


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="sam-reference-server")
    parser.add_argument("--checkpoint", required=True, help="model checkpoint path")
    parser.add_argument(
        "--model-type",
        dest="model_type",
        default="vit_h",
        choices=["vit_h", "vit_l", "vit_b"],
        help="checkpoint variant tag (echoed by /health)",
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8100)
    parser.add_argument("--device", default="cpu")
    args = parser.parse_args(argv)

    checkpoint = Path(args.checkpoint)
    if not checkpoint.is_file():
        print(f"error: checkpoint not found: {checkpoint}", file=sys.stderr)
        return 2
    predictor = SamCheckpointPredictor(
        str(checkpoint), model_type=args.model_type, device=args.device
    )
    app = create_app(predictor, variant=args.model_type)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
