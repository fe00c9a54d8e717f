"""Extractor command line: oocextract extract --corpus DIR --out DIR."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .encoders import ModelConfig
from .errors import ExtractError
from .extract import extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oocextract",
        description="Encode a raw image-caption corpus into a feature store.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("extract", help="run the extraction pipeline")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model-config", dest="model_config")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        obj = {}
        if args.model_config:
            obj = json.loads(Path(args.model_config).read_text(encoding="utf-8"))
        config = ModelConfig.from_obj(obj)
        summary = extract(args.corpus, config, args.out)
    except (ExtractError, OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}))
        return 2
    print(json.dumps(summary, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
