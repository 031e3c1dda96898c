"""Command-line entry: extract --images DIR --out FILE --layer ... --batch N."""

from __future__ import annotations

import argparse
import logging
import sys

from .extract import LAYERS, extract


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = argparse.ArgumentParser(
        prog="mmart-extract",
        description="extract ResNet50 visual features into an MMAF file",
    )
    parser.add_argument("--images", required=True, help="directory of image files")
    parser.add_argument("--out", required=True, help="output MMAF path (appends if present)")
    parser.add_argument("--layer", choices=LAYERS, default="logits_1000")
    parser.add_argument("--batch", type=int, default=16)
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--weights", help="local ResNet50 state_dict file")
    group.add_argument(
        "--untrained",
        type=int,
        metavar="SEED",
        help="use a seeded random initialization instead of pre-trained weights",
    )
    args = parser.parse_args(argv)
    try:
        extract(
            args.images,
            args.out,
            layer=args.layer,
            batch=args.batch,
            weights_path=args.weights,
            untrained_seed=args.untrained,
        )
    except (ValueError, OSError) as exc:
        logging.getLogger("mmart-extract").error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
