#!/usr/bin/env python3
"""Generate a synthetic painting corpus as train/val/test TSV files."""

import argparse
from pathlib import Path

from mmart.corpus import SPLITS, save_corpus
from mmart.synthetic import SyntheticSpec, make_synthetic_corpus


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--train", type=int, default=400)
    parser.add_argument("--val", type=int, default=50)
    parser.add_argument("--test", type=int, default=50)
    parser.add_argument("--types", type=int, default=4)
    parser.add_argument("--schools", type=int, default=4)
    parser.add_argument("--timeframes", type=int, default=4)
    parser.add_argument("--authors", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    corpus = make_synthetic_corpus(
        SyntheticSpec(
            n_train=args.train,
            n_val=args.val,
            n_test=args.test,
            n_types=args.types,
            n_schools=args.schools,
            n_timeframes=args.timeframes,
            n_authors=args.authors,
            seed=args.seed,
        )
    )
    args.out_dir.mkdir(parents=True, exist_ok=True)
    paths = {s: args.out_dir / f"{s}.tsv" for s in SPLITS}
    save_corpus(corpus, paths)
    for split, path in paths.items():
        print(f"{split}: {len(corpus.split_index[split])} paintings -> {path}")


if __name__ == "__main__":
    main()
