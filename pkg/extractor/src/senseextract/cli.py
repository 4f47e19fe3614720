"""Command line entry point: corpora in, vector-pair dumps out.

    senseextract --train-corpus train.txt --test-corpus test.txt \
        --words bank.n cool.j --encoder fake:16 --paraphraser fake \
        --layers 0 1 --out dumps/

One dump per (word, layer, split) lands in --out under the naming the
clustering package discovers. Exit 0 when every word produced dumps,
1 when some word failed, 2 on usage or data errors.
"""

from __future__ import annotations

import argparse
import sys
import warnings

from sensemim.datamodel import DataError, normalize_pos

from .extract import MAX_TRAIN_DEFAULT, build_word_dumps, collect_instances, perturbation_stats
from .models import ModelError, load_encoder, load_paraphraser
from .perturb import SentenceInstance


def _parse_word(word: str) -> tuple[str, str]:
    lemma, sep, pos = word.rpartition(".")
    if not sep or not lemma:
        raise DataError(f"word must be written lemma.pos, got {word!r}")
    return lemma, normalize_pos(pos)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="senseextract",
        description="Extract paired contextual vectors from sentence corpora.",
    )
    parser.add_argument("--train-corpus", required=True, help="training sentences, one per line")
    parser.add_argument("--test-corpus", required=True, help="evaluation sentences, one per line")
    parser.add_argument(
        "--words", required=True, nargs="+", metavar="LEMMA.POS", help="target words"
    )
    parser.add_argument("--encoder", default="fake:16", help="encoder backend id")
    parser.add_argument("--paraphraser", default="fake", help="infiller backend id")
    parser.add_argument(
        "--layers", required=True, nargs="+", type=int, help="encoder layers to dump"
    )
    parser.add_argument("--out", required=True, help="output dump directory")
    parser.add_argument("--mask-ratio", type=float, default=0.4)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-train", type=int, default=MAX_TRAIN_DEFAULT)
    return parser


def _read_lines(path: str) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.readlines()


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        words = [_parse_word(w) for w in args.words]
        encoder = load_encoder(args.encoder)
        paraphraser = load_paraphraser(args.paraphraser)
        for layer in args.layers:
            if not 0 <= layer < encoder.num_layers:
                raise DataError(
                    f"layer {layer} outside encoder depth {encoder.num_layers}"
                )
        train_lines = _read_lines(args.train_corpus)
        test_lines = _read_lines(args.test_corpus)
    except (DataError, ModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    failed = 0
    all_instances: list[SentenceInstance] = []
    for lemma, pos in words:
        try:
            counts = build_word_dumps(
                train_lines,
                test_lines,
                lemma,
                pos,
                encoder,
                paraphraser,
                layers=args.layers,
                out_dir=args.out,
                mask_ratio=args.mask_ratio,
                seed=args.seed,
                max_train=args.max_train,
            )
        except (DataError, OSError) as exc:
            print(f"{lemma}.{pos}: failed: {exc}", file=sys.stderr)
            failed += 1
            continue
        print(
            f"{counts['group']}: train {counts['train_kept']}/{counts['train_used']} kept "
            f"({counts['train_collected']} collected), "
            f"test {counts['test_kept']}/{counts['test_collected']} kept"
        )
        # Re-collection for the stats pass; drop warnings already surfaced.
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            all_instances.extend(collect_instances(test_lines, lemma, pos, "test"))

    if all_instances:
        pct, absent = perturbation_stats(
            all_instances, paraphraser, args.mask_ratio, args.seed
        )
        print(f"perturbation: {pct:.1f}% tokens changed, {absent} targets lost")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
