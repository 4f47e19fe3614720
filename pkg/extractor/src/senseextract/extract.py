"""Corpus-to-dump extraction.

Reads raw sentence corpora, locates target occurrences, builds a
perturbed twin for each sentence, encodes both, and writes vector-pair
dumps that the clustering package accepts unchanged. Instance ids are
assigned here and must survive the whole trip: a gold key built over
the same corpus joins on them.

Per-sentence randomness (mask placement) derives from the run seed and
the instance id token, never from iteration order, so subsampling or
reordering the corpus cannot change any surviving sentence's twin.
"""

from __future__ import annotations

import hashlib
import warnings
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from sensemim.datamodel import (
    DataError,
    InstanceId,
    VectorPair,
    VectorPairSet,
    write_vector_dump,
)
from sensemim.pipeline import dump_path

from . import lemmas
from .models import Encoder, ModelError, Paraphraser
from .perturb import SentenceInstance, perturb

MAX_TRAIN_DEFAULT = 3500


def collect_instances(
    lines: Iterable[str], lemma: str, pos: str, split: str
) -> list[SentenceInstance]:
    """Parse corpus lines into instances of one target word.

    Each line is one sentence. A line containing a TAB is ``uid<TAB>text``;
    otherwise the uid is the split name plus the 1-based line number. The
    target is the first whitespace token that lemmatizes to the word;
    lines without one are dropped with a warning.
    """
    instances = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if "\t" in line:
            uid, text = line.split("\t", 1)
            uid = uid.strip()
        else:
            uid, text = f"{split}{lineno}", line
        tokens = text.split()
        target = next(
            (i for i, t in enumerate(tokens) if lemmas.matches(t, lemma, pos)), None
        )
        if target is None:
            warnings.warn(
                f"{lemma}.{pos} {split} line {lineno}: no token lemmatizes to the "
                f"target, line dropped"
            )
            continue
        instances.append(
            SentenceInstance(
                id=InstanceId(lemma=lemma, pos=pos, uid=uid),
                tokens=tuple(tokens),
                target_index=target,
            )
        )
    return instances


def subsample(
    instances: Sequence[SentenceInstance], max_n: int, seed: int
) -> list[SentenceInstance]:
    """At most max_n instances, drawn without replacement, corpus order kept."""
    if len(instances) <= max_n:
        return list(instances)
    rng = np.random.default_rng(seed)
    keep = sorted(rng.choice(len(instances), size=max_n, replace=False))
    return [instances[int(i)] for i in keep]


def _instance_seed(seed: int, token: str) -> int:
    raw = f"{seed}|{token}".encode("utf-8")
    return int.from_bytes(hashlib.blake2s(raw, digest_size=8).digest(), "big")


def _target_vector(
    encoder: Encoder, instance: SentenceInstance, layer: int
) -> np.ndarray | None:
    """Mean of the target's subword states; None when the tokenizer
    leaves no subwords for it."""
    hidden, spans = encoder.encode(list(instance.tokens), layer)
    start, end = spans[instance.target_index]
    if start == end:
        return None
    return hidden[start:end].mean(axis=0)


def extract(
    instances: Sequence[SentenceInstance],
    encoder: Encoder,
    paraphraser: Paraphraser,
    layer: int,
    split: str,
    mask_ratio: float = 0.4,
    seed: int = 0,
) -> VectorPairSet:
    """Encode each instance and its perturbed twin into a vector pair set.

    Model failures skip the instance with a warning. A twin whose target
    vanished drops the instance on the train split (those pairs must be
    complete) and keeps it with a missing paraphrase vector on test.
    """
    if not instances:
        raise DataError(f"no instances to extract for split {split!r}")
    lemma, pos = instances[0].id.lemma, instances[0].id.pos
    pairs = []
    for instance in instances:
        try:
            twin = perturb(
                instance,
                paraphraser,
                mask_ratio=mask_ratio,
                seed=_instance_seed(seed, instance.id.token),
            )
            x = _target_vector(encoder, instance, layer)
            x_prime = _target_vector(encoder, twin, layer) if twin is not None else None
        except ModelError as exc:
            warnings.warn(f"{instance.id.token}: model failure, instance skipped: {exc}")
            continue
        if x is None:
            warnings.warn(f"{instance.id.token}: target has no subwords, instance dropped")
            continue
        if twin is not None and x_prime is None:
            warnings.warn(
                f"{instance.id.token}: perturbed target has no subwords, twin dropped"
            )
        if x_prime is None and split == "train":
            warnings.warn(
                f"{instance.id.token}: target absent from perturbation, train pair dropped"
            )
            continue
        pairs.append(VectorPair(id=instance.id, x=x, x_prime=x_prime))
    return VectorPairSet(
        lemma=lemma, pos=pos, layer=layer, dim=encoder.dim, split=split, pairs=pairs
    )


def perturbation_stats(
    instances: Sequence[SentenceInstance],
    paraphraser: Paraphraser,
    mask_ratio: float,
    seed: int,
) -> tuple[float, int]:
    """(mean token-change percentage over surviving twins, count absent).

    Informational only; mirrors how the twins in extract() are built.
    """
    from sensemim.metrics import perturbation_percentage

    pcts = []
    absent = 0
    for instance in instances:
        try:
            twin = perturb(
                instance,
                paraphraser,
                mask_ratio=mask_ratio,
                seed=_instance_seed(seed, instance.id.token),
            )
        except ModelError:
            absent += 1
            continue
        if twin is None:
            absent += 1
            continue
        pcts.append(perturbation_percentage(list(instance.tokens), list(twin.tokens)))
    return (float(np.mean(pcts)) if pcts else 0.0, absent)


def build_word_dumps(
    train_lines: Iterable[str],
    test_lines: Iterable[str],
    lemma: str,
    pos: str,
    encoder: Encoder,
    paraphraser: Paraphraser,
    layers: Sequence[int],
    out_dir: str,
    mask_ratio: float = 0.4,
    seed: int = 0,
    max_train: int = MAX_TRAIN_DEFAULT,
) -> dict:
    """Extract one word at every requested layer and write its dumps.

    Returns counts: collected and kept sizes per split plus written paths.
    """
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    train_all = collect_instances(train_lines, lemma, pos, "train")
    test_all = collect_instances(test_lines, lemma, pos, "test")
    train = subsample(train_all, max_train, seed)
    group = f"{lemma}.{pos}"
    paths = []
    kept_train = kept_test = 0
    for layer in layers:
        for split, insts in (("train", train), ("test", test_all)):
            pset = extract(
                insts, encoder, paraphraser, layer, split, mask_ratio=mask_ratio, seed=seed
            )
            path = dump_path(out_dir, group, layer, split)
            write_vector_dump(pset, path)
            paths.append(path)
            if split == "train":
                kept_train = len(pset)
            else:
                kept_test = len(pset)
    return {
        "group": group,
        "train_collected": len(train_all),
        "train_used": len(train),
        "train_kept": kept_train,
        "test_collected": len(test_all),
        "test_kept": kept_test,
        "paths": paths,
    }
