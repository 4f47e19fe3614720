"""Sentence perturbation: mask a fraction of tokens, let a denoising
model fill them, and relocate the target occurrence in the output.

Masking operates on whole whitespace tokens and the target's index is
excluded from the candidate pool outright, so no subword of the target
can ever be masked. The target may still vanish if the infiller
rewrites it away; that case returns None and the caller decides whether
the instance survives (test pairs may, train pairs may not).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from sensemim.datamodel import DataError, InstanceId

from . import lemmas
from .models import MASK, Paraphraser


@dataclass(frozen=True)
class SentenceInstance:
    """One sentence with a marked target occurrence.

    tokens are whitespace tokens; tokens[target_index] must lemmatize to
    id.lemma under id.pos.
    """

    id: InstanceId
    tokens: tuple[str, ...]
    target_index: int

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise DataError(f"{self.id.token}: empty sentence")
        if not 0 <= self.target_index < len(self.tokens):
            raise DataError(
                f"{self.id.token}: target index {self.target_index} outside "
                f"sentence of {len(self.tokens)} tokens"
            )
        target = self.tokens[self.target_index]
        if not lemmas.matches(target, self.id.lemma, self.id.pos):
            raise DataError(
                f"{self.id.token}: token {target!r} at index {self.target_index} "
                f"does not lemmatize to {self.id.lemma!r}"
            )


def _relocate(tokens: list[str], lemma: str, pos: str) -> int | None:
    for i, token in enumerate(tokens):
        if lemmas.matches(token, lemma, pos):
            return i
    return None


def perturb(
    instance: SentenceInstance,
    paraphraser: Paraphraser,
    mask_ratio: float = 0.4,
    seed: int = 0,
) -> SentenceInstance | None:
    """Masked-and-refilled variant of a sentence, or None if the target
    did not survive infilling.

    ceil(mask_ratio * len(tokens)) positions are drawn uniformly without
    replacement from all indices except the target's (capped at the pool
    size). mask_ratio 0 returns the instance unchanged without calling
    the model.
    """
    if not 0.0 <= mask_ratio <= 1.0:
        raise DataError(f"mask_ratio must be in [0, 1], got {mask_ratio}")
    n = len(instance.tokens)
    m = min(math.ceil(mask_ratio * n), n - 1)
    if m == 0:
        return instance

    candidates = [i for i in range(n) if i != instance.target_index]
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(candidates), size=m, replace=False)
    masked_positions = {candidates[int(i)] for i in picked}

    masked = [MASK if i in masked_positions else t for i, t in enumerate(instance.tokens)]
    filled = list(paraphraser.fill(masked))
    where = _relocate(filled, instance.id.lemma, instance.id.pos)
    if where is None:
        return None
    return SentenceInstance(id=instance.id, tokens=tuple(filled), target_index=where)
