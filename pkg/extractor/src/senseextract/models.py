"""Model backends behind two small protocols, with deterministic fakes.

The extraction pipeline needs a denoising infiller (fills mask sentinels
in a token sequence) and an encoder (per-layer hidden states with a
word-to-subword alignment). Pretrained weights are not bundled; the
``fake:`` backends are pure hash-driven stand-ins that honor every
protocol property the pipeline relies on (determinism, alignment,
layer-dependent geometry) and keep the whole package runnable offline.
Backend ids:

    paraphraser: "fake"
    encoder:     "fake:<dim>" or "fake:<dim>:<layers>"  (default 16:4)

Anything else raises ModelError naming the id.
"""

from __future__ import annotations

import hashlib
from typing import Protocol

import numpy as np

MASK = "<mask>"


class ModelError(RuntimeError):
    """A model backend failed to load or to run inference."""


class Paraphraser(Protocol):
    def fill(self, tokens: list[str]) -> list[str]:
        """Replace every MASK sentinel; may rewrite the sequence freely."""


class Encoder(Protocol):
    @property
    def dim(self) -> int: ...

    @property
    def num_layers(self) -> int: ...

    def encode(self, tokens: list[str], layer: int) -> tuple[np.ndarray, list[tuple[int, int]]]:
        """Hidden states at one layer.

        Returns (hidden, spans): hidden is (n_subwords, dim); spans[i] is
        the half-open subword range of word i, empty when the tokenizer
        drops the word entirely.
        """


def _digest(*parts: str) -> int:
    joined = "\x1f".join(parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2s(joined, digest_size=8).digest(), "big")


# Filler vocabulary for the fake infiller; all content words so the
# perturbation percentage lands near the mask ratio.
_VOCAB = (
    "river water money market street garden winter summer morning evening "
    "stone glass paper letter music silence window door table chair bridge "
    "mountain valley forest field harbor engine signal question answer story "
    "voice light shadow corner village city road path journey"
).split()


class HashParaphraser:
    """Fills each mask with a word chosen by hashing its neighbors.

    Non-mask tokens pass through unchanged, so a token excluded from
    masking always survives infilling.
    """

    def fill(self, tokens: list[str]) -> list[str]:
        out = []
        for i, token in enumerate(tokens):
            if token != MASK:
                out.append(token)
                continue
            left = tokens[i - 1] if i > 0 else ""
            right = tokens[i + 1] if i + 1 < len(tokens) else ""
            out.append(_VOCAB[_digest(left, right, str(i)) % len(_VOCAB)])
        return out


def _subwords(token: str) -> list[str]:
    """Fixed-width piece split; empty for tokens with no word characters."""
    word = "".join(ch for ch in token.lower() if ch.isalnum())
    return [word[i : i + 4] for i in range(0, len(word), 4)]


class HashEncoder:
    """Deterministic pseudo-encoder: each subword's state is a seeded
    random vector mixed with a little left context, different per layer."""

    def __init__(self, dim: int = 16, num_layers: int = 4):
        if dim < 1 or num_layers < 1:
            raise ModelError(f"encoder needs dim >= 1 and layers >= 1, got {dim}, {num_layers}")
        self._dim = dim
        self._num_layers = num_layers

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def num_layers(self) -> int:
        return self._num_layers

    def _piece_vector(self, piece: str, layer: int) -> np.ndarray:
        rng = np.random.default_rng(_digest(piece, str(layer), str(self._dim)))
        v = rng.normal(size=self._dim)
        return v / np.linalg.norm(v)

    def encode(self, tokens: list[str], layer: int) -> tuple[np.ndarray, list[tuple[int, int]]]:
        if not 0 <= layer < self._num_layers:
            raise ModelError(f"layer {layer} outside encoder depth {self._num_layers}")
        rows = []
        spans = []
        prev_piece = ""
        for token in tokens:
            pieces = _subwords(token)
            start = len(rows)
            for piece in pieces:
                state = self._piece_vector(piece, layer)
                if prev_piece:
                    state = state + 0.05 * self._piece_vector(prev_piece, layer)
                rows.append(state)
                prev_piece = piece
            spans.append((start, len(rows)))
        hidden = np.stack(rows) if rows else np.zeros((0, self._dim))
        return hidden, spans


def load_paraphraser(model_id: str) -> Paraphraser:
    if model_id == "fake":
        return HashParaphraser()
    raise ModelError(
        f"no paraphraser backend for {model_id!r}; bundled backend: 'fake'"
    )


def load_encoder(model_id: str) -> Encoder:
    if model_id == "fake" or model_id.startswith("fake:"):
        parts = model_id.split(":")[1:]
        try:
            dim = int(parts[0]) if len(parts) > 0 else 16
            layers = int(parts[1]) if len(parts) > 1 else 4
        except ValueError:
            raise ModelError(f"bad encoder id {model_id!r}; expected fake:<dim>[:<layers>]")
        return HashEncoder(dim, layers)
    raise ModelError(
        f"no encoder backend for {model_id!r}; bundled backend: 'fake:<dim>[:<layers>]'"
    )
