"""Rule-based, pos-aware English lemmatization for target-word location.

Without a dictionary, a suffix rule cannot know whether "making" stems to
"mak" or "make", so ``candidates`` returns every plausible lemma and
matching checks membership: a token counts as an occurrence of a target
lemma when the lemma is among the token's candidates for the given part
of speech. ``lemmatize`` picks the single highest-priority candidate for
callers that need one canonical form.

Tokens are matched on their lowercase form with surrounding punctuation
stripped; the identity candidate is always included, so a token equal to
the lemma always matches.
"""

from __future__ import annotations

import string

_STRIP = string.punctuation + string.whitespace

# pos tags follow the dump/key grammar: n(oun), v(erb), j (adjective)
_IRREGULAR = {
    "n": {
        "men": "man",
        "women": "woman",
        "children": "child",
        "feet": "foot",
        "teeth": "tooth",
        "mice": "mouse",
        "geese": "goose",
        "people": "person",
        "lives": "life",
        "leaves": "leaf",
        "knives": "knife",
        "wives": "wife",
        "halves": "half",
        "shelves": "shelf",
    },
    "v": {
        "am": "be",
        "is": "be",
        "are": "be",
        "was": "be",
        "were": "be",
        "been": "be",
        "being": "be",
        "has": "have",
        "had": "have",
        "having": "have",
        "does": "do",
        "did": "do",
        "done": "do",
        "goes": "go",
        "went": "go",
        "gone": "go",
        "said": "say",
        "made": "make",
        "took": "take",
        "taken": "take",
        "gave": "give",
        "given": "give",
        "found": "find",
        "ran": "run",
        "saw": "see",
        "seen": "see",
        "came": "come",
        "got": "get",
        "gotten": "get",
        "wrote": "write",
        "written": "write",
        "drew": "draw",
        "drawn": "draw",
        "held": "hold",
        "kept": "keep",
        "left": "leave",
        "lost": "lose",
        "met": "meet",
        "paid": "pay",
        "sold": "sell",
        "sent": "send",
        "sat": "sit",
        "spoke": "speak",
        "spoken": "speak",
        "spent": "spend",
        "stood": "stand",
        "taught": "teach",
        "thought": "think",
        "told": "tell",
        "understood": "understand",
        "wore": "wear",
        "worn": "wear",
        "won": "win",
        "knew": "know",
        "known": "know",
        "grew": "grow",
        "grown": "grow",
        "fell": "fall",
        "fallen": "fall",
        "felt": "feel",
        "brought": "bring",
        "bought": "buy",
        "caught": "catch",
        "chose": "choose",
        "chosen": "choose",
        "broke": "break",
        "broken": "break",
    },
    "j": {
        "better": "good",
        "best": "good",
        "worse": "bad",
        "worst": "bad",
        "farther": "far",
        "farthest": "far",
        "further": "far",
        "furthest": "far",
    },
}

_DOUBLABLE = set("bdgmnprt")
_VOWELS = set("aeiou")


def _undouble(stem: str) -> str | None:
    if len(stem) >= 2 and stem[-1] == stem[-2] and stem[-1] in _DOUBLABLE:
        return stem[:-1]
    return None


def _strip_suffix_candidates(word: str, suffix: str, min_stem: int) -> list[str]:
    """Stem plus its undoubled and e-restored variants, longest first."""
    if not word.endswith(suffix) or len(word) - len(suffix) < min_stem:
        return []
    stem = word[: -len(suffix)]
    out = [stem]
    undoubled = _undouble(stem)
    if undoubled:
        out.append(undoubled)
    if stem and stem[-1] not in _VOWELS:
        out.append(stem + "e")  # making -> mak -> make
    return out


def _noun_candidates(word: str) -> list[str]:
    out = []
    if word.endswith("ies") and len(word) > 4:
        out.append(word[:-3] + "y")
    for suffix in ("ses", "xes", "zes", "ches", "shes"):
        if word.endswith(suffix):
            out.append(word[:-2])
    if word.endswith("es"):
        out.append(word[:-2])
    if word.endswith("s") and not word.endswith("ss"):
        out.append(word[:-1])
    return out


def _verb_candidates(word: str) -> list[str]:
    out = []
    if word.endswith("ies") and len(word) > 4:
        out.append(word[:-3] + "y")
    if word.endswith("ied") and len(word) > 4:
        out.append(word[:-3] + "y")
    for suffix in ("ing", "ed"):
        out.extend(_strip_suffix_candidates(word, suffix, min_stem=2))
    for suffix in ("ses", "xes", "zes", "ches", "shes"):
        if word.endswith(suffix):
            out.append(word[:-2])
    if word.endswith("es"):
        out.append(word[:-2])
    if word.endswith("s") and not word.endswith("ss"):
        out.append(word[:-1])
    return out


def _adjective_candidates(word: str) -> list[str]:
    out = []
    if word.endswith("ier") and len(word) > 4:
        out.append(word[:-3] + "y")
    if word.endswith("iest") and len(word) > 5:
        out.append(word[:-4] + "y")
    for suffix in ("est", "er"):
        out.extend(_strip_suffix_candidates(word, suffix, min_stem=2))
    return out


_RULES = {"n": _noun_candidates, "v": _verb_candidates, "j": _adjective_candidates}


def normalize_token(token: str) -> str:
    return token.strip(_STRIP).lower()


def candidates(token: str, pos: str) -> tuple[str, ...]:
    """Plausible lemmas for a surface token, highest priority first."""
    if pos not in _RULES:
        raise ValueError(f"pos must be one of ('n', 'v', 'j'), got {pos!r}")
    word = normalize_token(token)
    if not word:
        return ()
    out = []
    irregular = _IRREGULAR[pos].get(word)
    if irregular:
        out.append(irregular)
    out.append(word)
    for cand in _RULES[pos](word):
        if cand and cand not in out:
            out.append(cand)
    return tuple(out)


def lemmatize(token: str, pos: str) -> str:
    """Single best-guess lemma (irregular form, else the token itself)."""
    cands = candidates(token, pos)
    return cands[0] if cands else ""


def matches(token: str, lemma: str, pos: str) -> bool:
    """Whether the token is a surface form of the lemma for this pos."""
    return lemma in candidates(token, pos)
