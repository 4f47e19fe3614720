"""Core domain types plus the on-disk vector-dump and sense-key formats.

The dump format is the contract shared with the vector extractor, so it is
deliberately boring: a self-describing header line followed by one record per
line. The text form is canonical; a packed float32 binary form exists for
large dumps. Key files follow the SemEval convention of
``<lemma>.<pos> <lemma>.<pos>.<uid> <sense>/<weight> ...`` lines.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

VALID_POS = ("n", "v", "j")
VALID_SPLITS = ("train", "test")

_DUMP_MAGIC = "#WSI-DUMP"
_DUMP_MAGIC_BIN = "#WSI-DUMP-BIN"
_DUMP_VERSION = "v1"
_HEADER_FIELDS = ("lemma", "pos", "layer", "dim", "split", "count")

# Graded key records whose weights drift from 1 by more than this are treated
# as corrupt rather than silently renormalized.
KEY_RENORM_TOLERANCE = 1e-3


class DataError(ValueError):
    """Base class for all data-contract violations."""


class ValidationError(DataError):
    """An in-memory object violates one of its invariants."""


class DumpFormatError(DataError):
    """A vector-dump file does not conform to the dump format."""


class KeyFormatError(DataError):
    """A key file does not conform to the key grammar."""


def normalize_pos(tag: str) -> str:
    """Map a POS tag onto {n, v, j}; reject anything unknown."""
    t = tag.strip().lower()
    if t == "a":  # common alternative tag for adjectives
        t = "j"
    if t not in VALID_POS:
        raise ValidationError(f"unknown pos tag {tag!r}; expected one of {VALID_POS}")
    return t


@dataclass(frozen=True, order=True)
class InstanceId:
    """Identity of one occurrence of a target word.

    ``uid`` is opaque but must be unique within its lemma.pos group. Lemmas
    are lowercase and contain neither whitespace nor '.' (the key grammar
    uses '.' as a separator).
    """

    lemma: str
    pos: str
    uid: str

    def __post_init__(self):
        if not self.lemma or self.lemma != self.lemma.lower():
            raise ValidationError(f"lemma must be non-empty lowercase, got {self.lemma!r}")
        if any(ch.isspace() for ch in self.lemma) or "." in self.lemma:
            raise ValidationError(f"lemma must not contain whitespace or '.', got {self.lemma!r}")
        if self.pos not in VALID_POS:
            raise ValidationError(f"pos must be one of {VALID_POS}, got {self.pos!r}")
        if not self.uid or any(ch.isspace() for ch in self.uid):
            raise ValidationError(f"uid must be non-empty without whitespace, got {self.uid!r}")

    @property
    def group(self) -> str:
        return f"{self.lemma}.{self.pos}"

    @property
    def token(self) -> str:
        return f"{self.lemma}.{self.pos}.{self.uid}"

    @classmethod
    def from_token(cls, token: str) -> "InstanceId":
        parts = token.split(".")
        if len(parts) < 3:
            raise ValidationError(f"instance token {token!r} is not <lemma>.<pos>.<uid>")
        lemma, pos = parts[0], parts[1]
        uid = ".".join(parts[2:])
        return cls(lemma, pos, uid)


@dataclass(frozen=True)
class VectorPair:
    """Original-sentence vector x and, when available, paraphrase vector x'."""

    id: InstanceId
    x: np.ndarray
    x_prime: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "x", _as_finite_vector(self.x, f"{self.id.token} x"))
        if self.x_prime is not None:
            xp = _as_finite_vector(self.x_prime, f"{self.id.token} x_prime")
            if xp.shape != self.x.shape:
                raise ValidationError(
                    f"{self.id.token}: x_prime dimension {xp.shape[0]} != x dimension {self.x.shape[0]}"
                )
            object.__setattr__(self, "x_prime", xp)

    @property
    def dim(self) -> int:
        return self.x.shape[0]


def _as_finite_vector(v, what: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise ValidationError(f"{what}: expected a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what}: vector contains non-finite values")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass
class VectorPairSet:
    """All vector pairs of one target word at one encoder layer and split."""

    lemma: str
    pos: str
    layer: int
    dim: int
    split: str
    pairs: list[VectorPair] = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.lemma or self.lemma != self.lemma.lower():
            raise ValidationError(f"lemma must be non-empty lowercase, got {self.lemma!r}")
        if self.pos not in VALID_POS:
            raise ValidationError(f"pos must be one of {VALID_POS}, got {self.pos!r}")
        if self.layer < 0:
            raise ValidationError(f"layer must be >= 0, got {self.layer}")
        if self.split not in VALID_SPLITS:
            raise ValidationError(f"split must be one of {VALID_SPLITS}, got {self.split!r}")
        if self.dim < 1:
            raise ValidationError(f"dim must be >= 1, got {self.dim}")
        seen = set()
        for idx, pair in enumerate(self.pairs, start=1):
            if pair.dim != self.dim:
                raise ValidationError(
                    f"record {idx} ({pair.id.token}): dimension {pair.dim} != declared dim {self.dim}"
                )
            if pair.id in seen:
                raise ValidationError(f"record {idx}: duplicate instance id {pair.id.token}")
            seen.add(pair.id)
            if self.split == "train" and pair.x_prime is None:
                raise ValidationError(
                    f"record {idx} ({pair.id.token}): train split requires x_prime for every pair"
                )

    def __len__(self) -> int:
        return len(self.pairs)

    def ids(self) -> list[InstanceId]:
        return [p.id for p in self.pairs]

    def xs(self) -> np.ndarray:
        """Stack original vectors into an (n, dim) matrix."""
        if not self.pairs:
            return np.zeros((0, self.dim))
        return np.stack([p.x for p in self.pairs])

    def x_primes(self) -> np.ndarray:
        """Stack paraphrase vectors; requires every pair to carry one."""
        missing = [p.id.token for p in self.pairs if p.x_prime is None]
        if missing:
            raise ValidationError(f"pairs without x_prime: {', '.join(missing[:3])}")
        if not self.pairs:
            return np.zeros((0, self.dim))
        return np.stack([p.x_prime for p in self.pairs])

    def complete_pairs(self) -> "VectorPairSet":
        """Subset with only the pairs that have both vectors."""
        kept = [p for p in self.pairs if p.x_prime is not None]
        return VectorPairSet(self.lemma, self.pos, self.layer, self.dim, self.split, kept)


@dataclass
class SenseEmbeddingSet:
    """Per-instance sense embeddings (first hidden layer of the trained net)."""

    lemma: str
    pos: str
    layer: int
    ids: list[InstanceId]
    vectors: np.ndarray  # (n, dim)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.ids):
            raise ValidationError(
                f"vectors shape {self.vectors.shape} inconsistent with {len(self.ids)} ids"
            )

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class SenseKey:
    """Sense assignments for a set of instances.

    Crisp keys carry exactly one assignment of weight 1 per record; graded
    keys carry several positive weights summing to 1.
    """

    records: list[tuple[InstanceId, list[tuple[str, float]]]]

    def validate(self):
        seen = set()
        for rid, assignments in self.records:
            if rid in seen:
                raise ValidationError(f"duplicate instance id {rid.token}")
            seen.add(rid)
            if not assignments:
                raise ValidationError(f"{rid.token}: empty assignment list")
            total = 0.0
            for sense, weight in assignments:
                if not sense or any(ch.isspace() for ch in sense) or "/" in sense:
                    raise ValidationError(f"{rid.token}: bad sense label {sense!r}")
                if not (weight > 0.0) or not math.isfinite(weight):
                    raise ValidationError(f"{rid.token}: weight must be > 0, got {weight}")
                total += weight
            if abs(total - 1.0) > 1e-6:
                raise ValidationError(f"{rid.token}: weights sum to {total}, expected 1")

    def is_crisp(self) -> bool:
        return all(len(assignments) == 1 for _, assignments in self.records)

    def ids(self) -> list[InstanceId]:
        return [rid for rid, _ in self.records]

    def by_id(self) -> dict[InstanceId, list[tuple[str, float]]]:
        return {rid: assignments for rid, assignments in self.records}

    def groups(self) -> dict[str, list[tuple[InstanceId, list[tuple[str, float]]]]]:
        """Records bucketed by lemma.pos group, preserving record order."""
        out: dict[str, list[tuple[InstanceId, list[tuple[str, float]]]]] = {}
        for rid, assignments in self.records:
            out.setdefault(rid.group, []).append((rid, assignments))
        return out

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class ClusteringSolution:
    """Crisp cluster labels (and optional graded weights) for one word."""

    lemma: str
    pos: str
    k: int
    labels: dict[InstanceId, int]
    grades: dict[InstanceId, np.ndarray] | None = None

    def validate(self):
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if not self.labels:
            raise ValidationError("solution has no instances")
        used = set()
        for rid, label in self.labels.items():
            if not (0 <= label < self.k):
                raise ValidationError(f"{rid.token}: label {label} outside [0, {self.k})")
            used.add(label)
        if used != set(range(self.k)):
            missing = sorted(set(range(self.k)) - used)
            raise ValidationError(f"empty clusters reported: {missing}")
        if self.grades is not None:
            if set(self.grades) != set(self.labels):
                raise ValidationError("grades must cover exactly the labeled instances")
            for rid, g in self.grades.items():
                g = np.asarray(g, dtype=np.float64)
                if g.shape != (self.k,):
                    raise ValidationError(f"{rid.token}: grade vector has shape {g.shape}, expected ({self.k},)")
                if np.any(g < 0):
                    raise ValidationError(f"{rid.token}: negative grade weight")
                if abs(float(g.sum()) - 1.0) > 1e-9:
                    raise ValidationError(f"{rid.token}: grades sum to {g.sum()}, expected 1")
                if int(np.argmax(g)) != self.labels[rid]:
                    raise ValidationError(
                        f"{rid.token}: argmax of grades ({int(np.argmax(g))}) != crisp label ({self.labels[rid]})"
                    )


# ---------------------------------------------------------------------------
# Vector dump I/O
# ---------------------------------------------------------------------------


def _format_header(pset: VectorPairSet, magic: str) -> str:
    return (
        f"{magic} {_DUMP_VERSION} lemma={pset.lemma} pos={pset.pos} "
        f"layer={pset.layer} dim={pset.dim} split={pset.split} count={len(pset.pairs)}"
    )


def _parse_header(line: str, path) -> tuple[str, dict]:
    tokens = line.rstrip("\n").split(" ")
    if len(tokens) != 2 + len(_HEADER_FIELDS) or tokens[0] not in (_DUMP_MAGIC, _DUMP_MAGIC_BIN):
        raise DumpFormatError(f"{path}: malformed header line {line!r}")
    if tokens[1] != _DUMP_VERSION:
        raise DumpFormatError(f"{path}: unsupported dump version {tokens[1]!r}")
    values = {}
    for token, name in zip(tokens[2:], _HEADER_FIELDS):
        prefix = name + "="
        if not token.startswith(prefix):
            raise DumpFormatError(f"{path}: expected header field {name}=..., got {token!r}")
        values[name] = token[len(prefix):]
    try:
        values["layer"] = int(values["layer"])
        values["dim"] = int(values["dim"])
        values["count"] = int(values["count"])
    except ValueError as exc:
        raise DumpFormatError(f"{path}: non-integer header field ({exc})") from None
    if values["count"] < 0:
        raise DumpFormatError(f"{path}: negative count in header")
    return tokens[0], values


def _parse_float_fields(text: str, dim: int, what: str):
    fields = text.split(" ") if text else []
    if len(fields) != dim:
        raise DumpFormatError(f"{what}: expected {dim} coordinates, found {len(fields)}")
    try:
        vec = np.array([float(f) for f in fields], dtype=np.float64)
    except ValueError:
        raise DumpFormatError(f"{what}: unparseable coordinate") from None
    if not np.all(np.isfinite(vec)):
        raise DumpFormatError(f"{what}: non-finite coordinate")
    return vec


def read_vector_dump(path) -> VectorPairSet:
    """Read a dump file (text or binary form) into a validated VectorPairSet."""
    path = Path(path)
    with open(path, "rb") as fh:
        first = fh.readline().decode("utf-8", errors="replace")
        magic, header = _parse_header(first, path)
        if magic == _DUMP_MAGIC_BIN:
            return _read_binary_body(fh, header, path)
        body = fh.read().decode("utf-8")
    lines = body.splitlines()
    if len(lines) != header["count"]:
        raise DumpFormatError(
            f"{path}: header count={header['count']} but file has {len(lines)} records"
        )
    pairs = []
    for rec_no, line in enumerate(lines, start=1):
        parts = line.split("\t")
        if len(parts) != 3:
            raise DumpFormatError(f"{path}: record {rec_no}: expected 3 tab-separated fields")
        uid, x_text, xp_text = parts
        x = _parse_float_fields(x_text, header["dim"], f"{path}: record {rec_no} x")
        xp = None
        if xp_text != "-":
            xp = _parse_float_fields(xp_text, header["dim"], f"{path}: record {rec_no} x_prime")
        try:
            pair = VectorPair(InstanceId(header["lemma"], header["pos"], uid), x, xp)
        except ValidationError as exc:
            raise DumpFormatError(f"{path}: record {rec_no}: {exc}") from None
        pairs.append(pair)
    try:
        return VectorPairSet(
            header["lemma"], header["pos"], header["layer"], header["dim"], header["split"], pairs
        )
    except ValidationError as exc:
        raise DumpFormatError(f"{path}: {exc}") from None


def _read_binary_body(fh, header, path) -> VectorPairSet:
    dim, count = header["dim"], header["count"]
    uids = []
    flags = []
    for rec_no in range(1, count + 1):
        line = fh.readline().decode("utf-8")
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 2 or parts[1] not in ("0", "1"):
            raise DumpFormatError(f"{path}: record {rec_no}: malformed binary uid line")
        uids.append(parts[0])
        flags.append(parts[1] == "1")
    blob = fh.read()
    expect = 4 * dim * (count + sum(flags))
    if len(blob) != expect:
        raise DumpFormatError(f"{path}: binary body holds {len(blob)} bytes, expected {expect}")
    floats = np.frombuffer(blob, dtype="<f4").astype(np.float64)
    pairs = []
    offset = 0
    for rec_no, (uid, has_prime) in enumerate(zip(uids, flags), start=1):
        x = floats[offset : offset + dim]
        offset += dim
        xp = None
        if has_prime:
            xp = floats[offset : offset + dim]
            offset += dim
        if not np.all(np.isfinite(x)) or (xp is not None and not np.all(np.isfinite(xp))):
            raise DumpFormatError(f"{path}: record {rec_no}: non-finite coordinate")
        try:
            pairs.append(VectorPair(InstanceId(header["lemma"], header["pos"], uid), x, xp))
        except ValidationError as exc:
            raise DumpFormatError(f"{path}: record {rec_no}: {exc}") from None
    try:
        return VectorPairSet(
            header["lemma"], header["pos"], header["layer"], header["dim"], header["split"], pairs
        )
    except ValidationError as exc:
        raise DumpFormatError(f"{path}: {exc}") from None


def write_vector_dump(pset: VectorPairSet, path, binary: bool = False) -> None:
    """Write a dump file; text form round-trips vectors bit-exactly.

    The binary form stores coordinates as little-endian float32 and is meant
    for large dumps where the precision loss is irrelevant.
    """
    pset.validate()
    path = Path(path)
    if binary:
        with open(path, "wb") as fh:
            fh.write((_format_header(pset, _DUMP_MAGIC_BIN) + "\n").encode("utf-8"))
            for pair in pset.pairs:
                flag = "1" if pair.x_prime is not None else "0"
                fh.write(f"{pair.id.uid}\t{flag}\n".encode("utf-8"))
            for pair in pset.pairs:
                fh.write(pair.x.astype("<f4").tobytes())
                if pair.x_prime is not None:
                    fh.write(pair.x_prime.astype("<f4").tobytes())
        return
    lines = [_format_header(pset, _DUMP_MAGIC)]
    for pair in pset.pairs:
        x_text = " ".join(repr(float(v)) for v in pair.x)
        xp_text = "-" if pair.x_prime is None else " ".join(repr(float(v)) for v in pair.x_prime)
        lines.append(f"{pair.id.uid}\t{x_text}\t{xp_text}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Key file I/O
# ---------------------------------------------------------------------------


def parse_key(path, graded: bool, renorm_tolerance: float = KEY_RENORM_TOLERANCE) -> SenseKey:
    """Parse a key file; weights are renormalized to sum to 1 per record.

    In crisp mode any record with more than one sense is rejected. Weight
    sums that deviate from 1 by more than ``renorm_tolerance`` are treated as
    corruption rather than formatting noise.
    """
    path = Path(path)
    records: list[tuple[InstanceId, list[tuple[str, float]]]] = []
    seen: set[InstanceId] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) < 3:
                raise KeyFormatError(f"{path}:{line_no}: expected group, instance and >=1 sense")
            group_token, instance_token = fields[0], fields[1]
            try:
                rid = InstanceId.from_token(instance_token)
            except ValidationError as exc:
                raise KeyFormatError(f"{path}:{line_no}: {exc}") from None
            if group_token != rid.group:
                raise KeyFormatError(
                    f"{path}:{line_no}: group token {group_token!r} does not match instance {rid.token!r}"
                )
            if rid in seen:
                raise KeyFormatError(f"{path}:{line_no}: duplicate instance id {rid.token}")
            seen.add(rid)
            if not graded and len(fields) > 3:
                raise KeyFormatError(f"{path}:{line_no}: multiple senses in crisp key")
            assignments = []
            for chunk in fields[2:]:
                sense, sep, weight_text = chunk.rpartition("/")
                if not sep or not sense:
                    raise KeyFormatError(f"{path}:{line_no}: malformed sense/weight {chunk!r}")
                try:
                    weight = float(weight_text)
                except ValueError:
                    raise KeyFormatError(f"{path}:{line_no}: unparseable weight {weight_text!r}") from None
                if not math.isfinite(weight) or weight <= 0.0:
                    raise KeyFormatError(f"{path}:{line_no}: weight must be > 0, got {weight_text}")
                assignments.append((sense, weight))
            total = sum(w for _, w in assignments)
            if abs(total - 1.0) > renorm_tolerance:
                raise KeyFormatError(
                    f"{path}:{line_no}: weights sum to {total:.6g}, outside renormalization tolerance"
                )
            assignments = [(s, w / total) for s, w in assignments]
            records.append((rid, assignments))
    key = SenseKey(records)
    key.validate()
    return key


def format_key(key: SenseKey) -> str:
    """Serialize a SenseKey in the key-file grammar."""
    lines = []
    for rid, assignments in key.records:
        chunks = " ".join(f"{sense}/{repr(float(weight))}" for sense, weight in assignments)
        lines.append(f"{rid.group} {rid.token} {chunks}")
    return "\n".join(lines) + ("\n" if lines else "")


def write_key(key: SenseKey, path) -> None:
    key.validate()
    Path(path).write_text(format_key(key), encoding="utf-8")


def solution_to_key(sol: ClusteringSolution, graded: bool) -> SenseKey:
    """Convert a clustering solution into a system key.

    Crisp mode emits the single cluster label per instance; graded mode emits
    every cluster with its grade weight (exact zeros are dropped since the
    key grammar requires positive weights).
    """
    sol.validate()
    if graded and sol.grades is None:
        raise ValidationError("graded key requested but solution has no grades")
    records = []
    for rid in sorted(sol.labels):
        if graded:
            g = np.asarray(sol.grades[rid], dtype=np.float64)
            assignments = [
                (f"{sol.lemma}.{sol.pos}.cluster{c}", float(w)) for c, w in enumerate(g) if w > 0.0
            ]
        else:
            assignments = [(f"{sol.lemma}.{sol.pos}.cluster{sol.labels[rid]}", 1.0)]
        records.append((rid, assignments))
    key = SenseKey(records)
    key.validate()
    return key
