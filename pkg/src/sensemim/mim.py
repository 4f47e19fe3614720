"""Mutual-information network: forward map, losses, training, embedding.

The network is a fixed 3-layer MLP ending in a softmax. Training maximizes
the mutual information between the output distributions of an original
vector and its paraphrase (plus a small cosine match term), with manual
backpropagation and Adam. The sense embedding of an instance is the
post-ReLU first hidden layer of the trained network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .datamodel import DataError, SenseEmbeddingSet, ValidationError, VectorPairSet
from .seeding import rng_for

# Joint-matrix entries this small are clamped inside logarithms only, so
# exact zeros (one-hot batches) contribute exactly zero to the loss.
LOG_CLAMP = 1e-12

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

_PARAM_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3")


class TrainingError(DataError):
    """Training preconditions violated (empty data, dimension mismatch)."""


@dataclass(frozen=True)
class MimConfig:
    input_dim: int
    hidden_dim: int = 2048
    num_classes: int = 7
    epochs: int = 5
    batch_size: int = 32
    runs: int = 8
    lr_init: float = 2e-5
    match_coeff: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValidationError(f"input_dim must be >= 1, got {self.input_dim}")
        if not self.hidden_dim >= self.num_classes >= 2:
            raise ValidationError(
                f"need hidden_dim >= num_classes >= 2, got {self.hidden_dim}, {self.num_classes}"
            )
        if min(self.epochs, self.batch_size, self.runs) < 1:
            raise ValidationError("epochs, batch_size and runs must be >= 1")
        if not self.lr_init > 0:
            raise ValidationError(f"lr_init must be > 0, got {self.lr_init}")
        if self.match_coeff < 0:
            raise ValidationError(f"match_coeff must be >= 0, got {self.match_coeff}")


@dataclass
class MimModel:
    """Network parameters plus the provenance of the selected snapshot."""

    w1: np.ndarray  # (d, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden, hidden)
    b2: np.ndarray  # (hidden,)
    w3: np.ndarray  # (hidden, C)
    b3: np.ndarray  # (C,)
    config: MimConfig
    best_val_loss: float = math.inf
    run_id: int = -1
    epoch_id: int = -1

    def validate(self):
        c = self.config
        shapes = {
            "w1": (c.input_dim, c.hidden_dim),
            "b1": (c.hidden_dim,),
            "w2": (c.hidden_dim, c.hidden_dim),
            "b2": (c.hidden_dim,),
            "w3": (c.hidden_dim, c.num_classes),
            "b3": (c.num_classes,),
        }
        for name, want in shapes.items():
            p = getattr(self, name)
            if p.shape != want:
                raise ValidationError(f"{name}: shape {p.shape}, expected {want}")
            if not np.all(np.isfinite(p)):
                raise ValidationError(f"{name}: non-finite parameter values")

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in _PARAM_NAMES}

    def copy(self) -> "MimModel":
        return MimModel(
            *(getattr(self, n).copy() for n in _PARAM_NAMES),
            config=self.config,
            best_val_loss=self.best_val_loss,
            run_id=self.run_id,
            epoch_id=self.epoch_id,
        )


def init_model(config: MimConfig, rng: np.random.Generator) -> MimModel:
    """Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] init for weights and biases."""
    d, h, c = config.input_dim, config.hidden_dim, config.num_classes

    def layer(fan_in, *shape):
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    return MimModel(
        w1=layer(d, d, h),
        b1=layer(d, h),
        w2=layer(h, h, h),
        b2=layer(h, h),
        w3=layer(h, h, c),
        b3=layer(h, c),
        config=config,
    )


# ---------------------------------------------------------------------------
# Forward and losses
# ---------------------------------------------------------------------------


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _forward_batch(model: MimModel, x: np.ndarray):
    """Returns (phi, cache) where cache holds every intermediate for backprop."""
    z1 = x @ model.w1 + model.b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ model.w2 + model.b2
    h2 = np.maximum(z2, 0.0)
    z3 = h2 @ model.w3 + model.b3
    phi = _softmax(z3)
    return phi, (x, z1, h1, z2, h2, phi)


def forward(model: MimModel, x: np.ndarray):
    """Single-vector forward pass: (phi, h1).

    phi is the output probability vector; h1 the first-layer post-ReLU
    hidden state, which doubles as the instance's sense embedding.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.config.input_dim,):
        raise DataError(f"input shape {x.shape}, expected ({model.config.input_dim},)")
    if not np.all(np.isfinite(x)):
        raise DataError("input vector contains non-finite values")
    phi, cache = _forward_batch(model, x[None, :])
    return phi[0], cache[2][0]


def iic_loss(phi_x: np.ndarray, phi_xp: np.ndarray, clamp: float = LOG_CLAMP) -> float:
    """Invariant-information clustering loss of a batch of output pairs.

    Builds the symmetrized joint class matrix and returns the negated mutual
    information, a value in [-ln C, 0]. Zero joint entries contribute
    exactly 0 because clamping applies inside the logarithms only.
    """
    phi_x, phi_xp = _check_batch(phi_x, phi_xp)
    n = phi_x.shape[0]
    joint = (phi_x.T @ phi_xp) / n
    sym = (joint + joint.T) / 2.0
    row = sym.sum(axis=1)
    col = sym.sum(axis=0)
    log_term = (
        np.log(np.maximum(sym, clamp))
        - np.log(np.maximum(row, clamp))[:, None]
        - np.log(np.maximum(col, clamp))[None, :]
    )
    return float(-np.sum(sym * log_term))


def match_loss(phi_x: np.ndarray, phi_xp: np.ndarray, coeff: float) -> float:
    """Negated cosine similarity between paired outputs, summed over the batch."""
    phi_x, phi_xp = _check_batch(phi_x, phi_xp)
    return float(-coeff * _pair_cosines(phi_x, phi_xp).sum())


def total_loss(phi_x: np.ndarray, phi_xp: np.ndarray, coeff: float) -> float:
    return iic_loss(phi_x, phi_xp) + match_loss(phi_x, phi_xp, coeff)


def _pair_cosines(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    return (a * b).sum(axis=1) / (na * nb)


def _check_batch(phi_x, phi_xp):
    phi_x = np.asarray(phi_x, dtype=np.float64)
    phi_xp = np.asarray(phi_xp, dtype=np.float64)
    if phi_x.ndim != 2 or phi_x.shape != phi_xp.shape or phi_x.shape[0] == 0:
        raise DataError(f"batch shapes disagree or empty: {phi_x.shape} vs {phi_xp.shape}")
    for name, p in (("phi_x", phi_x), ("phi_xp", phi_xp)):
        if np.any(p < -1e-9) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-6):
            raise DataError(f"{name}: rows are not probability vectors")
    return phi_x, phi_xp


# ---------------------------------------------------------------------------
# Gradients
# ---------------------------------------------------------------------------


def _loss_and_output_grads(phi_x, phi_xp, coeff, clamp=LOG_CLAMP):
    """Loss value plus dL/dphi for both branches."""
    n = phi_x.shape[0]
    joint = (phi_x.T @ phi_xp) / n
    sym = (joint + joint.T) / 2.0
    row = sym.sum(axis=1)
    col = sym.sum(axis=0)
    log_s = np.log(np.maximum(sym, clamp))
    log_r = np.log(np.maximum(row, clamp))
    log_c = np.log(np.maximum(col, clamp))
    loss_iic = float(-np.sum(sym * (log_s - log_r[:, None] - log_c[None, :])))

    # dL/dS with clamp-aware indicator terms: where a value sits at or below
    # the clamp its log is constant, so the corresponding unit term vanishes.
    ind_s = (sym > clamp).astype(np.float64)
    ind_r = (row > clamp).astype(np.float64)
    ind_c = (col > clamp).astype(np.float64)
    g_sym = -(log_s - log_r[:, None] - log_c[None, :]) - ind_s + ind_r[:, None] + ind_c[None, :]
    g_joint = (g_sym + g_sym.T) / 2.0
    d_phi_x = (phi_xp @ g_joint.T) / n
    d_phi_xp = (phi_x @ g_joint) / n

    cos = _pair_cosines(phi_x, phi_xp)
    loss_match = float(-coeff * cos.sum())
    na = np.linalg.norm(phi_x, axis=1)
    nb = np.linalg.norm(phi_xp, axis=1)
    d_phi_x += -coeff * (phi_xp / (na * nb)[:, None] - (cos / na**2)[:, None] * phi_x)
    d_phi_xp += -coeff * (phi_x / (na * nb)[:, None] - (cos / nb**2)[:, None] * phi_xp)

    return loss_iic + loss_match, d_phi_x, d_phi_xp


def _softmax_backward(phi, d_phi):
    inner = (d_phi * phi).sum(axis=1, keepdims=True)
    return phi * (d_phi - inner)


def _backprop_branch(model, cache, d_phi, grads):
    x, z1, h1, z2, h2, phi = cache
    dz3 = _softmax_backward(phi, d_phi)
    grads["w3"] += h2.T @ dz3
    grads["b3"] += dz3.sum(axis=0)
    dh2 = dz3 @ model.w3.T
    dz2 = dh2 * (z2 > 0.0)
    grads["w2"] += h1.T @ dz2
    grads["b2"] += dz2.sum(axis=0)
    dh1 = dz2 @ model.w2.T
    dz1 = dh1 * (z1 > 0.0)
    grads["w1"] += x.T @ dz1
    grads["b1"] += dz1.sum(axis=0)


def gradient(model: MimModel, x: np.ndarray, xp: np.ndarray):
    """Analytic gradients of the total loss for a batch of vector pairs.

    Returns (loss, grads) with one gradient array per parameter; both
    network branches share weights, so branch gradients accumulate.
    """
    x = np.asarray(x, dtype=np.float64)
    xp = np.asarray(xp, dtype=np.float64)
    if x.shape != xp.shape or x.ndim != 2:
        raise DataError(f"batch shapes disagree: {x.shape} vs {xp.shape}")
    phi_x, cache_x = _forward_batch(model, x)
    phi_xp, cache_xp = _forward_batch(model, xp)
    loss, d_phi_x, d_phi_xp = _loss_and_output_grads(phi_x, phi_xp, model.config.match_coeff)
    grads = {name: np.zeros_like(getattr(model, name)) for name in _PARAM_NAMES}
    _backprop_branch(model, cache_x, d_phi_x, grads)
    _backprop_branch(model, cache_xp, d_phi_xp, grads)
    return loss, grads


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def lr_schedule(lr_init: float, step: int, total_steps: int) -> float:
    """Linear decay to zero: lr at 0-indexed ``step`` of ``total_steps``."""
    return lr_init * (1.0 - step / total_steps)


class _AdamState:
    def __init__(self, model: MimModel):
        self.m = {n: np.zeros_like(getattr(model, n)) for n in _PARAM_NAMES}
        self.v = {n: np.zeros_like(getattr(model, n)) for n in _PARAM_NAMES}
        self.t = 0

    def step(self, model: MimModel, grads, lr: float):
        self.t += 1
        bc1 = 1.0 - ADAM_BETA1**self.t
        bc2 = 1.0 - ADAM_BETA2**self.t
        for name in _PARAM_NAMES:
            g = grads[name]
            self.m[name] = ADAM_BETA1 * self.m[name] + (1.0 - ADAM_BETA1) * g
            self.v[name] = ADAM_BETA2 * self.v[name] + (1.0 - ADAM_BETA2) * g * g
            m_hat = self.m[name] / bc1
            v_hat = self.v[name] / bc2
            getattr(model, name)[...] -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def validation_loss(model: MimModel, val_x: np.ndarray, val_xp: np.ndarray) -> float:
    """Total loss over the whole validation set as a single batch."""
    phi_x, _ = _forward_batch(model, val_x)
    phi_xp, _ = _forward_batch(model, val_xp)
    return total_loss(phi_x, phi_xp, model.config.match_coeff)


def train_runs(train_set: VectorPairSet, val_set: VectorPairSet, config: MimConfig) -> list[MimModel]:
    """All independent runs; each returned model is its run's best epoch.

    Within a run, the per-epoch validation loss (computed on the complete
    validation pairs) selects the snapshot, and the untrained initialization
    counts as epoch 0, so a run's best can never be worse than its start.
    Ties keep the earlier epoch. Deterministic given (data, config, seed).
    """
    if len(train_set) == 0:
        raise TrainingError("training set is empty")
    if train_set.dim != config.input_dim or val_set.dim != config.input_dim:
        raise TrainingError(
            f"dimension mismatch: train {train_set.dim}, val {val_set.dim}, "
            f"config {config.input_dim}"
        )
    x_train = train_set.xs()
    xp_train = train_set.x_primes()
    val_complete = val_set.complete_pairs()
    if len(val_complete) == 0:
        raise TrainingError("validation set has no complete pairs")
    val_x = val_complete.xs()
    val_xp = val_complete.x_primes()

    n = x_train.shape[0]
    steps_per_epoch = (n + config.batch_size - 1) // config.batch_size
    total_steps = steps_per_epoch * config.epochs
    out: list[MimModel] = []
    for run in range(config.runs):
        rng = rng_for(config.seed, train_set.lemma, train_set.pos, run)
        model = init_model(config, rng)
        best = model.copy()
        best.best_val_loss = validation_loss(model, val_x, val_xp)
        best.run_id, best.epoch_id = run, 0
        adam = _AdamState(model)
        step = 0
        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(n)
            for start in range(0, n, config.batch_size):
                batch = order[start : start + config.batch_size]
                lr = lr_schedule(config.lr_init, step, total_steps)
                _, grads = gradient(model, x_train[batch], xp_train[batch])
                adam.step(model, grads, lr)
                step += 1
            loss = validation_loss(model, val_x, val_xp)
            if loss < best.best_val_loss:
                best = model.copy()
                best.best_val_loss = loss
                best.run_id, best.epoch_id = run, epoch
        best.validate()
        out.append(best)
    return out


def train(train_set: VectorPairSet, val_set: VectorPairSet, config: MimConfig) -> MimModel:
    """Best (run, epoch) snapshot across all runs by validation loss."""
    runs = train_runs(train_set, val_set, config)
    best = runs[0]
    for cand in runs[1:]:
        if cand.best_val_loss < best.best_val_loss:
            best = cand
    return best


def embed(model: MimModel, pset: VectorPairSet) -> SenseEmbeddingSet:
    """First-layer hidden states of the original vectors, order preserved."""
    if pset.dim != model.config.input_dim:
        raise DataError(f"set dim {pset.dim} != model input dim {model.config.input_dim}")
    x = pset.xs()
    h1 = np.maximum(x @ model.w1 + model.b1, 0.0)
    return SenseEmbeddingSet(pset.lemma, pset.pos, pset.layer, pset.ids(), h1)


# ---------------------------------------------------------------------------
# Checkpoint I/O
# ---------------------------------------------------------------------------
#
# Layout: one UTF-8 header line
#   #MIM-CKPT v1 input_dim=.. hidden_dim=.. num_classes=.. epochs=..
#   batch_size=.. runs=.. lr_init=.. match_coeff=.. seed=.. run_id=..
#   epoch_id=.. best_val_loss=..
# followed by the parameters as little-endian float64, row-major, in order
# w1, b1, w2, b2, w3, b3.

_CKPT_MAGIC = "#MIM-CKPT v1"


def save_model(model: MimModel, path) -> None:
    model.validate()
    c = model.config
    header = (
        f"{_CKPT_MAGIC} input_dim={c.input_dim} hidden_dim={c.hidden_dim} "
        f"num_classes={c.num_classes} epochs={c.epochs} batch_size={c.batch_size} "
        f"runs={c.runs} lr_init={c.lr_init!r} match_coeff={c.match_coeff!r} "
        f"seed={c.seed} run_id={model.run_id} epoch_id={model.epoch_id} "
        f"best_val_loss={model.best_val_loss!r}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        for name in _PARAM_NAMES:
            fh.write(np.ascontiguousarray(getattr(model, name), dtype="<f8").tobytes())


def load_model(path) -> MimModel:
    path = Path(path)
    with open(path, "rb") as fh:
        header = fh.readline().decode("utf-8").rstrip("\n")
        blob = fh.read()
    tokens = header.split(" ")
    if len(tokens) < 3 or " ".join(tokens[:2]) != _CKPT_MAGIC:
        raise DataError(f"{path}: not a model checkpoint")
    fields = {}
    for token in tokens[2:]:
        key, _, value = token.partition("=")
        fields[key] = value
    try:
        config = MimConfig(
            input_dim=int(fields["input_dim"]),
            hidden_dim=int(fields["hidden_dim"]),
            num_classes=int(fields["num_classes"]),
            epochs=int(fields["epochs"]),
            batch_size=int(fields["batch_size"]),
            runs=int(fields["runs"]),
            lr_init=float(fields["lr_init"]),
            match_coeff=float(fields["match_coeff"]),
            seed=int(fields["seed"]),
        )
        run_id = int(fields["run_id"])
        epoch_id = int(fields["epoch_id"])
        best_val_loss = float(fields["best_val_loss"])
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: bad checkpoint header ({exc})") from None
    d, h, c = config.input_dim, config.hidden_dim, config.num_classes
    shapes = [(d, h), (h,), (h, h), (h,), (h, c), (c,)]
    want = sum(int(np.prod(s)) for s in shapes) * 8
    if len(blob) != want:
        raise DataError(f"{path}: parameter body holds {len(blob)} bytes, expected {want}")
    flat = np.frombuffer(blob, dtype="<f8")
    arrays = []
    offset = 0
    for shape in shapes:
        size = int(np.prod(shape))
        arrays.append(flat[offset : offset + size].reshape(shape).copy())
        offset += size
    model = MimModel(*arrays, config=config, best_val_loss=best_val_loss, run_id=run_id, epoch_id=epoch_id)
    model.validate()
    return model


def baseline_model(config: MimConfig) -> MimModel:
    """All-zero parameters: forward gives uniform phi and zero embeddings."""
    d, h, c = config.input_dim, config.hidden_dim, config.num_classes
    return MimModel(
        w1=np.zeros((d, h)),
        b1=np.zeros(h),
        w2=np.zeros((h, h)),
        b2=np.zeros(h),
        w3=np.zeros((h, c)),
        b3=np.zeros(c),
        config=config,
    )


def config_with(config: MimConfig, **overrides) -> MimConfig:
    return replace(config, **overrides)
