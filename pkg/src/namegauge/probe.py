"""Frozen-feature accuracy-score classifier.

A two-linear-layer head with a GELU between (two stacked linear maps
would collapse to one), trained with cross-entropy and AdamW under a
warmup-linear schedule. The checkpoint returned is the one with the best
binarized validation F1 macro, so selection and final reporting agree.

Everything runs in float64 numpy, single-threaded and bit-deterministic
for a fixed seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .errors import ProbeError
from .metrics import binarize_score, f1_macro
from .rng import Xoshiro256StarStar
from .storage import atomic_write

CSPH_MAGIC = b"CSPH"
CSPH_VERSION = 1
N_CLASSES = 3

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact (erf-form) GELU."""
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return cdf + x * pdf


@dataclass
class TrainConfig:
    max_steps: int = 8000
    batch_size: int = 16
    peak_lr: float = 1e-5
    warmup_steps: int = 500
    eval_interval: int = 100
    seed: int = 42
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    hidden: int = 256

    def __post_init__(self):
        if self.warmup_steps > self.max_steps:
            raise ProbeError(
                f"warmup_steps {self.warmup_steps} exceeds max_steps {self.max_steps}"
            )
        if self.batch_size < 1:
            raise ProbeError("batch_size must be >= 1")
        if self.peak_lr <= 0 or self.eps <= 0:
            raise ProbeError("rates must be positive")
        if self.hidden < 1:
            raise ProbeError("hidden width must be >= 1")


@dataclass
class ProbeHead:
    """Parameters of the two-layer head; W1 is h x d, W2 is C x h."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @property
    def d(self) -> int:
        return self.W1.shape[1]

    @property
    def h(self) -> int:
        return self.W1.shape[0]

    @property
    def C(self) -> int:
        return self.W2.shape[0]

    def params(self) -> dict:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def copy(self) -> "ProbeHead":
        return ProbeHead(
            W1=self.W1.copy(), b1=self.b1.copy(),
            W2=self.W2.copy(), b2=self.b2.copy(),
        )


def init_head(d: int, h: int, C: int = N_CLASSES, seed: int = 0) -> ProbeHead:
    """Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) weights, zero biases.

    Entries are drawn row-major, W1 first then W2, from the seeded
    generator, so a seed fully determines the head.
    """
    if min(d, h, C) < 1:
        raise ProbeError(f"dimensions must be >= 1, got d={d} h={h} C={C}")
    rng = Xoshiro256StarStar(seed)

    def draw(rows, cols, fan_in):
        bound = np.sqrt(1.0 / fan_in)
        flat = [rng.uniform(-bound, bound) for _ in range(rows * cols)]
        return np.array(flat, dtype=np.float64).reshape(rows, cols)

    return ProbeHead(
        W1=draw(h, d, d),
        b1=np.zeros(h),
        W2=draw(C, h, h),
        b2=np.zeros(C),
    )


def forward(head: ProbeHead, x: np.ndarray) -> np.ndarray:
    """Logits for a single feature vector or a (B, d) batch."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != head.d:
        raise ProbeError(f"feature dim {x.shape[1]} != head input dim {head.d}")
    hidden = gelu(x @ head.W1.T + head.b1)
    logits = hidden @ head.W2.T + head.b2
    return logits[0] if single else logits


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=-1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy and its gradient w.r.t. the logits.

    gradient = (softmax - one_hot) / batch; stabilized by max-subtraction.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ProbeError(f"expected (batch, C) logits, got shape {logits.shape}")
    batch, n_classes = logits.shape
    if batch < 1:
        raise ProbeError("cross_entropy needs a non-empty batch")
    if labels.shape != (batch,):
        raise ProbeError(f"labels shape {labels.shape} != ({batch},)")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ProbeError(
            f"labels must lie in [0, {n_classes - 1}], got "
            f"[{labels.min()}, {labels.max()}]"
        )
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    log_probs = shifted - log_z[:, None]
    loss = -log_probs[np.arange(batch), labels].mean()
    grad = np.exp(log_probs)
    grad[np.arange(batch), labels] -= 1.0
    grad /= batch
    return loss, grad


def loss_and_grads(head: ProbeHead, x: np.ndarray, labels: np.ndarray):
    """Cross-entropy loss plus gradients for every head parameter."""
    x = np.asarray(x, dtype=np.float64)
    z1 = x @ head.W1.T + head.b1
    hidden = gelu(z1)
    logits = hidden @ head.W2.T + head.b2
    loss, dlogits = cross_entropy(logits, labels)
    d_hidden = dlogits @ head.W2
    dz1 = d_hidden * gelu_grad(z1)
    grads = {
        "W2": dlogits.T @ hidden,
        "b2": dlogits.sum(axis=0),
        "W1": dz1.T @ x,
        "b1": dz1.sum(axis=0),
    }
    return loss, grads


def lr_at(step: int, cfg: TrainConfig) -> float:
    """Linear warmup to peak_lr, then linear decay to 0 at max_steps."""
    if step < 1 or step > cfg.max_steps:
        raise ProbeError(f"step {step} outside [1, {cfg.max_steps}]")
    if cfg.warmup_steps > 0 and step <= cfg.warmup_steps:
        return cfg.peak_lr * step / cfg.warmup_steps
    if cfg.max_steps == cfg.warmup_steps:
        return cfg.peak_lr
    return cfg.peak_lr * (cfg.max_steps - step) / (cfg.max_steps - cfg.warmup_steps)


class AdamWState:
    """First/second moment buffers plus the shared step counter."""

    def __init__(self, params: dict):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0


def adamw_step(
    params: dict, grads: dict, state: AdamWState, lr: float, cfg: TrainConfig
) -> None:
    """One decoupled-weight-decay Adam update, in place.

    theta <- theta - lr*wd*theta - lr*m_hat/(sqrt(v_hat)+eps), with both
    terms computed from the pre-update parameters.
    """
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise ProbeError(
                f"non-finite gradient for {name!r} at optimizer step "
                f"{state.t + 1}; aborting"
            )
    state.t += 1
    bc1 = 1.0 - cfg.beta1**state.t
    bc2 = 1.0 - cfg.beta2**state.t
    for name, theta in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        theta -= lr * cfg.weight_decay * theta + lr * m_hat / (np.sqrt(v_hat) + cfg.eps)


@dataclass(frozen=True)
class EvalRecord:
    step: int
    train_loss: float
    val_f1: float
    lr: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)

    @property
    def best(self) -> EvalRecord:
        return max(self.records, key=lambda r: (r.val_f1, -r.step))

    @property
    def best_step(self) -> int:
        return self.best.step

    @property
    def best_f1(self) -> float:
        return self.best.val_f1

    def to_tsv(self, path) -> None:
        with atomic_write(path, encoding="utf-8") as handle:
            handle.write("step\ttrain_loss\tval_f1_macro\tlr\n")
            for rec in self.records:
                handle.write(
                    f"{rec.step}\t{rec.train_loss:.6f}\t"
                    f"{rec.val_f1:.6f}\t{rec.lr:.3e}\n"
                )


@dataclass
class TrainedProbe:
    head: ProbeHead
    seed: int
    best_step: int
    best_f1: float


def predict(head: ProbeHead, features: np.ndarray):
    """(scores, probabilities); argmax ties break toward the lower class."""
    logits = forward(head, features)
    probs = softmax(logits)
    scores = np.argmax(probs, axis=-1)
    return scores, probs


def _binarized_f1(head: ProbeHead, features: np.ndarray, labels: np.ndarray) -> float:
    scores, _ = predict(head, features)
    preds = [binarize_score(int(s)) for s in np.atleast_1d(scores)]
    truth = [binarize_score(int(l)) for l in labels]
    return f1_macro(preds, truth).macro


def train_probe(
    train_x: np.ndarray,
    train_y: np.ndarray,
    val_x: np.ndarray,
    val_y: np.ndarray,
    cfg: TrainConfig,
):
    """Train the head on frozen features; return (TrainedProbe, TrainHistory).

    Mini-batches are drawn by seeded reshuffling each epoch (the last
    short batch is kept). Every eval_interval steps the binarized
    validation F1 macro is computed and the best-scoring parameters are
    retained; ties keep the earlier step. History row at step 0 records
    the untrained baseline.
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    val_x = np.asarray(val_x, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.int64)
    val_y = np.asarray(val_y, dtype=np.int64)
    if len(train_x) == 0 or len(val_x) == 0:
        raise ProbeError("train and validation sets must be non-empty")
    if train_x.shape[1] != val_x.shape[1]:
        raise ProbeError(
            f"feature dim mismatch: train {train_x.shape[1]} vs val {val_x.shape[1]}"
        )
    head = init_head(train_x.shape[1], cfg.hidden, N_CLASSES, cfg.seed)
    state = AdamWState(head.params())
    batch_rng = Xoshiro256StarStar(cfg.seed ^ 0x9E3779B97F4A7C15)

    history = TrainHistory()
    init_loss, _ = cross_entropy(forward(head, train_x), train_y)
    init_f1 = _binarized_f1(head, val_x, val_y)
    history.records.append(
        EvalRecord(step=0, train_loss=float(init_loss), val_f1=init_f1, lr=0.0)
    )
    best_head = head.copy()
    best_f1 = init_f1
    best_step = 0

    order: list = []
    cursor = 0
    interval_loss = 0.0
    interval_count = 0
    params = head.params()
    for step in range(1, cfg.max_steps + 1):
        if cursor >= len(order):
            order = list(range(len(train_x)))
            batch_rng.shuffle(order)
            cursor = 0
        batch_idx = order[cursor : cursor + cfg.batch_size]
        cursor += cfg.batch_size
        loss, grads = loss_and_grads(head, train_x[batch_idx], train_y[batch_idx])
        adamw_step(params, grads, state, lr_at(step, cfg), cfg)
        interval_loss += float(loss)
        interval_count += 1
        if step % cfg.eval_interval == 0 or step == cfg.max_steps:
            val_f1 = _binarized_f1(head, val_x, val_y)
            history.records.append(
                EvalRecord(
                    step=step,
                    train_loss=interval_loss / interval_count,
                    val_f1=val_f1,
                    lr=lr_at(step, cfg),
                )
            )
            interval_loss = 0.0
            interval_count = 0
            if val_f1 > best_f1:
                best_f1 = val_f1
                best_step = step
                best_head = head.copy()
    trained = TrainedProbe(
        head=best_head, seed=cfg.seed, best_step=best_step, best_f1=best_f1
    )
    return trained, history


def save_probe(trained: TrainedProbe, path) -> None:
    head = trained.head
    with atomic_write(path, mode="wb") as handle:
        handle.write(CSPH_MAGIC)
        handle.write(
            struct.pack(
                "<IIIIQQd",
                CSPH_VERSION,
                head.d,
                head.h,
                head.C,
                trained.seed,
                trained.best_step,
                trained.best_f1,
            )
        )
        for block in (head.W1, head.b1, head.W2, head.b2):
            handle.write(block.astype("<f4").tobytes())


def load_probe(path) -> TrainedProbe:
    with open(path, "rb") as handle:
        data = handle.read()
    if data[:4] != CSPH_MAGIC:
        raise ProbeError(f"bad probe magic {data[:4]!r}")
    version, d, h, C, seed, best_step, best_f1 = struct.unpack_from("<IIIIQQd", data, 4)
    if version != CSPH_VERSION:
        raise ProbeError(f"unsupported probe version {version}")
    offset = 4 + struct.calcsize("<IIIIQQd")
    sizes = [("W1", (h, d)), ("b1", (h,)), ("W2", (C, h)), ("b2", (C,))]
    blocks = {}
    for name, shape in sizes:
        count = int(np.prod(shape))
        end = offset + 4 * count
        if end > len(data):
            raise ProbeError(f"truncated probe file in block {name!r}")
        blocks[name] = (
            np.frombuffer(data, dtype="<f4", count=count, offset=offset)
            .astype(np.float64)
            .reshape(shape)
        )
        offset = end
    if offset != len(data):
        raise ProbeError(f"{len(data) - offset} trailing bytes in probe file")
    head = ProbeHead(**blocks)
    return TrainedProbe(head=head, seed=seed, best_step=best_step, best_f1=best_f1)
