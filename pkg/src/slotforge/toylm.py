"""A tiny trainable logits model conditioned on (previous token, FSM state).

The model is a lookup table: ``logits = W[prev, state] + b`` where ``prev``
is the previous target token (the PAD row doubles as the start-of-sequence
row, since PAD can never be generated) and ``state`` is the dense FSM state
index (slots 0..n-1 plus one extra index for the object boundary). This is
the smallest family whose optimum matches the Markov statistics of the
synthetic tasks, so ablation differences come from the losses and the
decoding mode, not model capacity.

Caveat worth knowing: the state feature is fed to the model even when it is
trained with plain cross-entropy. A full-scale system would receive format
information only through its input text; at desk scale the shared feature
keeps the model families identical across ablation cells.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Example, encode_target
from .formats import FormatSpec, bind_tagset
from .losses import LossResult, LossWeights, TargetAlignment, align_target, cross_entropy, slot_loss, structure_loss
from .masks import DecodeState, MaskTable, compile_masks, state_index
from .vocab import Vocabulary

__all__ = ["ToyLM", "EpochMetrics", "train", "prepare_examples", "save_model", "load_model", "batch_gradient"]

_MAGIC = b"SFLM"
_VERSION = 1


@dataclass
class ToyLM:
    W: np.ndarray  # (V, K, V): previous token x state index x next-token logits
    b: np.ndarray  # (V,)
    pad: int  # row used for the empty prefix

    @classmethod
    def zeros(cls, vocab_size: int, slot_count: int, pad: int) -> "ToyLM":
        K = slot_count + 1
        return cls(W=np.zeros((vocab_size, K, vocab_size)), b=np.zeros(vocab_size), pad=pad)

    @classmethod
    def seeded(cls, vocab_size: int, slot_count: int, pad: int, seed: int, scale: float = 0.01) -> "ToyLM":
        rng = np.random.default_rng(seed)
        K = slot_count + 1
        return cls(
            W=rng.normal(0.0, scale, size=(vocab_size, K, vocab_size)),
            b=np.zeros(vocab_size),
            pad=pad,
        )

    @property
    def vocab_size(self) -> int:
        return self.W.shape[0]

    @property
    def state_count(self) -> int:
        return self.W.shape[1]

    @property
    def slot_count(self) -> int:
        return self.state_count - 1

    def __call__(self, prefix: list[int], state: DecodeState, source: list[int]) -> np.ndarray:
        prev = prefix[-1] if prefix else self.pad
        return self.W[prev, state_index(state, self.slot_count)] + self.b

    def sequence_logits(self, prev_ids: np.ndarray, state_ids: np.ndarray) -> np.ndarray:
        return self.W[prev_ids, state_ids] + self.b


@dataclass
class PreparedExample:
    source: list[int]
    table: MaskTable
    align: TargetAlignment
    prev_ids: np.ndarray
    state_ids: np.ndarray


@dataclass
class EpochMetrics:
    epoch: int
    ce: float
    st: float
    sl: float
    combined: float
    token_accuracy: float


def prepare_examples(
    examples: list[Example],
    spec: FormatSpec,
    v: Vocabulary,
    default_tags: list[str] | None = None,
) -> list[PreparedExample]:
    """Bind, compile and align every example once, for reuse across epochs.

    Examples carrying their own ``tags`` are bound with them; otherwise
    ``default_tags`` (or an already-bound spec) applies. Raises on examples
    whose gold target violates the format — filter first.
    """
    prepared = []
    for ex in examples:
        tags = ex.tags if ex.tags else default_tags
        bound = bind_tagset(spec, tags) if tags else spec
        source = v.encode(ex.input)
        table = compile_masks(bound, v, source)
        target = encode_target(v, ex.target)
        align = align_target(bound, v, target, source, table=table)
        prev_ids = np.asarray([v.pad] + align.target[:-1])
        state_ids = np.asarray([state_index(s, bound.slot_count) for s in align.states])
        prepared.append(PreparedExample(source, table, align, prev_ids, state_ids))
    return prepared


def _example_loss(m: ToyLM, ex: PreparedExample, w: LossWeights) -> tuple[LossResult, dict[str, float]]:
    logits = m.sequence_logits(ex.prev_ids, ex.state_ids)
    ce = cross_entropy(logits, ex.align)
    st = structure_loss(logits, ex.align, w.w_miss)
    sl = slot_loss(logits, ex.align, ex.table)
    res = LossResult(
        value=w.w_ce * ce.value + w.w_st * st.value + w.w_sl * sl.value,
        grad=w.w_ce * ce.grad + w.w_st * st.grad + w.w_sl * sl.grad,
    )
    acc = float((logits.argmax(axis=1) == np.asarray(ex.align.target)).mean())
    parts = {"ce": ce.value, "st": st.value, "sl": sl.value, "acc": acc}
    return res, parts


def train(
    m: ToyLM,
    prepared: list[PreparedExample],
    weights: LossWeights,
    epochs: int,
    lr: float,
    seed: int = 0,
) -> tuple[ToyLM, list[EpochMetrics]]:
    """Plain per-example SGD on the combined loss; deterministic per seed."""
    rng = np.random.default_rng(seed)
    history: list[EpochMetrics] = []
    order = np.arange(len(prepared))
    for epoch in range(epochs):
        rng.shuffle(order)
        sums = {"ce": 0.0, "st": 0.0, "sl": 0.0, "combined": 0.0, "acc": 0.0}
        for idx in order:
            ex = prepared[idx]
            res, parts = _example_loss(m, ex, weights)
            np.add.at(m.W, (ex.prev_ids, ex.state_ids), -lr * res.grad)
            m.b -= lr * res.grad.sum(axis=0)
            sums["ce"] += parts["ce"]
            sums["st"] += parts["st"]
            sums["sl"] += parts["sl"]
            sums["acc"] += parts["acc"]
            sums["combined"] += res.value
        n = max(len(prepared), 1)
        history.append(
            EpochMetrics(
                epoch=epoch,
                ce=sums["ce"] / n,
                st=sums["st"] / n,
                sl=sums["sl"] / n,
                combined=sums["combined"] / n,
                token_accuracy=sums["acc"] / n,
            )
        )
    return m, history


def batch_gradient(
    m: ToyLM, prepared: list[PreparedExample], weights: LossWeights
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean combined loss over the batch and its gradient wrt (W, b).

    Accumulates without updating; used for finite-difference checks.
    """
    gW = np.zeros_like(m.W)
    gb = np.zeros_like(m.b)
    total = 0.0
    for ex in prepared:
        res, _ = _example_loss(m, ex, weights)
        np.add.at(gW, (ex.prev_ids, ex.state_ids), res.grad)
        gb += res.grad.sum(axis=0)
        total += res.value
    n = max(len(prepared), 1)
    return total / n, gW / n, gb / n


def save_model(m: ToyLM, path: str | Path) -> None:
    """Write the parameters as a flat binary file with a 16-byte header."""
    header = _MAGIC + struct.pack("<III", m.vocab_size, m.state_count, _VERSION)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(struct.pack("<I", m.pad))
        m.W.astype("<f8").tofile(fh)
        m.b.astype("<f8").tofile(fh)


def load_model(path: str | Path) -> ToyLM:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:4] != _MAGIC:
            raise ValueError(f"{path} is not a model file")
        V, K, version = struct.unpack("<III", header[4:])
        if version != _VERSION:
            raise ValueError(f"unsupported model version {version}")
        (pad,) = struct.unpack("<I", fh.read(4))
        W = np.fromfile(fh, dtype="<f8", count=V * K * V).reshape(V, K, V)
        b = np.fromfile(fh, dtype="<f8", count=V)
    return ToyLM(W=W, b=b, pad=pad)
