"""Training losses over logits sequences, with closed-form gradients.

Three ingredients combine into the training objective:

* cross-entropy over the full vocabulary, averaged over all positions;
* a structure loss that re-weights the separator positions by the number
  of separators the model currently gets wrong (missed), so separator
  timing receives extra gradient exactly while it is still wrong;
* a slot loss: cross-entropy whose softmax denominator ranges only over
  the tokens legal in the position's FSM state, turning content positions
  into small classification problems.

All losses return both a scalar and a dense ``(T, V)`` gradient with
respect to the logits; gradient rows outside a loss's support are zero.
The count of missed separators is treated as a constant (argmax is not
differentiable).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .formats import FormatSpec
from .masks import DecodeState, MaskTable, advance, compile_masks, initial_state, legal_tokens
from .vocab import Vocabulary

__all__ = [
    "LossWeights",
    "LossResult",
    "TargetAlignment",
    "AlignmentViolation",
    "ViolationKind",
    "align_target",
    "cross_entropy",
    "structure_loss",
    "slot_loss",
    "combined_loss",
]


@dataclass(frozen=True)
class LossWeights:
    """Scalar weights for the combined objective (all non-negative)."""

    w_ce: float = 0.5
    w_st: float = 0.2
    w_sl: float = 0.3
    w_miss: float = 0.33

    def __post_init__(self):
        for name in ("w_ce", "w_st", "w_sl", "w_miss"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class LossResult:
    value: float
    grad: np.ndarray


class ViolationKind(Enum):
    LENGTH = "length"
    SOURCE = "source"
    TAGSET = "tagset"


class AlignmentViolation(ValueError):
    """A gold target breaks its format; carries the first illegal position."""

    def __init__(self, position: int, kind: ViolationKind, detail: str):
        self.position = position
        self.kind = kind
        self.detail = detail
        super().__init__(f"position {position} ({kind.value}): {detail}")


@dataclass
class TargetAlignment:
    """A gold sequence annotated with its FSM replay.

    ``sep_positions`` are the positions holding slot/object separators or
    EOS; ``states`` holds the FSM state *before* each position; ``legal``
    caches ``legal_tokens`` per position (shape ``(T, V)``) for the slot
    loss.
    """

    target: list[int]
    sep_positions: list[int]
    states: list[DecodeState]
    legal: np.ndarray

    @property
    def length(self) -> int:
        return len(self.target)

    def content_positions(self) -> list[int]:
        seps = set(self.sep_positions)
        return [t for t in range(len(self.target)) if t not in seps]


def _violation_for(table: MaskTable, spec: FormatSpec, state: DecodeState, t: int, token: int) -> AlignmentViolation:
    separators = {table.slot_sep, table.obj_sep, table.eos}
    if token in separators or token in (table.pad, table.unk):
        return AlignmentViolation(
            t, ViolationKind.LENGTH, f"token {token} illegal here (slot {state.slot_index})"
        )
    kind_at_slot = spec.slots[state.slot_index].kind
    if kind_at_slot.value == "source":
        return AlignmentViolation(t, ViolationKind.SOURCE, f"token {token} not in source sentence")
    if kind_at_slot.value == "choice":
        return AlignmentViolation(t, ViolationKind.TAGSET, f"token {token} not in any bound choice")
    return AlignmentViolation(t, ViolationKind.LENGTH, f"token {token} illegal in slot {state.slot_index}")


def align_target(
    spec: FormatSpec,
    v: Vocabulary,
    target: list[int],
    source: list[int],
    table: MaskTable | None = None,
) -> TargetAlignment:
    """Replay the FSM over ``target`` and record states and separators.

    ``target`` must be non-empty and end with EOS. Raises
    :class:`AlignmentViolation` at the first position where the gold token
    is illegal under the format — the filtering predicate for training data.
    """
    if not target:
        raise AlignmentViolation(0, ViolationKind.LENGTH, "empty target")
    if table is None:
        table = compile_masks(spec, v, source)
    if target[-1] != table.eos:
        raise AlignmentViolation(
            len(target) - 1, ViolationKind.LENGTH, "target does not end with EOS"
        )

    state = initial_state()
    states: list[DecodeState] = []
    seps: list[int] = []
    legal = np.zeros((len(target), table.vocab_size), dtype=bool)
    for t, token in enumerate(target):
        if state.finished:
            raise AlignmentViolation(t, ViolationKind.LENGTH, "tokens after EOS")
        mask = legal_tokens(table, state)
        if not mask[token]:
            raise _violation_for(table, spec, state, t, token)
        states.append(state)
        legal[t] = mask
        if token in (table.slot_sep, table.obj_sep, table.eos):
            seps.append(t)
        state = advance(table, state, token)
    return TargetAlignment(target=list(target), sep_positions=seps, states=states, legal=legal)


def _check_dims(logits: np.ndarray, align: TargetAlignment) -> np.ndarray:
    logits = np.asarray(logits, dtype=float)
    if logits.ndim != 2 or logits.shape[0] != align.length:
        raise ValueError(f"logits shape {logits.shape} does not match target length {align.length}")
    return logits


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def cross_entropy(logits: np.ndarray, align: TargetAlignment) -> LossResult:
    """Mean negative log-likelihood over every position, full vocabulary."""
    logits = _check_dims(logits, align)
    T = align.length
    logp = _log_softmax(logits)
    rows = np.arange(T)
    gold = np.asarray(align.target)
    value = float(-logp[rows, gold].mean())
    grad = np.exp(logp)
    grad[rows, gold] -= 1.0
    grad /= T
    return LossResult(value, grad)


def structure_loss(logits: np.ndarray, align: TargetAlignment, w_miss: float = 0.33) -> LossResult:
    """Separator-position loss scaled by the count of missed separators.

    ``missed`` counts separator positions where the gold token does not win
    the argmax (ties break toward the lowest id, matching greedy decoding).
    The loss is ``sum over separator positions of nll * missed * w_miss``;
    with every separator missed this grows quadratically in the miss count.
    Zero misses make the loss exactly zero regardless of the logits.
    """
    logits = _check_dims(logits, align)
    S = align.sep_positions
    grad = np.zeros_like(logits)
    if not S:
        return LossResult(0.0, grad)
    gold = np.asarray([align.target[t] for t in S])
    sub = logits[S]
    missed = int((sub.argmax(axis=1) != gold).sum())
    if missed == 0:
        return LossResult(0.0, grad)
    logp = _log_softmax(sub)
    value = float(-(logp[np.arange(len(S)), gold]).sum() * missed * w_miss)
    g = np.exp(logp)
    g[np.arange(len(S)), gold] -= 1.0
    grad[S] = g * (missed * w_miss)
    return LossResult(value, grad)


def slot_loss(logits: np.ndarray, align: TargetAlignment, table: MaskTable) -> LossResult:
    """Masked cross-entropy over content positions.

    The softmax denominator at position ``t`` ranges only over the tokens
    legal in the FSM state before ``t``; separator positions are excluded
    (they are supervised by the structure loss and plain cross-entropy).
    Zero positions in scope yield a zero loss.
    """
    logits = _check_dims(logits, align)
    C = align.content_positions()
    grad = np.zeros_like(logits)
    if not C:
        return LossResult(0.0, grad)
    legal = align.legal[C]
    sub = np.where(legal, logits[C], -np.inf)
    gold = np.asarray([align.target[t] for t in C])
    if not legal[np.arange(len(C)), gold].all():
        raise ValueError("gold content token illegal under the mask table")
    shifted = sub - sub.max(axis=1, keepdims=True)
    expd = np.where(legal, np.exp(shifted), 0.0)
    denom = expd.sum(axis=1, keepdims=True)
    p = expd / denom
    value = float(-np.log(p[np.arange(len(C)), gold]).mean())
    g = p
    g[np.arange(len(C)), gold] -= 1.0
    grad[C] = g / len(C)
    return LossResult(value, grad)


def combined_loss(
    logits: np.ndarray,
    align: TargetAlignment,
    table: MaskTable,
    w: LossWeights = LossWeights(),
) -> LossResult:
    """Weighted sum of cross-entropy, structure, and slot losses."""
    ce = cross_entropy(logits, align)
    st = structure_loss(logits, align, w.w_miss)
    sl = slot_loss(logits, align, table)
    value = w.w_ce * ce.value + w.w_st * st.value + w.w_sl * sl.value
    grad = w.w_ce * ce.grad + w.w_st * st.grad + w.w_sl * sl.grad
    return LossResult(value, grad)
