"""Per-slot token masks and the decoding finite state machine.

A compiled :class:`MaskTable` holds, for each slot, a boolean vector over
the vocabulary marking legal content tokens. The FSM walks slots left to
right: a slot separator advances the slot counter, an object separator
resets it to zero (object boundary), EOS is legal only at a boundary, and
every separator requires at least one content token in the current slot
first — so a slot separator can never follow another separator, and never
appears in the final slot.

State is a small immutable value (:class:`DecodeState`); the table is
immutable and shareable across decoding sequences.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .formats import FormatSpec, SlotKind
from .vocab import Vocabulary

__all__ = [
    "MaskTable",
    "DecodeState",
    "compile_masks",
    "initial_state",
    "legal_tokens",
    "advance",
    "advance_lenient",
    "state_index",
    "fsm_accepts",
    "dump_mask_table",
]


@dataclass(frozen=True)
class DecodeState:
    """FSM position: which slot, how many content tokens emitted in it.

    ``at_object_boundary`` is true only before the first token of an object
    (then ``slot_index == 0`` and ``tokens_in_slot == 0``). ``finished`` is
    absorbing; no transitions leave it.
    """

    slot_index: int = 0
    tokens_in_slot: int = 0
    at_object_boundary: bool = True
    finished: bool = False


def initial_state() -> DecodeState:
    return DecodeState()


@dataclass(frozen=True)
class MaskTable:
    """Per-slot content masks plus the FSM's separator bookkeeping.

    ``content`` has shape ``(slot_count, V)``; row ``k`` is true exactly on
    the content tokens legal inside slot ``k``. Separators, EOS, PAD and UNK
    are never content tokens — their legality is decided by the FSM state,
    in :func:`legal_tokens`.
    """

    content: np.ndarray
    slot_count: int
    vocab_size: int
    slot_sep: int
    obj_sep: int
    eos: int
    pad: int
    unk: int

    def content_mask(self, slot: int) -> np.ndarray:
        return self.content[slot]


def compile_masks(spec: FormatSpec, v: Vocabulary, source: list[int]) -> MaskTable:
    """Compile a bound format plus a source sentence into a mask table.

    Source slots allow exactly the token ids occurring in ``source``; choice
    slots allow the union of the tokens of all choices; Any slots allow every
    non-special id. Raises if the spec still has an unbound tagset or if any
    slot's mask comes out empty (such a slot would be a dead state).
    """
    if not spec.is_bound:
        raise ValueError("cannot compile masks for a format with an unbound tagset slot")
    V = len(v)
    specials = list(v.special_ids)
    source_ids = {i for i in source if i not in specials}

    content = np.zeros((spec.slot_count, V), dtype=bool)
    for k, slot in enumerate(spec.slots):
        if slot.kind is SlotKind.ANY:
            content[k, :] = True
            content[k, specials] = False
        elif slot.kind is SlotKind.SOURCE:
            for i in source_ids:
                content[k, i] = True
        else:
            for choice in slot.choices:
                for tok in v.encode(choice):
                    if tok not in specials:
                        content[k, tok] = True
        if not content[k].any():
            kind = slot.kind.value
            raise ValueError(f"slot {k} ({kind}) has an empty mask; no legal content token in vocabulary")
    return MaskTable(
        content=content,
        slot_count=spec.slot_count,
        vocab_size=V,
        slot_sep=v.slot_sep,
        obj_sep=v.obj_sep,
        eos=v.eos,
        pad=v.pad,
        unk=v.unk,
    )


def legal_tokens(table: MaskTable, state: DecodeState) -> np.ndarray:
    """Boolean vector over the vocabulary of tokens legal in ``state``.

    Content follows the current slot's mask. A slot separator needs at
    least one content token and a following slot to exist; the object
    separator needs at least one content token in the final slot; EOS is
    legal only at an object boundary.
    """
    if state.finished:
        raise ValueError("no legal tokens: decoding already finished")
    mask = table.content[state.slot_index].copy()
    if state.tokens_in_slot >= 1 and state.slot_index < table.slot_count - 1:
        mask[table.slot_sep] = True
    if state.tokens_in_slot >= 1 and state.slot_index == table.slot_count - 1:
        mask[table.obj_sep] = True
    if state.at_object_boundary:
        mask[table.eos] = True
    return mask


def advance(table: MaskTable, state: DecodeState, token: int) -> DecodeState:
    """Advance the FSM by one legal token; raises on an illegal one."""
    if not legal_tokens(table, state)[token]:
        raise ValueError(
            f"illegal token {token} in slot {state.slot_index} "
            f"(tokens_in_slot={state.tokens_in_slot}, boundary={state.at_object_boundary})"
        )
    if token == table.slot_sep:
        return DecodeState(state.slot_index + 1, 0, False, False)
    if token == table.obj_sep:
        return DecodeState(0, 0, True, False)
    if token == table.eos:
        return replace(state, finished=True)
    return DecodeState(state.slot_index, state.tokens_in_slot + 1, False, False)


def advance_lenient(table: MaskTable, state: DecodeState, token: int) -> DecodeState:
    """Best-effort state tracking for unconstrained decoding.

    Separators drive the slot counter regardless of legality (the counter
    saturates at the final slot); anything else counts as content. Used only
    for diagnostics and for models that take the state as an input feature.
    """
    if state.finished:
        return state
    if token == table.slot_sep:
        return DecodeState(min(state.slot_index + 1, table.slot_count - 1), 0, False, False)
    if token == table.obj_sep:
        return DecodeState(0, 0, True, False)
    if token == table.eos:
        return replace(state, finished=True)
    return DecodeState(state.slot_index, state.tokens_in_slot + 1, False, False)


def state_index(state: DecodeState, slot_count: int) -> int:
    """Map a state to a dense feature index: slots 0..n-1, boundary = n."""
    return slot_count if state.at_object_boundary else state.slot_index


def fsm_accepts(table: MaskTable, ids: list[int]) -> bool:
    """Whether the FSM accepts ``ids`` as a complete output (ends in EOS)."""
    state = initial_state()
    for tok in ids:
        if state.finished:
            return False
        if not legal_tokens(table, state)[tok]:
            return False
        state = advance(table, state, tok)
    return state.finished


def dump_mask_table(table: MaskTable, v: Vocabulary | None = None) -> str:
    """Render the mask table as a text matrix for golden-file diffs.

    One row per FSM state class (each slot at zero tokens and at one-plus
    tokens), columns are token ids, entries ``1``/``0``.
    """
    states = []
    for k in range(table.slot_count):
        entered = DecodeState(k, 0, at_object_boundary=(k == 0), finished=False)
        inside = DecodeState(k, 1, False, False)
        label = f"slot{k}@start" if k else "slot0@boundary"
        states.append((label, entered))
        states.append((f"slot{k}+content", inside))
    width = max(len(lbl) for lbl, _ in states)
    lines = []
    if v is not None:
        header = " ".join(v.id_to_token)
        lines.append(f"{'tokens'.ljust(width)}  {header}")
    for label, st in states:
        bits = "".join("1" if b else "0" for b in legal_tokens(table, st))
        lines.append(f"{label.ljust(width)}  {bits}")
    return "\n".join(lines) + "\n"
