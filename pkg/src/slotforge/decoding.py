"""Greedy decoding against any logits provider, with optional format masking.

A provider is any callable ``(prefix, state, source) -> logits`` returning a
length-V float vector. With ``formatted=True`` the logits of illegal tokens
are replaced by the minimum finite float before the argmax, so a masked
token can never win; the FSM is advanced on every emitted token. Without
formatting the FSM is still tracked leniently so state-conditioned models
keep receiving a state feature and diagnostics stay available.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .masks import DecodeState, MaskTable, advance, advance_lenient, initial_state, legal_tokens

__all__ = [
    "LogitsProvider",
    "DecodeConfig",
    "ScriptedProvider",
    "greedy_decode",
    "batch_decode",
    "BatchDecodeResult",
]

_NEG_PENALTY = float(np.finfo(np.float64).min)


class LogitsProvider(Protocol):
    def __call__(self, prefix: list[int], state: DecodeState, source: list[int]) -> np.ndarray: ...


@dataclass(frozen=True)
class DecodeConfig:
    max_len: int = 128
    formatted: bool = True

    def __post_init__(self):
        if self.max_len <= 0:
            raise ValueError("max_len must be positive")


class ScriptedProvider:
    """Replays a fixed ``(T, V)`` logits matrix row by row.

    Steps beyond the script repeat the last row. Loadable from a plain-text
    matrix file (one row per step) for golden decoding tests.
    """

    def __init__(self, rows: np.ndarray):
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise ValueError("scripted logits must be a non-empty 2-D matrix")
        self.rows = rows

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedProvider":
        return cls(np.loadtxt(path, ndmin=2))

    def __call__(self, prefix: list[int], state: DecodeState, source: list[int]) -> np.ndarray:
        step = min(len(prefix), self.rows.shape[0] - 1)
        return self.rows[step]


def _truncate_to_boundary(out: list[int], obj_sep: int) -> list[int]:
    # Drop a partial trailing object so downstream scoring sees whole objects.
    for i in range(len(out) - 1, -1, -1):
        if out[i] == obj_sep:
            return out[: i + 1]
    return []


def greedy_decode(
    p: LogitsProvider,
    table: MaskTable,
    cfg: DecodeConfig,
    source: list[int],
) -> list[int]:
    """Greedily decode one sequence; stops on EOS or ``cfg.max_len``.

    Ties break toward the lowest token id. If the length limit cuts a
    sequence mid-object, the partial object is dropped (with a warning) so
    the result always ends in EOS or at an object boundary.
    """
    state = initial_state()
    out: list[int] = []
    while len(out) < cfg.max_len:
        logits = np.asarray(p(out, state, source), dtype=float)
        if logits.shape != (table.vocab_size,):
            raise ValueError(
                f"provider returned shape {logits.shape}, expected ({table.vocab_size},)"
            )
        if cfg.formatted:
            mask = legal_tokens(table, state)
            logits = np.where(mask, logits, _NEG_PENALTY)
            token = int(np.argmax(logits))
            state = advance(table, state, token)
        else:
            token = int(np.argmax(logits))
            state = advance_lenient(table, state, token)
        out.append(token)
        if token == table.eos:
            return out
    if not state.at_object_boundary:
        warnings.warn("decode hit max_len mid-object; dropping the partial trailing object")
        out = _truncate_to_boundary(out, table.obj_sep)
    return out


@dataclass
class BatchDecodeResult:
    outputs: list[list[int] | None]
    errors: list[tuple[int, str]] = field(default_factory=list)

    @property
    def ok(self) -> list[list[int]]:
        return [o for o in self.outputs if o is not None]


def batch_decode(
    p: LogitsProvider,
    tables: list[MaskTable],
    cfg: DecodeConfig,
    sources: list[list[int]],
) -> BatchDecodeResult:
    """Decode each (table, source) pair independently, collecting failures.

    A failing item records its error and leaves ``None`` in its slot;
    sibling items are unaffected. Result order matches input order.
    """
    if len(tables) != len(sources):
        raise ValueError("tables and sources must align")
    outputs: list[list[int] | None] = []
    errors: list[tuple[int, str]] = []
    for i, (table, source) in enumerate(zip(tables, sources)):
        try:
            outputs.append(greedy_decode(p, table, cfg, source))
        except Exception as exc:  # noqa: BLE001 - per-item isolation is the contract
            outputs.append(None)
            errors.append((i, str(exc)))
    return BatchDecodeResult(outputs=outputs, errors=errors)
