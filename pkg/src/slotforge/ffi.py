"""Machine boundary for foreign-language bindings.

Speaks a versioned, line-delimited JSON protocol over stdin/stdout so a
host-language wrapper (see ``bindings/``) can drive mask compilation,
legal-token queries, FSM advances, and loss/gradient computation without
linking against Python. Arrays cross the boundary flat with explicit
dimensions; compiled mask tables live core-side behind opaque integer
handles until released. Run with ``python3 -m slotforge.ffi``.

``python3 -m slotforge.ffi --dump-cases N --seed S`` emits fuzz cases with
core-computed expected results, which the binding test suite replays over
the live protocol and compares within 1e-9.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

import numpy as np

from .formats import FormatSpec, bind_tagset, parse_format
from .losses import (
    LossWeights,
    TargetAlignment,
    align_target,
    combined_loss,
    cross_entropy,
    structure_loss,
)
from .masks import DecodeState, MaskTable, advance, compile_masks, legal_tokens
from .vocab import Vocabulary

PROTOCOL_VERSION = 1


@dataclass
class _Compiled:
    table: MaskTable
    spec: FormatSpec
    vocab: Vocabulary
    source: list[int]


class FfiServer:
    """Request dispatcher; one instance owns the handle registry."""

    def __init__(self):
        self._handles: dict[int, _Compiled] = {}
        self._next_handle = 1

    # -- ops ------------------------------------------------------------

    def op_info(self, req: dict) -> dict:
        return {"protocol": PROTOCOL_VERSION, "engine": "slotforge"}

    def op_compile(self, req: dict) -> dict:
        tokens = req["vocab"]
        if not isinstance(tokens, list) or len(tokens) < 5:
            raise ValueError("vocab must be the full id->token list (specials first)")
        vocab = Vocabulary(id_to_token=list(tokens), token_to_id={t: i for i, t in enumerate(tokens)})
        spec = parse_format(req["format"])
        tags = req.get("tags")
        if tags:
            spec = bind_tagset(spec, list(tags))
        source = [int(x) for x in req["source_ids"]]
        table = compile_masks(spec, vocab, source)
        handle = self._next_handle
        self._next_handle += 1
        self._handles[handle] = _Compiled(table, spec, vocab, source)
        return {"handle": handle, "slot_count": table.slot_count, "vocab_size": table.vocab_size}

    def _get(self, req: dict) -> _Compiled:
        handle = req.get("handle")
        compiled = self._handles.get(handle)
        if compiled is None:
            raise ValueError(f"invalid or released handle {handle}")
        return compiled

    @staticmethod
    def _state(req: dict) -> DecodeState:
        return DecodeState(
            slot_index=int(req.get("slot_index", 0)),
            tokens_in_slot=int(req.get("tokens_in_slot", 0)),
            at_object_boundary=bool(req.get("at_boundary", False)),
            finished=bool(req.get("finished", False)),
        )

    def op_legal(self, req: dict) -> dict:
        compiled = self._get(req)
        mask = legal_tokens(compiled.table, self._state(req))
        return {"mask": [int(b) for b in mask]}

    def op_advance(self, req: dict) -> dict:
        compiled = self._get(req)
        state = advance(compiled.table, self._state(req), int(req["token"]))
        return {
            "slot_index": state.slot_index,
            "tokens_in_slot": state.tokens_in_slot,
            "at_boundary": state.at_object_boundary,
            "finished": state.finished,
        }

    def op_losses(self, req: dict) -> dict:
        t, v = int(req["t"]), int(req["v"])
        logits = np.asarray(req["logits"], dtype=float)
        if logits.shape != (t * v,):
            raise ValueError(f"logits must carry t*v = {t * v} values, got {logits.shape[0]}")
        logits = logits.reshape(t, v)
        target = [int(x) for x in req["target"]]
        weights = LossWeights(**req.get("weights", {}))

        if req.get("handle") is not None:
            compiled = self._get(req)
            align = align_target(
                compiled.spec, compiled.vocab, target, compiled.source, table=compiled.table
            )
            res = combined_loss(logits, align, compiled.table, weights)
            parts = {
                "ce": cross_entropy(logits, align).value,
                "st": structure_loss(logits, align, weights.w_miss).value,
            }
        else:
            # No mask table: cross-entropy plus structure loss only.
            if weights.w_sl != 0.0:
                raise ValueError("slot loss requires a compiled mask handle; pass w_sl=0 or a handle")
            seps = sorted(int(x) for x in req.get("sep_positions", []))
            from .masks import initial_state

            align = TargetAlignment(
                target=target,
                sep_positions=seps,
                states=[initial_state()] * t,
                legal=np.ones((t, v), dtype=bool),
            )
            ce = cross_entropy(logits, align)
            st = structure_loss(logits, align, weights.w_miss)
            value = weights.w_ce * ce.value + weights.w_st * st.value
            grad = weights.w_ce * ce.grad + weights.w_st * st.grad
            return {"value": value, "grad": grad.ravel().tolist(), "ce": ce.value, "st": st.value}
        return {"value": res.value, "grad": res.grad.ravel().tolist(), **parts}

    def op_release(self, req: dict) -> dict:
        handle = req.get("handle")
        if handle not in self._handles:
            raise ValueError(f"invalid or released handle {handle}")
        del self._handles[handle]
        return {"released": True}

    # -- plumbing ---------------------------------------------------------

    def handle_line(self, line: str) -> str:
        req_id = None
        try:
            req = json.loads(line)
            req_id = req.get("id")
            op = req.get("op")
            handler = getattr(self, f"op_{op}", None)
            if handler is None:
                raise ValueError(f"unknown op {op!r}")
            result = handler(req)
            return json.dumps({"id": req_id, "ok": True, **result})
        except Exception as exc:  # noqa: BLE001 - every failure maps to one error reply
            return json.dumps({"id": req_id, "ok": False, "error": str(exc)})

    def serve(self, stdin=None, stdout=None) -> None:
        stdin = stdin or sys.stdin
        stdout = stdout or sys.stdout
        for line in stdin:
            if not line.strip():
                continue
            stdout.write(self.handle_line(line) + "\n")
            stdout.flush()


# -- parity fixture generation -------------------------------------------


def _fuzz_vocab_and_format(rng) -> tuple[list[str], str, list[str] | None, list[int]]:
    content = [f"w{i}" for i in range(int(rng.integers(3, 8)))]
    tokens = ["<;>", "</>", "<EOS>", "<PAD>", "<UNK>", *content, "t1", "t2", "lit"]
    formats = [
        ("<SOURCE> <;> lit <;> tagset </>", ["t1", "t2"]),
        ("<SOURCE> <;> tagset </>", ["t1", "t2"]),
        ("<ANY> </>", None),
        ("<SOURCE> <;> <ANY> </>", None),
    ]
    fmt, tags = formats[int(rng.integers(0, len(formats)))]
    n_source = int(rng.integers(1, len(content) + 1))
    source_ids = [5 + int(i) for i in rng.choice(len(content), size=n_source, replace=False)]
    return tokens, fmt, tags, source_ids


def _random_walk(table: MaskTable, rng, soft_cap: int = 7) -> list[int]:
    from .masks import initial_state

    target: list[int] = []
    state = initial_state()
    while len(target) < soft_cap:
        options = np.flatnonzero(legal_tokens(table, state))
        tok = int(rng.choice(options))
        target.append(tok)
        state = advance(table, state, tok)
        if state.finished:
            return target
    while not state.at_object_boundary:
        mask = legal_tokens(table, state)
        tok = table.obj_sep if mask[table.obj_sep] else (
            table.slot_sep if mask[table.slot_sep] else int(np.flatnonzero(mask)[0])
        )
        target.append(tok)
        state = advance(table, state, tok)
    target.append(table.eos)
    return target


def _worked_structure_case() -> dict:
    """3 separators, all missed, nll = 1 each, w_miss = 0.33 => 9 * 0.33."""
    import math

    t, v = 3, 4
    row = [0.0, math.log(math.e - 1.0), -50.0, -50.0]
    weights = {"w_ce": 0.0, "w_st": 1.0, "w_sl": 0.0, "w_miss": 0.33}
    req = {
        "op": "losses",
        "t": t,
        "v": v,
        "logits": row * 3,
        "target": [0, 0, 0],
        "sep_positions": [0, 1, 2],
        "weights": weights,
    }
    server = FfiServer()
    expected = server.op_losses(dict(req))
    return {"kind": "worked_structure", "request": req, "expected": expected}


def generate_parity_cases(n: int, seed: int) -> dict:
    """Fuzz cases plus core-computed expected values for binding parity.

    Each case carries the exact requests a binding should issue and the
    core's results for them; the binding test replays the requests over the
    live protocol and checks equality within 1e-9.
    """
    rng = np.random.default_rng(seed)
    server = FfiServer()
    cases = [_worked_structure_case()]
    while len(cases) < n:
        tokens, fmt, tags, source_ids = _fuzz_vocab_and_format(rng)
        compile_req = {"op": "compile", "vocab": tokens, "format": fmt, "tags": tags, "source_ids": source_ids}
        compiled = server.op_compile(dict(compile_req))
        handle = compiled["handle"]
        entry = server._handles[handle]
        table = entry.table

        states = []
        for k in range(table.slot_count):
            states.append({"slot_index": k, "tokens_in_slot": 0, "at_boundary": k == 0})
            states.append({"slot_index": k, "tokens_in_slot": 1, "at_boundary": False})
        legal = [
            {"state": s, "mask": server.op_legal({"handle": handle, **s})["mask"]} for s in states
        ]

        target = _random_walk(table, rng)
        t, v = len(target), table.vocab_size
        logits = rng.normal(size=(t, v))
        losses_req = {
            "op": "losses",
            "t": t,
            "v": v,
            "logits": logits.ravel().tolist(),
            "target": target,
            "weights": {"w_ce": 0.5, "w_st": 0.2, "w_sl": 0.3, "w_miss": 0.33},
        }
        expected_losses = server.op_losses({**losses_req, "handle": handle})

        advances = []
        for s in states:
            mask = server.op_legal({"handle": handle, **s})["mask"]
            legal_ids = [i for i, b in enumerate(mask) if b]
            tok = legal_ids[int(rng.integers(0, len(legal_ids)))]
            advances.append(
                {
                    "state": s,
                    "token": tok,
                    "expected": server.op_advance({"handle": handle, **s, "token": tok}),
                }
            )
            illegal = [i for i, b in enumerate(mask) if not b]
            if illegal:
                advances.append({"state": s, "token": illegal[0], "expected": None})

        server.op_release({"handle": handle})
        cases.append(
            {
                "kind": "fuzz",
                "compile": {k: v_ for k, v_ in compile_req.items() if k != "op"},
                "slot_count": table.slot_count,
                "vocab_size": table.vocab_size,
                "legal": legal,
                "losses_request": losses_req,
                "expected_losses": expected_losses,
                "advances": advances,
            }
        )
    return {"protocol": PROTOCOL_VERSION, "seed": seed, "cases": cases}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="slotforge.ffi", description=__doc__)
    parser.add_argument("--dump-cases", type=int, metavar="N", help="emit N parity cases as JSON and exit")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if args.dump_cases:
        json.dump(generate_parity_cases(args.dump_cases, args.seed), sys.stdout)
        sys.stdout.write("\n")
        return 0
    FfiServer().serve()
    return 0


if __name__ == "__main__":
    sys.exit(main())
