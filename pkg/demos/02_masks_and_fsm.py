"""Compile per-slot token masks and drive the decoding state machine.

Run: python3 demos/02_masks_and_fsm.py
"""

import numpy as np

from slotforge import (
    advance,
    bind_tagset,
    build_vocab,
    builtin_formats,
    compile_masks,
    dump_mask_table,
    initial_state,
    legal_tokens,
)

spec = bind_tagset(builtin_formats()["NER"], ["person", "location"])
vocab = build_vocab(["John lives here"], ["person", "location", "instance of"])
source = vocab.encode("John lives here")

table = compile_masks(spec, vocab, source)
print("mask matrix (rows = FSM state classes, columns = token ids):\n")
print(dump_mask_table(table, vocab))

# Walk the machine over a gold output and watch the legal sets change.
target = vocab.encode("John <;> instance of <;> person </>") + [vocab.eos]
state = initial_state()
print("replaying a gold output:")
for tok in target:
    legal = [vocab.id_to_token[i] for i in np.flatnonzero(legal_tokens(table, state))]
    print(f"  slot={state.slot_index} boundary={state.at_object_boundary!s:5s} "
          f"emit {vocab.id_to_token[tok]!r:12s} legal={legal}")
    state = advance(table, state, tok)
print(f"finished: {state.finished}")

# Illegal moves are rejected outright; the mask and the FSM always agree.
try:
    advance(table, initial_state(), vocab.slot_sep)
except ValueError as exc:
    print(f"\nseparator before any content is rejected: {exc}")
