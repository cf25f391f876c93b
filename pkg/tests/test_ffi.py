import json
import math
import subprocess
import sys

import numpy as np
import pytest

from slotforge.ffi import FfiServer, generate_parity_cases
from slotforge.losses import LossWeights, align_target, combined_loss
from slotforge.masks import compile_masks, legal_tokens
from slotforge.formats import bind_tagset, parse_format
from slotforge.vocab import Vocabulary

VOCAB = ["<;>", "</>", "<EOS>", "<PAD>", "<UNK>", "John", "lives", "here", "instance", "of", "person", "location"]


def call(server, req):
    return json.loads(server.handle_line(json.dumps(req)))


@pytest.fixture
def server():
    return FfiServer()


def compile_req():
    return {
        "id": 1,
        "op": "compile",
        "format": "<SOURCE> <;> instance of <;> tagset </>",
        "tags": ["person", "location"],
        "vocab": VOCAB,
        "source_ids": [5, 6, 7],
    }


def test_info(server):
    reply = call(server, {"id": 0, "op": "info"})
    assert reply["ok"] and reply["protocol"] == 1


def test_compile_and_legal_matches_core(server):
    reply = call(server, compile_req())
    assert reply["ok"] and reply["slot_count"] == 3
    vocab = Vocabulary(id_to_token=VOCAB, token_to_id={t: i for i, t in enumerate(VOCAB)})
    spec = bind_tagset(parse_format("<SOURCE> <;> instance of <;> tagset </>"), ["person", "location"])
    table = compile_masks(spec, vocab, [5, 6, 7])
    for state in [
        {"slot_index": 0, "tokens_in_slot": 0, "at_boundary": True},
        {"slot_index": 1, "tokens_in_slot": 1, "at_boundary": False},
        {"slot_index": 2, "tokens_in_slot": 2, "at_boundary": False},
    ]:
        got = call(server, {"id": 2, "op": "legal", "handle": reply["handle"], **state})["mask"]
        from slotforge.masks import DecodeState

        expected = legal_tokens(
            table,
            DecodeState(state["slot_index"], state["tokens_in_slot"], state["at_boundary"]),
        )
        assert got == [int(b) for b in expected]


def test_losses_with_handle_equal_core(server):
    handle = call(server, compile_req())["handle"]
    vocab = Vocabulary(id_to_token=VOCAB, token_to_id={t: i for i, t in enumerate(VOCAB)})
    spec = bind_tagset(parse_format("<SOURCE> <;> instance of <;> tagset </>"), ["person", "location"])
    table = compile_masks(spec, vocab, [5, 6, 7])
    target = vocab.encode("John <;> instance of <;> person </>") + [vocab.eos]
    rng = np.random.default_rng(0)
    logits = rng.normal(size=(len(target), len(VOCAB)))
    reply = call(
        server,
        {
            "id": 3,
            "op": "losses",
            "handle": handle,
            "t": len(target),
            "v": len(VOCAB),
            "logits": logits.ravel().tolist(),
            "target": target,
            "weights": {},
        },
    )
    align = align_target(spec, vocab, target, [5, 6, 7], table=table)
    core = combined_loss(logits, align, table, LossWeights())
    assert abs(reply["value"] - core.value) < 1e-12
    np.testing.assert_allclose(np.asarray(reply["grad"]).reshape(logits.shape), core.grad, atol=1e-12)


def test_losses_without_handle_requires_zero_slot_weight(server):
    reply = call(
        server,
        {
            "id": 4,
            "op": "losses",
            "t": 1,
            "v": 4,
            "logits": [0, 0, 0, 0],
            "target": [0],
            "sep_positions": [0],
            "weights": {"w_sl": 0.3},
        },
    )
    assert not reply["ok"] and "handle" in reply["error"]


def test_worked_structure_fixture_value(server):
    row = [0.0, math.log(math.e - 1.0), -50.0, -50.0]
    reply = call(
        server,
        {
            "id": 5,
            "op": "losses",
            "t": 3,
            "v": 4,
            "logits": row * 3,
            "target": [0, 0, 0],
            "sep_positions": [0, 1, 2],
            "weights": {"w_ce": 0.0, "w_st": 1.0, "w_sl": 0.0, "w_miss": 0.33},
        },
    )
    assert abs(reply["value"] - 2.97) < 1e-9


def test_advance_and_errors(server):
    handle = call(server, compile_req())["handle"]
    good = call(server, {"id": 6, "op": "advance", "handle": handle, "slot_index": 0, "tokens_in_slot": 0, "at_boundary": True, "token": 5})
    assert good["ok"] and good["slot_index"] == 0 and good["tokens_in_slot"] == 1
    bad = call(server, {"id": 7, "op": "advance", "handle": handle, "slot_index": 0, "tokens_in_slot": 0, "at_boundary": True, "token": 0})
    assert not bad["ok"]


def test_release_and_use_after_release(server):
    handle = call(server, compile_req())["handle"]
    assert call(server, {"id": 8, "op": "release", "handle": handle})["ok"]
    reply = call(server, {"id": 9, "op": "legal", "handle": handle, "slot_index": 0, "tokens_in_slot": 0, "at_boundary": True})
    assert not reply["ok"] and "released" in reply["error"]
    again = call(server, {"id": 10, "op": "release", "handle": handle})
    assert not again["ok"]


def test_malformed_and_unknown_requests(server):
    assert not json.loads(server.handle_line("{not json"))["ok"]
    assert not call(server, {"id": 11, "op": "nope"})["ok"]
    assert not call(server, {"id": 12, "op": "losses", "t": 2, "v": 2, "logits": [1.0], "target": [0, 1]})["ok"]


def test_subprocess_round_trip():
    proc = subprocess.Popen(
        [sys.executable, "-m", "slotforge.ffi"],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        text=True,
    )
    try:
        proc.stdin.write(json.dumps({"id": 1, "op": "info"}) + "\n")
        proc.stdin.flush()
        reply = json.loads(proc.stdout.readline())
        assert reply == {"id": 1, "ok": True, "protocol": 1, "engine": "slotforge"}
    finally:
        proc.stdin.close()
        proc.wait(timeout=10)


def test_parity_case_generator_is_deterministic():
    a = generate_parity_cases(5, seed=3)
    b = generate_parity_cases(5, seed=3)
    assert a == b
    assert a["cases"][0]["kind"] == "worked_structure"
    assert len(a["cases"]) == 5
    fuzz = a["cases"][1]
    assert fuzz["legal"] and fuzz["expected_losses"]["value"] == pytest.approx(fuzz["expected_losses"]["value"])
