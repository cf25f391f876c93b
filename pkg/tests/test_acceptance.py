"""Acceptance suite: one test per criterion, at its stated tolerance.

Numeric criteria are checked exactly or to the given epsilon; experimental
criteria are directional medians over seeds at desk scale. Each test prints
a PASS line on success (run with ``pytest -s`` to see them); a failure is a
failed test. Binding-layer parity has its own suite under ``bindings/``.
"""

import math
import time
import warnings

import numpy as np

from slotforge.ablation import run_ablation
from slotforge.data import Example, SyntheticConfig, TaskShape, filter_violations, gen_synthetic
from slotforge.decoding import DecodeConfig, greedy_decode
from slotforge.evaluation import joint_accuracy, micro_f1, parse_output
from slotforge.formats import bind_tagset, builtin_formats, parse_format, render_format
from slotforge.losses import LossWeights, TargetAlignment, combined_loss, slot_loss, structure_loss
from slotforge.masks import advance, compile_masks, initial_state, legal_tokens
from slotforge.vocab import build_vocab

from oracles import (
    brute_force_accepts,
    central_difference_grad,
    enumerate_language,
    naive_cross_entropy,
    naive_joint_accuracy,
    naive_micro_f1,
    random_walk_target,
)


def _report(name):
    print(f"[PASS] {name}")


# ---------------------------------------------------------------------------


def test_structure_loss_worked_example():
    """|S|=3, all missed, per-position nll=1, w_miss=0.33 => 9 * 0.33 = 2.97."""
    start = time.time()
    V = 4
    rows = []
    for _ in range(3):
        row = np.full(V, -50.0)
        row[0] = 0.0
        row[1] = math.log(math.e - 1.0)  # positive, so token 1 beats the gold token 0
        rows.append(row)
    align = TargetAlignment(
        target=[0, 0, 0],
        sep_positions=[0, 1, 2],
        states=[initial_state()] * 3,
        legal=np.ones((3, V), dtype=bool),
    )
    res = structure_loss(np.array(rows), align, w_miss=0.33)
    assert abs(res.value - 2.97) < 1e-9
    assert time.time() - start < 1.0
    _report("structure-loss worked example = 2.97 within 1e-9, under 1s")


def test_zero_miss_annihilation():
    """500 fuzzed instances with every separator argmax correct => exactly 0."""
    rng = np.random.default_rng(0)
    for _ in range(500):
        T = int(rng.integers(1, 9))
        V = int(rng.integers(4, 17))
        target = [int(rng.integers(0, V)) for _ in range(T)]
        n_sep = int(rng.integers(1, T + 1))
        seps = sorted(int(i) for i in rng.choice(T, size=n_sep, replace=False))
        logits = rng.normal(size=(T, V))
        for t in seps:
            logits[t, target[t]] = logits[t].max() + rng.uniform(0.1, 3.0)
        align = TargetAlignment(
            target=target, sep_positions=seps, states=[initial_state()] * T, legal=np.ones((T, V), bool)
        )
        res = structure_loss(logits, align, w_miss=0.33)
        assert res.value == 0.0
        assert not res.grad.any()
    _report("zero-miss annihilation on 500 fuzzed instances (exact)")


def test_slot_loss_full_vocab_degeneracy():
    """All-legal mask => slot loss equals content-position CE within 1e-9."""
    rng = np.random.default_rng(1)
    for _ in range(100):
        T = int(rng.integers(2, 9))
        V = int(rng.integers(4, 17))
        target = [int(rng.integers(0, V)) for _ in range(T)]
        n_sep = int(rng.integers(1, T))
        seps = sorted(int(i) for i in rng.choice(T, size=n_sep, replace=False))
        align = TargetAlignment(
            target=target, sep_positions=seps, states=[initial_state()] * T, legal=np.ones((T, V), bool)
        )
        logits = rng.normal(size=(T, V)) * 2
        C = align.content_positions()
        if not C:
            continue
        sl = slot_loss(logits, align, table=None)
        ce_content = naive_cross_entropy(logits[C], [target[t] for t in C])
        assert abs(sl.value - ce_content) < 1e-9
    _report("slot-loss degeneracy to CE on 100 fuzzed instances within 1e-9")


def _random_alignment_case(seed):
    rng = np.random.default_rng(seed)
    v = build_vocab(["s1 s2 s3 a b"], ["t1", "t2"])
    specs = [
        bind_tagset(parse_format("<SOURCE> <;> tagset </>"), ["t1", "t2"]),
        bind_tagset(parse_format("<SOURCE> <;> a <;> tagset </>"), ["t1", "t2"]),
        parse_format("<ANY> </>"),
    ]
    spec = specs[seed % len(specs)]
    source = v.encode("s1 s2 s3")
    table = compile_masks(spec, v, source)
    target = random_walk_target(table, v, rng)
    from slotforge.losses import align_target

    return align_target(spec, v, target, source, table=table), table, rng


def test_gradient_checks_combined_loss():
    """Central differences (eps=1e-5), max relative error < 1e-4, 100 seeds."""
    start = time.time()
    w = LossWeights()
    worst = 0.0
    for seed in range(100):
        align, table, rng = _random_alignment_case(seed)
        logits = rng.normal(size=(align.length, table.vocab_size))
        res = combined_loss(logits, align, table, w)
        num = central_difference_grad(lambda L: combined_loss(L, align, table, w).value, logits)
        denom = np.maximum(np.abs(num), 1e-6)
        worst = max(worst, float(np.max(np.abs(res.grad - num) / denom)))
    elapsed = time.time() - start
    assert worst < 1e-4
    assert elapsed < 30.0
    _report(f"combined-loss gradient vs finite differences: max rel err {worst:.2e}, {elapsed:.1f}s")


def test_formatted_decoding_soundness():
    """1000 fuzzed providers x NER/RE/ID: formatted output has no length or
    source errors; the unformatted control on adversarial providers does."""
    start = time.time()
    v = build_vocab(["s1 s2 s3 s4 a b c"], ["t1", "t2", "instance of", "intent", "is", "x1 x2"])
    table_specs = {
        "NER": bind_tagset(builtin_formats()["NER"], ["t1", "t2"]),
        "RE": bind_tagset(builtin_formats()["RE"], ["t1", "t2"]),
        "ID": bind_tagset(builtin_formats()["ID"], ["t1", "t2"]),
    }
    source_text = "s1 s2 s3 s4"
    source = v.encode(source_text)
    cfg = DecodeConfig(max_len=24, formatted=True)
    names = list(table_specs)
    total_adversarial_errors = 0
    out_of_source = v.token_to_id["a"]
    for i in range(1000):
        spec = table_specs[names[i % 3]]
        table = compile_masks(spec, v, source)
        rng = np.random.default_rng(i)

        def fuzz(prefix, state, src):
            row = rng.normal(size=len(v))
            row[out_of_source] += 4.0  # adversarial pull toward an illegal token
            return row

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # max_len truncation is expected under fuzz
            out = greedy_decode(fuzz, table, cfg, source)
            plain = greedy_decode(fuzz, table, DecodeConfig(max_len=24, formatted=False), source)
        parsed = parse_output(v.decode(out), spec, source_text)
        n_length = sum(1 for e in parsed.errors if e.kind.value == "length")
        n_source = sum(1 for e in parsed.errors if e.kind.value == "source")
        assert n_length == 0 and n_source == 0, (names[i % 3], v.decode(out))
        plain_parsed = parse_output(v.decode(plain), spec, source_text)
        total_adversarial_errors += sum(
            1 for e in plain_parsed.errors if e.kind.value in ("length", "source")
        )
    elapsed = time.time() - start
    assert total_adversarial_errors > 0
    assert elapsed < 60.0
    _report(
        f"formatted decoding: 0 length/source errors across 1000 providers; "
        f"unformatted control produced {total_adversarial_errors} ({elapsed:.1f}s)"
    )


def test_fsm_bruteforce_equivalence():
    """FSM-accepted language up to length 8 equals the enumeration acceptor."""
    v = build_vocab(["s1 s2 a b t1 t2"], [])  # 11 ids < 12
    source = v.encode("s1 s2")
    specs = [
        parse_format("<ANY> </>"),
        parse_format("<SOURCE> </>"),
        bind_tagset(parse_format("tagset </>"), ["t1", "t2"]),
        bind_tagset(parse_format("<SOURCE> <;> tagset </>"), ["t1", "t2 b"]),
        parse_format("<SOURCE> <;> <ANY> </>"),
        bind_tagset(parse_format("<SOURCE> <;> a <;> tagset </>"), ["t1", "t2"]),
        bind_tagset(parse_format("tagset <;> <SOURCE> <;> <SOURCE> </>"), ["a"]),
    ]
    rng = np.random.default_rng(42)
    for spec in specs:
        assert spec.slot_count <= 3
        table = compile_masks(spec, v, source)
        expected = enumerate_language(spec, v, source, max_len=8)
        walked = set()

        def walk(prefix, state):
            if len(prefix) >= 8:
                return
            for tok in np.flatnonzero(legal_tokens(table, state)):
                tok = int(tok)
                nxt = advance(table, state, tok)
                if nxt.finished:
                    walked.add(tuple(prefix + [tok]))
                else:
                    walk(prefix + [tok], nxt)

        walk([], initial_state())
        assert walked == expected
        from slotforge.masks import fsm_accepts

        for _ in range(2000):
            n = int(rng.integers(1, 9))
            s = [int(x) for x in rng.integers(0, len(v), size=n)]
            assert fsm_accepts(table, s) == brute_force_accepts(spec, v, source, s)
    _report(f"FSM language == brute-force acceptor for {len(specs)} formats up to length 8")


def test_metric_oracles():
    """micro-F1 and joint accuracy equal naive set arithmetic on 200 cases."""
    rng = np.random.default_rng(3)
    universe = [(f"e{k}", "instance of", f"t{k % 3}") for k in range(8)]
    for _ in range(200):
        n = int(rng.integers(1, 8))
        preds = [
            {universe[int(i)] for i in rng.choice(8, size=int(rng.integers(0, 5)), replace=False)}
            for _ in range(n)
        ]
        golds = [
            {universe[int(i)] for i in rng.choice(8, size=int(rng.integers(0, 5)), replace=False)}
            for _ in range(n)
        ]
        report = micro_f1(preds, golds)
        assert (report.precision, report.recall, report.micro_f1) == naive_micro_f1(preds, golds)
        assert joint_accuracy(preds, golds) == naive_joint_accuracy(preds, golds)
    _report("micro-F1 and joint accuracy equal naive oracles on 200 cases each")


def test_desk_scale_ablation_directions():
    """Toy LM, synthetic NER-like, 5 seeds: FD removes length/source errors,
    the format loss lowers plain-decoding errors, and the full combination
    scores at least as well as plain CE."""
    start = time.time()
    res = run_ablation(n_train=500, n_test=200, seeds=(0, 1, 2, 3, 4), epochs=30, lr=0.5)
    for loss in ("ce", "ce+fl"):
        cell = res.cell(loss, "fd")
        assert all(x == 0 for x in cell.seed_fe_length), cell.seed_fe_length
        assert all(x == 0 for x in cell.seed_fe_source), cell.seed_fe_source
    fe_fl = res.cell("ce+fl", "plain").median_fe
    fe_ce = res.cell("ce", "plain").median_fe
    assert fe_fl < fe_ce, (fe_fl, fe_ce)
    f1_slgm = res.cell("ce+fl", "fd").median_score
    f1_ce_plain = res.cell("ce", "plain").median_score
    assert f1_slgm >= f1_ce_plain, (f1_slgm, f1_ce_plain)
    elapsed = time.time() - start
    assert elapsed < 300.0
    _report(
        "ablation directions hold: FD cells 0 length/source FE; "
        f"median FE {fe_fl:.0f} (CE+FL) < {fe_ce:.0f} (CE); "
        f"median F1 {f1_slgm:.3f} (CE+FL+FD) >= {f1_ce_plain:.3f} (CE plain); {elapsed:.0f}s"
    )


def test_violation_filter_drops_exactly_injected():
    """2% injected format-violating targets are dropped, nothing else."""
    rng = np.random.default_rng(9)
    examples = gen_synthetic(SyntheticConfig(n_examples=500, task_shape=TaskShape.NER_LIKE, seed=5))
    n_bad = 10  # 2%
    bad_ids = set()
    corruptions = [
        lambda t: t.replace("type", "bogus", 1),  # tag outside the tagset
        lambda t: t.replace(" <;> instance of", "", 1),  # missing slot
        lambda t: "zzz " + t,  # out-of-source span token
    ]
    picks = rng.choice(len(examples), size=n_bad, replace=False)
    for j, i in enumerate(int(x) for x in picks):
        ex = examples[i]
        examples[i] = Example(ex.id, ex.task, ex.input, corruptions[j % 3](ex.target), ex.tags)
        bad_ids.add(ex.id)
    from slotforge.ablation import dataset_vocab

    v = dataset_vocab(examples, examples[0].tags or [])
    spec = builtin_formats()["NER"]
    kept, dropped = filter_violations(examples, spec, v)
    assert {ex.id for ex, _ in dropped} == bad_ids
    assert len(kept) == len(examples) - n_bad
    _report("violation filter drops exactly the 2% injected examples")


def test_format_round_trip_all_builtins():
    """All five built-in format strings parse -> render -> parse to a fixed point."""
    for name, spec in builtin_formats().items():
        rendered = render_format(spec)
        reparsed = parse_format(rendered)
        assert reparsed == spec, name
        assert render_format(reparsed) == rendered, name
    _report("all five built-in formats round-trip to a fixed point")
