"""Command-line front end: compile formats, train, decode, validate, score.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
The environment variable ``SLOTFORGE_SEED`` supplies the default seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from .ablation import run_ablation
from .data import (
    Example,
    SyntheticConfig,
    TaskShape,
    filter_violations,
    gen_synthetic,
    load_jsonl,
    load_predictions,
    save_jsonl,
    save_predictions,
)
from .decoding import DecodeConfig, batch_decode
from .evaluation import score_predictions
from .formats import FormatParseError, FormatSpec, bind_tagset, builtin_formats, parse_format, render_format
from .losses import LossWeights
from .masks import compile_masks, dump_mask_table
from .toylm import ToyLM, load_model, prepare_examples, save_model, train
from .vocab import Vocabulary, build_vocab


class ConfigError(Exception):
    pass


def _default_seed() -> int:
    return int(os.environ.get("SLOTFORGE_SEED", "0"))


def _load_spec(args) -> FormatSpec:
    if getattr(args, "format", None) and getattr(args, "task", None):
        raise ConfigError("--format and --task are mutually exclusive")
    if getattr(args, "format", None):
        return parse_format(args.format)
    if getattr(args, "task", None):
        table = builtin_formats()
        if args.task not in table:
            raise ConfigError(f"unknown task {args.task!r}; choose from {sorted(table)}")
        return table[args.task]
    raise ConfigError("one of --format or --task is required")


def _load_tags(args) -> list[str] | None:
    if not getattr(args, "tags", None):
        return None
    path = Path(args.tags)
    if not path.exists():
        raise ConfigError(f"tags file {path} does not exist")
    tags = [line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not tags:
        raise ConfigError(f"tags file {path} is empty")
    return tags


def _bound_spec(args) -> FormatSpec:
    spec = _load_spec(args)
    tags = _load_tags(args)
    if tags:
        spec = bind_tagset(spec, tags)
    return spec


def _vocab_for(examples: list[Example], spec: FormatSpec, tags: list[str] | None) -> Vocabulary:
    corpus = [ex.input for ex in examples] + [ex.target for ex in examples]
    extra: list[str] = list(tags or [])
    for slot in spec.slots:
        extra.extend(slot.choices)
    for ex in examples:
        extra.extend(ex.tags or [])
    return build_vocab(corpus, extra)


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        print(text)


def cmd_compile_format(args) -> int:
    spec = _bound_spec(args)
    print(render_format(spec))
    if args.render_only:
        return 0
    for i, slot in enumerate(spec.slots):
        desc = slot.kind.value
        if slot.choices:
            desc += ": " + " | ".join(slot.choices)
        elif slot.is_unbound_tagset:
            desc += ": (unbound tagset)"
        print(f"slot {i}: {desc}")
    if not spec.is_bound:
        raise ConfigError("tagset slot is unbound; pass --tags to compile masks")
    if args.source is None:
        raise ConfigError("--source is required to compile masks")
    if args.vocab:
        v = Vocabulary.load(args.vocab)
    else:
        extra = [c for slot in spec.slots for c in slot.choices]
        v = build_vocab([args.source], extra)
    table = compile_masks(spec, v, v.encode(args.source))
    dump = dump_mask_table(table, v)
    _write_or_print(dump, args.out)
    return 0


def _examples_and_report(args, fe_only: bool, metric: str = "f1"):
    spec = _load_spec(args)
    tags = _load_tags(args)
    examples = load_jsonl(args.data)
    predictions = load_predictions(args.preds)
    return score_predictions(
        examples, predictions, spec, metric=metric, default_tags=tags, fe_only=fe_only
    )


def cmd_validate(args) -> int:
    report = _examples_and_report(args, fe_only=True)
    _write_or_print(report.to_json(), args.out)
    return 0


def cmd_score(args) -> int:
    report = _examples_and_report(args, fe_only=False, metric=args.metric)
    _write_or_print(report.to_json(), args.out)
    if args.pretty:
        score = report.micro_f1 if args.metric == "f1" else report.joint_accuracy
        print(f"{args.metric}={score:.4f} FE={report.fe_total} over {report.n_examples} examples", file=sys.stderr)
    return 0


def cmd_train_toy(args) -> int:
    spec = _load_spec(args)
    tags = _load_tags(args)
    examples = load_jsonl(args.data)
    if not examples:
        raise ConfigError(f"{args.data} contains no examples")
    vocab = _vocab_for(examples, spec, tags)
    kept, dropped = filter_violations(examples, spec, vocab, default_tags=tags)
    if dropped:
        print(f"filtered {len(dropped)} format-violating example(s)", file=sys.stderr)
    if not kept:
        raise ConfigError("no examples survived format filtering")
    weights = LossWeights(w_ce=args.w_ce, w_st=args.w_st, w_sl=args.w_sl, w_miss=args.w_miss)
    prepared = prepare_examples(kept, spec, vocab, default_tags=tags)
    model = ToyLM.zeros(len(vocab), spec.slot_count, vocab.pad)
    model, history = train(model, prepared, weights, epochs=args.epochs, lr=args.lr, seed=args.seed)
    save_model(model, args.out)
    vocab.save(str(args.out) + ".vocab")
    if args.metrics_csv:
        with open(args.metrics_csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "ce", "st", "sl", "combined", "token_accuracy"])
            for m in history:
                writer.writerow([m.epoch, m.ce, m.st, m.sl, m.combined, m.token_accuracy])
    if history:
        last = history[-1]
        print(f"epoch {last.epoch}: combined={last.combined:.4f} ce={last.ce:.4f} acc={last.token_accuracy:.4f}")
    return 0


def cmd_decode(args) -> int:
    spec = _load_spec(args)
    tags = _load_tags(args)
    examples = load_jsonl(args.data)
    model = load_model(args.model)
    vocab_path = args.vocab or (str(args.model) + ".vocab")
    if not Path(vocab_path).exists():
        raise ConfigError(f"vocabulary file {vocab_path} not found; pass --vocab")
    vocab = Vocabulary.load(vocab_path)
    tables, sources = [], []
    for ex in examples:
        bound = bind_tagset(spec, ex.tags if ex.tags else tags) if (ex.tags or tags) else spec
        source = vocab.encode(ex.input)
        tables.append(compile_masks(bound, vocab, source))
        sources.append(source)
    cfg = DecodeConfig(max_len=args.max_len, formatted=args.formatted)
    result = batch_decode(model, tables, cfg, sources)
    rows = []
    for ex, out in zip(examples, result.outputs):
        if out is None:
            continue
        if out and out[-1] == vocab.eos:
            out = out[:-1]
        rows.append((ex.id, vocab.decode(out)))
    save_predictions(rows, args.out)
    for index, message in result.errors:
        print(f"decode failed for {examples[index].id}: {message}", file=sys.stderr)
    return 1 if result.errors else 0


def cmd_gen_synthetic(args) -> int:
    cfg = SyntheticConfig(
        n_examples=args.n,
        vocab_size=args.vocab_size,
        max_source_len=args.max_source_len,
        n_tags=args.n_tags,
        task_shape=TaskShape(args.shape),
        seed=args.seed,
    )
    save_jsonl(gen_synthetic(cfg), args.out)
    return 0


def cmd_run_ablation(args) -> int:
    seeds = tuple(int(s) for s in args.seeds.split(","))
    result = run_ablation(
        n_train=args.n_train,
        n_test=args.n_test,
        seeds=seeds,
        shape=TaskShape(args.shape),
        epochs=args.epochs,
        lr=args.lr,
        max_len=args.max_len,
    )
    _write_or_print(json.dumps(result.to_dict(), indent=2), args.out)
    if args.pretty:
        print(result.pretty(), file=sys.stderr)
    return 0


def _add_format_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", help="format string")
    p.add_argument("--task", help="built-in task name (NER, RE, SRL, ID, DST)")
    p.add_argument("--tags", help="file with one tag per line")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slotforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile-format", help="show a format's canonical string, slots and mask matrix")
    _add_format_args(p)
    p.add_argument("--source", help="source sentence the masks are compiled against")
    p.add_argument("--vocab", help="vocabulary file (line per token); default derives from --source")
    p.add_argument("--render-only", action="store_true")
    p.add_argument("--out", help="write the mask matrix here instead of stdout")
    p.set_defaults(func=cmd_compile_format)

    p = sub.add_parser("validate", help="count format errors in predictions")
    _add_format_args(p)
    p.add_argument("--data", required=True)
    p.add_argument("--preds", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("score", help="score predictions (micro-F1 or joint accuracy)")
    _add_format_args(p)
    p.add_argument("--data", required=True)
    p.add_argument("--preds", required=True)
    p.add_argument("--metric", choices=["f1", "joint"], default="f1")
    p.add_argument("--pretty", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("train-toy", help="train the toy model with chosen loss weights")
    _add_format_args(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="model output file; vocabulary goes to <out>.vocab")
    p.add_argument("--w-ce", type=float, default=0.5)
    p.add_argument("--w-st", type=float, default=0.2)
    p.add_argument("--w-sl", type=float, default=0.3)
    p.add_argument("--w-miss", type=float, default=0.33)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--metrics-csv")
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("decode", help="greedy-decode a dataset with a trained model")
    _add_format_args(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--vocab")
    p.add_argument("--formatted", action="store_true")
    p.add_argument("--max-len", type=int, default=128)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("gen-synthetic", help="generate a synthetic dataset")
    p.add_argument("--shape", choices=[s.value for s in TaskShape], default="ner")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--vocab-size", type=int, default=12)
    p.add_argument("--max-source-len", type=int, default=24)
    p.add_argument("--n-tags", type=int, default=2)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("run-ablation", help="run the {CE, CE+FL} x {plain, FD} grid over seeds")
    p.add_argument("--shape", choices=[s.value for s in TaskShape], default="ner")
    p.add_argument("--n-train", type=int, default=500)
    p.add_argument("--n-test", type=int, default=200)
    p.add_argument("--seeds", default="0,1,2,3,4", help="comma-separated seed list")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--pretty", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_run_ablation)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FormatParseError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 1
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
