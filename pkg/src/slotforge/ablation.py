"""Desk-scale ablation: {plain CE, CE+format loss} x {plain, formatted decoding}.

Trains the toy model on a synthetic task under both objectives, decodes the
test split with and without format masking, and reports score plus format
errors per cell — the shape of the full-scale comparison this artifact
reproduces directionally.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field

from .data import SyntheticConfig, TaskShape, gen_synthetic
from .decoding import DecodeConfig, greedy_decode
from .evaluation import score_predictions
from .formats import bind_tagset, builtin_formats
from .losses import LossWeights
from .masks import compile_masks
from .toylm import ToyLM, prepare_examples, train
from .vocab import Vocabulary, build_vocab

__all__ = ["AblationCell", "AblationResult", "run_ablation", "CE_ONLY", "CE_PLUS_FORMAT"]

CE_ONLY = LossWeights(w_ce=1.0, w_st=0.0, w_sl=0.0, w_miss=0.33)
CE_PLUS_FORMAT = LossWeights()

_TASK_OF = {TaskShape.NER_LIKE: "NER", TaskShape.RE_LIKE: "RE", TaskShape.ID_LIKE: "ID"}


@dataclass
class AblationCell:
    loss: str
    decoding: str
    seed_scores: list[float] = field(default_factory=list)
    seed_fe: list[int] = field(default_factory=list)
    seed_fe_length: list[int] = field(default_factory=list)
    seed_fe_source: list[int] = field(default_factory=list)
    seed_fe_tagset: list[int] = field(default_factory=list)

    @property
    def median_score(self) -> float:
        return statistics.median(self.seed_scores)

    @property
    def median_fe(self) -> float:
        return statistics.median(self.seed_fe)

    def to_dict(self) -> dict:
        return {
            "loss": self.loss,
            "decoding": self.decoding,
            "median_score": self.median_score,
            "median_fe": self.median_fe,
            "scores": self.seed_scores,
            "fe": self.seed_fe,
            "fe_length": self.seed_fe_length,
            "fe_source": self.seed_fe_source,
            "fe_tagset": self.seed_fe_tagset,
        }


@dataclass
class AblationResult:
    cells: dict[tuple[str, str], AblationCell]

    def cell(self, loss: str, decoding: str) -> AblationCell:
        return self.cells[(loss, decoding)]

    def to_dict(self) -> dict:
        return {"cells": [c.to_dict() for c in self.cells.values()]}

    def pretty(self) -> str:
        lines = [f"{'loss':<6} {'decoding':<10} {'score':>8} {'FE':>8} {'FE len':>7} {'FE src':>7} {'FE tag':>7}"]
        for c in self.cells.values():
            lines.append(
                f"{c.loss:<6} {c.decoding:<10} {c.median_score:>8.4f} {c.median_fe:>8.1f}"
                f" {statistics.median(c.seed_fe_length):>7.1f}"
                f" {statistics.median(c.seed_fe_source):>7.1f}"
                f" {statistics.median(c.seed_fe_tagset):>7.1f}"
            )
        return "\n".join(lines)


def _decode_split(model, test, spec, vocab, tags, formatted, max_len):
    cfg = DecodeConfig(max_len=max_len, formatted=formatted)
    preds: dict[str, str] = {}
    for ex in test:
        bound = bind_tagset(spec, ex.tags if ex.tags else tags)
        source = vocab.encode(ex.input)
        table = compile_masks(bound, vocab, source)
        out = greedy_decode(model, table, cfg, source)
        preds[ex.id] = vocab.decode(out)
    return preds


def dataset_vocab(examples, tags) -> Vocabulary:
    corpus = [ex.input for ex in examples] + [ex.target for ex in examples]
    extra = list(tags) + ["instance of", "intent is", "[User]", "mark"]
    return build_vocab(corpus, extra)


def run_ablation(
    n_train: int = 500,
    n_test: int = 200,
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4),
    shape: TaskShape = TaskShape.NER_LIKE,
    epochs: int = 30,
    lr: float = 0.5,
    n_tags: int = 2,
    max_len: int = 64,
    metric: str = "f1",
) -> AblationResult:
    """Run the 2x2 grid over seeds and aggregate per-cell medians."""
    cells = {
        (loss, dec): AblationCell(loss, dec)
        for loss in ("ce", "ce+fl")
        for dec in ("plain", "fd")
    }
    task = _TASK_OF[shape]
    for seed in seeds:
        train_cfg = SyntheticConfig(
            n_examples=n_train, n_tags=n_tags, task_shape=shape, seed=seed
        )
        test_cfg = SyntheticConfig(
            n_examples=n_test, n_tags=n_tags, task_shape=shape, seed=seed + 10_000
        )
        train_set = gen_synthetic(train_cfg)
        test_set = gen_synthetic(test_cfg)
        tags = train_set[0].tags
        vocab = dataset_vocab(train_set + test_set, tags)
        spec = builtin_formats()[task]
        prepared = prepare_examples(train_set, spec, vocab, default_tags=tags)
        for loss_name, weights in (("ce", CE_ONLY), ("ce+fl", CE_PLUS_FORMAT)):
            model = ToyLM.zeros(len(vocab), spec.slot_count, vocab.pad)
            model, _ = train(model, prepared, weights, epochs=epochs, lr=lr, seed=seed)
            for dec_name, formatted in (("plain", False), ("fd", True)):
                preds = _decode_split(model, test_set, spec, vocab, tags, formatted, max_len)
                report = score_predictions(test_set, preds, spec, metric=metric, default_tags=tags)
                cell = cells[(loss_name, dec_name)]
                score = report.micro_f1 if metric == "f1" else report.joint_accuracy
                cell.seed_scores.append(float(score))
                cell.seed_fe.append(report.fe_total)
                cell.seed_fe_length.append(report.fe_length)
                cell.seed_fe_source.append(report.fe_source)
                cell.seed_fe_tagset.append(report.fe_tagset)
    return AblationResult(cells=cells)
