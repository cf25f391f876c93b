"""Parse generated strings into tuples, classify format errors, and score.

Format errors come in exactly three kinds: a *length* mismatch (the object
has the wrong number of slots — no further checks run on such an object),
a *source* mismatch (a source-restricted slot contains tokens that do not
occur in the input sentence), and a *tagset* mismatch (a choice slot's
string is not one of the bound choices, compared exactly after whitespace
normalization — near-misses like a shortened tag must fail).

Scoring uses set semantics over exact tuple matches: micro-F1 from global
TP/FP/FN counts, or joint accuracy (exact set equality per example).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

from .data import Example
from .formats import FormatSpec, SlotKind, bind_tagset
from .vocab import EOS_TEXT

__all__ = [
    "FormatErrorKind",
    "FormatError",
    "ParsedOutput",
    "ScoreReport",
    "parse_output",
    "micro_f1",
    "joint_accuracy",
    "split_jer",
    "score_predictions",
]


class FormatErrorKind(enum.Enum):
    LENGTH = "length"
    SOURCE = "source"
    TAGSET = "tagset"


@dataclass(frozen=True)
class FormatError:
    kind: FormatErrorKind
    object_index: int
    detail: str


@dataclass
class ParsedOutput:
    """Objects split out of one generated string.

    ``objects`` holds only the clean tuples (scoring input); ``all_tuples``
    additionally keeps tuples whose slot count matched but whose content
    erred, which is how gold targets are taken as-is.
    """

    objects: list[tuple[str, ...]]
    errors: list[FormatError]
    all_tuples: list[tuple[str, ...]] = field(default_factory=list)


def _split_on(atoms: list[str], sep: str) -> list[list[str]]:
    parts: list[list[str]] = [[]]
    for a in atoms:
        if a == sep:
            parts.append([])
        else:
            parts[-1].append(a)
    return parts


def parse_output(text: str, spec: FormatSpec, source: str) -> ParsedOutput:
    """Split ``text`` into objects and classify their format errors.

    Arbitrary model output is acceptable; malformations become error
    records, never exceptions. A trailing EOS marker and a trailing empty
    segment (from a properly terminated output) are dropped.
    """
    if not spec.is_bound:
        raise ValueError("parse_output requires a bound format")
    source_tokens = set(source.split())
    atoms = text.split()
    if atoms and atoms[-1] == EOS_TEXT:
        atoms = atoms[:-1]
    segments = _split_on(atoms, spec.obj_sep)
    if segments and not segments[-1]:
        segments.pop()

    objects: list[tuple[str, ...]] = []
    all_tuples: list[tuple[str, ...]] = []
    errors: list[FormatError] = []
    for i, segment in enumerate(segments):
        slot_atoms = _split_on(segment, spec.slot_sep)
        if len(slot_atoms) != spec.slot_count:
            errors.append(
                FormatError(FormatErrorKind.LENGTH, i, f"{len(slot_atoms)} slots, expected {spec.slot_count}")
            )
            continue
        values = tuple(" ".join(sa) for sa in slot_atoms)
        all_tuples.append(values)
        clean = True
        for slot, value in zip(spec.slots, values):
            if slot.kind is SlotKind.SOURCE:
                missing = [tok for tok in value.split() if tok not in source_tokens]
                if missing:
                    clean = False
                    errors.append(
                        FormatError(FormatErrorKind.SOURCE, i, f"tokens {missing} not in source")
                    )
            elif slot.kind is SlotKind.CHOICE:
                if value not in slot.choices:
                    clean = False
                    errors.append(
                        FormatError(FormatErrorKind.TAGSET, i, f"{value!r} not in choices")
                    )
        if clean:
            objects.append(values)
    return ParsedOutput(objects=objects, errors=errors, all_tuples=all_tuples)


@dataclass
class ScoreReport:
    precision: float | None = None
    recall: float | None = None
    micro_f1: float | None = None
    joint_accuracy: float | None = None
    fe_length: int = 0
    fe_source: int = 0
    fe_tagset: int = 0
    n_examples: int = 0

    @property
    def fe_total(self) -> int:
        return self.fe_length + self.fe_source + self.fe_tagset

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "micro_f1": self.micro_f1,
            "joint_accuracy": self.joint_accuracy,
            "fe_length": self.fe_length,
            "fe_source": self.fe_source,
            "fe_tagset": self.fe_tagset,
            "n_examples": self.n_examples,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def micro_f1(preds: list[set[tuple]], golds: list[set[tuple]]) -> ScoreReport:
    """Micro-averaged F1 over exact tuple matches, zero-safe."""
    if len(preds) != len(golds):
        raise ValueError("prediction and gold lists must align")
    tp = fp = fn = 0
    for p, g in zip(preds, golds):
        tp += len(p & g)
        fp += len(p - g)
        fn += len(g - p)
    precision = _safe_div(tp, tp + fp)
    recall = _safe_div(tp, tp + fn)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    return ScoreReport(precision=precision, recall=recall, micro_f1=f1, n_examples=len(preds))


def joint_accuracy(preds: list[set[tuple]], golds: list[set[tuple]]) -> float:
    """Fraction of examples whose predicted set equals the gold set exactly."""
    if len(preds) != len(golds):
        raise ValueError("prediction and gold lists must align")
    if not preds:
        return 0.0
    return sum(1 for p, g in zip(preds, golds) if p == g) / len(preds)


def split_jer(
    parsed: ParsedOutput, entity_spec: FormatSpec, relation_spec: FormatSpec
) -> tuple[list[tuple[str, ...]], list[tuple[str, ...]]]:
    """Route mixed entity/relation tuples by their middle slot.

    The entity format carries a fixed middle literal, the relation format a
    tagset middle; a tuple matching neither signature is returned in both
    streams, where it can only count as a false positive. Routing covers
    every tuple whose slot count matched (``all_tuples``): a mixed output
    cannot parse cleanly under either single format, so per-slot errors do
    not exclude a tuple from routing.
    """
    for s in (entity_spec, relation_spec):
        if s.slot_count != 3:
            raise ValueError("joint entity/relation routing expects 3-slot formats")
    ent_mid = entity_spec.slots[1]
    rel_mid = relation_spec.slots[1]
    if ent_mid.is_list or not rel_mid.is_list:
        raise ValueError("entity format needs a literal middle slot, relation format a tagset middle")
    entity_literal = ent_mid.choices[0]
    relation_choices = set(rel_mid.choices)

    entities: list[tuple[str, ...]] = []
    relations: list[tuple[str, ...]] = []
    for obj in parsed.all_tuples:
        middle = obj[1] if len(obj) == 3 else None
        if middle == entity_literal:
            entities.append(obj)
        elif middle in relation_choices:
            relations.append(obj)
        else:
            entities.append(obj)
            relations.append(obj)
    return entities, relations


def score_predictions(
    examples: list[Example],
    predictions: dict[str, str],
    spec: FormatSpec,
    metric: str = "f1",
    default_tags: list[str] | None = None,
    fe_only: bool = False,
) -> ScoreReport:
    """Parse and score one prediction per example.

    Predictions must cover a subset of the example ids; examples without a
    prediction are scored against the empty output. Format-error counts
    always cover the prediction side only; ``fe_only`` skips the metric.
    """
    unknown = set(predictions) - {ex.id for ex in examples}
    if unknown:
        raise KeyError(f"predictions reference unknown ids: {sorted(unknown)[:5]}")
    pred_sets: list[set[tuple]] = []
    gold_sets: list[set[tuple]] = []
    report = ScoreReport(n_examples=len(examples))
    for ex in examples:
        tags = ex.tags if ex.tags else default_tags
        bound = bind_tagset(spec, tags) if tags else spec
        parsed = parse_output(predictions.get(ex.id, ""), bound, ex.input)
        gold = parse_output(ex.target, bound, ex.input)
        pred_sets.append(set(parsed.objects))
        gold_sets.append(set(gold.all_tuples))
        for err in parsed.errors:
            if err.kind is FormatErrorKind.LENGTH:
                report.fe_length += 1
            elif err.kind is FormatErrorKind.SOURCE:
                report.fe_source += 1
            else:
                report.fe_tagset += 1
    if fe_only:
        return report
    if metric == "f1":
        scored = micro_f1(pred_sets, gold_sets)
        report.precision = scored.precision
        report.recall = scored.recall
        report.micro_f1 = scored.micro_f1
    elif metric == "joint":
        report.joint_accuracy = joint_accuracy(pred_sets, gold_sets)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return report
