"""Dataset ingestion, gold-violation filtering, and synthetic task generators.

Datasets are JSONL, one example per line:
``{"id": str, "task": str, "input": str, "target": str, "tags": [str]?}``.
Targets either terminate with the object separator or are the empty-output
marker ``<EOS>``. Prediction files carry ``{"id": str, "output": str}``.

The synthetic generators produce sentences whose structured targets follow
the built-in task formats, with label distributions balanced across tags,
so a small state-conditioned model can pick up the Markov statistics of the
targets and constrained decoding can supply the source-side information.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .formats import FormatSpec, SlotKind, bind_tagset, builtin_formats
from .losses import AlignmentViolation, align_target
from .vocab import EOS_TEXT, Vocabulary

__all__ = [
    "Example",
    "TaskShape",
    "SyntheticConfig",
    "load_jsonl",
    "save_jsonl",
    "load_predictions",
    "save_predictions",
    "encode_target",
    "filter_violations",
    "gen_synthetic",
    "subsample",
]


@dataclass
class Example:
    id: str
    task: str
    input: str
    target: str
    tags: list[str] | None = None

    def __post_init__(self):
        if not self.input or not self.target:
            raise ValueError(f"example {self.id!r}: input and target must be non-empty")

    def to_dict(self) -> dict:
        d = {"id": self.id, "task": self.task, "input": self.input, "target": self.target}
        if self.tags is not None:
            d["tags"] = list(self.tags)
        return d


class TaskShape(enum.Enum):
    NER_LIKE = "ner"
    RE_LIKE = "re"
    ID_LIKE = "id"


@dataclass(frozen=True)
class SyntheticConfig:
    n_examples: int = 100
    vocab_size: int = 12
    max_source_len: int = 24
    n_tags: int = 2
    task_shape: TaskShape = TaskShape.NER_LIKE
    seed: int = 0

    def __post_init__(self):
        if min(self.n_examples, self.vocab_size, self.max_source_len) <= 0:
            raise ValueError("n_examples, vocab_size and max_source_len must be positive")
        if self.n_tags < 2:
            raise ValueError("n_tags must be >= 2")


def load_jsonl(path) -> list[Example]:
    examples = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                examples.append(
                    Example(
                        id=raw["id"],
                        task=raw["task"],
                        input=raw["input"],
                        target=raw["target"],
                        tags=raw.get("tags"),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: malformed example on line {lineno}: {exc}") from exc
    return examples


def save_jsonl(examples: list[Example], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_dict(), ensure_ascii=False) + "\n")


def load_predictions(path) -> dict[str, str]:
    preds: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                preds[raw["id"]] = raw["output"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}: malformed prediction on line {lineno}: {exc}") from exc
    return preds


def save_predictions(preds: list[tuple[str, str]], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex_id, output in preds:
            fh.write(json.dumps({"id": ex_id, "output": output}, ensure_ascii=False) + "\n")


def encode_target(v: Vocabulary, target: str) -> list[int]:
    """Encode a gold target and make sure it terminates with EOS."""
    ids = v.encode(target)
    if not ids or ids[-1] != v.eos:
        ids.append(v.eos)
    return ids


def filter_violations(
    examples: list[Example],
    spec: FormatSpec,
    v: Vocabulary,
    default_tags: list[str] | None = None,
) -> tuple[list[Example], list[tuple[Example, AlignmentViolation]]]:
    """Split examples into format-conforming and violating ones.

    An example is kept when its gold target replays cleanly through the
    format's FSM; dropped examples carry the first violation. Filtering is
    idempotent: running it again on the kept list changes nothing.
    """
    kept: list[Example] = []
    dropped: list[tuple[Example, AlignmentViolation]] = []
    for ex in examples:
        tags = ex.tags if ex.tags else default_tags
        bound = bind_tagset(spec, tags) if tags else spec
        try:
            align_target(bound, v, encode_target(v, ex.target), v.encode(ex.input))
        except AlignmentViolation as violation:
            dropped.append((ex, violation))
        else:
            kept.append(ex)
    return kept, dropped


def _tags_for(cfg: SyntheticConfig) -> list[str]:
    return [f"type{j}" for j in range(cfg.n_tags)]


def _gen_ner_like(cfg: SyntheticConfig, rng: np.random.Generator) -> list[Example]:
    tags = _tags_for(cfg)
    triggers = [f"ent{i}" for i in range(2 * cfg.n_tags)]
    tag_of = {t: tags[i % cfg.n_tags] for i, t in enumerate(triggers)}
    fillers = [f"w{i}" for i in range(cfg.vocab_size)]
    examples = []
    for n in range(cfg.n_examples):
        # Mean-per-position losses give a length-1 empty target an outsized
        # per-position weight at the shared start cell, so sentences always
        # carry at least one span; empty outputs stay supported end to end.
        k = int(rng.choice([1, 2, 3], p=[0.30, 0.35, 0.35]))
        long_spans = bool(rng.random() < 0.55)
        words: list[str] = []
        objects: list[str] = []
        words.append(str(rng.choice(fillers)))
        for _ in range(k):
            trigger = str(rng.choice(triggers))
            span = f"{trigger} mark" if long_spans else trigger
            if len(words) + len(span.split()) + 2 > cfg.max_source_len:
                break
            words.extend(span.split())
            words.append(str(rng.choice(fillers)))
            objects.append(f"{span} <;> instance of <;> {tag_of[trigger]} </>")
        target = " ".join(objects) if objects else EOS_TEXT
        examples.append(
            Example(id=f"ner-{n:05d}", task="NER", input=" ".join(words), target=target, tags=tags)
        )
    return examples


def _gen_re_like(cfg: SyntheticConfig, rng: np.random.Generator) -> list[Example]:
    tags = _tags_for(cfg)
    heads = [f"h{i}" for i in range(2 * cfg.n_tags)]
    tails = [f"t{i}" for i in range(2 * cfg.n_tags)]
    rel_of = {h: tags[i % cfg.n_tags] for i, h in enumerate(heads)}
    fillers = [f"w{i}" for i in range(cfg.vocab_size)]
    examples = []
    for n in range(cfg.n_examples):
        head = str(rng.choice(heads))
        tail = str(rng.choice(tails))
        words = [str(rng.choice(fillers)), head, str(rng.choice(fillers)), tail, str(rng.choice(fillers))]
        while len(words) < min(cfg.max_source_len, 8):
            words.append(str(rng.choice(fillers)))
        target = f"{head} <;> {rel_of[head]} <;> {tail} </>"
        examples.append(
            Example(id=f"re-{n:05d}", task="RE", input=" ".join(words), target=target, tags=tags)
        )
    return examples


def _gen_id_like(cfg: SyntheticConfig, rng: np.random.Generator) -> list[Example]:
    tags = _tags_for(cfg)
    keywords = [f"k{i}" for i in range(2 * cfg.n_tags)]
    label_of = {kw: tags[i % cfg.n_tags] for i, kw in enumerate(keywords)}
    fillers = [f"w{i}" for i in range(cfg.vocab_size)]
    examples = []
    for n in range(cfg.n_examples):
        keyword = str(rng.choice(keywords))
        length = int(rng.integers(3, max(4, min(cfg.max_source_len, 10))))
        words = [str(rng.choice(fillers)) for _ in range(length)]
        words[int(rng.integers(0, length))] = keyword
        target = f"intent <;> is <;> {label_of[keyword]} </>"
        examples.append(
            Example(id=f"id-{n:05d}", task="ID", input=" ".join(words), target=target, tags=tags)
        )
    return examples


def gen_synthetic(cfg: SyntheticConfig) -> list[Example]:
    """Generate a deterministic synthetic dataset for ``cfg.task_shape``.

    Every produced target aligns cleanly under its task's built-in format,
    and tag labels are drawn uniformly.
    """
    rng = np.random.default_rng(cfg.seed)
    if cfg.task_shape is TaskShape.NER_LIKE:
        return _gen_ner_like(cfg, rng)
    if cfg.task_shape is TaskShape.RE_LIKE:
        return _gen_re_like(cfg, rng)
    return _gen_id_like(cfg, rng)


def _tagset_slot_index(spec: FormatSpec) -> int | None:
    for i, slot in enumerate(spec.slots):
        if slot.kind is SlotKind.CHOICE and slot.is_list:
            return i
    return None


def example_labels(ex: Example, spec: FormatSpec | None = None) -> list[str]:
    """Labels occurring in an example's target (values of the tagset slot)."""
    if spec is None:
        spec = builtin_formats().get(ex.task)
    if spec is None:
        return []
    idx = _tagset_slot_index(spec)
    if idx is None:
        return []
    labels = []
    for obj in ex.target.split(spec.obj_sep):
        slots = [s.strip() for s in obj.split(spec.slot_sep)]
        if len(slots) == spec.slot_count and slots[idx]:
            labels.append(" ".join(slots[idx].split()))
    return labels


def subsample(examples: list[Example], fraction: float, seed: int = 0) -> list[Example]:
    """Label-proportional subsample keeping at least one example per label.

    Examples are stratified by their first label (empty-output examples form
    their own stratum). ``fraction=1`` returns the input order-stably.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    if fraction == 1:
        return list(examples)
    strata: dict[str, list[int]] = {}
    for i, ex in enumerate(examples):
        labels = example_labels(ex)
        strata.setdefault(labels[0] if labels else "", []).append(i)

    all_labels = {lbl for ex in examples for lbl in example_labels(ex)}
    if round(fraction * len(examples)) < len(all_labels):
        raise ValueError(
            f"fraction {fraction} keeps fewer examples than the {len(all_labels)} distinct labels"
        )

    rng = np.random.default_rng(seed)
    chosen: set[int] = set()
    for key in sorted(strata):
        members = strata[key]
        take = max(1, round(fraction * len(members))) if key else round(fraction * len(members))
        picked = rng.choice(len(members), size=min(take, len(members)), replace=False)
        chosen.update(members[j] for j in sorted(int(x) for x in picked))
    # Guarantee coverage for labels that only ride along in multi-label examples.
    covered = {lbl for i in chosen for lbl in example_labels(examples[i])}
    for lbl in sorted(all_labels - covered):
        for i, ex in enumerate(examples):
            if lbl in example_labels(ex):
                chosen.add(i)
                break
    return [examples[i] for i in sorted(chosen)]
