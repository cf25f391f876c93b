"""Format DSL: parse, validate, and render slot-format template strings.

A format string is a whitespace-tokenized template describing one output
object. Slots are separated by the slot separator (default ``<;>``) and the
object is terminated by the object separator (default ``</>``). A slot is
one of:

* ``<ANY>`` — any content token is legal,
* ``<SOURCE>`` — only tokens from the input sentence are legal,
* ``tagset`` — a choice slot whose option list is bound later,
* ``{ a | b | c }`` — a choice slot with an explicit option list,
* any other text — a choice slot with that single fixed string.

Rendering is canonical (single ASCII spaces) and round-trips through
:func:`parse_format` for both bound and unbound specs.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, replace

__all__ = [
    "SlotKind",
    "SlotSpec",
    "FormatSpec",
    "FormatParseError",
    "parse_format",
    "bind_tagset",
    "render_format",
    "builtin_formats",
]

ANY_TOKEN = "<ANY>"
SOURCE_TOKEN = "<SOURCE>"
TAGSET_TOKEN = "tagset"
DEFAULT_SLOT_SEP = "<;>"
DEFAULT_OBJ_SEP = "</>"

_LIST_OPEN = "{"
_LIST_CLOSE = "}"
_LIST_SEP = "|"


class SlotKind(enum.Enum):
    ANY = "any"
    SOURCE = "source"
    CHOICE = "choice"


class FormatParseError(ValueError):
    """Raised when a format string (or a binding) violates the DSL.

    ``position`` is a character offset into the offending input, clamped to
    the input length.
    """

    def __init__(self, position: int, message: str):
        self.position = position
        self.message = message
        super().__init__(f"at char {position}: {message}")


@dataclass(frozen=True)
class SlotSpec:
    """One slot of a format: its kind plus choice options when applicable.

    ``is_list`` distinguishes list-valued choice slots (the ``tagset``
    placeholder and its bound form) from fixed literal slots; an unbound
    tagset slot is ``kind=CHOICE, is_list=True, choices=()``.
    """

    kind: SlotKind
    choices: tuple[str, ...] = ()
    is_list: bool = False

    @property
    def is_unbound_tagset(self) -> bool:
        return self.kind is SlotKind.CHOICE and self.is_list and not self.choices

    def validate(self) -> None:
        if self.kind is not SlotKind.CHOICE:
            if self.choices:
                raise FormatParseError(0, f"{self.kind.value} slot cannot carry choices")
            return
        if not self.is_list and not self.choices:
            raise FormatParseError(0, "literal choice slot requires a choice string")
        for choice in self.choices:
            if not choice.strip():
                raise FormatParseError(0, "empty choice string")


@dataclass(frozen=True)
class FormatSpec:
    """An ordered list of slots plus the separator literals.

    Immutable; binding a tagset produces a new spec. ``slot_sep`` and
    ``obj_sep`` must be distinct single whitespace-free atoms and must not
    occur inside any choice string.
    """

    slots: tuple[SlotSpec, ...]
    slot_sep: str = DEFAULT_SLOT_SEP
    obj_sep: str = DEFAULT_OBJ_SEP

    def __post_init__(self):
        if not self.slots:
            raise FormatParseError(0, "format must have at least one slot")
        if self.slot_sep == self.obj_sep:
            raise FormatParseError(0, "slot and object separators must differ")
        for sep in (self.slot_sep, self.obj_sep):
            if not sep or re.search(r"\s", sep):
                raise FormatParseError(0, f"separator {sep!r} must be one whitespace-free atom")
        reserved = self._reserved_atoms()
        for slot in self.slots:
            slot.validate()
            for choice in slot.choices:
                for atom in choice.split():
                    if atom in reserved:
                        raise FormatParseError(
                            0, f"choice {choice!r} contains reserved atom {atom!r}"
                        )

    def _reserved_atoms(self) -> frozenset[str]:
        return frozenset(
            {self.slot_sep, self.obj_sep, ANY_TOKEN, SOURCE_TOKEN, _LIST_OPEN, _LIST_CLOSE, _LIST_SEP}
        )

    @property
    def slot_count(self) -> int:
        return len(self.slots)

    @property
    def is_bound(self) -> bool:
        return not any(s.is_unbound_tagset for s in self.slots)


def _atoms_with_offsets(text: str) -> list[tuple[str, int]]:
    return [(m.group(0), m.start()) for m in re.finditer(r"\S+", text)]


def _parse_slot(atoms: list[tuple[str, int]], slot_sep: str, obj_sep: str) -> SlotSpec:
    pos = atoms[0][1]
    words = [a for a, _ in atoms]
    if len(words) == 1:
        w = words[0]
        if w == ANY_TOKEN:
            return SlotSpec(SlotKind.ANY)
        if w == SOURCE_TOKEN:
            return SlotSpec(SlotKind.SOURCE)
        if w == TAGSET_TOKEN:
            return SlotSpec(SlotKind.CHOICE, (), is_list=True)
    if words[0] == _LIST_OPEN or words[-1] == _LIST_CLOSE:
        if words[0] != _LIST_OPEN or words[-1] != _LIST_CLOSE:
            raise FormatParseError(pos, "unbalanced choice list braces")
        choices: list[str] = []
        current: list[str] = []
        for a, off in atoms[1:-1]:
            if a == _LIST_SEP:
                if not current:
                    raise FormatParseError(off, "empty choice in list")
                choices.append(" ".join(current))
                current = []
            else:
                current.append(a)
        if not current:
            raise FormatParseError(pos, "empty choice in list")
        choices.append(" ".join(current))
        return SlotSpec(SlotKind.CHOICE, tuple(choices), is_list=True)
    for a, off in atoms:
        if a in (ANY_TOKEN, SOURCE_TOKEN, _LIST_OPEN, _LIST_CLOSE, _LIST_SEP):
            raise FormatParseError(off, f"reserved atom {a!r} inside literal slot text")
    return SlotSpec(SlotKind.CHOICE, (" ".join(words),))


def parse_format(
    text: str, slot_sep: str = DEFAULT_SLOT_SEP, obj_sep: str = DEFAULT_OBJ_SEP
) -> FormatSpec:
    """Parse a format string into a :class:`FormatSpec`.

    The string must consist of one or more slots separated by ``slot_sep``
    and terminated by a single trailing ``obj_sep``.
    """
    if not text.strip():
        raise FormatParseError(0, "empty format string")
    atoms = _atoms_with_offsets(text)
    obj_positions = [i for i, (a, _) in enumerate(atoms) if a == obj_sep]
    if not obj_positions:
        raise FormatParseError(min(len(text), max(0, len(text) - 1)), f"missing object separator {obj_sep!r}")
    if obj_positions != [len(atoms) - 1]:
        bad = atoms[obj_positions[0]]
        raise FormatParseError(bad[1], f"object separator {obj_sep!r} must appear exactly once, at the end")
    body = atoms[:-1]
    if not body:
        raise FormatParseError(atoms[-1][1], "format has no slots before the object separator")

    slots: list[SlotSpec] = []
    current: list[tuple[str, int]] = []
    for a, off in body:
        if a == slot_sep:
            if not current:
                raise FormatParseError(off, "empty slot")
            slots.append(_parse_slot(current, slot_sep, obj_sep))
            current = []
        else:
            current.append((a, off))
    if not current:
        raise FormatParseError(body[-1][1], "empty slot")
    slots.append(_parse_slot(current, slot_sep, obj_sep))
    return FormatSpec(tuple(slots), slot_sep=slot_sep, obj_sep=obj_sep)


def render_format(spec: FormatSpec) -> str:
    """Render the canonical single-space format string for ``spec``."""
    parts: list[str] = []
    for slot in spec.slots:
        if slot.kind is SlotKind.ANY:
            parts.append(ANY_TOKEN)
        elif slot.kind is SlotKind.SOURCE:
            parts.append(SOURCE_TOKEN)
        elif slot.is_unbound_tagset:
            parts.append(TAGSET_TOKEN)
        elif slot.is_list:
            inner = f" {_LIST_SEP} ".join(slot.choices)
            parts.append(f"{_LIST_OPEN} {inner} {_LIST_CLOSE}")
        else:
            parts.append(slot.choices[0])
    return f" {spec.slot_sep} ".join(parts) + f" {spec.obj_sep}"


def bind_tagset(spec: FormatSpec, tags: list[str]) -> FormatSpec:
    """Bind the tagset slot(s) of ``spec`` to ``tags``.

    Tags are deduplicated preserving order. Re-binding an already-bound spec
    with identical tags is a no-op; binding a spec with no tagset slot, or
    re-binding with different tags, is an error.
    """
    deduped: list[str] = []
    for t in tags:
        t = " ".join(t.split())
        if not t:
            raise ValueError("empty tag string")
        if t not in deduped:
            deduped.append(t)
    if not deduped:
        raise ValueError("cannot bind an empty tag list")
    bound = tuple(deduped)

    tagset_slots = [s for s in spec.slots if s.kind is SlotKind.CHOICE and s.is_list]
    if not tagset_slots:
        raise ValueError("format has no tagset slot to bind")
    unbound = [s for s in tagset_slots if s.is_unbound_tagset]
    if not unbound:
        if all(s.choices == bound for s in tagset_slots):
            return spec
        raise ValueError("tagset already bound to a different tag list")

    new_slots = tuple(
        replace(s, choices=bound) if s.is_unbound_tagset else s for s in spec.slots
    )
    return replace(spec, slots=new_slots)


def builtin_formats() -> dict[str, FormatSpec]:
    """The five built-in task templates, keyed NER/RE/SRL/ID/DST.

    Tagset slots are unbound; call :func:`bind_tagset` before compiling
    masks.
    """
    ner = f"{SOURCE_TOKEN} <;> instance of <;> {TAGSET_TOKEN} </>"
    return {
        "NER": parse_format(ner),
        "RE": parse_format(f"{SOURCE_TOKEN} <;> {TAGSET_TOKEN} <;> {SOURCE_TOKEN} </>"),
        "SRL": parse_format(ner),
        "ID": parse_format(f"intent <;> is <;> {TAGSET_TOKEN} </>"),
        "DST": parse_format(f"[User] <;> {SOURCE_TOKEN} <;> {ANY_TOKEN} </>"),
    }
