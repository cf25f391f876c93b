import pytest

from slotforge.formats import (
    FormatParseError,
    FormatSpec,
    SlotKind,
    SlotSpec,
    bind_tagset,
    builtin_formats,
    parse_format,
    render_format,
)

TABLE_FORMATS = {
    "NER": "<SOURCE> <;> instance of <;> tagset </>",
    "RE": "<SOURCE> <;> tagset <;> <SOURCE> </>",
    "SRL": "<SOURCE> <;> instance of <;> tagset </>",
    "ID": "intent <;> is <;> tagset </>",
    "DST": "[User] <;> <SOURCE> <;> <ANY> </>",
}


def test_parse_ner_format():
    spec = parse_format(TABLE_FORMATS["NER"])
    assert spec.slot_count == 3
    assert spec.slots[0].kind is SlotKind.SOURCE
    assert spec.slots[1] == SlotSpec(SlotKind.CHOICE, ("instance of",))
    assert spec.slots[2].is_unbound_tagset


def test_parse_id_format():
    spec = parse_format(TABLE_FORMATS["ID"])
    assert [s.kind for s in spec.slots] == [SlotKind.CHOICE] * 3
    assert spec.slots[0].choices == ("intent",)
    assert spec.slots[1].choices == ("is",)
    assert spec.slots[2].is_unbound_tagset


def test_parse_dst_format():
    spec = parse_format(TABLE_FORMATS["DST"])
    assert spec.slots[0].choices == ("[User]",)
    assert spec.slots[1].kind is SlotKind.SOURCE
    assert spec.slots[2].kind is SlotKind.ANY


def test_parse_minimal_any_format():
    spec = parse_format("<ANY> </>")
    assert spec.slot_count == 1
    assert spec.slots[0].kind is SlotKind.ANY


def test_builtin_formats_match_table():
    table = builtin_formats()
    assert set(table) == set(TABLE_FORMATS)
    for name, text in TABLE_FORMATS.items():
        assert render_format(table[name]) == text


def test_render_parse_round_trip_unbound():
    for text in TABLE_FORMATS.values():
        spec = parse_format(text)
        rendered = render_format(spec)
        assert rendered == text
        assert parse_format(rendered) == spec
        # fixed point under re-parsing
        assert render_format(parse_format(rendered)) == rendered


def test_render_parse_round_trip_bound():
    spec = bind_tagset(parse_format(TABLE_FORMATS["NER"]), ["person", "located in"])
    rendered = render_format(spec)
    assert rendered == "<SOURCE> <;> instance of <;> { person | located in } </>"
    assert parse_format(rendered) == spec


def test_parse_normalizes_whitespace():
    spec = parse_format("  <SOURCE>   <;>  instance   of <;> tagset   </> ")
    assert render_format(spec) == TABLE_FORMATS["NER"]


def test_parse_errors_carry_positions():
    with pytest.raises(FormatParseError) as exc:
        parse_format("<SOURCE> <;> <;> tagset </>")
    assert 0 <= exc.value.position < len("<SOURCE> <;> <;> tagset </>")
    with pytest.raises(FormatParseError, match="missing object separator"):
        parse_format("<SOURCE> <;> tagset")
    with pytest.raises(FormatParseError, match="empty format"):
        parse_format("   ")
    with pytest.raises(FormatParseError, match="exactly once"):
        parse_format("a </> b </>")
    with pytest.raises(FormatParseError, match="empty slot"):
        parse_format("a <;> </>")


def test_reserved_atoms_rejected_inside_slots():
    with pytest.raises(FormatParseError):
        parse_format("a <ANY> b </>")
    with pytest.raises(FormatParseError):
        parse_format("{ a | </>")


def test_spec_invariants_enforced():
    with pytest.raises(FormatParseError):
        FormatSpec(slots=())
    with pytest.raises(FormatParseError):
        FormatSpec(slots=(SlotSpec(SlotKind.ANY),), slot_sep="<;>", obj_sep="<;>")
    with pytest.raises(FormatParseError):
        FormatSpec(slots=(SlotSpec(SlotKind.CHOICE, ("a <;> b",)),))


def test_bind_tagset_basic():
    spec = parse_format(TABLE_FORMATS["NER"])
    bound = bind_tagset(spec, ["person", "location", "organization"])
    assert bound.slots[2].choices == ("person", "location", "organization")
    assert bound.is_bound


def test_bind_tagset_re_middle_slot():
    spec = parse_format(TABLE_FORMATS["RE"])
    bound = bind_tagset(spec, ["works for", "lives in"])
    assert bound.slots[1].choices == ("works for", "lives in")
    assert bound.slots[0].kind is SlotKind.SOURCE
    assert bound.slots[2].kind is SlotKind.SOURCE


def test_bind_tagset_errors():
    no_tagset = parse_format(TABLE_FORMATS["DST"])
    with pytest.raises(ValueError, match="no tagset slot"):
        bind_tagset(no_tagset, ["a"])
    spec = parse_format(TABLE_FORMATS["NER"])
    with pytest.raises(ValueError, match="empty tag list"):
        bind_tagset(spec, [])
    bound = bind_tagset(spec, ["a", "b"])
    with pytest.raises(ValueError, match="different tag list"):
        bind_tagset(bound, ["a", "c"])


def test_bind_tagset_idempotent_with_identical_tags():
    spec = parse_format(TABLE_FORMATS["NER"])
    once = bind_tagset(spec, ["x", "y"])
    twice = bind_tagset(once, ["x", "y"])
    assert once == twice


def test_bind_tagset_dedups_preserving_order():
    spec = parse_format(TABLE_FORMATS["NER"])
    bound = bind_tagset(spec, ["b", "a", "b"])
    assert bound.slots[2].choices == ("b", "a")


def test_slot_count_is_stable_and_obj_sep_terminal():
    for text in TABLE_FORMATS.values():
        spec = parse_format(text)
        assert spec.slot_count >= 1
        assert render_format(spec).endswith(spec.obj_sep)
