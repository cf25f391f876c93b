"""Walk through the format DSL: parsing, binding a tagset, rendering.

Run: python3 demos/01_format_dsl.py
"""

from slotforge import bind_tagset, builtin_formats, parse_format, render_format

# A format string is whitespace-tokenized. Slots sit between <;> separators
# and the object ends with </>.
spec = parse_format("<SOURCE> <;> instance of <;> tagset </>")
print("parsed slots:")
for i, slot in enumerate(spec.slots):
    print(f"  slot {i}: kind={slot.kind.value:7s} choices={slot.choices} list={slot.is_list}")

# The tagset placeholder stays unbound until a dataset supplies its labels.
print("\nbound with a NER-style tagset:")
bound = bind_tagset(spec, ["person", "location", "organization"])
print(" ", render_format(bound))

# Rendering is canonical and parses back to the same spec, bound or not.
assert parse_format(render_format(bound)) == bound
assert parse_format(render_format(spec)) == spec
print("\nround-trip: parse(render(spec)) == spec for bound and unbound specs")

# Five task templates ship built in (tagset slots unbound).
print("\nbuilt-in task formats:")
for name, template in builtin_formats().items():
    print(f"  {name:4s} {render_format(template)}")
