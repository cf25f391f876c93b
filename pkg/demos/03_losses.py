"""The three losses and how the structure loss scales with missed separators.

Run: python3 demos/03_losses.py
"""

import numpy as np

from slotforge import (
    LossWeights,
    align_target,
    bind_tagset,
    build_vocab,
    builtin_formats,
    combined_loss,
    compile_masks,
    cross_entropy,
    encode_target,
    slot_loss,
    structure_loss,
)

spec = bind_tagset(builtin_formats()["NER"], ["person", "location"])
vocab = build_vocab(["John lives here"], ["person", "location", "instance of"])
source = vocab.encode("John lives here")
table = compile_masks(spec, vocab, source)

target = encode_target(vocab, "John <;> instance of <;> person </>")
align = align_target(spec, vocab, target, source, table=table)
print(f"target length {align.length}, separator positions {align.sep_positions}")

rng = np.random.default_rng(0)
logits = rng.normal(size=(align.length, len(vocab)))

ce = cross_entropy(logits, align)
st = structure_loss(logits, align, w_miss=0.33)
sl = slot_loss(logits, align, table)
print(f"\ncross-entropy (full vocab, mean):      {ce.value:.4f}")
print(f"structure loss (separators x missed):  {st.value:.4f}")
print(f"slot loss (masked softmax, content):   {sl.value:.4f}")

w = LossWeights()  # 0.5 / 0.2 / 0.3, miss weight 0.33
combo = combined_loss(logits, align, table, w)
print(f"combined = 0.5*CE + 0.2*ST + 0.3*SL =  {combo.value:.4f}")

# The structure loss multiplies the separator nll sum by the miss count:
# with 3 separators all missed at nll=1 each the total multiplier is 9.
from slotforge.losses import TargetAlignment
from slotforge.masks import initial_state
import math

rows = np.full((3, 4), -50.0)
rows[:, 0] = 0.0
rows[:, 1] = math.log(math.e - 1)  # competitor above gold => missed, nll = 1
worked = TargetAlignment(target=[0, 0, 0], sep_positions=[0, 1, 2],
                         states=[initial_state()] * 3, legal=np.ones((3, 4), bool))
print(f"\n3 separators, all missed, nll=1, w_miss=0.33:"
      f" {structure_loss(rows, worked, 0.33).value:.10f} (= 9 x 0.33)")

# Perfect separator predictions switch the loss off entirely.
rows_hit = np.full((3, 4), -1.0)
rows_hit[:, 0] = 3.0
print(f"all separators hit: {structure_loss(rows_hit, worked, 0.33).value}")
