"""slotforge: slot-format constrained generation and evaluation.

Parse a slot-format template, compile it against a vocabulary and a source
sentence into per-state token masks, decode greedily under those masks,
train with format-aware losses, and score outputs with a three-way format
error taxonomy.
"""

from .ablation import run_ablation
from .data import (
    Example,
    SyntheticConfig,
    TaskShape,
    encode_target,
    filter_violations,
    gen_synthetic,
    load_jsonl,
    save_jsonl,
    subsample,
)
from .decoding import BatchDecodeResult, DecodeConfig, ScriptedProvider, batch_decode, greedy_decode
from .evaluation import (
    FormatError,
    FormatErrorKind,
    ParsedOutput,
    ScoreReport,
    joint_accuracy,
    micro_f1,
    parse_output,
    score_predictions,
    split_jer,
)
from .formats import (
    FormatParseError,
    FormatSpec,
    SlotKind,
    SlotSpec,
    bind_tagset,
    builtin_formats,
    parse_format,
    render_format,
)
from .losses import (
    AlignmentViolation,
    LossResult,
    LossWeights,
    TargetAlignment,
    align_target,
    combined_loss,
    cross_entropy,
    slot_loss,
    structure_loss,
)
from .masks import (
    DecodeState,
    MaskTable,
    advance,
    advance_lenient,
    compile_masks,
    dump_mask_table,
    fsm_accepts,
    initial_state,
    legal_tokens,
    state_index,
)
from .toylm import ToyLM, load_model, save_model, train
from .vocab import Vocabulary, build_vocab

__version__ = "0.1.0"
