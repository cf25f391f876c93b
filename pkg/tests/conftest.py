import numpy as np
import pytest

from slotforge.formats import bind_tagset, builtin_formats
from slotforge.vocab import build_vocab


@pytest.fixture
def ner_spec():
    return bind_tagset(builtin_formats()["NER"], ["person", "location"])


@pytest.fixture
def tiny_vocab():
    # ids: 0..4 specials, 5 John, 6 lives, 7 here, 8 person, 9 location,
    # 10 instance, 11 of
    return build_vocab(["John lives here"], ["person", "location", "instance of"])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
