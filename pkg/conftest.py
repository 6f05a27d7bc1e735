import random
from pathlib import Path

import pytest

from toolkits.capgram.fileformat import parse_grammar_file, parse_grammar_text

SAMPLES = Path(__file__).with_name("samples")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance checks")


@pytest.fixture
def samples() -> Path:
    return SAMPLES


@pytest.fixture
def abc_cb():
    return parse_grammar_file(str(SAMPLES / "ex31.gr"))


@pytest.fixture
def ccb():
    return parse_grammar_file(str(SAMPLES / "ex32.gr"))


@pytest.fixture
def twin():
    return parse_grammar_file(str(SAMPLES / "ex-sec2.gr"))


@pytest.fixture
def anbn():
    return parse_grammar_file(str(SAMPLES / "anbn.gr"))


@pytest.fixture
def single_c():
    return parse_grammar_file(str(SAMPLES / "c.gr"))


@pytest.fixture
def gs_small():
    """a^(n+1) b^(n+1) through the non-context-free rule A B -> a A B b."""
    return parse_grammar_text(
        """
        nonterminals: S A B
        terminals: a b
        start: S
        capacity: S=1 A=1 B=1
        rules:
          r1: S -> A B;
          r2: A B -> a A B b;
          r3: A -> a;
          r4: B -> b;
        """
    )


@pytest.fixture
def rng():
    return random.Random(2024)
