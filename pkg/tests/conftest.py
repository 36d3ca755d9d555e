import pytest

from qaforge.lexicon import load_lexicon
from qaforge.templates import load_templates


@pytest.fixture(scope="session")
def lex():
    return load_lexicon()


@pytest.fixture(scope="session")
def pool():
    return load_templates()
