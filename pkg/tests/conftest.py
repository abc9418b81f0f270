import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hierkg.providers import MockEmbeddingProvider, MockGenerationProvider


@pytest.fixture
def embed_provider():
    return MockEmbeddingProvider()


@pytest.fixture
def gen_provider():
    return MockGenerationProvider()
