from pathlib import Path

import pytest

from runjob import make_linker

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def linker(tmp_path):
    """Strict-mode linker with builtin types, writing into a tmp dir."""
    return make_linker(output_dir=tmp_path / "build")


@pytest.fixture
def lenient_linker(tmp_path):
    return make_linker(strict=False, output_dir=tmp_path / "build")


@pytest.fixture
def helloworld_text() -> str:
    return (FIXTURES / "helloworld.mac").read_text()
