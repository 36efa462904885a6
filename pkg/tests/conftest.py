from pathlib import Path

import numpy as np
import pytest

from sage_bsm.acoustics.sph import semicircle_array
from sage_bsm.helpers import FrequencyGrid, StftConfig

TINY_CONFIG = """
[scene]
sample_rate = 16000
source_duration = 0.5
max_order = 3

[design]
reverb_grid_size = 24
reference_sh_order = 4
hrtf_sh_order = 6
sh_padding = 4

[stft]
window_ms = 32.0
hop_ms = 16.0
"""


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def grid() -> FrequencyGrid:
    """33 bins from 0 Hz to 8 kHz."""
    return FrequencyGrid.from_fft(16000, 64)


@pytest.fixture
def stft_config() -> StftConfig:
    return StftConfig(16000, 64, 32)


@pytest.fixture
def semicircle():
    return semicircle_array(6, 0.1, (1.0, 1.2, 1.3))


@pytest.fixture(scope="session")
def tiny_config(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """A desk-profile override small enough for full pipeline runs in tests."""
    path = tmp_path_factory.mktemp("config") / "tiny.toml"
    path.write_text(TINY_CONFIG, encoding="utf-8")
    return path
