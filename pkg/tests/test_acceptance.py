"""End-to-end checks of complete scenes."""
import math

import numpy as np
import pytest

from sage_bsm.acoustics.bsm import design_filterbank
from sage_bsm.acoustics.hrtf import point_receiver_hrtf, point_receiver_sh
from sage_bsm.acoustics.metrics import nmse
from sage_bsm.acoustics.render import apply_filterbank, render_reference
from sage_bsm.acoustics.room import render_mic_signals, render_reference_plane_waves
from sage_bsm.acoustics.stft import stft
from sage_bsm.helpers import (
    ArrayGeometry,
    Direction,
    FilterProvenance,
    FrequencyGrid,
    Microphone,
    RoomSpec,
    Scene,
    SolverConfig,
    StftConfig,
)
from sage_bsm.services.client import BsmClient

SAMPLE_RATE = 48000
# one sample of travel at 343 m/s
EAR_OFFSET = 343.0 / SAMPLE_RATE


def test_single_mic_at_the_left_ear_matches_the_reference(rng):
    left = Direction(math.pi / 2, math.pi / 2)
    array = ArrayGeometry((Microphone(EAR_OFFSET, left),), (10.0, 10.0, 10.0))
    distance = 700 * EAR_OFFSET
    scene = Scene(
        RoomSpec((20.0, 20.0, 20.0), (0.0,), 0),
        (10.0, 10.0 + distance, 10.0),
        rng.standard_normal(SAMPLE_RATE // 4),
        SAMPLE_RATE,
        array,
    )
    config = StftConfig.from_durations(SAMPLE_RATE)
    grid = FrequencyGrid.from_fft(SAMPLE_RATE, config.fft_size)

    bank = design_filterbank(
        array,
        grid,
        [left],
        point_receiver_hrtf(EAR_OFFSET, grid, [left]),
        SolverConfig(),
        FilterProvenance.DIRECT,
    )
    estimate = apply_filterbank(bank, stft(render_mic_signals(scene).full, config))
    reference = render_reference(
        render_reference_plane_waves(scene, 14),
        point_receiver_sh(EAR_OFFSET, grid, 14),
        config,
    )
    report = nmse(estimate, reference)
    evaluated = ~report.flags[0]
    assert evaluated.sum() > 0.9 * grid.bins
    assert np.all(report.db[0][evaluated] < -40.0)


@pytest.mark.slow
def test_desk_scene_reproduces_the_expected_trends(tmp_path):
    client = BsmClient.from_file(
        profile="desk", output_directory=str(tmp_path / "desk")
    )
    result = client.run_pipeline()
    assert result["direct_below_limit"]
    assert result["reverberant_rises_with_frequency"]
    assert result["near_ear_better"]
    assert result["decomposed_beats_standard"]
    assert result["near_ear_band_improvement"]
    assert result["pass"]


@pytest.mark.slow
def test_paper_scene_statistics(tmp_path):
    client = BsmClient.from_file(
        profile="paper", output_directory=str(tmp_path / "paper")
    )
    stats = client.simulations.run()
    assert stats["drr_db"] == pytest.approx(4.5, abs=2.0)
    assert stats["t60_s"] == pytest.approx(0.68, rel=0.25)
