import numpy as np
import pytest

from conftest import toy_channels
from subgrape.pulse import (ChannelSpec, PulseFormatError, PulseProgram, clip,
                            dumps_pulse, loads_pulse, random_pulse)


def test_same_seed_same_pulse():
    chans = toy_channels()
    p1 = random_pulse(chans, 32, 1e-4, n_modes=5, seed=11)
    p2 = random_pulse(chans, 32, 1e-4, n_modes=5, seed=11)
    assert np.array_equal(p1.amplitudes, p2.amplitudes)
    p3 = random_pulse(chans, 32, 1e-4, n_modes=5, seed=12)
    assert not np.array_equal(p1.amplitudes, p3.amplitudes)


def test_zero_bound_channel_is_silent():
    chans = (ChannelSpec("s", "x", 1000.0), ChannelSpec("s", "y", 0.0))
    p = random_pulse(chans, 16, 1e-4, seed=0)
    assert np.abs(p.amplitudes[:, 1]).max() == 0.0
    assert np.abs(p.amplitudes[:, 0]).max() > 0.0


def test_random_pulse_respects_bounds():
    chans = toy_channels(bound=321.0)
    p = random_pulse(chans, 400, 5e-6, n_modes=8, seed=4)
    for c, chan in enumerate(chans):
        assert np.abs(p.amplitudes[:, c]).max() <= chan.bound + 0.0
    # smooth start aims at half the bound
    assert np.abs(p.amplitudes).max() == pytest.approx(0.5 * 321.0)


def test_duration_and_shape():
    p = random_pulse(toy_channels(), 25, 2e-4, seed=0)
    assert p.n_slices == 25
    assert p.n_channels == 2
    assert p.duration_s == pytest.approx(5e-3)


def test_clip_unchanged_when_inside():
    p = random_pulse(toy_channels(), 8, 1e-4, seed=1)
    assert np.array_equal(clip(p).amplitudes, p.amplitudes)


def test_clip_clamps_and_is_idempotent(rng):
    chans = toy_channels(bound=10.0)
    amps = rng.normal(scale=30.0, size=(12, 2))
    amps[0, 0] = 20.0
    p = PulseProgram(1e-4, chans, amps)
    c1 = clip(p)
    assert c1.amplitudes[0, 0] == 10.0
    assert np.abs(c1.amplitudes).max() <= 10.0
    assert np.array_equal(clip(c1).amplitudes, c1.amplitudes)


def test_pulse_validation():
    chans = toy_channels()
    with pytest.raises(ValueError):
        PulseProgram(0.0, chans, np.zeros((4, 2)))
    with pytest.raises(ValueError):
        PulseProgram(1e-4, chans, np.zeros((0, 2)))
    with pytest.raises(ValueError):
        PulseProgram(1e-4, chans, np.zeros((4, 3)))
    with pytest.raises(ValueError):
        ChannelSpec("s", "q", 1.0)


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------

def test_roundtrip_bit_identical(rng):
    chans = toy_channels(bound=2 * np.pi * 17e3)
    p = random_pulse(chans, 37, 3.3e-6, n_modes=7, seed=9)
    q = loads_pulse(dumps_pulse(p))
    assert q.tau_s == p.tau_s
    assert q.channels == p.channels
    assert np.array_equal(q.amplitudes, p.amplitudes)
    # serialization is canonical
    assert dumps_pulse(q) == dumps_pulse(p)


def test_file_roundtrip_on_disk(tmp_path):
    from subgrape.pulse import read_pulse, write_pulse
    p = random_pulse(toy_channels(), 5, 1e-5, seed=2)
    path = tmp_path / "x.pulse"
    write_pulse(p, path)
    q = read_pulse(path)
    assert np.array_equal(q.amplitudes, p.amplitudes)


def test_single_entry_file():
    text = "PULSE v1\nTAU 1e-4\nM 1\nCHANNELS s,x,100.0\n0.0\n"
    p = loads_pulse(text)
    assert p.amplitudes.shape == (1, 1)
    assert p.amplitudes[0, 0] == 0.0


def test_zero_slices_rejected():
    with pytest.raises(PulseFormatError, match="M must be >= 1"):
        loads_pulse("PULSE v1\nTAU 1e-4\nM 0\nCHANNELS s,x,1.0\n")


def test_malformed_header_rejected():
    with pytest.raises(PulseFormatError):
        loads_pulse("PULSE v2\nTAU 1\nM 1\nCHANNELS s,x,1\n0\n")
    with pytest.raises(PulseFormatError):
        loads_pulse("PULSE v1\nM 1\nTAU 1\nCHANNELS s,x,1\n0\n")


def test_row_length_mismatch_rejected():
    text = "PULSE v1\nTAU 1e-4\nM 2\nCHANNELS s,x,1.0 s,y,1.0\n0.0 0.0\n0.0\n"
    with pytest.raises(PulseFormatError, match="row 2"):
        loads_pulse(text)


def test_non_finite_amplitudes_rejected():
    text = "PULSE v1\nTAU 1e-4\nM 1\nCHANNELS s,x,1.0\nnan\n"
    with pytest.raises(PulseFormatError, match="non-finite"):
        loads_pulse(text)
