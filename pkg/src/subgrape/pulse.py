"""Piecewise-constant pulse programs: construction, bounds, file I/O."""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelSpec:
    species: str
    axis: str          # "x" or "y"
    bound: float       # max |amplitude| in rad/s

    def __post_init__(self):
        if self.axis not in ("x", "y"):
            raise ValueError(f"axis must be 'x' or 'y', got {self.axis!r}")
        if self.bound < 0:
            raise ValueError("amplitude bound must be nonnegative")


DEFAULT_BOUND = 2.0 * math.pi * 20e3  # typical rf hardware scale, rad/s


def default_channels(sys, bound=DEFAULT_BOUND):
    """x and y channels for every species of the spin system, in file order."""
    return tuple(ChannelSpec(sp, ax, bound)
                 for sp in sys.channels for ax in ("x", "y"))


@dataclass
class PulseProgram:
    tau_s: float                 # slice duration, seconds
    channels: tuple              # ChannelSpec per column
    amplitudes: np.ndarray       # (M, C) float64, rad/s

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.float64)
        if self.tau_s <= 0:
            raise ValueError("slice duration must be positive")
        if self.amplitudes.ndim != 2:
            raise ValueError("amplitudes must be a 2-D (slices x channels) array")
        if self.amplitudes.shape[0] < 1:
            raise ValueError("need at least one slice")
        if self.amplitudes.shape[1] != len(self.channels):
            raise ValueError(
                f"{self.amplitudes.shape[1]} amplitude columns for "
                f"{len(self.channels)} channels")

    @property
    def n_slices(self):
        return self.amplitudes.shape[0]

    @property
    def n_channels(self):
        return len(self.channels)

    @property
    def duration_s(self):
        return self.n_slices * self.tau_s

    def bounds(self):
        return np.array([c.bound for c in self.channels])

    def with_amplitudes(self, amps):
        return PulseProgram(self.tau_s, self.channels, amps)


def random_pulse(channels, n_slices, tau_s, n_modes=6, seed=0):
    """Smooth random start: per channel, a sum of `n_modes` random-phase
    sinusoids with frequencies up to n_modes/(2T), scaled to half the
    channel bound and clipped.  Deterministic for a fixed seed."""
    channels = tuple(channels)
    rng = np.random.default_rng(seed)
    total = n_slices * tau_s
    t = (np.arange(n_slices) + 0.5) * tau_s
    amps = np.zeros((n_slices, len(channels)))
    for ci, chan in enumerate(channels):
        coeffs = rng.normal(size=n_modes)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=n_modes)
        wave = np.zeros(n_slices)
        for q in range(n_modes):
            freq = (q + 1) / (2.0 * total)
            wave += coeffs[q] * np.sin(2.0 * np.pi * freq * t + phases[q])
        peak = np.abs(wave).max()
        if peak > 0 and chan.bound > 0:
            wave *= 0.5 * chan.bound / peak
        else:
            wave[:] = 0.0
        amps[:, ci] = wave
    return clip(PulseProgram(tau_s, channels, amps))


def clip(pulse):
    """Clamp every amplitude into [-bound, +bound] for its channel."""
    bounds = pulse.bounds()
    return pulse.with_amplitudes(np.clip(pulse.amplitudes, -bounds, bounds))


# ---------------------------------------------------------------------------
# Pulse file format (UTF-8):
#   PULSE v1
#   TAU <seconds>
#   M <slices>
#   CHANNELS <species,axis,bound> <species,axis,bound> ...
#   <M lines of C whitespace-separated amplitudes in rad/s>
# Floats carry 17 significant digits so the round trip is exact in binary64.
# ---------------------------------------------------------------------------

class PulseFormatError(ValueError):
    pass


def dumps_pulse(pulse):
    chan_toks = " ".join(f"{c.species},{c.axis},{c.bound:.17g}"
                         for c in pulse.channels)
    lines = [
        "PULSE v1",
        f"TAU {pulse.tau_s:.17g}",
        f"M {pulse.n_slices}",
        f"CHANNELS {chan_toks}",
    ]
    for row in pulse.amplitudes:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


def loads_pulse(text):
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(lines) < 4 or lines[0] != "PULSE v1":
        raise PulseFormatError("missing 'PULSE v1' header")
    if not lines[1].startswith("TAU "):
        raise PulseFormatError("missing TAU line")
    tau_s = float(lines[1][4:])
    if not lines[2].startswith("M "):
        raise PulseFormatError("missing M line")
    n_slices = int(lines[2][2:])
    if n_slices < 1:
        raise PulseFormatError(f"M must be >= 1, got {n_slices}")
    if not lines[3].startswith("CHANNELS "):
        raise PulseFormatError("missing CHANNELS line")
    channels = []
    for tok in lines[3][9:].split():
        parts = tok.split(",")
        if len(parts) != 3:
            raise PulseFormatError(f"bad channel token {tok!r}")
        channels.append(ChannelSpec(parts[0], parts[1], float(parts[2])))
    body = lines[4:]
    if len(body) != n_slices:
        raise PulseFormatError(
            f"expected {n_slices} amplitude rows, found {len(body)}")
    amps = np.empty((n_slices, len(channels)))
    for m, row in enumerate(body):
        vals = row.split()
        if len(vals) != len(channels):
            raise PulseFormatError(
                f"row {m + 1} has {len(vals)} values for "
                f"{len(channels)} channels")
        amps[m] = [float(v) for v in vals]
    if not np.all(np.isfinite(amps)):
        raise PulseFormatError("non-finite amplitude in pulse file")
    return PulseProgram(tau_s, tuple(channels), amps)


def write_pulse(pulse, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_pulse(pulse))


def read_pulse(path):
    with open(path, "r", encoding="utf-8") as fh:
        return loads_pulse(fh.read())
