import numpy as np
import pytest

from subgrape.pulse import ChannelSpec
from subgrape.spins import Spin, SpinSystem, SubsystemPartition

DATA_12 = "src/subgrape/data/dcb12.mol"
DATA_6 = "src/subgrape/data/dcb6.mol"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def toy_two_block_system(j_inter=5.0):
    """2+2 spins, one rf species, small inter-block couplings."""
    sys = SpinSystem(
        spins=[Spin("A1", "s", 0.0), Spin("A2", "s", 500.0),
               Spin("B1", "s", -350.0), Spin("B2", "s", 650.0)],
        couplings={(0, 1): 30.0, (2, 3): 22.0, (1, 2): j_inter,
                   (0, 3): j_inter},
        channels={"s": 0.0},
    )
    part = SubsystemPartition(((0, 1), (2, 3)), ("L", "R"))
    return sys, part


def toy_channels(bound=2.0 * np.pi * 1000.0):
    return (ChannelSpec("s", "x", bound), ChannelSpec("s", "y", bound))


def random_system(rng, n_spins, n_species=2, coupling_scale=20.0):
    """Random small spin system with dense couplings."""
    species = [f"sp{q}" for q in range(n_species)]
    spins = [Spin(f"Q{i}", species[int(rng.integers(n_species))],
                  float(rng.uniform(-800.0, 800.0)))
             for i in range(n_spins)]
    couplings = {}
    for i in range(n_spins):
        for j in range(i + 1, n_spins):
            couplings[(i, j)] = float(rng.normal() * coupling_scale)
    channels = {sp: float(rng.uniform(-50.0, 50.0)) for sp in species}
    return SpinSystem(spins, couplings, channels)


def random_partition(rng, n_spins, max_blocks=4):
    """Random disjoint cover with shuffled (non-contiguous) blocks."""
    order = list(rng.permutation(n_spins))
    n_blocks = int(rng.integers(2, min(max_blocks, n_spins) + 1))
    cuts = sorted(rng.choice(range(1, n_spins), size=n_blocks - 1,
                             replace=False)) if n_blocks > 1 else []
    blocks, start = [], 0
    for cut in list(cuts) + [n_spins]:
        blocks.append(tuple(sorted(order[start:cut])))
        start = cut
    return SubsystemPartition(tuple(blocks))
