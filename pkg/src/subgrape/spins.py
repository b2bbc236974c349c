"""Spin-system model: molecule files, rotating-frame Hamiltonians, partitions.

Conventions (documented, applied everywhere):

* Frequencies and J couplings are stored in Hz as given; Hamiltonians are
  built in angular units (rad/s).  A spin's rotating-frame offset is
  ``Omega_i = -2*pi*(freq_i - channel_offset)`` rad/s.
* The drift Hamiltonian is ``sum_i Omega_i sz_i/2 + sum_{i<j} 2*pi*J_ij *
  sz_i sz_j / 2`` with bare Pauli matrices, i.e. the coupling coefficient on
  ``sz x sz`` is ``pi*J_ij``.
* Operators on a pair of blocks (k, j) order the tensor factors as block k's
  spins (ascending original index) followed by block j's spins (ascending).
* Control amplitudes multiply bare Pauli operators (no 1/2 factor).
"""

from dataclasses import dataclass, field

import numpy as np

from .linalg import PAULI, embed_local

TWO_PI = 2.0 * np.pi


class MoleculeError(ValueError):
    """Malformed molecule file; message carries the offending line number."""


class PartitionError(ValueError):
    """Blocks are not a disjoint, nonempty cover of the spin indices."""


@dataclass(frozen=True)
class Spin:
    label: str
    species: str
    frequency_hz: float


@dataclass
class SpinSystem:
    spins: list
    couplings: dict       # (i, j) with i < j -> J in Hz
    channels: dict        # species -> carrier offset in Hz
    partitions: dict = field(default_factory=dict)  # name -> SubsystemPartition

    @property
    def n_spins(self):
        return len(self.spins)

    def index(self, label):
        for i, s in enumerate(self.spins):
            if s.label == label:
                return i
        raise KeyError(f"unknown spin label {label!r}")

    def coupling(self, i, j):
        return self.couplings.get((min(i, j), max(i, j)), 0.0)


@dataclass(frozen=True)
class SubsystemPartition:
    """Disjoint cover of the spin indices; blocks hold ascending indices."""

    blocks: tuple
    names: tuple = ()
    drop: frozenset = frozenset()  # inter-block couplings to ignore entirely

    def __post_init__(self):
        object.__setattr__(self, "blocks",
                           tuple(tuple(sorted(b)) for b in self.blocks))
        if not self.names:
            object.__setattr__(
                self, "names", tuple(f"B{k}" for k in range(len(self.blocks))))

    def validate(self, n_spins):
        if not self.blocks:
            raise PartitionError("partition has no blocks")
        seen = set()
        for b in self.blocks:
            if not b:
                raise PartitionError("empty block")
            for i in b:
                if i < 0 or i >= n_spins:
                    raise PartitionError(f"spin index {i} out of range")
                if i in seen:
                    raise PartitionError(f"spin index {i} in two blocks")
                seen.add(i)
        if len(seen) != n_spins:
            missing = sorted(set(range(n_spins)) - seen)
            raise PartitionError(f"spins {missing} not covered by any block")

    @property
    def n_blocks(self):
        return len(self.blocks)

    def block_of(self, spin_index):
        for k, b in enumerate(self.blocks):
            if spin_index in b:
                return k
        raise KeyError(f"spin index {spin_index} not in any block")

    def pairs(self):
        s = len(self.blocks)
        return [(k, j) for k in range(s) for j in range(k + 1, s)]


@dataclass
class HamiltonianSet:
    """Block-local drift Hamiltonians and pairwise inter-block couplings."""

    partition: SubsystemPartition
    intra: list                # H_{block k} on the block-local space, rad/s
    pair_couplings: dict       # (k, j) -> coupling operator on the pair space
    block_dims: list

    def pair_dim(self, pair):
        k, j = pair
        return self.block_dims[k] * self.block_dims[j]


# ---------------------------------------------------------------------------
# Molecule file I/O
#
# Line-oriented UTF-8, `#` comments:
#   CHANNEL <species> <offset_hz>
#   SPIN <label> <species> <frequency_hz>
#   J <label1> <label2> <J_hz>
#   PARTITION <block_name> <label> <label> ...
# Block names `<group>.<block>` belong to the named partition `<group>`.
# ---------------------------------------------------------------------------

def _parse_float(tok, lineno, what):
    try:
        return float(tok)
    except ValueError:
        raise MoleculeError(f"line {lineno}: bad {what} {tok!r}") from None


def parse_molecule(text):
    """Parse molecule-file contents into a SpinSystem."""
    channels = {}
    spins = []
    labels = {}
    couplings = {}
    raw_partitions = {}  # group -> list of (block_name, [labels])

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        kind = toks[0].upper()
        if kind == "CHANNEL":
            if len(toks) != 3:
                raise MoleculeError(f"line {lineno}: CHANNEL needs species and offset")
            species = toks[1]
            if species in channels:
                raise MoleculeError(f"line {lineno}: duplicate channel {species!r}")
            channels[species] = _parse_float(toks[2], lineno, "offset")
        elif kind == "SPIN":
            if len(toks) != 4:
                raise MoleculeError(
                    f"line {lineno}: SPIN needs label, species and frequency")
            label = toks[1]
            if label in labels:
                raise MoleculeError(f"line {lineno}: duplicate spin label {label!r}")
            labels[label] = len(spins)
            spins.append(Spin(label, toks[2], _parse_float(toks[3], lineno, "frequency")))
        elif kind == "J":
            if len(toks) != 4:
                raise MoleculeError(f"line {lineno}: J needs two labels and a value")
            for tok in toks[1:3]:
                if tok not in labels:
                    raise MoleculeError(f"line {lineno}: unknown spin label {tok!r}")
            i, j = labels[toks[1]], labels[toks[2]]
            if i == j:
                raise MoleculeError(f"line {lineno}: self-coupling of {toks[1]!r}")
            key = (min(i, j), max(i, j))
            if key in couplings:
                raise MoleculeError(
                    f"line {lineno}: duplicate coupling {toks[1]} {toks[2]}")
            couplings[key] = _parse_float(toks[3], lineno, "coupling")
        elif kind == "PARTITION":
            if len(toks) < 3:
                raise MoleculeError(
                    f"line {lineno}: PARTITION needs a block name and labels")
            block_name = toks[1]
            for tok in toks[2:]:
                if tok not in labels:
                    raise MoleculeError(f"line {lineno}: unknown spin label {tok!r}")
            group = block_name.split(".", 1)[0]
            raw_partitions.setdefault(group, []).append((block_name, toks[2:]))
        else:
            raise MoleculeError(f"line {lineno}: unknown directive {toks[0]!r}")

    for s in spins:
        if s.species not in channels:
            raise MoleculeError(
                f"spin {s.label!r} has species {s.species!r} with no CHANNEL entry")

    partitions = {}
    for group, entries in raw_partitions.items():
        blocks, names = [], []
        for block_name, block_labels in entries:
            blocks.append(tuple(sorted(labels[t] for t in block_labels)))
            suffix = block_name.split(".", 1)
            names.append(suffix[1] if len(suffix) == 2 else suffix[0])
        part = SubsystemPartition(tuple(blocks), tuple(names))
        part.validate(len(spins))
        partitions[group] = part

    return SpinSystem(spins, couplings, channels, partitions)


def write_molecule(sys):
    """Serialize a SpinSystem in canonical form (parse -> write round-trips)."""
    lines = []
    for species, offset in sys.channels.items():
        lines.append(f"CHANNEL {species} {offset!r}")
    for s in sys.spins:
        lines.append(f"SPIN {s.label} {s.species} {s.frequency_hz!r}")
    for (i, j) in sorted(sys.couplings):
        lines.append(f"J {sys.spins[i].label} {sys.spins[j].label} "
                     f"{sys.couplings[(i, j)]!r}")
    for group, part in sys.partitions.items():
        for name, block in zip(part.names, part.blocks):
            block_name = name if name == group else f"{group}.{name}"
            labels = " ".join(sys.spins[i].label for i in block)
            lines.append(f"PARTITION {block_name} {labels}")
    return "\n".join(lines) + "\n"


def read_molecule(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_molecule(fh.read())


def restrict(sys, keep_labels):
    """Sub-molecule on the given spins, keeping couplings among them."""
    keep = [sys.index(lab) for lab in keep_labels]
    keep_sorted = sorted(keep)
    remap = {old: new for new, old in enumerate(keep_sorted)}
    spins = [sys.spins[i] for i in keep_sorted]
    couplings = {
        (remap[i], remap[j]): v
        for (i, j), v in sys.couplings.items()
        if i in remap and j in remap
    }
    species = {s.species for s in spins}
    channels = {sp: off for sp, off in sys.channels.items() if sp in species}
    return SpinSystem(spins, couplings, channels)


# ---------------------------------------------------------------------------
# Hamiltonian construction (all drift terms are diagonal in the z basis)
# ---------------------------------------------------------------------------

def rotating_offsets(sys):
    """Rotating-frame offsets Omega_i = -2*pi*(freq_i - channel offset), rad/s."""
    out = np.empty(sys.n_spins)
    for i, s in enumerate(sys.spins):
        if s.species not in sys.channels:
            raise MoleculeError(f"no channel for species {s.species!r}")
        out[i] = -TWO_PI * (s.frequency_hz - sys.channels[s.species])
    return out


def _z_diag(pos, n_sites):
    """Diagonal of sigma_z at position `pos` of an n-site register (+-1)."""
    block = 2 ** (n_sites - 1 - pos)
    pattern = np.concatenate([np.ones(block), -np.ones(block)])
    return np.tile(pattern, 2**pos)


def _drift_diagonal(offsets, coupling_terms, n_sites):
    """Diagonal of sum_i Omega_i sz_i/2 + sum pairs pi*J sz sz, as a vector."""
    diag = np.zeros(2**n_sites)
    zs = [_z_diag(p, n_sites) for p in range(n_sites)]
    for pos, omega in offsets:
        diag += 0.5 * omega * zs[pos]
    for pos1, pos2, j_hz in coupling_terms:
        diag += np.pi * j_hz * zs[pos1] * zs[pos2]
    return diag


def build_hamiltonians(sys, part):
    """Block-local drift Hamiltonians H_k and pairwise couplings H_{kj}."""
    part.validate(sys.n_spins)
    offsets = rotating_offsets(sys)
    intra = []
    for block in part.blocks:
        nb = len(block)
        pos = {spin: p for p, spin in enumerate(block)}
        om = [(pos[i], offsets[i]) for i in block]
        cpl = [(pos[i], pos[j], sys.coupling(i, j))
               for bi, i in enumerate(block) for j in block[bi + 1:]
               if sys.coupling(i, j) != 0.0]
        intra.append(np.diag(_drift_diagonal(om, cpl, nb)).astype(np.complex128))

    pair_couplings = {}
    for (k, j) in part.pairs():
        bk, bj = part.blocks[k], part.blocks[j]
        n_pair = len(bk) + len(bj)
        pos = {spin: p for p, spin in enumerate(list(bk) + list(bj))}
        cpl = [(pos[a], pos[b], sys.coupling(a, b))
               for a in bk for b in bj
               if sys.coupling(a, b) != 0.0
               and (min(a, b), max(a, b)) not in part.drop]
        pair_couplings[(k, j)] = np.diag(
            _drift_diagonal([], cpl, n_pair)).astype(np.complex128)

    dims = [2 ** len(b) for b in part.blocks]
    return HamiltonianSet(part, intra, pair_couplings, dims)


def full_drift_diagonal(sys):
    """Diagonal of the full-register drift Hamiltonian (rad/s)."""
    offsets = rotating_offsets(sys)
    om = list(enumerate(offsets))
    cpl = [(i, j, v) for (i, j), v in sys.couplings.items() if v != 0.0]
    return _drift_diagonal(om, cpl, sys.n_spins)


def build_full_hamiltonian(sys, cap=12):
    """Full-register drift Hamiltonian as a dense (2^n, 2^n) matrix."""
    if sys.n_spins > cap:
        raise ValueError(
            f"{sys.n_spins} spins exceeds the configured cap of {cap}")
    return np.diag(full_drift_diagonal(sys)).astype(np.complex128)


def control_operators(sys, part, channels):
    """Per-block control operators, one (C, d_k, d_k) array per block.

    ``channels`` is a sequence of objects with ``species`` and ``axis``
    attributes (or plain (species, axis) tuples).  A channel drives
    ``sum_i sigma_axis^i`` over the block's spins of that species; blocks
    with no matching spin get a zero matrix.
    """
    chans = []
    for c in channels:
        if hasattr(c, "species"):
            chans.append((c.species, c.axis))
        else:
            chans.append((c[0], c[1]))
    out = []
    for block in part.blocks:
        nb = len(block)
        d = 2**nb
        ops = np.zeros((len(chans), d, d), dtype=np.complex128)
        for ci, (species, axis) in enumerate(chans):
            for p, spin in enumerate(block):
                if sys.spins[spin].species == species:
                    ops[ci] += embed_local(PAULI[axis], [p], nb)
        out.append(ops)
    return out
