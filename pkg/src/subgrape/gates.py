"""Named gates and target construction for the command line and tests."""

import math
import re

import numpy as np

from .linalg import SIGMA_X, SIGMA_Y, SIGMA_Z, embed_local
from .objective import TargetGate


def hadamard():
    return np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)


def rx(theta):
    return (math.cos(theta / 2) * np.eye(2)
            - 1j * math.sin(theta / 2) * SIGMA_X).astype(np.complex128)


def ry(theta):
    return (math.cos(theta / 2) * np.eye(2)
            - 1j * math.sin(theta / 2) * SIGMA_Y).astype(np.complex128)


def rz(theta):
    return (math.cos(theta / 2) * np.eye(2)
            - 1j * math.sin(theta / 2) * SIGMA_Z).astype(np.complex128)


def cnot():
    # Control is the first listed qubit.
    return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
                    dtype=np.complex128)


def cz():
    return np.diag([1, 1, 1, -1]).astype(np.complex128)


_ANGLE_TOKEN = re.compile(r"^[0-9pi+\-*/(). ]+$")


def parse_angle(text):
    """Evaluate an angle expression of digits, pi and + - * / ( )."""
    if not _ANGLE_TOKEN.match(text):
        raise ValueError(f"bad angle expression {text!r}")
    try:
        return float(eval(text, {"__builtins__": {}}, {"pi": math.pi}))
    except Exception as exc:
        raise ValueError(f"bad angle expression {text!r}: {exc}") from None


_GATE_SPEC = re.compile(r"^\s*([A-Za-z]+)\s*(\(([^)]*)\))?\s+(.*\S)\s*$")

_ONE_QUBIT = {"h": lambda: hadamard()}
_ROTATIONS = {"rx": rx, "ry": ry, "rz": rz}
_TWO_QUBIT = {"cnot": cnot, "cx": cnot, "cz": cz}


def parse_gate_spec(text):
    """Parse 'Rx(pi/2) C1' style target descriptions.

    Returns (gate matrix in listed-qubit order, [spin labels]).
    """
    m = _GATE_SPEC.match(text)
    if not m:
        raise ValueError(f"cannot parse target {text!r}")
    name = m.group(1).lower()
    angle = m.group(3)
    labels = m.group(4).split()
    if name in _ROTATIONS:
        if angle is None:
            raise ValueError(f"gate {m.group(1)} needs an angle")
        gate1 = _ROTATIONS[name](parse_angle(angle))
        # One rotation per listed spin.
        mat = np.array([[1.0]], dtype=np.complex128)
        for _ in labels:
            mat = np.kron(mat, gate1)
        return mat, labels
    if name in _ONE_QUBIT:
        if angle is not None:
            raise ValueError(f"gate {m.group(1)} takes no angle")
        mat = np.array([[1.0]], dtype=np.complex128)
        for _ in labels:
            mat = np.kron(mat, _ONE_QUBIT[name]())
        return mat, labels
    if name in _TWO_QUBIT:
        if angle is not None:
            raise ValueError(f"gate {m.group(1)} takes no angle")
        if len(labels) != 2:
            raise ValueError(f"gate {m.group(1)} needs exactly two spins")
        return _TWO_QUBIT[name](), labels
    raise ValueError(f"unknown gate {m.group(1)!r}")


def reorder_gate(mat, listed_positions):
    """Re-express a k-qubit gate given in listed-qubit order in the basis
    where its qubits are sorted ascending."""
    k = len(listed_positions)
    asc = sorted(listed_positions)
    if listed_positions == asc:
        return mat
    where = [listed_positions.index(q) for q in asc]
    x = np.arange(2**k)
    perm = np.zeros(2**k, dtype=np.int64)
    for t_asc, t_listed in enumerate(where):
        perm |= ((x >> (k - 1 - t_asc)) & 1) << (k - 1 - t_listed)
    return mat[np.ix_(perm, perm)]


def build_targets(sys, partition, gate_text):
    """TargetGate from a description like 'Rx(pi/2) C1': the named gate on
    the listed spins, identity on every other block.

    All listed spins must lie in one block (the target must factor across
    the partition).
    """
    mat, labels = parse_gate_spec(gate_text)
    idx = [sys.index(lab) for lab in labels]
    owners = {partition.block_of(i) for i in idx}
    if len(owners) != 1:
        raise ValueError(
            f"target spins {labels} span blocks "
            f"{sorted(partition.names[k] for k in owners)}; a target must "
            f"act within a single block")
    owner = owners.pop()
    block = partition.blocks[owner]
    positions = [block.index(i) for i in idx]
    local = reorder_gate(mat, positions)
    blocks = []
    for k, b in enumerate(partition.blocks):
        if k == owner:
            blocks.append(embed_local(local, sorted(positions), len(b)))
        else:
            blocks.append(np.eye(2 ** len(b), dtype=np.complex128))
    return TargetGate(tuple(blocks))
