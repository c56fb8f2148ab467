"""Ground-state overlap between two DMRG runs with different couplings.

Each run expresses its wavefunction in its own renormalized block bases,
so the inner product needs the cross-run basis overlap matrices.  These
obey a recursion along the isometry stacks: starting from the bare-site
identity, each enlargement step sandwiches the previous overlap matrix
(tensored with a bare-site identity) between the two runs' isometries.
Iterating from both chain ends up to the symmetric cut and contracting
with the two center tensors gives the exact inner product of the two
truncated states.  No correction is applied for the truncated-basis bias.
"""

from dataclasses import dataclass

import numpy as np

from .engine import GroundStateRecord
from .errors import IncompatibleRecordsError
from .model import LOCAL_DIM

# Parameter step used for the finite-difference susceptibility.
DEFAULT_DELTA = 1e-3


@dataclass(frozen=True)
class OverlapAccumulator:
    """Cross-run block-basis overlaps <bar m | m> at block length l.

    Rows index the bra run's basis, columns the ket run's.  For identical
    runs this is the identity at every length.
    """

    matrix: np.ndarray
    block_length: int


def initial_accumulator() -> OverlapAccumulator:
    """Length-1 blocks are bare sites sharing one local basis."""
    return OverlapAccumulator(matrix=np.eye(LOCAL_DIM), block_length=1)


def _check_shapes(acc: OverlapAccumulator, o_ket: np.ndarray, o_bra: np.ndarray):
    if o_ket.shape[0] != LOCAL_DIM * acc.matrix.shape[1]:
        raise ValueError(
            f"ket isometry rows {o_ket.shape[0]} do not extend accumulator "
            f"columns {acc.matrix.shape[1]} by one site")
    if o_bra.shape[0] != LOCAL_DIM * acc.matrix.shape[0]:
        raise ValueError(
            f"bra isometry rows {o_bra.shape[0]} do not extend accumulator "
            f"rows {acc.matrix.shape[0]} by one site")


def advance_system(acc: OverlapAccumulator, o_ket: np.ndarray,
                   o_bra: np.ndarray) -> OverlapAccumulator:
    """One system-block step: o_bra^T (acc x 1_s) o_ket."""
    _check_shapes(acc, o_ket, o_bra)
    ket3 = o_ket.reshape(acc.matrix.shape[1], LOCAL_DIM, o_ket.shape[1])
    bra3 = o_bra.reshape(acc.matrix.shape[0], LOCAL_DIM, o_bra.shape[1])
    tmp = np.einsum("ij,jsk->isk", acc.matrix, ket3)
    new = np.einsum("ism,isk->mk", bra3, tmp)
    return OverlapAccumulator(matrix=new, block_length=acc.block_length + 1)


def advance_environment(acc: OverlapAccumulator, o_ket: np.ndarray,
                        o_bra: np.ndarray) -> OverlapAccumulator:
    """One environment-block step: o_bra^T (1_s x acc) o_ket."""
    _check_shapes(acc, o_ket, o_bra)
    ket3 = o_ket.reshape(LOCAL_DIM, acc.matrix.shape[1], o_ket.shape[1])
    bra3 = o_bra.reshape(LOCAL_DIM, acc.matrix.shape[0], o_bra.shape[1])
    tmp = np.einsum("ij,sjk->sik", acc.matrix, ket3)
    new = np.einsum("sim,sik->mk", bra3, tmp)
    return OverlapAccumulator(matrix=new, block_length=acc.block_length + 1)


def _check_compatible(a: GroundStateRecord, b: GroundStateRecord):
    if a.params.length != b.params.length:
        raise IncompatibleRecordsError(
            f"chain lengths differ: {a.params.length} vs {b.params.length}")
    if a.config.m != b.config.m:
        raise IncompatibleRecordsError(
            f"kept-state counts differ: {a.config.m} vs {b.config.m}")
    if a.config.sweeps != b.config.sweeps:
        raise IncompatibleRecordsError(
            f"sweep schedules differ: {a.config.sweeps} vs {b.config.sweeps}")
    expected = a.params.length // 2 - 2
    for rec in (a, b):
        if (len(rec.stacks.system) != expected
                or len(rec.stacks.environment) != expected):
            raise ValueError(
                "record was not captured at the symmetric cut "
                f"(stack depth {len(rec.stacks.system)}, expected {expected})")


def overlap(record_a: GroundStateRecord, record_b: GroundStateRecord) -> float:
    """|<Phi|Psi>| of two runs with identical L, m, and sweep schedule."""
    _check_compatible(record_a, record_b)
    acc_s = initial_accumulator()
    acc_e = initial_accumulator()
    for o_ket, o_bra in zip(record_a.stacks.system, record_b.stacks.system):
        acc_s = advance_system(acc_s, o_ket, o_bra)
    for o_ket, o_bra in zip(record_a.stacks.environment,
                            record_b.stacks.environment):
        acc_e = advance_environment(acc_e, o_ket, o_bra)
    value = np.einsum("aijb,ax,by,xijy->", record_b.wavefunction.tensor,
                      acc_s.matrix, acc_e.matrix,
                      record_a.wavefunction.tensor, optimize=True)
    return min(float(np.abs(value)), 1.0)


def susceptibility(f: float, delta: float, length: int) -> float:
    """Finite-difference response 2 (1 - F) / (L delta^2) of the fidelity drop."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if not -1e-10 <= f <= 1 + 1e-10:
        raise ValueError(f"fidelity must lie in [0, 1], got {f}")
    return 2.0 * (1.0 - min(f, 1.0)) / (length * delta * delta)
