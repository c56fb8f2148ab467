"""Exact-diagonalization reference for small chains.

Brute-force ground states on the full 3^L product space, used to validate
the DMRG engine and the fidelity recursion.  The Hamiltonian is applied
matrix-free: the Ising + single-ion + boundary-field part is a single
precomputed diagonal, and each bond contributes one 9x9 flip-flop block
applied along the corresponding pair of site axes.  Hard cap at L = 12
(3^12 = 531441 basis states).
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import CapacityError, ConvergenceError
from .model import LOCAL_DIM, SPLUS, SMINUS, SZ, SZ2, ModelParams

MAX_SITES = 12
LANCZOS_MAXITER = 5000

# Planar exchange on a bond; the lam * Sz Sz part lives in the diagonal.
FLIP_FLOP = 0.5 * (np.kron(SPLUS, SMINUS) + np.kron(SMINUS, SPLUS))


@dataclass(frozen=True)
class ExactState:
    """Ground-state eigenpair on the full product basis, unit-normalized."""

    params: ModelParams
    energy: float
    amplitudes: np.ndarray


def _diagonal_part(params: ModelParams) -> np.ndarray:
    """Diagonal of H over the 3^L basis: D (S^z)^2 + h1 S^z_1 + lam sum S^z_j S^z_{j+1}."""
    L = params.length
    sz = np.diag(SZ)
    sz2 = np.diag(SZ2)
    diag = np.zeros((LOCAL_DIM,) * L)
    for j in range(L):
        shape = [1] * L
        shape[j] = LOCAL_DIM
        diag += params.d_aniso * sz2.reshape(shape)
        if j == 0:
            diag += params.h1 * sz.reshape(shape)
    for j in range(L - 1):
        shape_a = [1] * L
        shape_a[j] = LOCAL_DIM
        shape_b = [1] * L
        shape_b[j + 1] = LOCAL_DIM
        diag += params.lam * sz.reshape(shape_a) * sz.reshape(shape_b)
    return diag.reshape(-1)


def hamiltonian_operator(params: ModelParams) -> LinearOperator:
    """Matrix-free H as a scipy LinearOperator on the 3^L space."""
    L = params.length
    dim = LOCAL_DIM**L
    diag = _diagonal_part(params)

    def matvec(v):
        v = np.asarray(v).reshape(-1)
        out = diag * v
        for j in range(L - 1):
            left = LOCAL_DIM**j
            right = LOCAL_DIM ** (L - j - 2)
            t = v.reshape(left, LOCAL_DIM * LOCAL_DIM, right)
            out += np.einsum("ab,xbz->xaz", FLIP_FLOP, t).reshape(-1)
        return out

    return LinearOperator((dim, dim), matvec=matvec, dtype=np.float64)


def _fix_sign(v: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude amplitude positive (first index wins ties)."""
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def exact_ground_state(params: ModelParams) -> ExactState:
    """Lowest eigenpair of the full chain Hamiltonian by Lanczos (ARPACK).

    Deterministic: fixed start vector and a fixed sign convention on the
    returned amplitudes.
    """
    L = params.length
    if L > MAX_SITES:
        raise CapacityError(
            f"exact diagonalization supports L <= {MAX_SITES}, got L = {L}")
    op = hamiltonian_operator(params)
    v0 = np.random.default_rng(7).standard_normal(op.shape[0])
    try:
        energies, vectors = eigsh(op, k=1, which="SA", v0=v0,
                                  maxiter=LANCZOS_MAXITER)
    except ArpackNoConvergence as exc:
        raise ConvergenceError(
            f"ED Lanczos did not converge for {params}") from exc
    energy = float(energies[0])
    vec = _fix_sign(vectors[:, 0])
    vec = vec / np.linalg.norm(vec)
    residual = np.linalg.norm(op.matvec(vec) - energy * vec)
    if residual > 1e-9:
        raise ConvergenceError(
            f"ED residual {residual:.3e} exceeds 1e-9 for {params}")
    return ExactState(params=params, energy=energy, amplitudes=vec)


def exact_overlap(a: ExactState, b: ExactState) -> float:
    """Fidelity |<a|b>| between two exact ground states of equal length."""
    if a.params.length != b.params.length:
        raise ValueError("overlap requires equal chain lengths, got "
                         f"{a.params.length} and {b.params.length}")
    return min(float(np.abs(np.dot(a.amplitudes, b.amplitudes))), 1.0)


def exact_half_chain_entropy(state: ExactState) -> float:
    """Von Neumann entropy (bits) of the half-chain reduced density matrix."""
    L = state.params.length
    if L % 2 != 0:
        raise ValueError(f"half-chain entropy needs even L, got {L}")
    half = LOCAL_DIM ** (L // 2)
    sigma = np.linalg.svd(state.amplitudes.reshape(half, half),
                          compute_uv=False)
    p = sigma**2
    p = p[p > 1e-16]
    return float(-np.sum(p * np.log2(p)))
