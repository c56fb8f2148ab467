"""Spin-1 operators and the anisotropic XXZ chain Hamiltonian terms.

The chain couples nearest neighbours through planar exchange plus an
Ising-like term of strength ``lam``, and every site carries a uniaxial
single-ion anisotropy ``d_aniso`` times (S^z)^2.  A Zeeman field ``h1``
acts on site 1 only; it selects a unique ground state near the Neel
boundary and is switched off for symmetry checks.

Basis order is fixed as (|+1>, |0>, |-1>) everywhere in the package.  In
this basis S^x S^x + S^y S^y = (S^+ S^- + S^- S^+)/2 has real entries, so
all Hamiltonian terms are built in real arithmetic.
"""

from dataclasses import dataclass

import numpy as np

SQRT2 = np.sqrt(2.0)

# Single-site matrices in the basis (|+1>, |0>, |-1>).
SZ = np.diag([1.0, 0.0, -1.0])
SZ2 = np.diag([1.0, 0.0, 1.0])
SPLUS = SQRT2 * np.array([[0.0, 1.0, 0.0],
                          [0.0, 0.0, 1.0],
                          [0.0, 0.0, 0.0]])
SMINUS = SPLUS.T.copy()
SX = 0.5 * (SPLUS + SMINUS)
SY = -0.5j * (SPLUS - SMINUS)

LOCAL_DIM = 3


@dataclass(frozen=True)
class SpinOperators:
    """The standard spin-1 matrices, 3x3, basis (|+1>, |0>, |-1>)."""

    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    sz2: np.ndarray
    s_plus: np.ndarray
    s_minus: np.ndarray


def spin1_operators() -> SpinOperators:
    """Return the spin-1 operator set; sx, sz, sz2, s_plus, s_minus are real, sy is complex."""
    return SpinOperators(sx=SX.copy(), sy=SY.copy(), sz=SZ.copy(),
                         sz2=SZ2.copy(), s_plus=SPLUS.copy(), s_minus=SMINUS.copy())


@dataclass(frozen=True)
class ModelParams:
    """Couplings of the chain: Ising anisotropy, single-ion anisotropy, boundary field, length.

    ``length`` must be even: the symmetric-cut fidelity contraction needs
    equal half-blocks.
    """

    lam: float
    d_aniso: float
    h1: float = -1.0
    length: int = 4

    def __post_init__(self):
        # L = 2 is allowed for exact diagonalization; DMRG needs L >= 4.
        if self.length < 2 or self.length % 2 != 0:
            raise ValueError(f"chain length must be even and >= 2, got {self.length}")


def bond_hamiltonian(params: ModelParams) -> np.ndarray:
    """Two-site bond term S^x S^x + S^y S^y + lam S^z S^z on the 9-dim product space.

    Built from the ladder form (S^+ S^- + S^- S^+)/2 so the result is real.
    """
    return (0.5 * (np.kron(SPLUS, SMINUS) + np.kron(SMINUS, SPLUS))
            + params.lam * np.kron(SZ, SZ))


def site_hamiltonian(params: ModelParams, site_index: int) -> np.ndarray:
    """Single-site term D (S^z)^2, plus h1 S^z when site_index is 1.

    Sites are numbered 1..L.
    """
    if not 1 <= site_index <= params.length:
        raise ValueError(
            f"site_index must be in 1..{params.length}, got {site_index}")
    h = params.d_aniso * SZ2
    if site_index == 1:
        h = h + params.h1 * SZ
    return h
