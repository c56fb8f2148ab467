"""Finite-system DMRG for the spin-1 anisotropic XXZ chain.

Two-site scheme with open boundaries: infinite-size warmup grows both
blocks symmetrically, then full sweeps move the free site pair
left-to-right and back.  Each step diagonalizes the superblock
(system block + site + site + environment block) and truncates the grown
block to the m dominant density-matrix eigenstates.

Conventions that the fidelity recursion relies on:
  * system blocks enlarge as  kron(block, site)   (block index slow),
  * environment blocks as     kron(site, block)   (site index slow),
  * the superblock vector reshapes row-major to a tensor with indices
    (system block, left free site, right free site, environment block).

The run finishes with one extra diagonalization at the symmetric cut
(system and environment both of length L/2 - 1); everything the overlap
recursion needs is captured there: the wavefunction tensor, both isometry
stacks from the final sweep, and the density-matrix spectrum.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import ConfigError, ConvergenceError
from .model import LOCAL_DIM, SPLUS, SZ, ModelParams, site_hamiltonian

SITE_SZ = np.array([1, 0, -1])

# Superblock dimensions at or below this are diagonalized densely.
DENSE_CUTOFF = 96
# Eigenvalue ties within this are treated as one degenerate multiplet.
DEGENERACY_TOL = 1e-12
# Warmup eigensolves may run loose; every captured basis is rebuilt in sweeps.
WARMUP_TOL = 1e-8


@dataclass(frozen=True)
class DmrgConfig:
    """Run controls: kept states, sweep count, eigensolve tolerance."""

    m: int = 64
    sweeps: int = 5
    lanczos_tol: float = 1e-10
    trunc_target: float = 1e-9
    sz_sector: int | None = None

    def __post_init__(self):
        if self.m < 2:
            raise ConfigError(f"m must be >= 2, got {self.m}")
        if self.sweeps < 1:
            raise ConfigError(f"sweeps must be >= 1, got {self.sweeps}")
        if not self.lanczos_tol > 0:
            raise ConfigError(f"lanczos_tol must be > 0, got {self.lanczos_tol}")
        if not self.trunc_target > 0:
            raise ConfigError(f"trunc_target must be > 0, got {self.trunc_target}")


@dataclass(frozen=True)
class TransformationStack:
    """Isometries of the final sweep, index 0 holding the length-2 block map.

    system[i] takes kron(block of length i+1, site) to the length-(i+2)
    system block; environment[i] does the same with kron(site, block).
    """

    system: tuple
    environment: tuple
    local_dim: int = LOCAL_DIM


@dataclass(frozen=True)
class SuperblockWavefunction:
    """Ground-state tensor at the symmetric cut, indices (m_S, s, s, m_E)."""

    tensor: np.ndarray

    def __post_init__(self):
        if self.tensor.ndim != 4:
            raise ValueError("superblock wavefunction must have 4 indices")
        norm = np.linalg.norm(self.tensor)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"wavefunction norm {norm} is not 1 within 1e-12")


@dataclass(frozen=True)
class GroundStateRecord:
    """Everything a converged run exposes for fidelity and observables."""

    params: ModelParams
    config: DmrgConfig
    energy: float
    wavefunction: SuperblockWavefunction
    stacks: TransformationStack
    rho_spectrum: np.ndarray
    max_trunc_error: float
    sweep_energies: tuple = field(default=())
    total_sz: float | None = None


@dataclass
class _Block:
    """A renormalized block: Hamiltonian plus edge-site operators in its basis."""

    length: int
    basis_size: int
    h: np.ndarray
    conn_sp: np.ndarray  # S^+ on the free-end site
    conn_sz: np.ndarray  # S^z on the free-end site
    sectors: np.ndarray | None  # total S^z labels, kept only when blocking


def reduced_density_matrix(psi: SuperblockWavefunction, side: str) -> np.ndarray:
    """Trace the complementary half out of the symmetric-cut wavefunction."""
    t = psi.tensor
    mat = t.reshape(t.shape[0] * t.shape[1], t.shape[2] * t.shape[3])
    if side == "system":
        return mat @ mat.T
    if side == "environment":
        return mat.T @ mat
    raise ValueError(f"side must be 'system' or 'environment', got {side!r}")


def truncate(rho: np.ndarray, m: int, sectors: np.ndarray | None = None):
    """Isometry onto the top-m density-matrix eigenstates and the discarded weight.

    A degenerate multiplet straddling the cut is kept whole (within
    DEGENERACY_TOL) so that run-to-run basis flips cannot corrupt fidelity
    comparisons.  With ``sectors`` given, rho is diagonalized per S^z block
    and the kept vectors stay sector-pure.
    """
    dim = rho.shape[0]
    if sectors is None:
        w, u = np.linalg.eigh(rho)
        w = w[::-1]
        u = u[:, ::-1]
        kept_sectors = None
        keep = _kept_count(w, m)
        iso = np.ascontiguousarray(u[:, :keep])
    else:
        candidates = []  # (eigenvalue, sector, order) with embedded vectors
        vectors = []
        for sec in np.unique(sectors):
            idx = np.flatnonzero(sectors == sec)
            wb, ub = np.linalg.eigh(rho[np.ix_(idx, idx)])
            for col in range(len(idx) - 1, -1, -1):
                candidates.append((wb[col], int(sec), len(vectors)))
                vec = np.zeros(dim)
                vec[idx] = ub[:, col]
                vectors.append(vec)
        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
        w = np.array([c[0] for c in candidates])
        keep = _kept_count(w, m)
        iso = np.column_stack([vectors[c[2]] for c in candidates[:keep]])
        kept_sectors = np.array([c[1] for c in candidates[:keep]])
    error = max(0.0, 1.0 - float(np.sum(w[:keep])))
    return iso, error, kept_sectors


def _kept_count(w_desc: np.ndarray, m: int) -> int:
    keep = min(m, len(w_desc))
    # complete a degenerate multiplet straddling the cut, but never chain
    # through the negligible tail of the spectrum
    while (keep < len(w_desc) and w_desc[keep] > 1e-12
           and w_desc[keep - 1] - w_desc[keep] < DEGENERACY_TOL):
        keep += 1
    return keep


def _initial_system_block(params: ModelParams, blocking: bool) -> _Block:
    return _Block(length=1, basis_size=LOCAL_DIM,
                  h=site_hamiltonian(params, 1),
                  conn_sp=SPLUS.copy(), conn_sz=SZ.copy(),
                  sectors=SITE_SZ.copy() if blocking else None)


def _initial_environment_block(params: ModelParams, blocking: bool) -> _Block:
    return _Block(length=1, basis_size=LOCAL_DIM,
                  h=site_hamiltonian(params, params.length),
                  conn_sp=SPLUS.copy(), conn_sz=SZ.copy(),
                  sectors=SITE_SZ.copy() if blocking else None)


def _enlarge_system(block: _Block, params: ModelParams, site: int) -> _Block:
    """Attach the bare site to the right of a system block."""
    m = block.basis_size
    eye_m = np.eye(m)
    eye_s = np.eye(LOCAL_DIM)
    h = (np.kron(block.h, eye_s)
         + np.kron(eye_m, site_hamiltonian(params, site))
         + 0.5 * (np.kron(block.conn_sp, SPLUS.T)
                  + np.kron(block.conn_sp.T, SPLUS))
         + params.lam * np.kron(block.conn_sz, SZ))
    sectors = None
    if block.sectors is not None:
        sectors = np.add.outer(block.sectors, SITE_SZ).ravel()
    return _Block(length=block.length + 1, basis_size=m * LOCAL_DIM,
                  h=h, conn_sp=np.kron(eye_m, SPLUS),
                  conn_sz=np.kron(eye_m, SZ), sectors=sectors)


def _enlarge_environment(block: _Block, params: ModelParams, site: int) -> _Block:
    """Attach the bare site to the left of an environment block."""
    m = block.basis_size
    eye_m = np.eye(m)
    eye_s = np.eye(LOCAL_DIM)
    h = (np.kron(eye_s, block.h)
         + np.kron(site_hamiltonian(params, site), eye_m)
         + 0.5 * (np.kron(SPLUS, block.conn_sp.T)
                  + np.kron(SPLUS.T, block.conn_sp))
         + params.lam * np.kron(SZ, block.conn_sz))
    sectors = None
    if block.sectors is not None:
        sectors = np.add.outer(SITE_SZ, block.sectors).ravel()
    return _Block(length=block.length + 1, basis_size=m * LOCAL_DIM,
                  h=h, conn_sp=np.kron(SPLUS, eye_m),
                  conn_sz=np.kron(SZ, eye_m), sectors=sectors)


def _rotate_block(enl: _Block, iso: np.ndarray, kept_sectors) -> _Block:
    h = iso.T @ enl.h @ iso
    return _Block(length=enl.length, basis_size=iso.shape[1],
                  h=0.5 * (h + h.T),
                  conn_sp=iso.T @ enl.conn_sp @ iso,
                  conn_sz=iso.T @ enl.conn_sz @ iso,
                  sectors=kept_sectors)


def _superblock_matvec(sys_enl: _Block, env_enl: _Block, lam: float):
    a, b = sys_enl.basis_size, env_enl.basis_size
    ha, hb = sys_enl.h, env_enl.h
    # bond pieces stacked so one gemm handles all left multiplications
    left = np.vstack([sys_enl.conn_sp, sys_enl.conn_sp.T, sys_enl.conn_sz])
    spb, szb = env_enl.conn_sp, env_enl.conn_sz

    def matvec(v):
        psi = v.reshape(a, b)
        y = left @ psi
        out = ha @ psi
        out += psi @ hb
        out += 0.5 * (y[:a] @ spb)
        out += 0.5 * (y[a:2 * a] @ spb.T)
        out += lam * (y[2 * a:] @ szb)
        return out.reshape(-1)

    return matvec, a * b


def _fix_sign(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def _lowest_eigenpair(matvec, dim, tol, guess=None, step=None,
                      max_krylov=48, max_restarts=8):
    """Ground eigenpair: dense below the cutoff, else Lanczos.

    A good guess short-circuits the solve when its residual is already
    below tolerance (the usual case mid-sweep with wavefunction
    prediction); otherwise a restarted Lanczos with full
    reorthogonalization runs from the guess.  Cold starts go straight to
    ARPACK, which also serves as the fallback before giving up.
    """
    if dim <= DENSE_CUTOFF:
        basis = np.eye(dim)
        dense = np.column_stack([matvec(basis[:, i]) for i in range(dim)])
        w, u = np.linalg.eigh(0.5 * (dense + dense.T))
        return float(w[0]), _fix_sign(u[:, 0])

    x = None
    if guess is not None:
        norm = np.linalg.norm(guess)
        if norm > 1e-8:
            x = guess / norm
    if x is not None:
        hx = matvec(x)
        theta = float(x @ hx)
        if np.linalg.norm(hx - theta * x) <= tol * max(1.0, abs(theta)):
            return theta, _fix_sign(x)
        converged, theta, x = _lanczos_ground(
            matvec, dim, x, hx, tol, min(max_krylov, dim), max_restarts)
        if converged:
            return theta, _fix_sign(x)
    else:
        x = np.random.default_rng(20240217).standard_normal(dim)
        x /= np.linalg.norm(x)

    try:
        vals, vecs = eigsh(
            LinearOperator((dim, dim), matvec=matvec, dtype=np.float64),
            k=1, which="SA", v0=x, tol=tol, maxiter=5000)
    except ArpackNoConvergence as exc:
        raise ConvergenceError(
            f"superblock eigensolve failed to converge at step {step}",
            step=step) from exc
    return float(vals[0]), _fix_sign(vecs[:, 0])


def _lanczos_ground(matvec, dim, x, hx, tol, max_krylov, max_restarts):
    theta = float(x @ hx)
    for _ in range(max_restarts):
        basis = np.empty((max_krylov, dim))
        basis[0] = x
        alphas, betas = [], []
        w = hx
        y = np.array([1.0])
        for k in range(max_krylov):
            alphas.append(float(basis[k] @ w))
            w -= alphas[k] * basis[k]
            if k > 0:
                w -= betas[k - 1] * basis[k - 1]
            live = basis[:k + 1]
            w -= live.T @ (live @ w)  # full reorthogonalization
            beta = float(np.linalg.norm(w))
            theta, y = _tridiag_ground(alphas, betas)
            if beta * abs(y[-1]) <= tol * max(1.0, abs(theta)) or beta < 1e-13:
                x = y @ basis[:len(y)]
                return True, float(theta), x / np.linalg.norm(x)
            if k + 1 == max_krylov:
                break
            basis[k + 1] = w / beta
            betas.append(beta)
            w = matvec(basis[k + 1])
        x = y @ basis[:len(y)]
        x /= np.linalg.norm(x)
        hx = matvec(x)
    return False, theta, x


def _tridiag_ground(alphas, betas):
    if not betas:
        return alphas[0], np.array([1.0])
    w, u = scipy.linalg.eigh_tridiagonal(
        np.asarray(alphas), np.asarray(betas[:len(alphas) - 1]),
        select="i", select_range=(0, 0))
    return float(w[0]), u[:, 0]


class _Run:
    """Mutable state of one DMRG run (single-threaded by design)."""

    def __init__(self, params: ModelParams, config: DmrgConfig):
        if params.length < 4:
            raise ValueError(f"DMRG needs L >= 4, got L = {params.length}")
        self.params = params
        self.config = config
        self.blocking = config.sz_sector is not None
        self.left = {1: _initial_system_block(params, self.blocking)}
        self.right = {1: _initial_environment_block(params, self.blocking)}
        self.trmat_left = {}
        self.trmat_right = {}
        self.guess = None  # prediction for the next configuration
        self.sweep_trunc_max = 0.0
        self.step_count = 0
        # warmup keeps fewer states; sweeps rebuild every basis at full m
        self.warmup_m = min(config.m, 32)

    # -- single superblock solve at configuration (l, L - l - 2) ------------

    def _solve(self, left_len, superblock_len=None, tol=None):
        p = self.params
        L = p.length if superblock_len is None else superblock_len
        sys_enl = _enlarge_system(self.left[left_len], p, left_len + 1)
        env_len = L - left_len - 2
        env_enl = _enlarge_environment(self.right[env_len], p,
                                       p.length - env_len)
        matvec, dim = _superblock_matvec(sys_enl, env_enl, p.lam)
        self.step_count += 1
        tol = self.config.lanczos_tol if tol is None else tol

        if self.blocking:
            target = self._scaled_sector(L)
            mask = (sys_enl.sectors[:, None] + env_enl.sectors[None, :]
                    == target).ravel()
            indices = np.flatnonzero(mask)
            if len(indices) == 0:
                raise ConfigError(
                    f"S^z sector {target} is empty at superblock length {L}")

            def restricted(x):
                full = np.zeros(dim)
                full[indices] = x
                return matvec(full)[indices]

            v0 = None
            if self.guess is not None:
                v0 = self.guess.reshape(-1)[indices]
            energy, vec = _lowest_eigenpair(
                restricted, len(indices), tol,
                guess=v0, step=self.step_count)
            psi = np.zeros(dim)
            psi[indices] = vec
        else:
            v0 = self.guess.reshape(-1) if self.guess is not None else None
            energy, psi = _lowest_eigenpair(
                matvec, dim, tol,
                guess=v0, step=self.step_count)
        self.guess = None
        psi = psi.reshape(sys_enl.basis_size, env_enl.basis_size)
        return energy, psi, sys_enl, env_enl

    def _scaled_sector(self, superblock_len):
        # warmup superblocks are shorter; target scales with the chain
        target = self.config.sz_sector
        return int(target * superblock_len / self.params.length)

    # -- growth steps --------------------------------------------------------

    def _truncate_left(self, psi, sys_enl, m_max=None):
        rho = psi @ psi.T
        iso, err, kept = truncate(rho, m_max or self.config.m, sys_enl.sectors)
        self.sweep_trunc_max = max(self.sweep_trunc_max, err)
        self.left[sys_enl.length] = _rotate_block(sys_enl, iso, kept)
        self.trmat_left[sys_enl.length] = iso
        return iso

    def _truncate_right(self, psi, env_enl, m_max=None):
        rho = psi.T @ psi
        iso, err, kept = truncate(rho, m_max or self.config.m, env_enl.sectors)
        self.sweep_trunc_max = max(self.sweep_trunc_max, err)
        self.right[env_enl.length] = _rotate_block(env_enl, iso, kept)
        self.trmat_right[env_enl.length] = iso
        return iso

    # -- wavefunction prediction ---------------------------------------------

    def _predict_right(self, psi, left_len, iso_left):
        """Guess for (l+1, r-1) from psi at (l, r) after the left truncation."""
        env_len = self.params.length - left_len - 2
        if env_len - 1 < 1 or env_len not in self.trmat_right:
            return None
        o_env = self.trmat_right[env_len]
        y = iso_left.T @ psi  # (m_{l+1}, s * m_r)
        y = y.reshape(-1, o_env.shape[1]) @ o_env.T
        return y

    def _predict_left(self, psi, left_len, iso_right):
        """Guess for (l-1, r+1) from psi at (l, r) after the right truncation."""
        if left_len - 1 < 1 or left_len not in self.trmat_left:
            return None
        o_sys = self.trmat_left[left_len]
        w = psi @ iso_right  # (m_l * s, m_{r+1})
        w = w.reshape(o_sys.shape[1], -1)
        return o_sys @ w

    # -- passes ----------------------------------------------------------------

    def warmup(self):
        L = self.params.length
        tol = max(self.config.lanczos_tol, WARMUP_TOL)
        for l in range(1, L // 2 - 1):
            _, psi, sys_enl, env_enl = self._solve(
                l, superblock_len=2 * l + 2, tol=tol)
            self._truncate_left(psi, sys_enl, m_max=self.warmup_m)
            self._truncate_right(psi, env_enl, m_max=self.warmup_m)

    def sweep(self):
        """One full sweep: center to right end, to left end, back to center."""
        L = self.params.length
        l_c = L // 2 - 1
        self.sweep_trunc_max = 0.0
        center_energy = None
        for l in range(l_c, L - 3):
            energy, psi, sys_enl, _ = self._solve(l)
            if l == l_c:
                center_energy = energy
            iso = self._truncate_left(psi, sys_enl)
            self.guess = self._predict_right(psi, l, iso)
        for l in range(L - 3, 1, -1):
            _, psi, _, env_enl = self._solve(l)
            iso = self._truncate_right(psi, env_enl)
            self.guess = self._predict_left(psi, l, iso)
        for l in range(1, l_c):
            _, psi, sys_enl, _ = self._solve(l)
            iso = self._truncate_left(psi, sys_enl)
            self.guess = self._predict_right(psi, l, iso)
        return center_energy

    def capture(self):
        """Final diagonalization at the symmetric cut; no truncation."""
        L = self.params.length
        l_c = L // 2 - 1
        energy, psi, sys_enl, env_enl = self._solve(l_c)
        m_s = self.left[l_c].basis_size
        m_e = self.right[l_c].basis_size
        tensor = psi.reshape(m_s, LOCAL_DIM, LOCAL_DIM, m_e)

        rho = psi @ psi.T
        spectrum = np.linalg.eigvalsh(rho)[::-1]
        spectrum = np.clip(spectrum, 0.0, None)

        total_sz = None
        if self.blocking:
            weights = tensor**2
            total_sz = float(np.einsum(
                "iabj,i->", weights, self.left[l_c].sectors.astype(float))
                + np.einsum("iabj,a->", weights, SITE_SZ.astype(float))
                + np.einsum("iabj,b->", weights, SITE_SZ.astype(float))
                + np.einsum("iabj,j->", weights,
                            self.right[l_c].sectors.astype(float)))

        stacks = TransformationStack(
            system=tuple(self.trmat_left[l] for l in range(2, l_c + 1)),
            environment=tuple(self.trmat_right[l] for l in range(2, l_c + 1)))
        return energy, tensor, spectrum, stacks, total_sz


def run_dmrg(params: ModelParams, config: DmrgConfig) -> GroundStateRecord:
    """Run warmup plus ``config.sweeps`` finite sweeps and capture the center.

    Deterministic for identical inputs: fixed cold-start vectors, fixed
    sign conventions, and a fixed truncation tie-break.
    """
    run = _Run(params, config)
    run.warmup()
    sweep_energies = []
    for _ in range(config.sweeps):
        center_energy = run.sweep()
        if center_energy is not None:
            sweep_energies.append(center_energy)
    energy, tensor, spectrum, stacks, total_sz = run.capture()
    sweep_energies.append(energy)
    return GroundStateRecord(
        params=params, config=config, energy=energy,
        wavefunction=SuperblockWavefunction(tensor),
        stacks=stacks, rho_spectrum=spectrum,
        max_trunc_error=run.sweep_trunc_max,
        sweep_energies=tuple(sweep_energies),
        total_sz=total_sz)
