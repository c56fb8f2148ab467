"""Derived quantities along a single-ion-anisotropy scan.

A scan holds one row per grid point at fixed (lam, L): ground energy and
its density, the fidelity to the neighbouring point, the susceptibility,
the half-chain entanglement entropy, and the worst truncation error.
Second derivatives of the energy density and peak positions are computed
from the assembled series.
"""

from dataclasses import dataclass

import numpy as np

GRID_TOL = 1e-12


@dataclass(frozen=True)
class ScanRecord:
    """One (lam, L, D) grid point of a scan."""

    lam: float
    length: int
    d_aniso: float
    delta: float
    m: int
    energy: float
    e_density: float
    fidelity: float
    susceptibility: float
    entropy: float
    max_trunc_error: float


@dataclass(frozen=True)
class ScanSeries:
    """Scan records over a uniform, strictly increasing D-grid at fixed (lam, L)."""

    records: tuple
    grid_step: float

    def __post_init__(self):
        d = np.array([r.d_aniso for r in self.records])
        if len(d) >= 2:
            steps = np.diff(d)
            if np.any(steps <= 0) or np.any(np.abs(steps - self.grid_step) > GRID_TOL):
                raise ValueError("D values must increase uniformly by grid_step")

    @property
    def d_values(self):
        return np.array([r.d_aniso for r in self.records])

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])


def entanglement_entropy(rho_spectrum) -> float:
    """Von Neumann entropy in bits of a density-matrix spectrum.

    Entries below 1e-16 contribute nothing; anything more negative than
    -1e-10 means the input is not a spectrum.
    """
    p = np.asarray(rho_spectrum, dtype=float)
    if p.size and p.min() < -1e-10:
        raise ValueError(f"negative probability {p.min()} in spectrum")
    if p.sum() > 1 + 1e-10:
        raise ValueError(f"spectrum sums to {p.sum()}, more than 1")
    p = p[p > 1e-16]
    if p.size == 0:
        return 0.0
    return float(-np.sum(p * np.log2(p)))


def second_derivative(series: ScanSeries):
    """Central second difference of the energy density on the scan grid.

    Returns (D, d2e/dD2) pairs at interior points; exact for cubics
    sampled on a uniform grid.
    """
    if len(series.records) < 3:
        raise ValueError("second derivative needs at least 3 grid points")
    d = series.d_values
    e = series.column("e_density")
    h = series.grid_step
    curv = (e[:-2] - 2 * e[1:-1] + e[2:]) / (h * h)
    return list(zip(d[1:-1].tolist(), curv.tolist()))


def peak_location(curve):
    """Vertex of the parabola through the discrete maximum and its neighbours.

    The maximum must be interior; a maximum on the boundary raises, which
    signals that the scan window has to widen.
    """
    pts = list(curve)
    if len(pts) < 3:
        raise ValueError("peak location needs at least 3 points")
    values = np.array([v for _, v in pts])
    i = int(np.argmax(values))
    if i == 0 or i == len(pts) - 1:
        raise ValueError(
            f"maximum sits on the scan boundary at D = {pts[i][0]}; widen the window")
    # Lagrange parabola through the three points, exact for any spacing
    xa, ya = pts[i - 1]
    xb, yb = pts[i]
    xc, yc = pts[i + 1]
    denom = (xa - xb) * (xa - xc) * (xb - xc)
    a = (xc * (yb - ya) + xb * (ya - yc) + xa * (yc - yb)) / denom
    b = (xc * xc * (ya - yb) + xb * xb * (yc - ya) + xa * xa * (yb - yc)) / denom
    if a == 0:  # flat top: fall back to the discrete maximum
        return float(xb), float(yb)
    x_max = -b / (2 * a)
    c = ya - a * xa * xa - b * xa
    return float(x_max), float(a * x_max * x_max + b * x_max + c)
