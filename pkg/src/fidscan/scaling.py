"""Finite-size scaling fits and the exponent relations of the Gaussian line.

A single Luttinger parameter K in (0, 2) fixes every exponent used here:
the correlation-length exponent nu = 1/(2 - K), the susceptibility
scaling exponent Delta_Q = 2K - 3, the energy-derivative exponent
rho = K/(2 - K), and the size scaling -(rho - 1)/nu = 2(1 - K) of the
second energy derivative at criticality.  The fitters are deliberately
plain unweighted least squares with deterministic multi-start grids.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .errors import ConvergenceError


@dataclass(frozen=True)
class ExponentSet:
    """All Gaussian-line exponents generated by one Luttinger parameter."""

    k: float
    nu: float
    delta_q: float
    rho: float
    energy_exponent: float
    classification: str
    d: int = 1
    z: int = 1
    delta_v: float = None

    def __post_init__(self):
        if self.delta_v is None:
            object.__setattr__(self, "delta_v", self.k)


@dataclass(frozen=True)
class FitResult:
    """Fitted parameters with one-sigma uncertainties and the residual sum."""

    model_name: str
    parameters: dict
    rss: float
    n_points: int
    derived: dict = field(default_factory=dict)


def classify_transition(rho: float) -> str:
    """Order of the transition from the energy-derivative exponent."""
    if rho < 1:
        return "2QPT"
    if rho < 2:
        return "3QPT"
    if rho <= 3:
        return "4QPT"
    return "QPT of order 5 or higher"


def exponents_from_k(k: float) -> ExponentSet:
    """Evaluate the closed-form exponent relations for K in (0, 2)."""
    if not 0 < k < 2:
        raise ValueError(f"K must lie in (0, 2), got {k}")
    nu = 1.0 / (2.0 - k)
    rho = k / (2.0 - k)
    return ExponentSet(k=k, nu=nu, delta_q=2.0 * k - 3.0, rho=rho,
                       energy_exponent=2.0 * (1.0 - k),
                       classification=classify_transition(rho))


def k_from_nu(nu: float) -> float:
    """Invert nu = 1/(2 - K)."""
    if nu <= 0:
        raise ValueError(f"nu must be positive, got {nu}")
    return 2.0 - 1.0 / nu


def k_from_delta_q(delta_q: float) -> float:
    """Invert Delta_Q = 2K - 3."""
    return (delta_q + 3.0) / 2.0


def k_from_energy_exponent(exponent: float) -> float:
    """Invert -(rho - 1)/nu = 2(1 - K)."""
    return 1.0 - exponent / 2.0


def _sigmas(pcov) -> np.ndarray:
    if pcov is None or not np.all(np.isfinite(pcov)):
        return None
    return np.sqrt(np.clip(np.diag(pcov), 0.0, None))


def _pack(names, popt, sigmas):
    return {name: (float(v), None if sigmas is None else float(s))
            for name, v, s in zip(names, popt,
                                  sigmas if sigmas is not None
                                  else [None] * len(popt))}


def fit_dc_nu(points) -> FitResult:
    """Extrapolate peak positions: D_max(L) = D_c + A L^(-1/nu).

    Deterministic multi-start over nu; the best residual wins.
    """
    pts = sorted(points)
    if len(pts) < 4:
        raise ValueError("D_c/nu fit needs at least 4 points")
    sizes = np.array([float(p[0]) for p in pts])
    if len(np.unique(sizes)) != len(sizes):
        raise ValueError("D_c/nu fit needs distinct L values")
    d_max = np.array([float(p[1]) for p in pts])

    def model(L, d_c, amp, nu):
        return d_c + amp * L ** (-1.0 / nu)

    best = None
    amp0 = d_max[0] - d_max[-1]
    for nu0 in (0.5, 0.75, 1.0, 1.5, 2.0):
        try:
            popt, pcov = curve_fit(
                model, sizes, d_max,
                p0=(d_max[-1], amp0 if amp0 != 0 else 0.1, nu0),
                bounds=([-np.inf, -np.inf, 0.05], [np.inf, np.inf, 20.0]),
                maxfev=20000)
        except RuntimeError:
            continue
        rss = float(np.sum((model(sizes, *popt) - d_max) ** 2))
        if best is None or rss < best[1]:
            best = (popt, rss, pcov)
    if best is None:
        raise ConvergenceError("D_c/nu fit did not converge from any start")
    popt, rss, pcov = best
    params = _pack(("d_c", "amplitude", "nu"), popt, _sigmas(pcov))
    return FitResult(model_name="peak_extrapolation", parameters=params,
                     rss=rss, n_points=len(pts),
                     derived={"k_from_nu": k_from_nu(params["nu"][0])})


def _linear_fit(x, y):
    """Least-squares line with hand-rolled one-sigma estimates (None if dof = 0)."""
    coeffs = np.polyfit(x, y, 1)
    resid = y - np.polyval(coeffs, x)
    rss = float(resid @ resid)
    dof = len(x) - 2
    sigmas = None
    if dof > 0:
        design = np.column_stack([x, np.ones_like(x)])
        cov = rss / dof * np.linalg.inv(design.T @ design)
        sigmas = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return coeffs, rss, sigmas


def fit_powerlaw(points) -> FitResult:
    """Slope of log y against log L; returns the exponent p in y ~ L^p."""
    pts = sorted(points)
    if len(pts) < 3:
        raise ValueError("power-law fit needs at least 3 points")
    y = np.array([float(p[1]) for p in pts])
    if np.any(y <= 0):
        raise ValueError("power-law fit needs positive values")
    x = np.log(np.array([float(p[0]) for p in pts]))
    (slope, intercept), rss, sigmas = _linear_fit(x, np.log(y))
    params = _pack(("exponent", "log_prefactor"), (slope, intercept), sigmas)
    return FitResult(model_name="powerlaw", parameters=params,
                     rss=rss, n_points=len(pts))


def fit_saturation(points) -> FitResult:
    """Saturating form y(L) = y_inf - a L^(-b) with b constrained positive."""
    pts = sorted(points)
    if len(pts) < 4:
        raise ValueError("saturation fit needs at least 4 points")
    sizes = np.array([float(p[0]) for p in pts])
    y = np.array([float(p[1]) for p in pts])

    def model(L, y_inf, a, b):
        return y_inf - a * L ** (-b)

    best = None
    spread = y[-1] - y[0]
    for b0 in (0.25, 0.5, 0.75, 1.0, 1.5):
        try:
            popt, pcov = curve_fit(
                model, sizes, y,
                p0=(y[-1], spread if spread != 0 else 0.1, b0),
                bounds=([-np.inf, -np.inf, 1e-6], [np.inf, np.inf, 20.0]),
                maxfev=20000)
        except RuntimeError:
            continue
        rss = float(np.sum((model(sizes, *popt) - y) ** 2))
        if best is None or rss < best[1]:
            best = (popt, rss, pcov)
    if best is None:
        raise ConvergenceError("saturation fit did not converge from any start")
    popt, rss, pcov = best
    params = _pack(("y_inf", "a", "b"), popt, _sigmas(pcov))
    return FitResult(model_name="saturation", parameters=params,
                     rss=rss, n_points=len(pts))


def fit_central_charge(points) -> FitResult:
    """Central charge from entropy peaks: slope of E_max vs log2 L times 6.

    The factor 6 applies to open boundary conditions.
    """
    pts = sorted(points)
    if len(pts) < 3:
        raise ValueError("central-charge fit needs at least 3 points")
    x = np.log2(np.array([float(p[0]) for p in pts]))
    y = np.array([float(p[1]) for p in pts])
    (slope, intercept), rss, sig = _linear_fit(x, y)
    params = _pack(("slope", "intercept"), (slope, intercept), sig)
    params["c"] = (6.0 * slope, None if sig is None else 6.0 * float(sig[0]))
    return FitResult(model_name="central_charge", parameters=params,
                     rss=rss, n_points=len(pts))
