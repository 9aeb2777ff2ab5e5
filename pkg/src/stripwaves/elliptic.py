"""Spectral solvers for the mixed and Dirichlet problems on the strip.

Both problems share the Laplacian on ``[-L, L) x [-omega, 0]``:

* mixed:      ``u = f`` on the top, ``grad_nb u = g`` on the bottom,
* Dirichlet:  ``u = f`` on the top, ``u = g`` on the bottom,

with ``grad_nb = -d/dz`` (outward normal at the bottom points down).
Discretization is Fourier in x (data must decay at the window ends; callers
subtract weighted limits first) times Chebyshev collocation in z.  Each
Fourier mode yields a small dense system ``(Dz^2 - k^2) u_k = h_k`` with two
boundary rows; the per-mode inverses are cached on first use, so repeated
solves on one grid cost one FFT pair plus a batched matmul.

The module also exposes the eigenvalue line utilities and the numerical
verification of the weighted a priori estimates (ratio reports).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import EigenlineViolation, ResolutionError
from .grid import StripGrid, WeightProfile, trace_norm, weighted_norm

__all__ = [
    "MixedBVP",
    "DirichletBVP",
    "eigenvalues_mixed",
    "eigenvalues_dirichlet",
    "check_eigenline",
    "solve_mixed",
    "solve_dirichlet",
    "verify_weighted_estimate",
    "StripSolver",
]


def eigenvalues_mixed(omega: float, m: int) -> float:
    """Eigenvalue line (m + 1/2) pi / omega of the mixed problem.

    Total in omega > 0; the contact-angle restriction omega < pi/2 is a
    domain/scenario constraint, not a property of the formula.
    """
    if omega <= 0.0:
        raise ValueError("omega must be positive")
    return (m + 0.5) * np.pi / omega


def eigenvalues_dirichlet(omega: float, m: int) -> float:
    """Eigenvalue line m pi / omega of the Dirichlet problem (m != 0)."""
    if m == 0:
        raise ValueError("m = 0 is not an eigenvalue of the Dirichlet problem")
    return m * np.pi / omega


def check_eigenline(gamma: float, omega: float, omega_r: float,
                    problem: str = "mixed", atol: float = 1e-9):
    """Raise EigenlineViolation if gamma sits on an eigenvalue line."""
    for om in (omega, omega_r):
        m_max = int(abs(gamma) * om / np.pi) + 2
        for m in range(-m_max, m_max + 1):
            if problem == "mixed":
                lam = eigenvalues_mixed(om, m)
            else:
                if m == 0:
                    continue
                lam = eigenvalues_dirichlet(om, m)
            if abs(gamma - lam) < atol:
                raise EigenlineViolation(
                    f"gamma = {gamma} within {atol:.0e} of eigenvalue "
                    f"{lam:.12g} (omega = {om:.6g}, {problem})"
                )


@dataclass
class MixedBVP:
    """Poisson data: interior h, Dirichlet top f, Neumann bottom g."""

    h: np.ndarray
    f: np.ndarray
    g: np.ndarray
    grid: StripGrid

    def __post_init__(self):
        if not np.all(np.isfinite(self.h)):
            raise ValueError("interior source h is not finite")
        if not (np.all(np.isfinite(self.f)) and np.all(np.isfinite(self.g))):
            raise ValueError("boundary data are not finite")


@dataclass
class DirichletBVP:
    """Poisson data: interior h, Dirichlet top f, Dirichlet bottom g."""

    h: np.ndarray
    f: np.ndarray
    g: np.ndarray
    grid: StripGrid


@lru_cache(maxsize=8)
def _mode_inverses(grid: StripGrid, kind: str) -> np.ndarray:
    """Per-mode inverse operators, shape (n_k, nz, nz).

    kind selects the boundary rows:
      'mixed'      top Dirichlet, bottom Neumann (-dz)
      'dirichlet'  top Dirichlet, bottom Dirichlet
      'neumann'    top Neumann (+dz), bottom Neumann (-dz); the singular
                   k = 0 block is replaced by a mean-zero-gauged operator.
    """
    nz = grid.nz
    Dz = grid.Dz
    D2 = Dz @ Dz
    k = grid.k
    ops = np.empty((k.size, nz, nz))
    for i, kk in enumerate(k):
        A = D2 - kk**2 * np.eye(nz)
        if kind == "mixed":
            A[0, :] = 0.0
            A[0, 0] = 1.0
            A[-1, :] = -Dz[-1, :]
        elif kind == "dirichlet":
            A[0, :] = 0.0
            A[0, 0] = 1.0
            A[-1, :] = 0.0
            A[-1, -1] = 1.0
        elif kind == "neumann":
            A[0, :] = Dz[0, :]
            A[-1, :] = -Dz[-1, :]
            if kk == 0.0:
                # pure Neumann mode: pin the z-mean instead of the top row
                A[0, :] = grid.wz
        else:
            raise ValueError(kind)
        ops[i] = np.linalg.inv(A)
    return ops


def _solve_modes(grid: StripGrid, kind: str, h, top, bottom):
    """Assemble per-mode right-hand sides and apply the cached inverses."""
    hh = np.fft.rfft(np.asarray(h, dtype=float), axis=0)
    th = np.fft.rfft(np.asarray(top, dtype=float))
    bh = np.fft.rfft(np.asarray(bottom, dtype=float))
    rhs = hh.copy()
    rhs[:, 0] = th
    rhs[:, -1] = bh
    ops = _mode_inverses(grid, kind)
    uh = np.einsum("kij,kj->ki", ops, rhs)
    return np.fft.irfft(uh, n=grid.nx, axis=0)


def _residual_check(grid: StripGrid, u, h, tol: float):
    """Guard against under-resolved data.

    The collocation residual vanishes at its own nodes by construction, so
    resolution is judged by spectral tail content instead: the top quarter of
    Fourier modes in x and of Chebyshev coefficients in z must carry a
    negligible share of the solution.
    """
    from scipy.fft import dct

    fh = np.abs(np.fft.rfft(u, axis=0))
    total_x = float(np.sum(fh**2))
    if total_x == 0.0:
        return 0.0
    cut = 3 * fh.shape[0] // 4
    frac_x = np.sqrt(np.sum(fh[cut:] ** 2) / total_x)
    cz = dct(u, type=1, axis=1)
    total_z = float(np.sum(cz**2))
    cutz = 3 * grid.nz // 4
    frac_z = np.sqrt(np.sum(cz[:, cutz:] ** 2) / total_z)
    rel = max(frac_x, frac_z)
    if rel > tol:
        raise ResolutionError(
            f"spectral tail fraction {rel:.3e} exceeds {tol:.1e}; "
            "data under-resolved"
        )
    return rel


def solve_mixed(bvp: MixedBVP, check: bool = True, tol: float = 1e-5):
    """Solve the mixed problem; spectral in x, collocation in z.

    ``check=True`` verifies the interior residual against ``tol`` (relative,
    max norm) and raises ResolutionError on failure.
    """
    u = _solve_modes(bvp.grid, "mixed", bvp.h, bvp.f, bvp.g)
    if check:
        _residual_check(bvp.grid, u, bvp.h, tol)
    return u


def solve_dirichlet(bvp: DirichletBVP, check: bool = True, tol: float = 1e-5):
    """Solve the Dirichlet problem (top and bottom data)."""
    u = _solve_modes(bvp.grid, "dirichlet", bvp.h, bvp.f, bvp.g)
    if check:
        _residual_check(bvp.grid, u, bvp.h, tol)
    return u


class StripSolver:
    """Convenience wrapper bundling a grid with the cached solver kinds."""

    def __init__(self, grid: StripGrid):
        self.grid = grid

    def mixed(self, h, f, g, **kw):
        return solve_mixed(MixedBVP(h, f, g, self.grid), **kw)

    def dirichlet(self, h, f, g, **kw):
        return solve_dirichlet(DirichletBVP(h, f, g, self.grid), **kw)

    def neumann(self, h, top_flux, bottom_flux):
        """Both-sides Neumann solve, gauged to zero mean; data must satisfy
        the compatibility condition (checked by callers)."""
        return _solve_modes(self.grid, "neumann", h, top_flux, bottom_flux)


def verify_weighted_estimate(case, gamma: float, l: int, wp: WeightProfile,
                             omega_r: float | None = None):
    """Measure the weighted elliptic estimate ratio for one data set.

    Returns ``ratio = ||alpha^g u||_{H^l} / (||alpha^g h||_{H^{l-2}} +
    |alpha^g f|_{H^{l-1/2}} + |alpha^g g|_{H^{l-3/2}})`` (Dirichlet case:
    both boundary norms at order ``l - 1/2``).  The hypothesis |gamma| <
    min(pi/2omega, pi/2omega_r) (mixed) resp. pi/omega (Dirichlet) is
    enforced through the eigenline guard.
    """
    grid = case.grid
    om = grid.omega
    om_r = omega_r if omega_r is not None else wp.beta_r * om
    is_mixed = isinstance(case, MixedBVP)
    problem = "mixed" if is_mixed else "dirichlet"
    check_eigenline(gamma, om, om_r, problem=problem)
    lam0 = min(eigenvalues_mixed(om, 0), eigenvalues_mixed(om_r, 0)) \
        if is_mixed else min(np.pi / om, np.pi / om_r)
    if abs(gamma) >= lam0:
        raise EigenlineViolation(
            f"|gamma| = {abs(gamma)} outside the open interval (0, {lam0:.6g})"
        )

    u = solve_mixed(case) if is_mixed else solve_dirichlet(case)
    if l >= 2:
        num = weighted_norm(u, gamma, l, grid, wp, tail_tol=None)
        den_h = weighted_norm(case.h, gamma, l - 2, grid, wp, tail_tol=None)
    else:
        num = weighted_norm(u, gamma, 1, grid, wp, tail_tol=None)
        # H^{-1} surrogate for the source at l = 1 (spectral multiplier)
        aw = wp.alpha_pow(grid.x, gamma).reshape(-1, 1)
        den_h = np.sqrt(sum(
            trace_norm((case.h * aw)[:, j], -1.0, grid) ** 2 * w
            for j, w in enumerate(grid.wz)))
    af = wp.alpha_pow(grid.x, gamma) * np.asarray(case.f, dtype=float)
    ag = wp.alpha_pow(grid.x, gamma) * np.asarray(case.g, dtype=float)
    if is_mixed:
        den = den_h + trace_norm(af, l - 0.5, grid) + trace_norm(ag, l - 1.5, grid)
    else:
        den = den_h + trace_norm(af, l - 0.5, grid) + trace_norm(ag, l - 0.5, grid)
    if den == 0.0:
        return {"ratio": 0.0, "num": 0.0, "den": 0.0, "gamma": gamma, "l": l,
                "grid": (grid.nx, grid.nz), "problem": problem}
    return {"ratio": num / den, "num": num, "den": den, "gamma": gamma,
            "l": l, "grid": (grid.nx, grid.nz), "problem": problem}
