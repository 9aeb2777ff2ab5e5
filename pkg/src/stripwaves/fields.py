"""Bulk fields on the strip: potential, velocity, pressure, Taylor sign.

Sign conventions.  The pulled-back potential ``phi`` is oriented so that the
transported kinematic relations hold in the form used throughout:

    dz phi |_top = -(dx x) (dt zeta o T),      dz phi |_bottom = 0,
    (dt zeta) o T = -(dx x)^-1 N0 psi,         psi := phi|_top,

i.e. ``phi`` is the negative of the classical velocity potential composed
with the map.  The physical velocity is therefore

    v o T = -M grad phi,   M = |T'|^-2 [[dx x, -dx z], [dx z, dx x]],

(the rotation form of the inverse-Jacobian transpose; the corresponding
corner-limit algebra for a_v flips the sign of the a_phi_x terms relative
to a naive reading).  Everything quadratic in v (pressure source, Bernoulli,
energies) is insensitive to the orientation.

Weighted corner limits: velocities carry alpha^(gamma+2), the potential
gradient alpha^(gamma+3), the pressure alpha^(2 gamma+4), and the Taylor
sign alpha^(2 gamma+3).  Limit z-profiles obey closed second-order ODEs in
z whose solutions are implemented alongside the solvers as two-route
consistency oracles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .conformal import ConformalMap, tail_limits
from .dn import dn_apply
from .elliptic import StripSolver
from .errors import (
    CompatibilityError,
    ResonantAngle,
    TaylorSignViolation,
    UnderResolvedBottom,
)
from .grid import LimitPair, StripGrid, WeightProfile

__all__ = [
    "FieldSet",
    "solve_potential",
    "potential_from_trace",
    "limit_ode_phi",
    "velocity",
    "velocity_limits",
    "solve_pressure",
    "limit_ode_pressure",
    "solve_up",
    "compute_fields",
]


def solve_potential(cmap: ConformalMap, dt_zeta: np.ndarray,
                    wp: WeightProfile, flux_tol: float = 1e-8):
    """Potential from the surface rate: harmonic, with top flux
    ``dz phi = -(dx x) dt_zeta`` and zero bottom flux, gauged to zero mean.

    ``dt_zeta`` is the physical surface speed (d/dt zeta) o T.  Raises
    CompatibilityError when the net top flux (volume rate) exceeds
    ``flux_tol`` relative to the flux scale.
    """
    grid = cmap.grid
    top_flux = -cmap.dx_x_top * np.asarray(dt_zeta, dtype=float)
    scale = max(float(np.max(np.abs(top_flux))), 1e-300)
    net = abs(grid.integrate_x(top_flux))
    if net > flux_tol * scale * 2 * grid.L:
        raise CompatibilityError(
            f"net surface flux {net:.3e} (volume not conserved)")
    solver = StripSolver(grid)
    phi = solver.neumann(np.zeros((grid.nx, grid.nz)), top_flux,
                         np.zeros(grid.nx))
    phi -= grid.integrate_strip(phi) / (2 * grid.L * grid.omega)
    return phi


def potential_from_trace(cmap: ConformalMap, psi: np.ndarray):
    """Harmonic extension of the surface potential trace (zero bottom flux),
    in the same gauge as ``solve_potential`` (zero strip mean)."""
    from .dn import harmonic_extension

    grid = cmap.grid
    phi = harmonic_extension(np.asarray(psi, dtype=float), grid)
    phi -= grid.integrate_strip(phi) / (2 * grid.L * grid.omega)
    return phi


def limit_ode_phi(gamma: float, omega: float, a_zeta_t: float,
                  z: np.ndarray, rate_factor: float = 1.0) -> np.ndarray:
    """Closed-form corner profile of the weighted potential z-derivative.

    Solves a'' = -mu^2 a with mu = (gamma+3) * rate_factor, a(0) =
    -a_zeta_t, a(-omega) = 0:

        a(z) = -a_zeta_t [cos(mu z) + cot(mu omega) sin(mu z)].

    ``rate_factor`` is 1 at the left corner and beta_r at the right (where
    the caller passes the top value -b_r a_zeta_t,r through ``a_zeta_t``
    scaled accordingly).  Raises ResonantAngle when sin(mu omega) ~ 0.
    """
    mu = (gamma + 3.0) * rate_factor
    s = np.sin(mu * omega)
    if abs(s) < 1e-10:
        raise ResonantAngle(f"(gamma+3) omega = {mu * omega:.6g} resonant")
    cot = np.cos(mu * omega) / s
    return -a_zeta_t * (np.cos(mu * z) + cot * np.sin(mu * z))


def velocity(cmap: ConformalMap, phi: np.ndarray):
    """Physical velocity pulled back to the strip: v o T = -M grad phi."""
    gx, gz = cmap.phys_grad(phi)
    return -gx, -gz


def velocity_limits(a_x, a_z, a_phi_x, a_phi_z):
    """Corner limit of the weighted velocity from the limit profiles:

        a_v = (-a_x a_phi_x + a_z a_phi_z, -a_z a_phi_x - a_x a_phi_z)
              / (a_x^2 + a_z^2).
    """
    den = a_x**2 + a_z**2
    return ((-a_x * a_phi_x + a_z * a_phi_z) / den,
            (-a_z * a_phi_x - a_x * a_phi_z) / den)


def _velocity_gradient(cmap: ConformalMap, v1, v2):
    """(grad v) o T as a 2x2 field: row i = M grad(v_i)."""
    g11, g12 = cmap.phys_grad(v1)
    g21, g22 = cmap.phys_grad(v2)
    return g11, g12, g21, g22


def _trace_sq(cmap, v1, v2):
    """tr((grad v) o T)^2; for potential flow equals 2 |Hess Phi o T|-type."""
    a11, a12, a21, a22 = _velocity_gradient(cmap, v1, v2)
    return a11 * a11 + 2.0 * a12 * a21 + a22 * a22


def solve_pressure(cmap: ConformalMap, v1: np.ndarray, v2: np.ndarray,
                   wp: WeightProfile, a0: Optional[float] = None,
                   taylor_window: float = 8.0):
    """Pressure, Taylor sign and the source limit from the velocity field.

    Solves Delta P = -|T'|^2 tr((grad v) o T)^2 with zero surface pressure
    and the transported bottom flux grad_nb P = (grad_v n_b) . v; returns
    (P, taylor, trsq) with taylor = -|T'|^-1 dz P on the surface.

    When ``a0`` is given, raises TaylorSignViolation if the weighted sign
    alpha^-(2 gamma + 3) taylor drops below a0 anywhere on |x| <=
    ``taylor_window`` (beyond which the inverse weight amplifies the solver
    noise floor past the signal).
    """
    grid = cmap.grid
    trsq = _trace_sq(cmap, v1, v2)
    h = -cmap.Tp_abs**2 * trsq
    # bottom flux: grad_nb P = v1 (dx n_b o T) . v = v1 kappa_b s (tau_b . v)
    Tb = cmap.Tp[:, -1]
    absTb = np.abs(Tb)
    kb = cmap.curvature_bottom()
    slope_b = Tb.imag / Tb.real
    s_b = np.sqrt(1.0 + slope_b**2)
    tau1, tau2 = Tb.real / absTb, Tb.imag / absTb
    v1b, v2b = v1[:, -1], v2[:, -1]
    g = absTb * (v1b * kb * s_b * (tau1 * v1b + tau2 * v2b))
    solver = StripSolver(grid)
    P = solver.mixed(h, np.zeros(grid.nx), g, check=False)
    taylor = -grid.deriv_z(P)[:, 0] / np.abs(cmap.Tp[:, 0])
    if a0 is not None:
        mask = np.abs(grid.x) <= taylor_window
        floor = np.min(wp.alpha_pow(grid.x[mask], -(2 * wp.gamma + 3))
                       * taylor[mask])
        if floor < a0:
            raise TaylorSignViolation(
                f"weighted Taylor sign {floor:.3e} below floor {a0:.3e}")
    return P, taylor, trsq


def limit_ode_pressure(gamma: float, omega: float, a_dv2: np.ndarray,
                       grid: StripGrid, rate_factor: float = 1.0) -> np.ndarray:
    """Corner profile of the weighted pressure: two-point BVP

        a'' = -mu^2 a - a_dv2,  a(0) = 0,  a'(-omega) = 0,

    mu = (2 gamma + 4) * rate_factor, solved by Chebyshev collocation on the
    grid's z nodes.  Raises ResonantAngle when cos(mu omega) ~ 0.
    """
    mu = (2.0 * gamma + 4.0) * rate_factor
    if abs(np.cos(mu * omega)) < 1e-10:
        raise ResonantAngle(f"(2 gamma + 4) omega = {mu * omega:.6g} resonant")
    n = grid.nz
    A = grid.Dz @ grid.Dz + mu**2 * np.eye(n)
    rhs = -np.asarray(a_dv2, dtype=float).copy()
    A[0, :] = 0.0
    A[0, 0] = 1.0
    rhs[0] = 0.0
    A[-1, :] = grid.Dz[-1, :]
    rhs[-1] = 0.0
    return np.linalg.solve(A, rhs)


def _surface_normal_fields(cmap: ConformalMap):
    """n_t extended z-independently through the strip: the surface-graph
    normal evaluated at the physical abscissa of each strip node, plus its
    physical x-derivative (both from the domain graphs)."""
    dom = cmap.domain
    X = np.clip(cmap.x, dom.x_l, dom.x_r)
    d1 = dom.zeta.d1(X)
    d2 = dom.zeta.d2(X)
    s = np.sqrt(1.0 + d1**2)
    n1, n2 = -d1 / s, 1.0 / s
    # dx n_t = kappa * s * tau with tau = (1, zeta')/s
    kap = d2 / s**3
    dn1, dn2 = kap * s * (1.0 / s), kap * s * (d1 / s)
    return (n1, n2), (dn1, dn2)


def solve_up(cmap: ConformalMap, P: np.ndarray, w: np.ndarray,
             trsq: np.ndarray, bottom_noise_tol: float = 1e-4):
    """The auxiliary field u_p = kappa_H grad_nbar P + D2P(nbar, nbar) by
    its transported elliptic system, plus its surface normal derivative.

    kappa_H is the harmonic extension of the surface curvature trace ``w``;
    nbar is the z-independent extension of the surface normal.  The system
    (interior source with third pressure derivatives moved to the smooth
    bottom, Dirichlet top -tr(Dv)^2, Neumann bottom) is solved with the
    mixed solver; the direct pointwise evaluation of u_p is returned as
    well for two-route consistency.  Returns a dict with ``u_p``,
    ``u_p_direct``, ``grad_nt_up`` (surface trace), and the bottom datum.

    Raises UnderResolvedBottom when the bottom datum's spectral tail
    exceeds ``bottom_noise_tol``.
    """
    from .dn import harmonic_extension

    grid = cmap.grid
    kap_H = harmonic_extension(np.asarray(w, dtype=float), grid)
    (n1, n2), (dn1, dn2) = _surface_normal_fields(cmap)

    p1, p2 = cmap.phys_grad(P)            # grad P (physical components)
    h11, h12 = cmap.phys_grad(p1)         # Hessian rows
    h21, h22 = cmap.phys_grad(p2)
    Xi = n1 * p1 + n2 * p2                # grad_nbar P
    Dnn = n1 * n1 * h11 + n1 * n2 * (h12 + h21) + n2 * n2 * h22
    up_direct = kap_H * Xi + Dnn

    # interior source: |T'|^2 [2 grad kap_H . grad Xi + kap_H lap Xi
    #                          + lap Dnn] o T; conformal scaling turns the
    # physical Laplacians into plain strip Laplacians
    k1, k2 = cmap.phys_grad(kap_H)
    x1, x2 = cmap.phys_grad(Xi)
    lap = lambda f: grid.deriv_x(f, 2) + grid.deriv_z(f, 2)
    src = 2.0 * cmap.Tp_abs**2 * (k1 * x1 + k2 * x2) + kap_H * lap(Xi) \
        + lap(Dnn)

    top = -trsq[:, 0]

    # bottom Neumann datum: kap_H grad_nb Xi + grad_nb Dnn
    #                       + 2 D2P(grad_nb nbar, n)
    Tb = cmap.Tp[:, -1]
    absTb = np.abs(Tb)
    nb1, nb2 = Tb.imag / absTb, -Tb.real / absTb   # outward bottom normal
    xi1, xi2 = x1[:, -1], x2[:, -1]
    d1_, d2_ = cmap.phys_grad(Dnn)
    grad_nb = lambda f1, f2: nb1 * f1[:, -1] + nb2 * f2[:, -1]
    # grad_nb nbar = (n_b . grad) nbar = nb1 * dx nbar (z-independent ext.)
    m1 = nb1 * dn1[:, -1]
    m2 = nb1 * dn2[:, -1]
    D2Pmn = (m1 * (h11[:, -1] * n1[:, -1] + h12[:, -1] * n2[:, -1])
             + m2 * (h21[:, -1] * n1[:, -1] + h22[:, -1] * n2[:, -1]))
    g = kap_H[:, -1] * (nb1 * x1[:, -1] + nb2 * x2[:, -1]) \
        + grad_nb(d1_, d2_) + 2.0 * D2Pmn
    g_strip = absTb * g   # strip-normal derivative of the pullback

    fh = np.abs(np.fft.rfft(g_strip))
    tot = float(np.sum(fh**2))
    if tot > 0:
        frac = np.sqrt(np.sum(fh[3 * len(fh) // 4:] ** 2) / tot)
        if frac > bottom_noise_tol:
            raise UnderResolvedBottom(
                f"bottom datum spectral tail {frac:.2e} above "
                f"{bottom_noise_tol:.0e}")

    solver = StripSolver(grid)
    u_p = solver.mixed(src, top, g_strip, check=False)
    grad_nt_up = grid.deriv_z(u_p)[:, 0] / np.abs(cmap.Tp[:, 0])
    return {"u_p": u_p, "u_p_direct": up_direct, "grad_nt_up": grad_nt_up,
            "bottom_datum": g_strip}


@dataclass
class FieldSet:
    """Bulk fields and their weighted corner limits for one surface state."""

    phi: np.ndarray
    phi_x: np.ndarray
    phi_z: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    P: np.ndarray
    taylor: np.ndarray
    trsq: np.ndarray
    u_p: np.ndarray
    grad_nt_up: np.ndarray
    a_phi_z: LimitPair
    a_phi_x: LimitPair
    a_v1: LimitPair
    a_v2: LimitPair
    a_p: LimitPair
    a_dv2: LimitPair
    b_zeta: np.ndarray

    def taylor_floor(self, grid: StripGrid, wp: WeightProfile,
                     window: float = 8.0) -> float:
        mask = np.abs(grid.x) <= window
        return float(np.min(wp.alpha_pow(grid.x[mask], -(2 * wp.gamma + 3))
                            * self.taylor[mask]))


def compute_fields(cmap: ConformalMap, psi: np.ndarray, wp: WeightProfile,
                   a0: Optional[float] = None, with_up: bool = True,
                   limit_tol: Optional[float] = None) -> FieldSet:
    """Full field reconstruction from the surface potential trace.

    Chains: harmonic potential from the trace, velocity, pressure/Taylor
    sign, u_p, and all weighted corner limits (fit extraction).
    """
    grid = cmap.grid
    phi = potential_from_trace(cmap, psi)
    phi_x = grid.deriv_x(phi)
    phi_z = grid.deriv_z(phi)
    v1, v2 = velocity(cmap, phi)
    P, taylor, trsq = solve_pressure(cmap, v1, v2, wp, a0=a0)
    g = wp.gamma
    a_phi_z, _ = tail_limits(phi_z, g + 3.0, grid, wp, tol=limit_tol)
    a_phi_x, _ = tail_limits(phi_x, g + 3.0, grid, wp, tol=limit_tol)
    a_v1, _ = tail_limits(v1, g + 2.0, grid, wp, tol=limit_tol)
    a_v2, _ = tail_limits(v2, g + 2.0, grid, wp, tol=limit_tol)
    a_p, _ = tail_limits(P, 2 * g + 4.0, grid, wp, tol=limit_tol)
    a_dv2, _ = tail_limits(cmap.Tp_abs**2 * trsq, 2 * g + 4.0, grid, wp,
                           tol=limit_tol)
    if with_up:
        w = cmap.curvature_top()
        up = solve_up(cmap, P, w, trsq)
        u_p, grad_nt_up = up["u_p"], up["grad_nt_up"]
    else:
        u_p = np.zeros_like(P)
        grad_nt_up = np.zeros(grid.nx)
    return FieldSet(phi=phi, phi_x=phi_x, phi_z=phi_z, v1=v1, v2=v2, P=P,
                    taylor=taylor, trsq=trsq, u_p=u_p,
                    grad_nt_up=grad_nt_up, a_phi_z=a_phi_z, a_phi_x=a_phi_x,
                    a_v1=a_v1, a_v2=a_v2, a_p=a_p, a_dv2=a_dv2,
                    b_zeta=cmap.b_zeta)
