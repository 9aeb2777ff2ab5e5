"""Strip discretization, the two-sided exponential weight, and weighted norms.

The reference domain is the flat strip ``-omega <= z <= 0`` truncated to the
window ``[-L, L]`` in the horizontal coordinate.  Everything downstream
(elliptic solves, the Dirichlet-Neumann operator, the conformal map, the
energy) lives on this one grid:

* uniform nodes in x (periodized for FFTs; all admissible quantities decay at
  the window ends after limit subtraction),
* Chebyshev-Lobatto nodes in z for spectral accuracy of the vertical solves.

Arrays for strip functions have shape ``(nx, nz)`` with ``z[0] = 0`` (top
boundary) and ``z[-1] = -omega`` (bottom).  Surface/bottom traces have shape
``(nx,)``.

The weight ``alpha`` equals ``exp(x)`` on the left plateau ``x <= -c0`` and
``exp(-beta_r x)`` on the right plateau ``x >= C0``, exactly (bit-level: those
branches are evaluated with the same ``np.exp`` expression, never a blend).
In between the two exponential branches are joined by a quintic Hermite
interpolant of ``log alpha``, which keeps ``alpha`` C^2 and strictly positive.

Weighted limits: quantities of weight ``gamma`` approach finite limits
``a_l = lim_{x->-inf} alpha^-gamma f`` (and ``a_r`` on the right).  They are
extracted as tail averages and re-assembled through the cut-offs ``chi_l``,
``chi_r``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import NonConvergentTail, TruncationPollution

__all__ = [
    "StripGrid",
    "WeightProfile",
    "LimitPair",
    "weight_alpha",
    "weighted_norm",
    "subtract_limits",
    "trace_norm",
    "chebyshev_lobatto",
]


def chebyshev_lobatto(n: int):
    """Chebyshev-Lobatto nodes and differentiation matrix on [-1, 1].

    Returns ``(x, D)`` with ``x[0] = 1`` down to ``x[-1] = -1`` and
    ``(D f)(x_i) ~ f'(x_i)`` spectrally for smooth ``f``.
    """
    if n < 2:
        raise ValueError("need at least 2 Chebyshev nodes")
    m = n - 1
    j = np.arange(n)
    x = np.cos(np.pi * j / m)
    c = np.hstack([2.0, np.ones(m - 1), 2.0]) * (-1.0) ** j
    X = np.tile(x, (n, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(n))
    D -= np.diag(D.sum(axis=1))
    return x, D


def _clenshaw_curtis(n: int):
    """Clenshaw-Curtis quadrature weights on [-1, 1] for Lobatto nodes."""
    m = n - 1
    w = np.zeros(n)
    theta = np.pi * np.arange(n) / m
    v = np.ones(n)
    for k in range(1, m // 2 + 1):
        factor = 2.0 if 2 * k != m else 1.0
        v -= factor * np.cos(2 * k * theta) / (4 * k * k - 1)
    w = 2.0 * v / m
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


@dataclass(frozen=True)
class StripGrid:
    """Discretization of the truncated strip [-L, L] x [-omega, 0].

    Parameters
    ----------
    L : half-width of the x window; must leave room for both cut-off plateaus.
    nx : number of uniform x nodes (power of two for the FFTs).
    omega : strip depth; equals the left contact angle, in (0, pi/2).
    nz : number of Chebyshev-Lobatto z nodes on [-omega, 0].
    """

    L: float
    nx: int
    omega: float
    nz: int

    def __post_init__(self):
        if not (0.0 < self.omega < np.pi / 2):
            raise ValueError("omega must lie in (0, pi/2)")
        if self.nx < 16 or self.nx & (self.nx - 1):
            raise ValueError("nx must be a power of two, at least 16")
        if self.nz < 8:
            raise ValueError("nz must be at least 8")
        if self.L <= 0:
            raise ValueError("L must be positive")

    @cached_property
    def x(self) -> np.ndarray:
        """Uniform x nodes on [-L, L), endpoint excluded (periodic)."""
        return -self.L + self.dx * np.arange(self.nx)

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.nx

    @cached_property
    def z(self) -> np.ndarray:
        """Chebyshev-Lobatto nodes mapped to [-omega, 0], z[0] = 0."""
        xi, _ = chebyshev_lobatto(self.nz)
        return self.omega * (xi - 1.0) / 2.0

    @cached_property
    def Dz(self) -> np.ndarray:
        """Spectral differentiation matrix in z (acts on the z axis)."""
        _, D = chebyshev_lobatto(self.nz)
        return D * (2.0 / self.omega)

    @cached_property
    def wz(self) -> np.ndarray:
        """Quadrature weights in z (Clenshaw-Curtis, scaled to [-omega, 0])."""
        return _clenshaw_curtis(self.nz) * (self.omega / 2.0)

    @cached_property
    def k(self) -> np.ndarray:
        """rfft wavenumbers for real traces, spacing pi/L."""
        return np.pi / self.L * np.arange(self.nx // 2 + 1)

    @cached_property
    def k_full(self) -> np.ndarray:
        """Full fft wavenumbers (for complex grid functions)."""
        return np.pi / self.L * np.fft.fftfreq(self.nx, d=1.0 / self.nx)

    # -- spectral derivatives ------------------------------------------------

    def deriv_x(self, f: np.ndarray, order: int = 1) -> np.ndarray:
        """d^order/dx^order along axis 0, spectral on the periodized window."""
        if np.iscomplexobj(f):
            fh = np.fft.fft(f, axis=0)
            ks = (1j * self.k_full) ** order
            return np.fft.ifft(fh * ks.reshape(-1, *([1] * (f.ndim - 1))), axis=0)
        fh = np.fft.rfft(f, axis=0)
        ks = (1j * self.k) ** order
        if order % 2:
            ks = ks.copy()
            ks[-1] = 0.0  # drop the signless Nyquist mode for odd derivatives
        out = np.fft.irfft(fh * ks.reshape(-1, *([1] * (f.ndim - 1))), n=self.nx, axis=0)
        return out

    def deriv_z(self, f: np.ndarray, order: int = 1) -> np.ndarray:
        """d^order/dz^order along axis 1 via the Chebyshev matrix."""
        out = f
        for _ in range(order):
            out = out @ self.Dz.T
        return out

    def antideriv_z_from_top(self, f: np.ndarray) -> np.ndarray:
        """z-antiderivative A with dA/dz = f and A(z=0) = 0, per x column."""
        A = self.Dz.copy()
        A[0, :] = 0.0
        A[0, 0] = 1.0
        rhs = np.moveaxis(np.asarray(f), 1, 0).copy()
        rhs[0] = 0.0
        sol = np.linalg.solve(A, rhs.reshape(self.nz, -1))
        return np.moveaxis(sol.reshape(rhs.shape), 0, 1)

    # -- quadrature ----------------------------------------------------------

    def integrate_x(self, f: np.ndarray) -> float | np.ndarray:
        """Trapezoid (= spectral for decaying/periodic data) along axis 0."""
        return self.dx * f.sum(axis=0)

    def integrate_strip(self, f: np.ndarray) -> float:
        return float(self.dx * (f @ self.wz).sum())

    def l2_strip(self, f: np.ndarray) -> float:
        return np.sqrt(self.integrate_strip(np.abs(f) ** 2))

    def l2_trace(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.dx * np.sum(np.abs(f) ** 2)))

    def inner_trace(self, f: np.ndarray, g: np.ndarray) -> float:
        """L2(R) inner product of two traces by window quadrature."""
        return float(self.dx * np.sum(f * g))


def _quintic_step(t: np.ndarray) -> np.ndarray:
    """C^2 smoothstep: 0 at t=0, 1 at t=1, zero 1st/2nd derivatives at ends."""
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


def _quintic_step_d1(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return 30.0 * t**2 * (1.0 - t) ** 2


def _quintic_step_d2(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return 60.0 * t * (1.0 - 3.0 * t + 2.0 * t * t)


@dataclass(frozen=True)
class WeightProfile:
    """The weight alpha(x), its cut-offs, and the admissible exponent range.

    Parameters
    ----------
    gamma : weight exponent carried by the main unknown (gamma > -1).
    beta_r : right-corner exponent ratio, omega_r / omega.
    c0, C0 : plateau thresholds; alpha is exactly exponential beyond them.
    omega, omega_r : contact angles, used only to validate the gamma range
        ``0 < gamma + 1 <= min(2 pi / omega, 2 pi / omega_r)``.
    """

    gamma: float
    beta_r: float = 1.0
    c0: float = 2.0
    C0: float = 2.0
    omega: float | None = None
    omega_r: float | None = None
    _blend: np.ndarray = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.gamma <= -1.0:
            raise ValueError("gamma must exceed -1")
        if self.beta_r <= 0 or self.c0 <= 0 or self.C0 <= 0:
            raise ValueError("beta_r, c0, C0 must be positive")
        if self.omega is not None:
            om_r = self.omega_r if self.omega_r is not None else self.beta_r * self.omega
            cap = min(2.0 * np.pi / self.omega, 2.0 * np.pi / om_r)
            if not (0.0 < self.gamma + 1.0 <= cap):
                raise ValueError(
                    f"gamma+1 = {self.gamma + 1} outside (0, {cap:.6g}]"
                )
        # Quintic Hermite coefficients for log(alpha) on (-c0, C0): match
        # value / slope / curvature of x (left branch) and -beta_r x (right).
        a, b = -self.c0, self.C0
        V = np.zeros((6, 6))
        for i, (pt, order) in enumerate(
            [(a, 0), (a, 1), (a, 2), (b, 0), (b, 1), (b, 2)]
        ):
            for p in range(order, 6):
                coef = np.prod(np.arange(p, p - order, -1)) if order else 1.0
                V[i, p] = coef * pt ** (p - order)
        rhs = np.array([a, 1.0, 0.0, -self.beta_r * b, -self.beta_r, 0.0])
        object.__setattr__(self, "_blend", np.linalg.solve(V, rhs))

    # -- alpha and derivatives -----------------------------------------------

    def log_alpha(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        left = x <= -self.c0
        right = x >= self.C0
        mid = ~(left | right)
        out[left] = x[left]
        out[right] = -self.beta_r * x[right]
        out[mid] = np.polyval(self._blend[::-1], x[mid])
        return out

    def alpha(self, x: np.ndarray) -> np.ndarray:
        """The weight itself; exactly exp(x) / exp(-beta_r x) on plateaus."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        left = x <= -self.c0
        right = x >= self.C0
        mid = ~(left | right)
        out[left] = np.exp(x[left])
        out[right] = np.exp(-self.beta_r * x[right])
        out[mid] = np.exp(np.polyval(self._blend[::-1], x[mid]))
        return out

    def dlog_alpha(self, x: np.ndarray) -> np.ndarray:
        """alpha'/alpha; equals 1 on the left plateau, -beta_r on the right."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        left = x <= -self.c0
        right = x >= self.C0
        mid = ~(left | right)
        out[left] = 1.0
        out[right] = -self.beta_r
        dcoef = self._blend[1:] * np.arange(1, 6)
        out[mid] = np.polyval(dcoef[::-1], x[mid])
        return out

    def alpha_prime(self, x: np.ndarray) -> np.ndarray:
        return self.alpha(x) * self.dlog_alpha(x)

    def alpha_pow(self, x: np.ndarray, p: float) -> np.ndarray:
        return np.exp(p * self.log_alpha(x))

    @cached_property
    def min_alpha_blend(self) -> float:
        """Lower bound of alpha over the blend region [-c0, C0]."""
        xs = np.linspace(-self.c0, self.C0, 4001)
        return float(self.alpha(xs).min())

    # -- cut-offs ------------------------------------------------------------

    def chi_l(self, x: np.ndarray) -> np.ndarray:
        """1 for x <= -c0-1, 0 for x >= -c0, monotone C^2 in between."""
        return 1.0 - _quintic_step(np.asarray(x, dtype=float) + self.c0 + 1.0)

    def chi_r(self, x: np.ndarray) -> np.ndarray:
        """0 for x <= C0, 1 for x >= C0+1, monotone C^2 in between."""
        return _quintic_step(np.asarray(x, dtype=float) - self.C0)

    def chi_l_prime(self, x: np.ndarray) -> np.ndarray:
        return -_quintic_step_d1(np.asarray(x, dtype=float) + self.c0 + 1.0)

    def chi_r_prime(self, x: np.ndarray) -> np.ndarray:
        return _quintic_step_d1(np.asarray(x, dtype=float) - self.C0)

    def chi_l_second(self, x: np.ndarray) -> np.ndarray:
        return -_quintic_step_d2(np.asarray(x, dtype=float) + self.c0 + 1.0)

    def chi_r_second(self, x: np.ndarray) -> np.ndarray:
        return _quintic_step_d2(np.asarray(x, dtype=float) - self.C0)


def weight_alpha(x, wp: WeightProfile):
    """Evaluate the weight alpha at x (scalar or array)."""
    scalar = np.isscalar(x)
    out = wp.alpha(np.atleast_1d(np.asarray(x, dtype=float)))
    return float(out[0]) if scalar else out


@dataclass
class LimitPair:
    """Left/right weighted limits of a quantity and their cut-off assembly.

    ``a_l``/``a_r`` are scalars for surface traces and z-profiles (length nz)
    for strip functions.
    """

    a_l: float | np.ndarray
    a_r: float | np.ndarray

    def combined(self, x: np.ndarray, wp: WeightProfile) -> np.ndarray:
        """chi_l(x) a_l + chi_r(x) a_r, broadcast over a z axis if present."""
        cl, cr = wp.chi_l(x), wp.chi_r(x)
        if np.ndim(self.a_l) == 0:
            return cl * self.a_l + cr * self.a_r
        return np.outer(cl, self.a_l) + np.outer(cr, self.a_r)

    def scaled(self, factor: float) -> "LimitPair":
        return LimitPair(self.a_l * factor, self.a_r * factor)


def _tail_slices(nx: int, frac: float = 0.1):
    n_tail = max(4, int(round(frac * nx)))
    return slice(0, n_tail), slice(nx - n_tail, nx)


def subtract_limits(f, gamma, wp: WeightProfile, grid: StripGrid,
                    tol: float = 1e-6):
    """Split ``alpha^-gamma f`` into a decaying core plus cut-off limits.

    Works on strip functions (nx, nz) with z-profile limits and traces (nx,)
    with scalar limits.  Limits are extracted as averages over the outer 10%
    of each tail; the same stretch must be oscillation-free (relative
    oscillation below ``tol``), otherwise the quantity carries the wrong
    weight and ``NonConvergentTail`` is raised.
    """
    f = np.asarray(f, dtype=float)
    g = f * wp.alpha_pow(grid.x, -gamma).reshape(-1, *([1] * (f.ndim - 1)))
    sl_l, sl_r = _tail_slices(grid.nx)
    scale = max(float(np.max(np.abs(g))), 1e-300)
    limits = []
    for side, sl in (("left", sl_l), ("right", sl_r)):
        tail = g[sl]
        osc = float(np.max(np.abs(tail - tail.mean(axis=0))))
        if osc <= tol * scale:
            limits.append(tail.mean(axis=0))
            continue
        # Not settled.  A tail still decaying monotonically toward the window
        # end has limit zero (e.g. one extra alpha factor); anything else has
        # the wrong weight.
        mags = np.abs(tail).reshape(tail.shape[0], -1).max(axis=1)
        toward_edge = np.diff(mags) >= -tol * scale if side == "left" \
            else np.diff(mags) <= tol * scale
        mean_mag = float(np.max(np.abs(tail.mean(axis=0))))
        if np.all(toward_edge) and mean_mag <= 2.0 * osc:
            limits.append(np.zeros_like(tail.mean(axis=0)))
            continue
        raise NonConvergentTail(
            f"{side} tail oscillation {osc/scale:.3e} above {tol:.1e} "
            "and not decaying to zero"
        )
    a_l, a_r = limits
    if f.ndim == 1:
        a_l, a_r = float(a_l), float(a_r)
    pair = LimitPair(a_l, a_r)
    core = g - pair.combined(grid.x, wp)
    return core, pair


def _check_tail_pollution(g: np.ndarray, tol: float):
    if tol is None:
        return
    scale = max(float(np.max(np.abs(g))), 1e-300)
    edge = max(float(np.max(np.abs(g[0]))), float(np.max(np.abs(g[-1]))))
    if edge > tol * scale:
        raise TruncationPollution(
            f"window-end magnitude {edge/scale:.3e} above {tol:.1e} "
            "(subtract limits or enlarge L)"
        )


def trace_norm(f, s, grid: StripGrid, tail_tol=None):
    """Sobolev H^s norm of a trace via the multiplier (1+k^2)^(s/2).

    Used for all boundary norms, integer and half-integer order alike, so the
    energy and the elliptic verification reports share one definition.
    """
    f = np.asarray(f, dtype=float)
    _check_tail_pollution(f, tail_tol)
    fh = np.fft.rfft(f)
    mult = (1.0 + grid.k**2) ** s
    # rfft double-counts interior bins when summing |fh|^2 over [0, nx/2]
    w = np.full(grid.nx // 2 + 1, 2.0)
    w[0] = 1.0
    if grid.nx % 2 == 0:
        w[-1] = 1.0
    return float(np.sqrt(grid.dx / grid.nx * np.sum(w * mult * np.abs(fh) ** 2)))


def weighted_norm(f, gamma, l, grid: StripGrid, wp: WeightProfile,
                  region: str = "strip", tail_tol: float = 1e-6):
    """Discrete ``|| alpha^gamma f ||_{H^l}`` on the strip or a boundary.

    Strip norms sum squared L2 norms of all derivatives up to total order
    ``l`` (integer only).  Boundary norms use the spectral multiplier and
    accept half-integer ``l``.  Raises ``TruncationPollution`` when the
    weighted integrand has not decayed at the window ends (set
    ``tail_tol=None`` to skip the check).
    """
    f = np.asarray(f, dtype=float)
    if region in ("surface", "bottom"):
        if f.ndim != 1:
            idx = 0 if region == "surface" else -1
            f = f[:, idx]
        g = wp.alpha_pow(grid.x, gamma) * f
        return trace_norm(g, l, grid, tail_tol=tail_tol)
    if region != "strip":
        raise ValueError(f"unknown region {region!r}")
    if l != int(l):
        raise ValueError("half-integer strip norms are not defined here; "
                         "use region='surface' or 'bottom'")
    g = f * wp.alpha_pow(grid.x, gamma).reshape(-1, 1)
    _check_tail_pollution(g, tail_tol)
    derivs = {(0, 0): g}
    total = grid.integrate_strip(np.abs(g) ** 2)
    frontier = [(0, 0)]
    for order in range(1, int(l) + 1):
        new = {}
        for (ax, az) in frontier:
            base = derivs[(ax, az)]
            if (ax + 1, az) not in new:
                new[(ax + 1, az)] = grid.deriv_x(base)
            if (ax, az + 1) not in new:
                new[(ax, az + 1)] = grid.deriv_z(base)
        derivs.update(new)
        frontier = list(new.keys())
        for arr in new.values():
            total += grid.integrate_strip(np.abs(arr) ** 2)
    return float(np.sqrt(total))
