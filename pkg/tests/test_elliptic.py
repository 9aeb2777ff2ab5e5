import numpy as np
import pytest

from stripwaves.elliptic import (
    DirichletBVP,
    MixedBVP,
    check_eigenline,
    eigenvalues_mixed,
    solve_dirichlet,
    solve_mixed,
    verify_weighted_estimate,
)
from stripwaves.errors import EigenlineViolation, ResolutionError
from stripwaves.grid import StripGrid, WeightProfile


class TestEigenvalues:
    @pytest.mark.parametrize("omega,m,expected", [
        (np.pi / 2, 0, 1.0),
        (np.pi / 4, 0, 2.0),
        (np.pi / 2, -1, -1.0),
        (np.pi / 6, 2, 15.0),
    ])
    def test_values(self, omega, m, expected):
        assert eigenvalues_mixed(omega, m) == pytest.approx(expected, abs=1e-14)

    def test_antisymmetry(self):
        om = np.pi / 3
        for m in range(-3, 4):
            assert eigenvalues_mixed(om, m) == pytest.approx(
                -eigenvalues_mixed(om, -1 - m), abs=1e-13)

    def test_eigenline_guard(self):
        with pytest.raises(EigenlineViolation):
            check_eigenline(2.0, np.pi / 4, np.pi / 4, problem="mixed")
        check_eigenline(1.9, np.pi / 4, np.pi / 4, problem="mixed")


def _mode_k(grid, j=2):
    return j * np.pi / grid.L


class TestSolveMixed:
    def test_zero_data(self, grid):
        z = np.zeros((grid.nx, grid.nz))
        u = solve_mixed(MixedBVP(z, np.zeros(grid.nx), np.zeros(grid.nx), grid))
        assert np.max(np.abs(u)) == 0.0

    def test_single_mode_neumann_null(self, grid):
        # f = cos(kx) cosh(k omega), g = 0 -> u = cos(kx) cosh(k(z+omega))
        k = _mode_k(grid)
        f = np.cos(k * grid.x) * np.cosh(k * grid.omega)
        u = solve_mixed(MixedBVP(np.zeros((grid.nx, grid.nz)), f,
                                 np.zeros(grid.nx), grid), check=False)
        exact = np.cos(k * grid.x)[:, None] * np.cosh(k * (grid.z + grid.omega))[None, :]
        assert np.max(np.abs(u - exact)) < 1e-10 * np.max(np.abs(exact))

    def test_bottom_neumann_data(self, grid):
        # h=0, f=0, g = cos(kx): u = -cos(kx) cosh(kz)/ (k sinh(k omega))
        # check: grad_nb u = -du/dz at z=-omega equals g
        k = _mode_k(grid)
        g = np.cos(k * grid.x)
        u = solve_mixed(MixedBVP(np.zeros((grid.nx, grid.nz)),
                                 np.zeros(grid.nx), g, grid), check=False)
        flux = -grid.deriv_z(u)[:, -1]
        assert np.max(np.abs(flux - g)) < 1e-9
        assert np.max(np.abs(u[:, 0])) < 1e-12

    def test_manufactured_spectral_convergence(self):
        # u* = exp(-x^2) sin(lam0 (z+omega)); errors drop >= 10x per doubling
        errs = []
        for nx, nz in [(64, 12), (128, 24), (256, 48)]:
            g = StripGrid(L=12.0, nx=nx, omega=np.pi / 4, nz=nz)
            lam0 = eigenvalues_mixed(g.omega, 0)
            prof = np.sin(lam0 * (g.z + g.omega))
            ex = np.exp(-g.x**2)
            u_star = ex[:, None] * prof[None, :]
            h = ((4 * g.x**2 - 2) * ex)[:, None] * prof[None, :] \
                - lam0**2 * u_star
            f = ex * np.sin(lam0 * g.omega)
            bot = -lam0 * ex * np.cos(0.0)
            u = solve_mixed(MixedBVP(h, f, bot, g), check=False)
            errs.append(np.max(np.abs(u - u_star)))
        assert errs[1] < errs[0] / 10
        assert errs[2] < errs[1] / 10 or errs[2] < 1e-10

    def test_linearity_and_determinism(self, grid):
        rng = np.random.default_rng(3)
        h = rng.standard_normal((grid.nx, grid.nz)) * np.exp(-grid.x**2)[:, None]
        f = rng.standard_normal(grid.nx) * np.exp(-grid.x**2)
        g = np.zeros(grid.nx)
        u1 = solve_mixed(MixedBVP(h, f, g, grid), check=False)
        u2 = solve_mixed(MixedBVP(h, f, g, grid), check=False)
        assert np.array_equal(u1, u2)
        u3 = solve_mixed(MixedBVP(2.5 * h, 2.5 * f, g, grid), check=False)
        assert np.max(np.abs(u3 - 2.5 * u1)) < 1e-11 * max(1, np.max(np.abs(u1)))

    def test_residual_guard(self, grid):
        rng = np.random.default_rng(5)
        h = rng.standard_normal((grid.nx, grid.nz))  # white noise: unresolvable
        with pytest.raises(ResolutionError):
            solve_mixed(MixedBVP(h, np.zeros(grid.nx), np.zeros(grid.nx), grid),
                        check=True, tol=1e-10)


class TestSolveDirichlet:
    def test_zero(self, grid):
        u = solve_dirichlet(DirichletBVP(np.zeros((grid.nx, grid.nz)),
                                         np.zeros(grid.nx), np.zeros(grid.nx),
                                         grid))
        assert np.max(np.abs(u)) == 0.0

    def test_top_mode(self, grid):
        k = _mode_k(grid)
        f = np.cos(k * grid.x)
        u = solve_dirichlet(DirichletBVP(np.zeros((grid.nx, grid.nz)), f,
                                         np.zeros(grid.nx), grid), check=False)
        exact = np.cos(k * grid.x)[:, None] \
            * (np.sinh(k * (grid.z + grid.omega)) / np.sinh(k * grid.omega))[None, :]
        assert np.max(np.abs(u - exact)) < 1e-10

    def test_bottom_mode(self, grid):
        k = _mode_k(grid)
        g = np.cos(k * grid.x)
        u = solve_dirichlet(DirichletBVP(np.zeros((grid.nx, grid.nz)),
                                         np.zeros(grid.nx), g, grid), check=False)
        exact = np.cos(k * grid.x)[:, None] \
            * (np.sinh(-k * grid.z) / np.sinh(k * grid.omega))[None, :]
        assert np.max(np.abs(u - exact)) < 1e-10


class TestWeightedEstimate:
    def test_zero_data(self, grid, wp):
        case = MixedBVP(np.zeros((grid.nx, grid.nz)), np.zeros(grid.nx),
                        np.zeros(grid.nx), grid)
        rep = verify_weighted_estimate(case, 0.0, 2, wp)
        assert rep["ratio"] == 0.0

    def test_gamma0_refinement_stability(self, wp):
        ratios = []
        for nx in (128, 256):
            g = StripGrid(L=12.0, nx=nx, omega=np.pi / 4, nz=32)
            ex = np.exp(-g.x**2)
            h = ex[:, None] * np.cos(g.z)[None, :]
            case = MixedBVP(h, ex * 0.5, ex * 0.2, g)
            ratios.append(verify_weighted_estimate(case, 0.0, 2, wp)["ratio"])
        assert abs(ratios[1] - ratios[0]) < 0.02 * ratios[0]

    def test_eigenline_rejected(self, grid, wp):
        case = MixedBVP(np.zeros((grid.nx, grid.nz)), np.zeros(grid.nx),
                        np.zeros(grid.nx), grid)
        lam0 = eigenvalues_mixed(grid.omega, 0)
        with pytest.raises(EigenlineViolation):
            verify_weighted_estimate(case, lam0, 2, wp)

    def test_blowup_toward_eigenline(self, grid, wp):
        # gamma -> lam0 with a near-resonant left-tail datum: ratio grows
        lam0 = eigenvalues_mixed(grid.omega, 0)
        ratios = []
        for eps in (0.4, 0.2, 0.1):
            gam = lam0 - eps
            h = np.exp((lam0 - eps) * grid.x) * wp.chi_l(grid.x)
            H = h[:, None] * np.ones(grid.nz)[None, :]
            case = MixedBVP(H, np.zeros(grid.nx), np.zeros(grid.nx), grid)
            rep = verify_weighted_estimate(case, gam, 2, wp)
            ratios.append(rep["ratio"])
        assert ratios[0] < ratios[1] < ratios[2]
