"""Discrete energy: quadrature, closed forms, exact gradients, snapshots."""

import numpy as np
import pytest

from phasefrac import (BulkDensity, EpsParams, Grid, GridField, HookeTensor,
                       KernelField, PolyField, PsiSpec, assemble_energy,
                       cell_strain, deviatoric, full_strain, gradient_u,
                       gradient_v, kernel_residual, read_snapshot,
                       sublevel_diagnostics, write_snapshot)


def params(eps=0.125, eta=None, gamma=1.0, q=2.0, psi0=1.0, m=2.0):
    return EpsParams(eps, eps ** 2 if eta is None else eta, gamma, q,
                     PsiSpec(psi0, m))


def density(p=2.0, mu=0.0, lam1=1.0, lam2=0.0, n=1):
    return BulkDensity(p, mu, HookeTensor(lam1, lam2, n))


def _central4(energy, x, d, t):
    """Fourth-order central difference of energy along direction d."""
    return (8.0 * (energy(x + t * d) - energy(x - t * d))
            - (energy(x + 2 * t * d) - energy(x - 2 * t * d))) / (12.0 * t)


class TestStrain:
    def test_rigid_motion_zero(self):
        grid = Grid(2, (1.0, 2.0), (4, 5))
        M = np.array([[0.0, 0.7], [-0.7, 0.0]])
        u = grid.node_coords @ M.T + np.array([0.3, -0.1])
        assert np.abs(cell_strain(grid, u)).max() < 1e-13

    def test_affine_exact_1d(self):
        grid = Grid(1, (1.0,), (7,))
        u = 3.5 * grid.node_coords
        e = cell_strain(grid, u)
        assert np.allclose(e[:, 0, 0], 3.5)

    def test_quadratic_exact_at_centers(self):
        # Q1 center gradients are exact on quadratics
        grid = Grid(2, (1.0, 1.0), (6, 4))
        fld = PolyField(2, quad=np.array([[[1.0, 0.0], [0.0, 0.0]],
                                          [[0.0, 0.0], [0.0, 0.0]]]))
        u = fld(grid.node_coords)
        e = cell_strain(grid, u)
        exact = fld.sym_grad(grid.cell_centers)
        assert np.abs(e - exact).max() < 1e-12


class TestAssemble:
    def test_rigid_with_v_one_is_zero(self):
        grid = Grid(2, (1.0, 1.0), (5, 5))
        M = np.array([[0.0, -1.2], [1.2, 0.0]])
        u = grid.node_coords @ M.T
        fld = GridField(grid, u, np.ones(grid.n_nodes))
        bd = assemble_energy(grid, fld, params(), full_strain(2), density(n=2))
        assert bd.total < 1e-24

    def test_affine_1d_closed_form(self):
        eps, delta = 0.125, 3.0
        grid = Grid(1, (1.0,), (16,))
        fld = GridField(grid, delta * grid.node_coords, np.ones(grid.n_nodes))
        bd = assemble_energy(grid, fld, params(eps), full_strain(1), density())
        assert bd.term_A == pytest.approx((1 + eps) * delta ** 2 / 2, rel=1e-14)
        assert bd.term_rest == 0.0
        assert bd.total == pytest.approx((1 + eps) * delta ** 2 / 2, rel=1e-14)

    def test_dead_state_psi_only(self):
        eps = 0.125
        grid = Grid(2, (1.0, 1.0), (4, 4))
        fld = GridField(grid, np.zeros((grid.n_nodes, 2)), np.zeros(grid.n_nodes))
        bd = assemble_energy(grid, fld, params(eps), full_strain(2), density(n=2))
        assert bd.total == pytest.approx(1.0 / eps, rel=1e-14)
        assert bd.term_psi == bd.total

    def test_terms_nonnegative_and_sum(self):
        rng = np.random.default_rng(0)
        grid = Grid(2, (1.0, 1.0), (5, 4))
        fld = GridField(grid, rng.standard_normal((grid.n_nodes, 2)),
                        rng.uniform(0, 1, grid.n_nodes))
        bd = assemble_energy(grid, fld, params(q=3.0), deviatoric(2),
                             density(p=3.0, mu=0.5, n=2))
        for t in (bd.term_A, bd.term_rest, bd.term_psi, bd.term_gradv):
            assert t >= 0.0
        assert bd.total == pytest.approx(
            bd.term_A + bd.term_rest + bd.term_psi + bd.term_gradv)

    def test_quadrature_second_order_convergence(self):
        # u = x^2 e_1, v = 1 on (0,1): closed form integral of f(e) is
        # (1+eps) * int_0^1 2x^2 dx = (1+eps) * 2/3
        eps = 0.25
        exact = (1 + eps) * 2.0 / 3.0
        errs = []
        for cells in (8, 16, 32):
            grid = Grid(1, (1.0,), (cells,))
            u = grid.node_coords ** 2
            fld = GridField(grid, u, np.ones(grid.n_nodes))
            bd = assemble_energy(grid, fld, params(eps), full_strain(1), density())
            errs.append(abs(bd.total - exact))
        rate = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
        assert rate[0] == pytest.approx(2.0, abs=0.1)
        assert rate[1] == pytest.approx(2.0, abs=0.1)

    def test_objectivity_full_strain(self):
        rng = np.random.default_rng(1)
        grid = Grid(2, (1.0, 1.0), (6, 6))
        u = rng.standard_normal((grid.n_nodes, 2))
        v = rng.uniform(0.2, 1.0, grid.n_nodes)
        M = np.array([[0.0, 0.9], [-0.9, 0.0]])
        u_shift = u + grid.node_coords @ M.T + np.array([0.1, 0.2])
        p = params()
        f = density(n=2)
        bd1 = assemble_energy(grid, GridField(grid, u, v.copy()), p,
                              full_strain(2), f)
        bd2 = assemble_energy(grid, GridField(grid, u_shift, v.copy()), p,
                              full_strain(2), f)
        assert bd2.term_A == pytest.approx(bd1.term_A, rel=1e-12)
        assert bd2.term_rest == pytest.approx(bd1.term_rest, abs=1e-12)

    def test_objectivity_deviatoric_kernel_field(self):
        rng = np.random.default_rng(2)
        grid = Grid(3, (1.0, 1.0, 1.0), (6, 6, 6))
        u = rng.standard_normal((grid.n_nodes, 3))
        v = rng.uniform(0.2, 1.0, grid.n_nodes)
        kf = PolyField.conformal_killing(a=np.array([0.4, -0.2, 1.0]))
        u_shift = u + kf(grid.node_coords)
        p = params()
        f = density(n=3)
        op = deviatoric(3)
        bd1 = assemble_energy(grid, GridField(grid, u, v.copy()), p, op, f)
        bd2 = assemble_energy(grid, GridField(grid, u_shift, v.copy()), p, op, f)
        # center strains are exact on quadratics, so term_A is untouched
        assert bd2.term_A == pytest.approx(bd1.term_A, rel=1e-10)

    def test_kernel_field_zero_term_A_cross_module(self):
        grid = Grid(3, (1.0, 1.0, 1.0), (5, 5, 5))
        fld = KernelField.conformal(a=np.array([1.0, 2.0, -0.5]))
        assert kernel_residual(deviatoric(3), fld) < 1e-12
        u = fld.poly(grid.node_coords)
        gf = GridField(grid, u, np.ones(grid.n_nodes))
        bd = assemble_energy(grid, gf, params(), deviatoric(3), density(n=3))
        assert bd.term_A < 1e-24


class TestGradients:
    CONFIGS = [(n, p, q, 2.0) for n in (1, 2, 3) for p in (2.0, 3.0)
               for q in (2.0, 3.0)]

    @pytest.mark.parametrize("n,p,q,m", CONFIGS)
    def test_directional_fd_match(self, n, p, q, m):
        rng = np.random.default_rng(int(10 * (n + p + q)))
        cells = {1: (12,), 2: (5, 4), 3: (4, 3, 3)}[n]
        grid = Grid(n, tuple(1.0 for _ in range(n)), cells)
        pr = params(eps=0.2, q=q, m=m)
        f = density(p=p, mu=0.3, lam1=1.2, lam2=0.4, n=n)
        op = deviatoric(n) if n > 1 else full_strain(1)
        for _ in range(10):
            fld = GridField(grid, rng.standard_normal((grid.n_nodes, n)),
                            rng.uniform(0.05, 0.95, grid.n_nodes))
            gu = gradient_u(grid, fld, pr, op, f)
            d = rng.standard_normal(gu.shape)
            t = 1e-5

            def e_u(x):
                w = fld.copy()
                w.u = x
                return assemble_energy(grid, w, pr, op, f).total

            fd = _central4(e_u, fld.u, d, t)
            an = float(np.sum(gu * d))
            assert abs(fd - an) <= 1e-6 * max(abs(fd), abs(an))

            gv = gradient_v(grid, fld, pr, op, f)
            dv = 0.02 * rng.standard_normal(gv.shape)

            def e_v(x):
                w = fld.copy()
                w.v = x
                return assemble_energy(grid, w, pr, op, f).total

            fdv = _central4(e_v, fld.v, dv, t)
            anv = float(np.sum(gv * dv))
            assert abs(fdv - anv) <= 1e-6 * max(abs(fdv), abs(anv))

    def test_gradient_u_zero_for_rigid_at_v_one(self):
        grid = Grid(2, (1.0, 1.0), (5, 5))
        M = np.array([[0.0, 1.0], [-1.0, 0.0]])
        fld = GridField(grid, grid.node_coords @ M.T, np.ones(grid.n_nodes))
        g = gradient_u(grid, fld, params(), full_strain(2), density(n=2))
        assert np.abs(g).max() < 1e-13

    def test_gradient_v_interior_closed_form(self):
        # at v = 1 the q-gradient term vanishes and psi'(1) = 0 for m = 2:
        # entries are the corner-share of (f_A + f_rest) times cell volume
        grid = Grid(1, (1.0,), (8,))
        delta = 2.0
        fld = GridField(grid, delta * grid.node_coords, np.ones(grid.n_nodes))
        pr = params()
        f = density()
        g = gradient_v(grid, fld, pr, full_strain(1), f)
        vol = grid.cell_volume
        expect_interior = 2 * (delta ** 2 / 2) * vol / 2
        assert np.allclose(g[1:-1], expect_interior)
        assert g[0] == pytest.approx(expect_interior / 2)

    def test_gradient_v_zero_for_dead_u(self):
        grid = Grid(2, (1.0, 1.0), (4, 4))
        fld = GridField(grid, np.zeros((grid.n_nodes, 2)), np.ones(grid.n_nodes))
        g = gradient_v(grid, fld, params(), full_strain(2), density(n=2))
        assert np.abs(g).max() < 1e-14

    def test_pins_zeroed(self):
        rng = np.random.default_rng(4)
        grid = Grid(1, (1.0,), (9,))
        mask = grid.face_mask("lo0") | grid.face_mask("hi0")
        fld = GridField(grid, rng.standard_normal((grid.n_nodes, 1)),
                        rng.uniform(0.1, 0.9, grid.n_nodes),
                        mask, np.zeros((grid.n_nodes, 1)), mask.copy())
        f = density()
        gu = gradient_u(grid, fld, params(), full_strain(1), f)
        gv = gradient_v(grid, fld, params(), full_strain(1), f)
        assert np.all(gu[mask] == 0.0)
        assert np.all(gv[mask] == 0.0)


class TestSublevel:
    def test_psi_mass_bound_any_field(self):
        rng = np.random.default_rng(5)
        grid = Grid(2, (1.0, 1.0), (6, 5))
        pr = params()
        f = density(n=2)
        for _ in range(10):
            fld = GridField(grid, rng.standard_normal((grid.n_nodes, 2)),
                            rng.uniform(0, 1, grid.n_nodes))
            d = sublevel_diagnostics(grid, fld, pr, full_strain(2), f)
            assert d.psi_mass <= pr.eps * d.energy + 1e-12

    def test_v_one_zero_mass(self):
        grid = Grid(1, (1.0,), (8,))
        fld = GridField(grid, np.zeros((grid.n_nodes, 1)), np.ones(grid.n_nodes))
        d = sublevel_diagnostics(grid, fld, params(), full_strain(1), density())
        assert d.psi_mass == 0.0


class TestFeasibility:
    def test_v_box_enforced(self):
        grid = Grid(1, (1.0,), (4,))
        with pytest.raises(ValueError):
            GridField(grid, np.zeros((grid.n_nodes, 1)),
                      np.full(grid.n_nodes, 1.5))

    def test_pins_applied_on_construction(self):
        grid = Grid(1, (1.0,), (4,))
        mask = grid.face_mask("lo0")
        vals = np.full((grid.n_nodes, 1), 7.0)
        fld = GridField(grid, np.zeros((grid.n_nodes, 1)),
                        np.zeros(grid.n_nodes), mask, vals, mask.copy())
        assert fld.u[0, 0] == 7.0
        assert fld.v[0] == 1.0


class TestSnapshot:
    def test_roundtrip_exact(self, tmp_path):
        rng = np.random.default_rng(6)
        for n in (1, 2, 3):
            cells = {1: (5,), 2: (3, 4), 3: (2, 3, 2)}[n]
            grid = Grid(n, tuple(np.pi / (i + 1) for i in range(n)), cells)
            fld = GridField(grid, rng.standard_normal((grid.n_nodes, n)),
                            rng.uniform(0, 1, grid.n_nodes))
            path = tmp_path / f"snap{n}.txt"
            write_snapshot(path, grid, fld)
            grid2, u2, v2 = read_snapshot(path)
            assert grid2.cells == grid.cells
            assert grid2.extents == grid.extents
            assert np.array_equal(u2, fld.u)
            assert np.array_equal(v2, fld.v)
