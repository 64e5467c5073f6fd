import numpy as np
import pytest

from mesoscale import lattice as L
from mesoscale import limit
from mesoscale.reactions import builtin_networks, c_birth

NETS = builtin_networks()


def smooth_u0(m_ref=63):
    return L.SpectralCoeffs.from_modes(m_ref, cos={0: 0.5, 1: 0.15}, sin={2: 0.05})


class TestHeatModes:
    @pytest.mark.parametrize("kind", ["cos", "sin"])
    def test_eigenmode_decay_exact(self, kind):
        m, T = 3, 0.01
        modes = {m: 0.1}
        u0 = L.SpectralCoeffs.from_modes(31, **({kind: modes}))
        sol = limit.solve_limit(NETS["pure-diffusion"], u0, np.zeros(31), T, 1e-3, m_ref=31)
        coeff = (sol.a if kind == "cos" else sol.b)[-1, m]
        assert abs(coeff - 0.1 * np.exp(-(2 * np.pi * m) ** 2 * T)) < 1e-12

    def test_lattice_heat_matches_semigroup(self):
        w0 = np.random.default_rng(0).uniform(0, 1, 15)
        sol = limit.solve_lattice_pde(NETS["pure-diffusion"], w0, [0.0, 0.1],
                                      np.zeros((2, 15)), 0.1, 1e-2)
        np.testing.assert_allclose(sol.w[-1], L.heat_semigroup_array(w0, 0.1), atol=1e-12)


class TestClosedForms:
    def test_relaxation_of_constant_state(self):
        # u' = k0 - k1 u with k0 = 0.5, k1 = 1
        u0 = L.SpectralCoeffs.from_modes(15, cos={0: 0.9})
        sol = limit.solve_limit(NETS["birth-death-C"], u0, np.zeros(15), 1.0, 1e-2, m_ref=15)
        expected = 0.5 + 0.4 * np.exp(-sol.times)
        np.testing.assert_allclose(sol.u_values()[:, 0], expected, atol=1e-9)

    def test_discrete_species_relaxation(self):
        # with u = 0: v' = 2 - v
        u0 = L.SpectralCoeffs.from_modes(15, cos={0: 0.0})
        sol = limit.solve_limit(NETS["birth-death-D"], u0, np.full(15, 5.0), 2.0, 1e-2, m_ref=15)
        expected = 2.0 + 3.0 * np.exp(-sol.times)
        np.testing.assert_allclose(sol.v[:, 3], expected, atol=1e-9)


class TestAccuracy:
    def test_strang_order_two(self):
        order, e1, e2 = limit.self_convergence_order(
            NETS["coupled-gene"], smooth_u0(), np.full(63, 1.0), 0.1, 0.01, m_ref=63)
        assert abs(order - 2.0) <= 0.3
        assert e2 < e1

    def test_memory_form_agrees(self):
        net = NETS["coupled-gene"]
        v0 = np.full(63, 1.0) + 0.2 * np.cos(2 * np.pi * np.arange(63) / 63)
        sol = limit.solve_limit(net, smooth_u0(), v0, 0.1, 1e-4, m_ref=63,
                                save_every=100, keep_b_path=True)
        mem = limit.memory_form_v(net, sol, v0)
        assert mem.shape == sol.v.shape
        assert np.max(np.abs(mem - sol.v)) <= 1e-6

    def test_memory_form_needs_path(self):
        sol = limit.solve_limit(NETS["coupled-gene"], smooth_u0(), np.ones(63), 0.01, 1e-3,
                                m_ref=63)
        with pytest.raises(ValueError):
            limit.memory_form_v(NETS["coupled-gene"], sol, np.ones(63))

    def test_lattice_scheme_approaches_limit(self):
        net = NETS["birth-death-C"]
        ref = limit.solve_limit(net, smooth_u0(255), np.zeros(255), 0.05, 1e-4, m_ref=255,
                                save_every=10**9)
        errs = []
        for n in (15, 31, 63):
            sol = limit.solve_lattice_pde(net, ref.project_u(n)[0], [0.0, 0.05],
                                          np.zeros((2, n)), 0.05, 1e-4, save_every=10**9)
            errs.append(L.sobolev_norm(sol.w[-1] - ref.project_u(n)[-1], 0.2))
        assert errs[0] > errs[1] > errs[2]


class TestGuardsAndShapes:
    def test_range_guard(self):
        net = c_birth(c=200.0, M=1.0)
        u0 = L.SpectralCoeffs.from_modes(15, cos={0: 0.5})
        with pytest.raises(limit.SolverError):
            limit.solve_limit(net, u0, np.zeros(15), 1.0, 1e-2, m_ref=15)

    def test_maximum_principle_margin(self):
        sol = limit.solve_limit(NETS["coupled-gene"], smooth_u0(), np.ones(63), 0.05, 1e-3,
                                m_ref=63)
        assert sol.max_principle_margin > 0
        assert sol.metadata()["m_ref"] == 63

    def test_save_every_and_final_time(self):
        sol = limit.solve_limit(NETS["coupled-gene"], smooth_u0(), np.ones(63), 0.05, 1e-3,
                                m_ref=63, save_every=10)
        np.testing.assert_allclose(sol.times, np.linspace(0, 0.05, 6))
        assert sol.project_u(31).shape == (6, 31)
        assert sol.project_v(31).shape == (6, 31)

    def test_rejects_fine_initial_data(self):
        with pytest.raises(ValueError):
            limit.solve_limit(NETS["coupled-gene"], smooth_u0(127), np.ones(63), 0.01, 1e-3,
                              m_ref=63)

    def test_rejects_short_v_path(self):
        with pytest.raises(ValueError):
            limit.solve_lattice_pde(NETS["coupled-gene"], np.full(5, 0.5), [0.0, 0.5],
                                    np.ones((2, 5)), 1.0, 1e-2)

    def test_v_path_piecewise_constant(self):
        # u' = (1 + v)(1 - u) with v switching from 0 to 1 at t = 0.5
        w = limit.solve_lattice_pde(NETS["coupled-gene"], np.zeros(5), [0.0, 0.5, 1.0],
                                    np.array([[0.0] * 5, [1.0] * 5, [1.0] * 5]), 1.0, 1e-3)
        expected = 1 - np.exp(-0.5) * np.exp(-2 * 0.5)
        assert w.w[-1, 0] == pytest.approx(expected, abs=1e-6)

    @pytest.mark.parametrize("T,dt", [(0.0, 0.1), (1.0, 0.0)])
    def test_rejects_bad_times(self, T, dt):
        with pytest.raises(ValueError):
            limit.solve_limit(NETS["coupled-gene"], smooth_u0(), np.ones(63), T, dt, m_ref=63)
