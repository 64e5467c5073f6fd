import json

import numpy as np
import pytest

from mesoscale import harness as H
from mesoscale import lattice as L
from mesoscale.limit import solve_limit


def tiny_plan(**kw):
    d = dict(network="coupled-gene", grid=[(5, 20, 3), (7, 40, 3), (9, 80, 3)],
             alpha=0.1, beta=0.2, T=0.01, samples=3, seed=11, m_ref=31, dt=1e-3)
    d.update(kw)
    return H.ExperimentPlan(**d)


class TestPlans:
    def test_scaling_rule_values(self):
        # ceil(n^0.4 log(n)^2), evaluated by hand
        assert [H.scaled_population(n, 1.0, 0.2, 1.0) for n in (31, 63, 127)] == [47, 91, 163]

    def test_from_rule_dict_roundtrip(self):
        d = {"network": "coupled-gene", "n": [31, 63, 127], "replicas": 4,
             "scaling": {"c": 1.0, "delta": 1.0}, "alpha": 0.1, "beta": 0.2,
             "T": 0.05, "samples": 6, "seed": 1}
        plan = H.ExperimentPlan.from_dict(d)
        assert [g[1] for g in plan.grid] == [47.0, 91.0, 163.0]
        again = H.ExperimentPlan.from_dict(json.loads(json.dumps(plan.to_dict())))
        assert again == plan

    @pytest.mark.parametrize("kw", [
        dict(grid=[(6, 20, 1), (7, 40, 1)]),
        dict(alpha=0.3, beta=0.2),
        dict(beta=0.5),
        dict(grid=[(5, 80, 1), (7, 20, 1)]),
        dict(grid=[(5, 20, 0)]),
        dict(samples=1),
    ])
    def test_invalid_plans(self, kw):
        with pytest.raises(ValueError):
            tiny_plan(**kw)

    def test_sample_spacing_must_fit_dt(self):
        with pytest.raises(ValueError):
            tiny_plan(T=0.01, samples=4).steps_per_sample()

    def test_initial_data_lattice(self):
        init = H.InitialData({0: 0.5, 1: 0.1}, {}, {0: 1.4}, {})
        u, v = init.lattice(9)
        assert u.shape == (9,) and np.all(u >= 0)
        np.testing.assert_array_equal(v, 1.0)


class TestErrorMetrics:
    def test_two_routes_agree(self):
        rng = np.random.default_rng(0)
        n = 31
        up, ref_u = rng.uniform(0, 1, (2, 6, n))
        vp, ref_v = rng.integers(0, 4, (2, 6, n)).astype(float)
        e = H.lattice_errors(up, vp, ref_u, ref_v, 0.1, 0.2)
        a1, b1 = L.analyze_array(up)
        a2, b2 = L.analyze_array(ref_u)
        via_coeffs = np.max(L.coeff_norm(a1 - a2, b1 - b2, 0.2, n))
        assert e["u_beta"] == pytest.approx(via_coeffs, abs=1e-10)
        a1, b1 = L.analyze_array(vp)
        a2, b2 = L.analyze_array(ref_v)
        assert e["v_neg_alpha"] == pytest.approx(
            np.max(L.coeff_norm(a1 - a2, b1 - b2, -0.1, n)), abs=1e-10)
        assert e["u_sup"] == np.max(np.abs(up - ref_u))

    def test_self_comparison_is_zero(self):
        plan = tiny_plan()
        sol = solve_limit(H.load_network(plan.network), plan.initial.u_coeffs(plan.m_ref),
                          plan.initial.v_collocation(plan.m_ref), plan.T, plan.dt, plan.m_ref,
                          save_every=plan.steps_per_sample())

        def sampler(n, l, seed):
            return sol.project_u(n), sol.project_v(n), False

        report = H.run_lln(plan, sampler=sampler)
        for row in report.rows:
            for m in H.METRICS:
                assert row[m]["median"] == 0.0 and row[m]["p90"] == 0.0
        assert not report.passed


class TestRunLLN:
    def test_report_shape_and_determinism(self):
        plan = tiny_plan()
        a = H.run_lln(plan)
        b = H.run_lln(plan, jobs=2)
        assert a.to_json() == b.to_json()
        assert a.to_csv() == b.to_csv()
        d = json.loads(a.to_json())
        assert [r["n"] for r in d["rows"]] == [5, 7, 9]
        for r in d["rows"]:
            assert set(H.METRICS) <= set(r)
            for m in H.METRICS:
                assert r[m]["lo"] <= r[m]["median"] <= r[m]["hi"] or r[m]["lo"] == r[m]["hi"]
                assert r[m]["median"] >= 0
        assert set(a.slopes) == set(H.METRICS)
        assert all("r2" in s for s in a.slopes.values())

    def test_plot_tables(self):
        report = H.run_lln(tiny_plan())
        tables = report.plot_tables()
        assert set(tables) == set(H.METRICS)
        head, *rows = tables["u_sup"].strip().splitlines()
        assert head == "n,l,metric,median,lo,hi"
        assert len(rows) == 3

    def test_seed_changes_report(self):
        assert H.run_lln(tiny_plan()).to_csv() != H.run_lln(tiny_plan(seed=12)).to_csv()


class TestZDDecay:
    def test_degenerate_without_discrete_reactions(self):
        rep = H.zd_decay_study("birth-death-C", [5, 7, 9], 3, 0.4, T=0.05, samples=3)
        assert rep.degenerate and rep.passed
        assert rep.means == [0.0, 0.0, 0.0]

    def test_needs_three_points(self):
        with pytest.raises(ValueError):
            H.zd_decay_study("birth-death-D", [5, 7], 3, 0.4)

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            H.zd_decay_study("birth-death-D", [5, 7, 9], 3, 0.6)

    def test_decay_detected(self):
        rep = H.zd_decay_study("birth-death-D", [15, 31, 63, 127], 30, 0.4, T=0.5, samples=11)
        assert not rep.degenerate
        assert rep.fit["slope"] < 0
        assert rep.passed


class TestTails:
    def test_zero_rate_network(self):
        init = H.InitialData({0: 0.0}, {}, {0: 0.0}, {})
        rep = H.yn_tail_study("pure-diffusion", 5, [10, 20, 40], [0.1], 5, initial=init)
        assert rep.freq_sup[0.1] == [0.0, 0.0, 0.0]
        assert rep.freq_beta[0.1] == [0.0, 0.0, 0.0]
        assert rep.passed

    @pytest.mark.parametrize("freqs,expected", [
        ([0.5, 0.2, 0.0], (True, True)),
        ([1.0, 1.0, 1.0], (True, True)),
        ([0.1, 0.3, 0.0], (False, True)),
        ([0.0, 0.1, 0.2], (False, False)),
    ])
    def test_checks(self, freqs, expected):
        assert H._tail_checks(freqs, [50, 200, 800], 100) == expected


class TestCompensatorStudy:
    def test_small_ensemble(self):
        rep = H.compensator_study("birth-death-C", 7, 20.0, 60, T=0.02, seed=4)
        assert set(rep) == {"one", "phi1", "spike"}
        for audit in rep.values():
            assert audit.replicas == 60
            assert audit.passed

    def test_standard_probes(self):
        p = H.standard_probes(9)
        assert p["spike"].sum() == 9.0
        assert L.GridFunction(p["phi1"]).inner(p["phi1"]) == pytest.approx(1.0)


class TestInequalityProbes:
    def test_small_run_passes(self):
        rep = H.inequality_probes(trials=200, seed=1)
        assert rep.passed, {k: v for k, v in rep.entries.items() if not v["passed"]}
        assert rep.entries["indicator_gamma0"]["max"] == pytest.approx(1.0, rel=1e-12)

    def test_violated_product_rule_detected(self):
        # gamma above alpha + beta - 1/2: aligned spikes blow up like n^0.2
        ns = (31, 63, 127, 255, 501)
        ratios = []
        for n in ns:
            f = L.GridFunction.indicator(n, 0).values[None, :]
            ratios.append(float(H.product_ratios(f, f, +1, 0.3, 0.3, 0.3)[0]))
        entry = H._slope_entry(ns, ratios)
        assert not entry["passed"]
        assert entry["slope"] > 0.15

    def test_admissible_product_rule_flat(self):
        ns = (31, 63, 127, 255, 501)
        ratios = []
        for n in ns:
            f = L.GridFunction.indicator(n, 0).values[None, :]
            ratios.append(float(H.product_ratios(f, f, +1, 0.3, 0.3, 0.05)[0]))
        assert H._slope_entry(ns, ratios)["passed"]
