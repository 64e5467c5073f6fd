import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mesoscale import _kernels as K
from mesoscale.reactions import (Reaction, ReactionNetwork, SmoothCoefficient,
                                 builtin_networks, drift, eval_rate, load_network,
                                 validate)
from mesoscale.ssa import reaction_table

poly = SmoothCoefficient.polynomial


def bad_absorption():
    return ReactionNetwork((Reaction("C", -1, b=poly(0.1, 1.0)),), M=2.0, name="bad")


class TestRates:
    def test_case_table_ignores_excluded_terms(self):
        # C degradation carries no d v term, D degradation no b(u) term
        r = Reaction("C", -1, a=1.0, d=5.0, b=poly(0.0, 2.0))
        assert eval_rate(r, 0.5, 3.0) == pytest.approx(0.5 * 3.0 + 1.0)
        r = Reaction("D", -1, d=2.0, b=poly(7.0))
        assert eval_rate(r, 0.5, 3.0) == pytest.approx(6.0)

    def test_hill_coefficient(self):
        b = SmoothCoefficient.hill(2.0, 0.5, 2.0)
        assert float(b(0.5)) == pytest.approx(1.0)
        assert float(b(0.0)) == 0.0

    def test_negative_state_rejected(self):
        with pytest.raises(ValueError):
            eval_rate(Reaction("C", 1, b=poly(1.0)), -0.1, 0.0)

    def test_coupled_gene_drifts(self):
        net = builtin_networks()["coupled-gene"]
        u, v = 0.3, 2.0
        assert drift(net, "R_C", u, v) == pytest.approx((1 + v) * (1 - u))
        assert drift(net, "R_D", u, v) == pytest.approx(2 * u**2 / (0.25 + u**2) - v)
        assert drift(net, "R_C_tilde", u, v) == pytest.approx((1 + v) * (1 + u))

    def test_aggregates_match_summation(self):
        net = builtin_networks()["coupled-gene"]
        u = np.linspace(0, 2, 7)
        v = np.arange(7.0)
        np.testing.assert_allclose(net.R_C(u, v), drift(net, "R_C", u, v))
        np.testing.assert_allclose(net.R_D(u, v), drift(net, "R_D", u, v))
        np.testing.assert_allclose(net.R_C_tilde(u, v), drift(net, "R_C_tilde", u, v))

    def test_unknown_drift(self):
        with pytest.raises(ValueError):
            drift(builtin_networks()["coupled-gene"], "R_X", 0.0, 0.0)

    @pytest.mark.parametrize("name", sorted(builtin_networks()))
    @given(u=st.floats(0.0, 3.0), v=st.integers(0, 20))
    def test_compiled_drifts_agree(self, name, u, v):
        net = builtin_networks()[name]
        tab = reaction_table(net)
        uu, vv = np.array([u]), np.array([float(v)])
        rc, rd = np.empty(1), np.empty(1)
        K.drift_field(uu, vv, tab, rc, rd)
        assert rc[0] == pytest.approx(drift(net, "R_C", u, v), rel=1e-12, abs=1e-12)
        assert rd[0] == pytest.approx(drift(net, "R_D", u, v), rel=1e-12, abs=1e-12)


class TestValidation:
    @pytest.mark.parametrize("name", ["birth-death-C", "coupled-gene", "birth-death-D"])
    def test_confined_builtins_valid(self, name):
        assert validate(builtin_networks()[name]).ok

    @pytest.mark.parametrize("name", ["pure-diffusion", "c-birth", "d-birth"])
    def test_test_networks_only_unconfined(self, name):
        report = validate(builtin_networks()[name])
        assert not report.ok
        assert report.rate_law_ok()

    def test_absorption_violation(self):
        report = validate(bad_absorption())
        assert any(v.rule == "absorption" for v in report.violations)
        assert not report.rate_law_ok()

    def test_negative_b(self):
        net = ReactionNetwork((Reaction("C", 1, b=poly(-0.5, 1.0)),
                               Reaction("C", -1, b=poly(0.0, 5.0))), M=1.0)
        assert any(v.rule == "nonnegativity" for v in validate(net).violations)

    def test_bad_jump_and_sign(self):
        net = ReactionNetwork((Reaction("C", 0), Reaction("D", 1, d=-1.0)), M=1.0)
        rules = {v.rule for v in validate(net).violations}
        assert {"jump", "sign"} <= rules

    def test_case_table_violations(self):
        net = ReactionNetwork((Reaction("D", 1, a=1.0),), M=1.0)
        assert any(v.rule == "case-table" for v in validate(net).violations)


class TestSerialization:
    @pytest.mark.parametrize("name", sorted(builtin_networks()))
    def test_json_roundtrip(self, name):
        net = builtin_networks()[name]
        back = ReactionNetwork.from_json(net.to_json())
        assert back == net
        assert back.digest() == net.digest()

    def test_digest_ignores_name(self):
        a = builtin_networks()["birth-death-C"]
        b = ReactionNetwork(a.reactions, a.M, name="renamed")
        assert a.digest() == b.digest()

    def test_load_from_file(self, tmp_path):
        net = builtin_networks()["coupled-gene"]
        path = tmp_path / "net.json"
        path.write_text(net.to_json())
        assert load_network(str(path)) == net
        assert load_network("coupled-gene") == net

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_network(str(tmp_path / "nope.json"))

    def test_from_dict_defaults(self):
        d = {"M": 1.0, "reactions": [{"species": "C", "gamma": 1}]}
        net = ReactionNetwork.from_dict(json.loads(json.dumps(d)))
        assert net.reactions[0].b.is_zero()
