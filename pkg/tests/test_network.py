import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heteronet.network import (
    COEFFICIENTS, EigenClass, NetworkKind, ParamError, ParamSet, build_topology, cycles_through, eigen_classes,
    eigenvalue, format_params, load_params, normalize_key, param_keys, parse_param_text, validate_params,
)

KINDS = list(NetworkKind)


def test_kind_aliases():
    assert NetworkKind.parse("ks") is NetworkKind.KIRK_SILBER
    assert NetworkKind.parse("Delta-Clique") is NetworkKind.DELTA_CLIQUE
    assert NetworkKind.parse("t") is NetworkKind.TOURNAMENT
    with pytest.raises(ValueError):
        NetworkKind.parse("guckenheimer")


def test_param_key_counts():
    # Every equilibrium has one radial and three other eigenvalues.
    assert len(param_keys("ks")) == 12
    assert len(param_keys("dc")) == 12
    assert len(param_keys("t")) == 12


def test_normalize_key():
    assert normalize_key("c21") == "c_21"
    assert normalize_key("e_34") == "e_34"
    assert normalize_key("T43") == "t_43"


@pytest.mark.parametrize("kind", KINDS)
def test_coefficients_cover_exactly_the_keys(kind):
    used = {key for row in COEFFICIENTS[kind].values() for _, key in row.values()}
    assert used == set(param_keys(kind))


def test_topology_cycles():
    ks = build_topology("ks")
    assert set(ks.cycles) == {"C3", "C4"}
    assert ks.successors(2) == (3, 4)
    dc = build_topology("dc")
    assert set(dc.cycles) == {"C4", "C34"}
    assert dc.cycle("C34") == (1, 2, 3, 4)
    t = build_topology("t")
    assert set(t.cycles) == {"C3", "C4", "C34"}
    assert set(t.successors(3)) == {1, 4}
    with pytest.raises(ValueError):
        dc.cycle("C3")


def test_only_xi2_splits_in_ks_and_dc():
    for kind in ("ks", "dc"):
        topo = build_topology(kind)
        splitting = [j for j in range(1, 5) if len(topo.successors(j)) > 1]
        assert splitting == [2]


def test_validate_reports_every_problem():
    vals = {k: 1.0 for k in param_keys("ks")}
    del vals["t_34"]
    vals["e_23"] = -1.0
    vals["q_99"] = 2.0
    rep = validate_params("ks", vals)
    assert not rep.ok
    assert rep.missing == ("t_34",)
    assert rep.nonpositive == ("e_23",)
    assert rep.extra == ("q_99",)
    assert "missing: t_34" in rep.messages()
    assert "nonpositive: e_23" in rep.messages()
    with pytest.raises(ParamError) as exc:
        ParamSet("ks", vals)
    assert exc.value.report == rep


def test_nan_and_inf_rejected():
    vals = {k: 1.0 for k in param_keys("dc")}
    vals["c_43"] = math.nan
    assert validate_params("dc", vals).nonpositive == ("c_43",)
    vals["c_43"] = math.inf
    assert validate_params("dc", vals).nonpositive == ("c_43",)


def test_paramset_is_immutable_and_replace_validates():
    p = ParamSet.uniform("t")
    with pytest.raises(TypeError):
        p.values["c_13"] = 3.0
    q = p.replace(c13=2.0)
    assert q["c_13"] == 2.0 and p["c_13"] == 1.0
    with pytest.raises(ParamError):
        p.replace(c_13=0.0)


def test_eigenvalue_signs():
    p = ParamSet.uniform("ks", 2.0)
    assert eigenvalue(p, 1, 1) == -2
    # At xi_1: contracting toward 3 and 4, expanding toward 2.
    assert eigenvalue(p, 1, 3) < 0 and eigenvalue(p, 1, 4) < 0
    assert eigenvalue(p, 1, 2) > 0
    # At xi_3 in the KS network the x4 direction is transverse.
    assert eigenvalue(p, 3, 4) == -2.0


def test_eigen_classes_ks_xi3():
    info = eigen_classes("ks", "C3", 3)
    assert info["c_32"].eigenclass is EigenClass.CONTRACTING
    assert info["e_31"].eigenclass is EigenClass.EXPANDING
    assert info["t_34"].eigenclass is EigenClass.TRANSVERSE


def test_eigen_classes_global_transverse():
    # e_24 at xi_2 is transverse for C3 but expanding for C4, so not globally transverse.
    info = eigen_classes("ks", "C3", 2)
    assert info["e_24"].eigenclass is EigenClass.TRANSVERSE
    assert not info["e_24"].globally_transverse
    assert info["e_24"].sign > 0
    # t_34 at xi_3 is transverse for every cycle through xi_3 in KS.
    assert eigen_classes("ks", "C3", 3)["t_34"].globally_transverse


def test_cycles_through():
    assert set(cycles_through("t", 3)) == {"C3", "C34"}
    assert set(cycles_through("dc", 2)) == {"C4", "C34"}


def test_param_file_roundtrip(tmp_path):
    p = ParamSet("dc", {k: 0.5 + i / 7 for i, k in enumerate(param_keys("dc"))})
    path = tmp_path / "p.txt"
    path.write_text("# a comment\n" + format_params(p))
    q = load_params(path)
    assert q == p


def test_param_file_errors(tmp_path):
    with pytest.raises(ValueError, match="line 1"):
        parse_param_text("c_21 1.0")
    with pytest.raises(ValueError, match="not a number"):
        parse_param_text("c_21 = abc")
    path = tmp_path / "p.txt"
    path.write_text("c_21 = 1\n")
    with pytest.raises(ValueError, match="no network kind"):
        load_params(path)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(KINDS), st.lists(st.floats(0.01, 100), min_size=12, max_size=12))
def test_random_positive_sets_validate(kind, xs):
    vals = dict(zip(param_keys(kind), xs))
    assert validate_params(kind, vals).ok
    p = ParamSet(kind, vals)
    assert np.isclose(float(p[param_keys(kind)[0]]), xs[0])
