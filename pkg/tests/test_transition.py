import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heteronet.network import NetworkKind, ParamSet, build_topology, param_keys
from heteronet.transition import (
    all_matrices, basic_matrix, crosscheck, cycle_triples, derived_scalars, full_matrix, general_split_matrices,
    negative_entry_bases, section_coords,
)

from oracles import closed_scalars, random_params, printed_matrices

KINDS = ["ks", "dc", "t"]


def params_strategy(kind):
    keys = param_keys(kind)
    return st.lists(st.floats(0.2, 5.0), min_size=len(keys), max_size=len(keys)).map(
        lambda xs: ParamSet(kind, dict(zip(keys, xs))))


def test_section_coords():
    assert section_coords(1, 2) == (3, 4)
    assert section_coords(2, 3) == (1, 4)
    assert section_coords(4, 1) == (2, 3)


@pytest.mark.parametrize("kind", KINDS)
def test_basic_matrices_match_printed_forms(kind):
    rng = np.random.default_rng(11)
    for _ in range(50):
        p = random_params(kind, rng)
        for tag, expected in printed_matrices(p).items():
            got = basic_matrix(p, *map(int, tag)).entries.astype(float)
            np.testing.assert_allclose(got, expected, rtol=1e-15, atol=0)


def test_basic_matrix_rejects_non_edges():
    p = ParamSet.uniform("ks")
    with pytest.raises(ValueError):
        basic_matrix(p, 1, 3, 4)   # no connection 1 -> 3 in KS
    with pytest.raises(ValueError):
        basic_matrix(p, 2, 4, 3)


def test_ks_m123_is_the_only_negative_entry_at_xi3():
    p = ParamSet.uniform("ks")
    assert negative_entry_bases(p, "C3") == [3]
    assert negative_entry_bases(p, "C4") == [4]
    assert negative_entry_bases(ParamSet.uniform("t"), "C3") == [1, 3]


def test_full_matrix_tag_and_order():
    p = ParamSet.uniform("ks", 1.3)
    m = full_matrix(p, "C3", 2)
    assert m.tag == "M2(3)"
    # M2^(3) = m312 m231 m123.
    sup = printed_matrices(p)
    np.testing.assert_allclose(m.entries.astype(float), sup["312"] @ sup["231"] @ sup["123"], rtol=1e-15)


@pytest.mark.parametrize("kind", KINDS)
def test_full_matrices_equal_products(kind):
    rng = np.random.default_rng(5)
    topo = build_topology(kind)
    for _ in range(20):
        p = random_params(kind, rng)
        for name, seq in topo.cycles.items():
            for base in seq:
                prod = np.eye(2)
                for t in cycle_triples(p, name, base):
                    prod = basic_matrix(p, *t).entries.astype(float) @ prod
                np.testing.assert_allclose(full_matrix(p, name, base).entries.astype(float), prod, rtol=1e-13)


@pytest.mark.parametrize("kind", KINDS)
def test_derived_scalars_match_closed_forms(kind):
    rng = np.random.default_rng(7)
    for _ in range(200):
        p = random_params(kind, rng)
        ds = derived_scalars(p).to_dict()
        for name, val in closed_scalars(p).items():
            assert ds[name] == pytest.approx(val, rel=1e-11, abs=1e-11), name


@pytest.mark.parametrize("kind", ["ks", "dc"])
def test_crosscheck_passes(kind):
    rng = np.random.default_rng(3)
    for _ in range(100):
        assert all(ok for _, _, ok in crosscheck(random_params(kind, rng)).values())


def test_tournament_crosscheck_uses_corrected_forms():
    rng = np.random.default_rng(4)
    for _ in range(100):
        res = crosscheck(random_params("t", rng), rtol=1e-11)
        assert all(ok for _, _, ok in res.values())


def test_ks_full_matrix_shapes():
    p = ParamSet.uniform("ks", 1.7)
    m3 = full_matrix(p, "C3").entries
    m4 = full_matrix(p, "C4").entries
    assert m3[0, 1] == 0 and m3[1, 1] == 1
    assert m4[1, 0] == 0 and m4[0, 0] == 1


@pytest.mark.parametrize("kind", ["dc", "t"])
def test_det_m34(kind):
    rng = np.random.default_rng(9)
    for _ in range(100):
        p = random_params(kind, rng)
        # Evaluated at 40 digits: the float determinant of M loses digits to cancellation.
        with mpmath.workdps(40):
            g = {k: mpmath.mpf(float(v)) for k, v in p.values.items()}
            m = full_matrix(ParamSet(kind, g), "C34").entries
            det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
            expected = g["c_14"] * g["c_21"] * g["c_32"] * g["c_43"] / (g["e_12"] * g["e_23"] * g["e_34"] * g["e_41"])
            assert abs(det / expected - 1) < mpmath.mpf(10) ** -30


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(KINDS).flatmap(params_strategy))
def test_full_matrices_of_a_cycle_are_conjugate(p):
    for name, seq in build_topology(p.kind).cycles.items():
        polys = [np.poly(full_matrix(p, name, b).entries.astype(float)) for b in seq]
        for c in polys[1:]:
            np.testing.assert_allclose(c, polys[0], rtol=1e-10, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(KINDS).flatmap(params_strategy))
def test_basic_determinants_are_eigenvalue_ratios(p):
    # |det m_ijk| = -lambda_j,contracting / lambda_j,expanding; the sign depends on coordinate order.
    topo = build_topology(p.kind)
    for name in topo.cycles:
        for i, j, k in cycle_triples(p, name, 2):
            det = np.linalg.det(basic_matrix(p, i, j, k).entries.astype(float))
            assert abs(det) == pytest.approx(float(p[f"c_{j}{i}"]) / float(p[f"e_{j}{k}"]), rel=1e-12)


def test_mpmath_values_flow_through():
    with mpmath.workdps(40):
        p = ParamSet("dc", {k: mpmath.mpf(1) + mpmath.mpf(i) / 10 for i, k in enumerate(param_keys("dc"))})
        ds = derived_scalars(p)
        assert isinstance(ds.alpha1, mpmath.mpf)
        pf = ParamSet("dc", {k: float(v) for k, v in p.values.items()})
        assert float(ds.omega34) == pytest.approx(derived_scalars(pf).omega34, rel=1e-12)


def test_all_matrices_lists_every_tag():
    tags = set(all_matrices(ParamSet.uniform("t")))
    assert {"m123", "m124", "m231", "m234", "m312", "m341", "m412", "m241"} <= tags
    assert {"M2(3)", "M2(4)", "M2(34)", "M3(34)", "M1(3)"} <= tags


@pytest.mark.parametrize("n", [4, 5, 8])
def test_general_split_matrices(n):
    rng = np.random.default_rng(n)
    vals = {k: float(np.exp(rng.uniform(-1, 1))) for k in ("c_21", "e_23", "e_24")}
    vals.update({f"t_2{j}": float(np.exp(rng.uniform(-1, 1))) for j in range(5, n + 1)})
    m123, m124 = general_split_matrices(n, vals)
    assert m123.entries.shape == (n - 2, n - 2)
    e = m123.entries.astype(float)
    assert e[0, 0] == pytest.approx(vals["c_21"] / vals["e_23"])
    assert e[1, 0] == pytest.approx(-vals["e_24"] / vals["e_23"])
    np.testing.assert_array_equal(e[:, 1:], np.eye(n - 2)[:, 1:])
    f = m124.entries.astype(float)
    assert f[0, 1] == pytest.approx(-vals["e_23"] / vals["e_24"])
    # n = 4 reduces to the KS/DC m124 up to swapping the two rows.
    if n == 4:
        p = ParamSet("ks", {**{k: 1.0 for k in param_keys("ks")}, **{k: vals[k] for k in ("c_21", "e_23", "e_24")}})
        ks = basic_matrix(p, 1, 2, 4).entries.astype(float)
        np.testing.assert_allclose(f[[1, 0]], ks, rtol=1e-15)
