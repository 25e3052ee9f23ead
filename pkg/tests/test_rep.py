import json

import numpy as np
import pytest
from scipy.linalg import expm

from realgit.examples import example_action, make_bracket_action
from realgit.rep import ActionSpecError, iwasawa_check, load_action, make_action, maximal_torus


def test_load_scaling_spec():
    act = load_action({"dim_v": 2, "generators": [[[1, 0], [0, -1]]]})
    assert act.dim_v == 2 and act.dim_g == 1
    assert act.split.dim_k == 0 and act.split.dim_p == 1


def test_load_from_json_text_and_file(tmp_path):
    spec = {"dim_v": 2, "generators": [[[1, 0], [0, -1]]], "name": "scal"}
    a = load_action(json.dumps(spec))
    p = tmp_path / "a.json"
    p.write_text(json.dumps(spec))
    b = load_action(p)
    assert a.name == b.name == "scal"
    np.testing.assert_allclose(a.generators, b.generators)


def test_zero_generators_trivial():
    act = load_action({"dim_v": 3, "generators": []})
    assert act.dim_g == 0
    assert act.split.dim_k == 0 and act.split.dim_p == 0
    fr = maximal_torus(act.split)
    assert fr.rank == 0 and fr.weights.shape == (3, 0)


def test_sl2_split_dims(sl2):
    # oracle: ad(E12)^T = ad(E21), so p = span{H, E12+E21}, k = span{E12-E21}
    assert sl2.split.dim_k == 1 and sl2.split.dim_p == 2
    k = sl2.split.k_ops[0]
    np.testing.assert_allclose(k, -k.T, atol=1e-14)


def test_cartan_bracket_relations(sl3, br3):
    for act in (sl3, br3):
        res = act.split.bracket_residuals()
        assert res["kp_in_p"] < 1e-9 and res["pp_in_k"] < 1e-9


def test_not_transpose_closed_rejected():
    e12 = np.array([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(ActionSpecError) as err:
        make_action([e12])
    assert err.value.index == 0


def test_not_bracket_closed_rejected():
    a = np.array([[1.0, 0, 0], [0, 0, 0], [0, 0, 0]])
    b = np.array([[0.0, 1, 0], [1, 0, 0], [0, 0, 0]])
    with pytest.raises(ActionSpecError, match="bracket"):
        make_action([a, b])


def test_inner_v_conjugation():
    # scaling action written for the scalar product diag(4, 1)
    act = make_action([np.diag([1.0, -1.0])], inner_v=np.diag([4.0, 1.0]))
    u = act.from_user([1.0, 2.0])
    np.testing.assert_allclose(u, [2.0, 2.0])
    np.testing.assert_allclose(act.to_user(u), [1.0, 2.0])


def test_weights_r2(r2_frame):
    np.testing.assert_allclose(sorted(r2_frame.weights.ravel()), [-2 ** -0.5, 2 ** -0.5], atol=1e-14)


def test_weights_sl2(sl2_frame):
    # oracle: [diag(1,-1), E_ij] eigenvalues {0, 2, -2, 0}; torus basis is diag(1,-1)/sqrt2
    w = np.sort(sl2_frame.weights.ravel())
    np.testing.assert_allclose(w, np.array([-2, 0, 0, 2]) / np.sqrt(2), atol=1e-12)


def test_trivial_torus_weights_zero():
    act = make_action([np.eye(3)])
    fr = maximal_torus(act.split)
    assert fr.rank == 1
    np.testing.assert_allclose(fr.weights, np.full((3, 1), 1 / np.sqrt(3)), atol=1e-12)


@pytest.mark.parametrize("name", ["scaling-r2", "sl-conj:2", "sl-conj:3", "brackets:3:sl", "brackets:3:gl"])
def test_torus_diagonalizes(name, rng):
    act = example_action(name)
    fr = maximal_torus(act.split)
    assert fr.diagonal_residual() < 1e-9
    for _ in range(5):
        x = rng.normal(size=fr.rank)
        lam = fr.element(x)
        for i in range(fr.n):
            e = fr.v_basis[:, i]
            assert np.linalg.norm(lam @ e - (fr.weights[i] @ x) * e) < 1e-9


@pytest.mark.parametrize("name", ["sl-conj:2", "sl-conj:3", "brackets:3:sl"])
def test_ad_compatibility(name):
    act = example_action(name)
    split = act.split
    for x in split.k_ops:
        ad = split.ad_matrix(x)
        assert np.abs(ad + ad.T).max() < 1e-9
    for x in split.p_ops:
        ad = split.ad_matrix(x)
        assert np.abs(ad - ad.T).max() < 1e-9


def test_maximal_torus_rank(sl3, br3):
    assert maximal_torus(sl3.split).rank == 2
    assert maximal_torus(br3.split).rank == 2
    assert maximal_torus(make_bracket_action(3, "gl").split).rank == 3


def test_iwasawa_identity(sl2):
    rep = iwasawa_check(sl2, [np.eye(4)])[0]
    np.testing.assert_allclose(rep.k, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(rep.t, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(rep.n, np.eye(4), atol=1e-12)


def test_iwasawa_p_element(sl2, rng):
    g = expm(sl2.split.p_element(rng.normal(size=2)))
    rep = iwasawa_check(sl2, [g])[0]
    assert rep.ktn_residual < 1e-9 and rep.ktk_residual < 1e-9
    assert rep.t_in_torus_residual < 1e-9 and rep.n_in_g_residual < 1e-8
    # independent oracle: Q from numpy QR of the torus-ordered matrix
    assert rep.ok


def test_iwasawa_k_element(sl2):
    g = expm(0.7 * sl2.split.k_ops[0])
    rep = iwasawa_check(sl2, [g])[0]
    np.testing.assert_allclose(rep.t, np.eye(4), atol=1e-10)
    np.testing.assert_allclose(rep.n, np.eye(4), atol=1e-10)


def test_iwasawa_random_sl3(sl3, rng):
    samples = [expm(sl3.split.g_element(0.5 * rng.normal(size=8))) for _ in range(3)]
    for rep in iwasawa_check(sl3, samples):
        assert rep.ok, (rep.ktn_residual, rep.ktk_residual, rep.t_in_torus_residual, rep.n_in_g_residual)
