import numpy as np
import pytest

from realgit.examples import example_action
from realgit.rep import make_action, maximal_torus
from realgit.torus import (
    NoDestabilizerError,
    NotClosedError,
    closed_orbit_in_closure,
    destabilizing_direction,
    evaluate_phi,
    is_in_null_cone_torus,
    is_orbit_closed,
    kempf_ness_minimizer,
    minimal_vector_torus,
    orbit_support,
    separation_family,
)


def r2_index(frame, axis):
    """Frame index of the standard basis vector ``e_axis`` in the scaling example."""
    return int(np.argmax(np.abs(frame.v_basis[axis])))


def test_support_examples(r2_frame):
    i0, i1 = r2_index(r2_frame, 0), r2_index(r2_frame, 1)
    s = orbit_support([1.0, 0.0], r2_frame)
    assert s.indices == (i0,)
    assert s.signs[i0] == np.sign(r2_frame.v_basis[0, i0])
    s = orbit_support([3.0, -2.0], r2_frame)
    assert s.indices == (0, 1)
    assert s.signs[i0] == np.sign(r2_frame.v_basis[0, i0])
    assert s.signs[i1] == -np.sign(r2_frame.v_basis[1, i1])
    assert orbit_support([0.0, 0.0], r2_frame).empty


def test_support_threshold(r2_frame):
    assert len(orbit_support([1.0, 1e-12], r2_frame)) == 1
    assert len(orbit_support([1.0, 1e-9], r2_frame)) == 2


def test_closedness_examples(r2_frame):
    assert is_orbit_closed([1.0, 1.0], r2_frame)
    assert is_orbit_closed([3.0, -0.2], r2_frame)
    assert not is_orbit_closed([1.0, 0.0], r2_frame)
    assert is_orbit_closed([0.0, 0.0], r2_frame)


def test_destabilizer_axes(r2_frame):
    a = r2_frame.weights[r2_index(r2_frame, 0)]  # weight of e_1 is +a
    d = destabilizing_direction([1.0, 0.0], r2_frame)
    np.testing.assert_allclose(d.direction, -a / np.linalg.norm(a), atol=1e-12)
    assert not np.any(d.limit)
    d = destabilizing_direction([0.0, 1.0], r2_frame)
    np.testing.assert_allclose(d.direction, a / np.linalg.norm(a), atol=1e-12)
    assert not np.any(d.limit)


def test_destabilizer_sl2_e12(sl2, sl2_frame):
    e12 = np.array([0.0, 1.0, 0.0, 0.0])
    d = destabilizing_direction(e12, sl2_frame)
    assert not np.any(d.limit)
    h = sl2_frame.element(d.direction)
    # the operator of α is ad(c·diag(1,-1)) with c < 0: negative eigenvalue on E12
    assert (h @ e12) @ e12 < 0
    ad_h = sl2.split.p_element(sl2.split.p_coords(h))
    ref = np.kron(np.diag([1.0, -1.0]), np.eye(2)) - np.kron(np.eye(2), np.diag([1.0, -1.0]))
    cos = np.sum(ad_h * ref) / (np.linalg.norm(ad_h) * np.linalg.norm(ref))
    assert abs(cos + 1) < 1e-12


def test_destabilizer_closed_rejected(r2_frame):
    with pytest.raises(NoDestabilizerError):
        destabilizing_direction([1.0, 1.0], r2_frame)
    with pytest.raises(NoDestabilizerError):
        destabilizing_direction([0.0, 0.0], r2_frame)


def test_destabilizer_boundary_keeps_zero_face(sl2, sl2_frame):
    # E11 - E22 has weight 0, E12 weight +2: limit keeps the diagonal part
    v = np.array([1.0, 3.0, 0.0, -1.0])
    assert not is_orbit_closed(v, sl2_frame)
    d = destabilizing_direction(v, sl2_frame)
    np.testing.assert_allclose(d.limit, [1.0, 0.0, 0.0, -1.0], atol=1e-12)
    assert is_orbit_closed(d.limit, sl2_frame)


def test_monotone_norm_along_destabilizer(rng, sl3, sl3_frame):
    for _ in range(20):
        u = rng.normal(size=9)
        u[rng.random(9) < 0.5] = 0.0
        v = sl3_frame.vector(u)
        if not np.any(v) or is_orbit_closed(v, sl3_frame):
            continue
        d = destabilizing_direction(v, sl3_frame)
        # exact frame coordinates: off-support round-off in v would grow along the path
        norms = [np.linalg.norm(np.exp(t * d.pairings) * u) for t in np.linspace(0, 30, 61)]
        assert np.all(np.diff(norms) <= 1e-12)
        assert min(norms) > np.linalg.norm(d.limit) - 1e-12
        assert norms[-1] - np.linalg.norm(d.limit) < 1e-6
        assert set(orbit_support(d.limit, sl3_frame).indices) < set(orbit_support(v, sl3_frame).indices)


def test_minimal_vector_examples(r2_frame):
    np.testing.assert_allclose(minimal_vector_torus([1.0, 2.0], r2_frame), [np.sqrt(2), np.sqrt(2)], atol=1e-12)
    np.testing.assert_allclose(minimal_vector_torus([1.0, 1.0], r2_frame), [1.0, 1.0], atol=1e-14)
    np.testing.assert_allclose(minimal_vector_torus([5.0, 5.0], r2_frame), [5.0, 5.0], atol=1e-13)
    with pytest.raises(NotClosedError):
        minimal_vector_torus([1.0, 0.0], r2_frame)


def test_minimal_vector_certificate(rng, sl3_frame):
    for _ in range(10):
        v = rng.normal(size=9)
        lam, vbar, res = kempf_ness_minimizer(v, sl3_frame)
        assert res < 1e-10
        np.testing.assert_allclose(sl3_frame.act(lam, v), vbar, atol=1e-12)
        assert np.linalg.norm(vbar) <= np.linalg.norm(v) + 1e-12
        for op in sl3_frame.torus_ops:
            assert abs((op @ vbar) @ vbar) < 1e-10 * (vbar @ vbar)


def test_closed_orbit_examples(r2_frame):
    assert not np.any(closed_orbit_in_closure([1.0, 0.0], r2_frame))
    np.testing.assert_allclose(closed_orbit_in_closure([1.0, 1.0], r2_frame), [1, 1], atol=1e-14)
    assert not np.any(closed_orbit_in_closure([0.0, 0.0], r2_frame))


def test_closed_orbit_idempotent(rng, sl3_frame):
    for _ in range(30):
        u = rng.normal(size=9)
        u[rng.random(9) < 0.4] = 0.0
        v = sl3_frame.vector(u)
        w = closed_orbit_in_closure(v, sl3_frame)
        assert is_orbit_closed(w, sl3_frame)
        np.testing.assert_allclose(closed_orbit_in_closure(w, sl3_frame), w, atol=1e-10)


def test_null_cone_examples(r2_frame):
    fam = separation_family(r2_frame)
    assert is_in_null_cone_torus([1.0, 0.0], r2_frame, fam)
    assert not is_in_null_cone_torus([1.0, 1.0], r2_frame, fam)
    assert is_in_null_cone_torus([0.0, 0.0], r2_frame, fam)


def test_family_r2(r2_frame):
    fam = separation_family(r2_frame)
    assert fam.admissible == [(0, 1)]
    assert len(fam) == 4  # one exponent vector, four sign patterns
    np.testing.assert_allclose(fam.exponents, 0.5, atol=1e-14)
    for f in fam:
        assert np.linalg.norm(f.exponents @ r2_frame.weights) < 1e-14
        assert abs(f.exponents.sum() - 1) < 1e-14


def test_family_empty_in_half_space():
    act = make_action([np.diag([1.0, 2.0])])
    fam = separation_family(maximal_torus(act.split))
    assert len(fam) == 0
    assert evaluate_phi([1.0, 1.0], fam).size == 0


def test_family_zero_weights():
    act = example_action("trivial:3")
    frame = maximal_torus(act.split)
    fam = separation_family(frame)
    assert (0, 1, 2) in fam.admissible
    full = [f for f in fam if f.support == (0, 1, 2)]
    exps = {tuple(np.round(f.exponents, 12)) for f in full}
    assert len(exps) == 3
    assert all(np.all(f.exponents[list(f.support)] > 0) for f in fam)


def test_phi_examples(r2_frame):
    fam = separation_family(r2_frame)
    phi = evaluate_phi([2.0, 2.0], fam)
    assert np.count_nonzero(phi) == 1
    assert abs(phi.max() - 2.0) < 1e-14
    assert not np.any(evaluate_phi([1.0, 0.0], fam))
    v = np.array([1.0, 1.0])
    a = r2_frame.weights[r2_index(r2_frame, 0)]
    moved = r2_frame.act(a / (a @ a), v)  # (e, 1/e)
    np.testing.assert_allclose(sorted(moved), sorted([np.e, 1 / np.e]), atol=1e-14)
    np.testing.assert_allclose(evaluate_phi(moved, fam), evaluate_phi(v, fam), atol=1e-14)


def test_phi_matches_members(rng, sl2_frame):
    fam = separation_family(sl2_frame)
    assert len(fam) == 96
    for _ in range(5):
        v = rng.normal(size=4)
        u = sl2_frame.coords(v)
        np.testing.assert_allclose(evaluate_phi(v, fam), [f(u) for f in fam], rtol=1e-13)


@pytest.mark.parametrize("frame_name", ["r2_frame", "sl2_frame", "sl3_frame"])
def test_t_invariance(frame_name, request, rng):
    frame = request.getfixturevalue(frame_name)
    fam = separation_family(frame)
    for _ in range(20 if frame.n > 4 else 100):
        v = frame.vector(rng.normal(size=frame.n))
        x = rng.normal(size=frame.rank)
        a, b = evaluate_phi(v, fam), evaluate_phi(frame.act(x, v), fam)
        assert np.all(np.abs(a - b) < 1e-8 * (1 + np.abs(a)))


def test_homogeneity(rng, sl2_frame):
    fam = separation_family(sl2_frame)
    v = rng.normal(size=4)
    for c in (0.3, 2.0, 7.5):
        np.testing.assert_allclose(evaluate_phi(c * v, fam), c * evaluate_phi(v, fam), rtol=1e-13)
    assert not np.any(evaluate_phi(-v, fam) * evaluate_phi(v, fam))  # opposite orthants


def test_properness_on_minimal_vectors(rng, sl2_frame):
    fam = separation_family(sl2_frame)
    low = np.inf
    for _ in range(200):
        v = minimal_vector_torus(rng.normal(size=4), sl2_frame)
        v /= np.linalg.norm(v)
        low = min(low, np.linalg.norm(evaluate_phi(v, fam)))
    assert low > 1e-3


def test_separation_of_closed_orbits(rng, sl2_frame):
    fam = separation_family(sl2_frame)
    reps = [closed_orbit_in_closure(rng.normal(size=4), sl2_frame) for _ in range(30)]
    reps += [np.array([1.0, 1.0, 1.0, 0.0]), np.array([1.0, -1.0, 1.0, 0.0]), np.array([2.0, 1.0, 1.0, 0.0])]
    reps = [closed_orbit_in_closure(r, sl2_frame) for r in reps]
    for i in range(len(reps)):
        for j in range(i):
            if np.linalg.norm(reps[i] - reps[j]) > 1e-6:
                assert np.linalg.norm(evaluate_phi(reps[i], fam) - evaluate_phi(reps[j], fam)) > 1e-8


def test_null_cone_cross_check_random(rng, sl3_frame):
    fam = separation_family(sl3_frame)
    hits = 0
    for _ in range(40):
        u = rng.normal(size=9)
        u[rng.random(9) < 0.5] = 0.0
        v = sl3_frame.vector(u)
        hits += is_in_null_cone_torus(v, sl3_frame, fam)
    assert 0 < hits < 40
