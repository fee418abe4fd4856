import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fgwcluster.prototypes import PrototypeState, coactivation, init_state, step_views, update_B, update_nu


def _row_simplex(n, s, rng):
    P = rng.random((n, s)) + 1e-3
    return P / P.sum(1, keepdims=True)


def test_init_state():
    st_ = init_state(3)
    np.testing.assert_array_equal(st_.B, np.eye(3))
    np.testing.assert_array_equal(st_.nu, [1 / 3] * 3)
    assert (st_.beta1, st_.beta2) == (0.99, 0.999)
    with pytest.raises(ValueError):
        init_state(1)
    with pytest.raises(ValueError):
        init_state(3, beta1=1.2)


def test_update_B_frozen_when_beta_one(rng):
    st_ = PrototypeState(np.eye(3) * 0.5, np.full(3, 1 / 3), 1.0, 0.9)
    np.testing.assert_array_equal(update_B(st_, _row_simplex(5, 3, rng)), st_.B)


def test_update_B_beta_zero_one_hot():
    P = np.zeros((4, 3))
    P[:, 0] = 1
    B = update_B(PrototypeState(np.eye(3), np.full(3, 1 / 3), 0.0, 0.0), P)
    expected = np.zeros((3, 3))
    expected[0, 0] = 1
    np.testing.assert_array_equal(B, expected)


def test_coactivation_matches_hand_product():
    P = np.array([[0.5, 0.5], [1.0, 0.0]])
    # P^T P = [[1.25, 0.25], [0.25, 0.25]] ; max 1.25
    np.testing.assert_allclose(coactivation(P), [[1.0, 0.2], [0.2, 0.2]], atol=1e-15)


def test_update_nu_frozen_when_beta_one(rng):
    st_ = PrototypeState(np.eye(3), np.array([0.2, 0.3, 0.5]), 0.9, 1.0)
    np.testing.assert_array_equal(update_nu(st_, _row_simplex(5, 3, rng)), st_.nu)


def test_update_nu_uniform_fixed_point():
    for beta in (0.0, 0.3, 0.999):
        st_ = PrototypeState(np.eye(4), np.full(4, 0.25), 0.9, beta)
        np.testing.assert_allclose(update_nu(st_, np.full((6, 4), 0.25)), np.full(4, 0.25), atol=1e-16)


def test_update_nu_hand_blend():
    P = np.zeros((4, 2))
    P[:, 1] = 1
    nu = update_nu(PrototypeState(np.eye(2), np.array([1.0, 0.0]), 0.9, 0.5), P)
    np.testing.assert_allclose(nu, [0.5, 0.5], atol=1e-16)


def test_step_views_fixed_momentum_is_fixed_point(rng):
    st_ = init_state(4, 1.0, 1.0)
    B1, nu1, B2, nu2, new = step_views(st_, _row_simplex(6, 4, rng), _row_simplex(6, 4, rng))
    for M in (B1, B2, new.B):
        np.testing.assert_array_equal(M, np.eye(4))
    for v in (nu1, nu2, new.nu):
        np.testing.assert_array_equal(v, np.full(4, 0.25))


def test_step_views_uniform_inputs_deterministic():
    U = np.full((5, 3), 1 / 3)
    a = step_views(init_state(3), U, U)
    b = step_views(init_state(3), U, U)
    for x, y in zip(a[:4], b[:4]):
        assert x.tobytes() == y.tobytes()
    # uniform P has all-equal co-activation, so B blends I with the all-ones matrix
    np.testing.assert_allclose(a[0], 0.99 * np.eye(3) + 0.01 * np.ones((3, 3)), atol=1e-15)


def test_step_views_equals_sequential_updates(rng):
    st_ = init_state(5, 0.8, 0.7)
    P1, P2 = _row_simplex(9, 5, rng), _row_simplex(9, 5, rng)
    B1, nu1, B2, nu2, new = step_views(st_, P1, P2)
    # composed by hand from the single-view rules
    hB1 = 0.8 * np.eye(5) + 0.2 * coactivation(P1)
    hnu1 = 0.7 * np.full(5, 0.2) + 0.3 * P1.mean(0)
    hB2 = 0.8 * hB1 + 0.2 * coactivation(P2)
    hnu2 = 0.7 * hnu1 + 0.3 * P2.mean(0)
    np.testing.assert_allclose(B1, hB1, atol=1e-15)
    np.testing.assert_allclose(nu1, hnu1, atol=1e-15)
    np.testing.assert_allclose(B2, hB2, atol=1e-15)
    np.testing.assert_allclose(nu2, hnu2, atol=1e-15)
    np.testing.assert_array_equal(new.B, B2)
    np.testing.assert_array_equal(new.nu, nu2)
    # the input state is untouched
    np.testing.assert_array_equal(st_.B, np.eye(5))


def test_step_views_order_sensitive(rng):
    st_ = init_state(4)
    P1, P2 = _row_simplex(7, 4, rng), _row_simplex(7, 4, rng)
    a, b = step_views(st_, P1, P2), step_views(st_, P2, P1)
    assert not np.array_equal(a[0], b[0])
    assert not np.array_equal(a[1], b[1])


@settings(max_examples=40, deadline=None)
@given(
    st.integers(2, 6),
    st.integers(1, 10),
    st.floats(0.0, 0.999),
    st.floats(0.0, 1.0),
    st.integers(1, 15),
    st.integers(0, 2**31 - 1),
)
def test_state_invariants_over_many_steps(s, n, beta1, beta2, steps, seed):
    rng = np.random.default_rng(seed)
    st_ = init_state(s, beta1, beta2)
    for _ in range(steps):
        *_, st_ = step_views(st_, _row_simplex(n, s, rng), _row_simplex(n, s, rng))
        np.testing.assert_array_equal(st_.B, st_.B.T)
        assert st_.B.min() >= 0 and st_.B.max() <= 1 + 1e-12
        assert (np.diag(st_.B) > 0).all()
        assert abs(st_.nu.sum() - 1) <= 1e-9 and st_.nu.min() >= 0
