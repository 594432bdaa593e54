import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pdmd import SnapshotEnsemble, ThetaScale, build_lifted, lift_vector, theta_powers


@pytest.mark.parametrize("theta, n_p, expected", [
    (2, 3, [2, 4, 8]), (0, 2, [0, 0]), (-0.5, 2, [-0.5, 0.25]), (7, 0, [])])
def test_theta_powers(theta, n_p, expected):
    np.testing.assert_array_equal(theta_powers(theta, n_p), expected)


@pytest.mark.parametrize("v, theta, n_p, expected", [
    ([1, 3], 2, 1, [1, 3, 2, 6]), ([1, 3], 0, 2, [1, 3, 0, 0, 0, 0]), ([5], 123.4, 0, [5])])
def test_lift_vector_by_hand(v, theta, n_p, expected):
    np.testing.assert_array_equal(lift_vector(v, theta, n_p), expected)


def test_single_column_by_hand():
    ens = SnapshotEnsemble(dt=1, states=[[1.0], [2.0]], inputs=[[3.0]], theta=[2.0])
    d = build_lifted(ens, 1)
    for name, val in (("X", 1), ("Xplus", 2), ("U", 3), ("Xkr", 2), ("Ukr", 6)):
        np.testing.assert_array_equal(getattr(d, name), [[val]])


def _ens(seed, n_d=15, n_x=3, n_u=2):
    rng = np.random.default_rng(seed)
    return SnapshotEnsemble(dt=0.1, states=rng.standard_normal((n_d + 1, n_x)),
                            inputs=rng.standard_normal((n_d, n_u)), theta=rng.uniform(-2, 2, n_d))


def test_zero_order_has_empty_kronecker_blocks():
    d = build_lifted(_ens(0), 0)
    assert d.Xkr.shape == (0, 15) and d.Ukr.shape == (0, 15)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n_p=st.integers(0, 4), n_x=st.integers(1, 4), n_u=st.integers(1, 3))
def test_columns_match_lift_vector(seed, n_p, n_x, n_u):
    ens = _ens(seed, 9, n_x, n_u)
    d = build_lifted(ens, n_p)
    assert d.Xkr.shape == (n_p * n_x, 9) and d.Ukr.shape == (n_p * n_u, 9)
    assert d.regressor().shape[0] == (n_p + 1) * (n_x + n_u)
    for k in range(9):
        np.testing.assert_allclose(np.concatenate([d.X[:, k], d.Xkr[:, k]]),
                                   lift_vector(ens.states[k], ens.theta[k], n_p), rtol=1e-15)
        np.testing.assert_allclose(np.concatenate([d.U[:, k], d.Ukr[:, k]]),
                                   lift_vector(ens.inputs[k], ens.theta[k], n_p), rtol=1e-15)
        np.testing.assert_array_equal(d.Xplus[:, k], ens.states[k + 1])


def test_kronecker_identity():
    rng = np.random.default_rng(4)
    v, th = rng.standard_normal(5), 0.7
    np.testing.assert_allclose(lift_vector(v, th, 3)[5:], np.kron(theta_powers(th, 3), v))


def test_splitting_invariance():
    a, b = _ens(1), _ens(2)
    scale = ThetaScale.fit(np.concatenate([a.theta, b.theta]))
    joint = build_lifted([a, b], 3, scale)
    parts = [build_lifted(e, 3, scale) for e in (a, b)]
    np.testing.assert_array_equal(joint.regressor(), np.hstack([p.regressor() for p in parts]))
    np.testing.assert_array_equal(joint.Xplus, np.hstack([p.Xplus for p in parts]))


def test_normalization_applied_before_lifting():
    ens = SnapshotEnsemble(dt=1, states=np.ones((3, 1)), inputs=np.ones((2, 1)), theta=[10.0, 20.0])
    d = build_lifted(ens, 1, ThetaScale.fit(ens.theta))
    np.testing.assert_allclose(d.Xkr, [[-1.0, 1.0]])


@given(lo=st.floats(-100, 100), width=st.floats(1e-3, 100), t=st.floats(0, 1))
def test_theta_scale_round_trip(lo, width, t):
    s = ThetaScale.fit([lo, lo + width])
    th = lo + t * width
    tn = s.normalize(th)
    assert -1 - 1e-9 <= tn <= 1 + 1e-9
    assert abs(s.denormalize(tn) - th) <= 1e-9 * max(1, abs(th))


def test_degenerate_scale_maps_to_zero():
    s = ThetaScale.fit([0.3, 0.3])
    assert s.normalize(0.3) == 0.0
    assert ThetaScale.fit([0.3], enabled=False).normalize(0.3) == 0.3


def test_build_lifted_rejects_negative_order():
    with pytest.raises(ValueError):
        build_lifted(_ens(0), -1)
