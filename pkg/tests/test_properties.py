import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from skewlangevin.diagnostics import asymptotic_variance_batch_means, w1_per_dimension
from skewlangevin.fields import BlockCross, ConstantTridiag, Cross3D
from skewlangevin.geometry import Ball, skew_project, smoothed_lp_ball
from skewlangevin.harness import parse_seeds

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
points3 = arrays(np.float64, 3, elements=finite)
LP = smoothed_lp_ball(4, 0.2, 1.0)
LP24 = smoothed_lp_ball(2.4, 0.18, 4.0)


@given(points3, st.floats(0.1, 10))
def test_ball_projection_feasible_and_idempotent(x, r):
    K = Ball(np.zeros(3), r)
    p = K.project(x)
    assert K.contains(p)
    np.testing.assert_array_equal(K.project(p), p)


@given(points3, points3)
def test_ball_projection_nonexpansive(x, y):
    K = Ball.unit(3)
    assert np.linalg.norm(K.project(x) - K.project(y)) <= np.linalg.norm(x - y) * (1 + 1e-12) + 1e-15


@settings(max_examples=60, deadline=None)
@given(points3, st.sampled_from([LP, LP24]))
def test_sublevel_projection_kkt(x, K):
    p = K.project(x)
    assert K.g.value(p) <= K.level * (1 + 1e-9)
    if not K.contains(x):
        # x - p is parallel to the outward gradient at p
        n = K.g.grad(p)
        r = x - p
        cos = r @ n / (np.linalg.norm(r) * np.linalg.norm(n))
        assert cos > 1 - 1e-6


@settings(max_examples=60, deadline=None)
@given(points3, st.floats(0.1, 20))
def test_skew_projection_feasible(x, s):
    for K, fld in ((Ball.unit(3), Cross3D(s)), (LP, Cross3D(s))):
        y = skew_project(K, fld, x, fallback="euclidean")
        assert K.g.value(y) <= K.level * (1 + 1e-9) if hasattr(K, "g") else K.contains(y)


@given(arrays(np.float64, (4, 6), elements=finite), st.floats(0.1, 5))
def test_fields_are_skew(X, s):
    for fld in (BlockCross((s, 2 * s), 6), ConstantTridiag(s, 6)):
        J = fld.matrix(X)
        assert np.max(np.abs(J + np.swapaxes(J, -1, -2))) == 0.0
    Jc = Cross3D(s).matrix(X[:, :3])
    np.testing.assert_allclose(np.einsum("nij,nj->ni", Jc, X[:, :3]), 0, atol=1e-12 * s * 2500)


@given(arrays(np.float64, st.integers(1, 12), elements=finite),
       arrays(np.float64, st.integers(1, 12), elements=finite))
def test_w1_symmetric_and_nonnegative(a, b):
    ab = w1_per_dimension(a, b)[0]
    assert ab == w1_per_dimension(b, a)[0]
    assert ab >= 0


@given(arrays(np.float64, st.integers(1, 12), elements=finite))
def test_w1_zero_on_permutation(a):
    assert w1_per_dimension(a, a[::-1])[0] == 0.0


@given(arrays(np.float64, st.integers(40, 400), elements=finite), st.integers(-1000, 1000))
def test_batch_means_integer_shift(x, c):
    # shifts by integers on a dyadic grid keep the arithmetic exact
    x = np.round(x * 8) / 8
    a = asymptotic_variance_batch_means(x).sigma2_hat
    b = asymptotic_variance_batch_means(x + c).sigma2_hat
    assert abs(a - b) <= 1e-9 * max(1.0, a)


@given(st.lists(st.integers(0, 10_000), min_size=1, max_size=20))
def test_parse_seeds_round_trip(seeds):
    assert parse_seeds(",".join(map(str, seeds))) == seeds
