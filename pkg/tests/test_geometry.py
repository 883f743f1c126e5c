import numpy as np
import pytest

from skewlangevin.fields import ConstantTridiag, Cross3D, SublevelCurl, ZeroField
from skewlangevin.geometry import (
    TOL_PROJ,
    Ball,
    GeometryError,
    RayMiss,
    SmoothedLp,
    Sublevel,
    SmoothFunction,
    contains,
    outward_normal,
    project_euclidean,
    skew_normal,
    skew_project,
    smoothed_lp_ball,
)

from conftest import line_scan_entry


def test_contains_examples(ball, lp_set):
    assert contains(ball, [0.2, 0.3, 0.5])
    assert contains(ball, [1.0, 0.0, 0.0])
    assert not contains(ball, [1.0 + 1e-12, 0.0, 0.0])
    assert contains(lp_set, np.zeros(3))
    assert lp_set.g.value(np.zeros(3)) == pytest.approx(3 * 0.2 ** 4, abs=1e-16)


def test_contains_batch_and_dimension_check(ball):
    X = np.array([[0, 0, 0], [2, 0, 0.0]])
    assert contains(ball, X).tolist() == [True, False]
    with pytest.raises(GeometryError):
        contains(ball, [0.0, 0.0])


def test_construction_invariants():
    with pytest.raises(GeometryError):
        Ball(np.zeros(3), 0.0)
    with pytest.raises(GeometryError):
        smoothed_lp_ball(4, 0.2, 0.001)  # g(0) = 0.0048 > level
    with pytest.raises(ValueError):
        SmoothedLp(1.5, 0.0, 3)


def test_smoothed_lp_minimum():
    g = SmoothedLp(4, 0.2, 3)
    assert g.minimum == pytest.approx(3 * 0.2 ** 4)


def test_ball_normal(ball):
    np.testing.assert_allclose(outward_normal(ball, [1.0, 0, 0]), [1, 0, 0])
    with pytest.raises(GeometryError):
        outward_normal(ball, [0.5, 0, 0])


def test_p2_normal_is_radial():
    K = smoothed_lp_ball(2, 0.2, 1.0)
    B = K.sample_boundary(20, np.random.default_rng(0))
    np.testing.assert_allclose(outward_normal(K, B), B / np.linalg.norm(B, axis=1)[:, None], atol=1e-12)


def test_lp_normal_matches_finite_differences(lp_set):
    u = np.ones(3) / np.sqrt(3)
    b = lp_set._boundary_along(u[None])[0] * u
    assert lp_set.on_boundary(b)
    h = 1e-6
    fd = np.array([(lp_set.g.value(b + h * e) - lp_set.g.value(b - h * e)) / (2 * h) for e in np.eye(3)])
    np.testing.assert_allclose(outward_normal(lp_set, b), fd / np.linalg.norm(fd), atol=1e-6)


def test_ball_projection_examples(ball):
    x = np.array([0.2, 0.3, 0.5])
    np.testing.assert_array_equal(project_euclidean(ball, x), x)
    np.testing.assert_array_equal(project_euclidean(ball, [2.0, 0, 0]), [1.0, 0, 0])


def test_ball_projection_scale_equivariance(ball, rng):
    X = rng.normal(size=(200, 3)) * 3
    X = X[np.linalg.norm(X, axis=1) > 1]
    P = project_euclidean(ball, X)
    for a in (2.0, 8.0, 1024.0):
        np.testing.assert_array_equal(project_euclidean(ball, a * X), P)
    for a in (1.5, 10.0):
        np.testing.assert_allclose(project_euclidean(ball, a * X), P, atol=4e-16, rtol=0)


def test_lp_projection_matches_grid_search(lp_set):
    # dense scan of the x1-axis (the projection of (2,0,0) stays on it by symmetry)
    u = np.arange(0.0, 1.2, 1e-6)
    grid = u[(u ** 2 + 0.04) ** 2 + 2 * 0.04 ** 2 <= 1.0].max()
    assert grid == pytest.approx(0.978978, abs=2e-6)
    p = project_euclidean(lp_set, [2.0, 0, 0])
    np.testing.assert_allclose(p, [grid, 0, 0], atol=1e-4)
    assert abs(lp_set.g.value(p) - 1.0) <= TOL_PROJ


def test_lp_projection_kkt(lp_set, rng):
    X = rng.normal(size=(500, 3)) * 2
    out = ~lp_set.contains(X)
    P = project_euclidean(lp_set, X)
    assert lp_set.contains(P).all()
    assert np.abs(lp_set.g.value(P[out]) - 1.0).max() <= TOL_PROJ
    R = X[out] - P[out]
    G = lp_set.g.grad(P[out])
    cross = np.linalg.norm(np.cross(R / np.linalg.norm(R, axis=1)[:, None],
                                    G / np.linalg.norm(G, axis=1)[:, None]), axis=1)
    assert cross.max() <= TOL_PROJ
    assert (np.sum(R * G, axis=1) > 0).all()


def test_projection_idempotent(ball, lp_set, rng):
    X = rng.normal(size=(300, 3)) * 2
    P = project_euclidean(ball, X)
    np.testing.assert_allclose(project_euclidean(ball, P), P, atol=1e-12, rtol=0)
    Q = project_euclidean(lp_set, X)
    np.testing.assert_allclose(project_euclidean(lp_set, Q), Q, atol=TOL_PROJ, rtol=0)


def test_generic_sublevel_projection_matches_ball():
    # a generic convex g without a closed-form prox: |x|^2 <= 1
    g = SmoothFunction(lambda x: np.sum(np.asarray(x) ** 2, axis=-1), lambda x: 2 * np.asarray(x), 3)
    K = Sublevel(g, 1.0)
    X = np.random.default_rng(1).normal(size=(100, 3)) * 3
    np.testing.assert_allclose(project_euclidean(K, X), project_euclidean(Ball.unit(3), X), atol=1e-9)


def test_skew_normal_examples(ball):
    np.testing.assert_allclose(skew_normal(ball, ZeroField(3), [0, 1.0, 0]), [0, 1, 0])
    np.testing.assert_allclose(skew_normal(ball, Cross3D(5.0), [0, 0.6, 0.8]), [0, 0.6, 0.8], atol=1e-15)
    # hand arithmetic: n = e1, J_a n = (0, -1, 0)
    s = 1 / np.sqrt(2)
    np.testing.assert_allclose(skew_normal(ball, ConstantTridiag(1.0), [1.0, 0, 0]), [s, -s, 0], atol=1e-15)


def test_skew_normal_formula_recomputed(ball, rng):
    J = ConstantTridiag(0.7)
    B = ball.sample_boundary(50, rng)
    out = skew_normal(ball, J, B)
    for b, v in zip(B, out):
        n = b / np.linalg.norm(b)
        Jn = J.matrix(b) @ n
        ref = (n + Jn) / np.sqrt(n @ n + Jn @ Jn)
        np.testing.assert_allclose(v, ref, atol=1e-12)
        assert np.linalg.norm(v) <= 1 + np.linalg.norm(Jn)


def test_skew_project_fixed_point_and_degenerate(ball):
    x = np.array([0.2, 0.3, 0.5])
    np.testing.assert_array_equal(skew_project(ball, ConstantTridiag(1.0), x), x)
    np.testing.assert_allclose(skew_project(ball, Cross3D(5.0), [2.0, 0, 0]), [1, 0, 0], atol=1e-15)


def test_skew_project_constant_field_ray_miss(ball):
    # the ray x - t (1, -1, 0)/sqrt(2) from (1.5, 0, 0) stays at |.|^2 >= 1.125
    x = np.array([1.5, 0.0, 0.0])
    d = np.array([1.0, -1.0, 0.0]) / np.sqrt(2)
    assert line_scan_entry(x, d, ball) is None
    with pytest.raises(RayMiss):
        skew_project(ball, ConstantTridiag(1.0), x)
    y, fell = skew_project(ball, ConstantTridiag(1.0), x, fallback="euclidean", return_fallback=True)
    np.testing.assert_array_equal(y, [1.0, 0, 0])
    assert fell is True or fell == True  # noqa: E712


def test_ray_miss_on_lp_falls_back_to_projection(lp_set):
    x = np.array([4.0, 1.0, 1.0])
    with pytest.raises(RayMiss):
        skew_project(lp_set, Cross3D(1.0), x)
    X = np.array([x, [1.2, 0.0, 0.0]])
    Y, fell = skew_project(lp_set, Cross3D(1.0), X, fallback="euclidean", return_fallback=True)
    np.testing.assert_array_equal(fell, [True, False])
    np.testing.assert_array_equal(Y[0], project_euclidean(lp_set, x))
    assert lp_set.contains(Y).all()


def test_skew_project_matches_line_scan(ball, rng):
    J = ConstantTridiag(0.5)
    hits = 0
    while hits < 100:
        x = rng.normal(size=3)
        x *= rng.uniform(1.01, 1.6) / np.linalg.norm(x)
        p = project_euclidean(ball, x)
        d = skew_normal(ball, J, p)
        t_scan = line_scan_entry(x, d, ball)
        if t_scan is None:
            with pytest.raises(RayMiss):
                skew_project(ball, J, x)
            continue
        y = skew_project(ball, J, x)
        np.testing.assert_allclose(y, x - t_scan * d, atol=1e-6)
        hits += 1


def test_skew_project_lp_feasible_and_on_ray(lp_set, rng):
    J = SublevelCurl(lp_set.g, 1.0, 3.0)
    X = rng.normal(size=(400, 3)) * 1.5
    Y, fell = skew_project(lp_set, J, X, fallback="euclidean", return_fallback=True)
    assert lp_set.contains(Y).all()
    out = ~lp_set.contains(X) & ~fell
    P = project_euclidean(lp_set, X[out])
    D = skew_normal(lp_set, J, P)
    R = X[out] - Y[out]
    # displacement is parallel to the skew normal
    c = np.linalg.norm(np.cross(R, D), axis=1) / np.linalg.norm(R, axis=1)
    assert c.max() <= 1e-8
    assert np.abs(lp_set.g.value(Y[out]) - 1.0).max() <= 1e-8


def test_degeneracy_skew_equals_euclidean(lp_set, rng):
    # fields with J n = 0 on the boundary reduce to the Euclidean projection
    for K, J in ((Ball.unit(3), Cross3D(5.0)), (lp_set, SublevelCurl(lp_set.g, 1.0, 8.0))):
        X = rng.normal(size=(3000, 3)) * 2
        X = X[~K.contains(X)][:1000]
        assert X.shape[0] == 1000
        np.testing.assert_allclose(skew_project(K, J, X), project_euclidean(K, X), atol=10 * TOL_PROJ, rtol=0)


def test_boundary_and_interior_sampling(lp_set, ball, rng):
    for K in (ball, lp_set):
        B = K.sample_boundary(200, rng)
        assert K.on_boundary(B).all()
        inner = K.sample_interior(200, rng)
        assert K.contains(inner).all() and not K.on_boundary(inner).any()
