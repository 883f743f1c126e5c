import numpy as np
import pytest

from skewlangevin.fields import ConstantTridiag, Cross3D, SublevelCurl, ZeroField
from skewlangevin.geometry import Ball, RayMiss
from skewlangevin.oracle import GaussianProposal, rejection_sample
from skewlangevin.samplers import (
    ChainState,
    InfeasibleStart,
    SamplerConfig,
    SamplerDivergence,
    chain_rng,
    derive_seed,
    run_chain,
    run_ensemble,
    step,
)
from skewlangevin.targets import make_synthetic_linear

from conftest import TOY_X0


class FlatPotential:
    """Zero gradient everywhere (the improper flat prior)."""

    dim = 3

    def grad(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


class TiltedDrift:
    """Potential stub whose gradient is ``(I + J(x)) grad f``."""

    def __init__(self, pot, field):
        self.pot = pot
        self.field = field
        self.dim = pot.dim

    def grad(self, x):
        G = self.pot.grad(x)
        return G + self.field.apply(x, G)


def test_config_algorithm_names():
    assert SamplerConfig(1e-3, 1).algorithm == "PLMC"
    assert SamplerConfig(1e-3, 1, Cross3D(5.0)).algorithm == "SRNLMC"
    assert SamplerConfig(1e-3, 1, batch_size=5).algorithm == "PSGLD"
    assert SamplerConfig(1e-3, 1, Cross3D(5.0), batch_size=5).algorithm == "SRNSGLD"


@pytest.mark.parametrize("kw", [dict(eta=-1.0), dict(n_steps=-1), dict(thin=0),
                                dict(batch_size=0), dict(fallback="ignore")])
def test_config_rejects_bad_values(kw):
    args = dict(eta=1e-3, n_steps=1)
    args.update(kw)
    with pytest.raises(ValueError):
        SamplerConfig(**args)


def test_zero_step_size_keeps_point(ball, toy_pot):
    st = step(ChainState(TOY_X0.copy(), chain_rng(3)), SamplerConfig(0.0, 1, Cross3D(5.0)), ball, toy_pot)
    np.testing.assert_array_equal(st.x, TOY_X0)
    assert st.step_index == 1


def test_drift_free_step_is_projected_brownian_increment(ball):
    eta = 0.05
    x = np.array([0.6, 0.6, 0.4])
    cfg = SamplerConfig(eta, 1, seed=7)
    st = step(ChainState(x.copy(), chain_rng(7)), cfg, ball, FlatPotential())
    xi = chain_rng(7).standard_normal(3)
    y = x + np.sqrt(2 * eta) * xi
    expect = y if np.linalg.norm(y) <= 1 else y / np.linalg.norm(y)
    np.testing.assert_allclose(st.x, expect, rtol=0, atol=1e-15)


def _srnlmc_step_by_hand(x, xi, eta, s, cov_diag):
    k = s * x
    J = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    g = x / np.array(cov_diag)
    y = x - eta * (np.eye(3) + J) @ g + np.sqrt(2 * eta) * xi
    r = np.sqrt(y @ y)
    # on the unit ball J(p) p = 0, so the skew normal is p itself and the ray lands on y / |y|
    return y if r <= 1.0 else y / r


@pytest.mark.parametrize("x", [TOY_X0, np.array([0.0, 0.6, 0.7999])])
def test_srnlmc_step_matches_hand_arithmetic(ball, toy_pot, x):
    eta, s = 5e-4, 5.0
    for seed in range(20):
        cfg = SamplerConfig(eta, 1, Cross3D(s), seed=seed)
        st = step(ChainState(x.copy(), chain_rng(seed)), cfg, ball, toy_pot)
        xi = chain_rng(seed).standard_normal(3)
        expect = _srnlmc_step_by_hand(x, xi, eta, s, (0.25, 1.0, 4.0))
        np.testing.assert_allclose(st.x, expect, rtol=0, atol=1e-12)


def test_hand_arithmetic_case_leaves_the_ball_sometimes(ball, toy_pot):
    x = np.array([0.0, 0.6, 0.7999])
    exits = [np.linalg.norm(_srnlmc_step_by_hand(x, chain_rng(s).standard_normal(3), 5e-4, 5.0,
                                                 (0.25, 1.0, 4.0))) == 1.0 for s in range(20)]
    assert 0 < sum(exits) < 20


def test_step_rejects_infeasible_state(ball, toy_pot):
    with pytest.raises(InfeasibleStart):
        step(ChainState(np.array([2.0, 0, 0]), chain_rng(0)), SamplerConfig(1e-3, 1), ball, toy_pot)


def test_zero_steps_give_initial_point(ball, toy_pot):
    tr = run_chain(TOY_X0, SamplerConfig(5e-4, 0, Cross3D(5.0)), ball, toy_pot)
    np.testing.assert_array_equal(tr.points, TOY_X0[None])
    np.testing.assert_array_equal(tr.steps, [0])


def test_thinning_records_expected_rows(ball, toy_pot):
    tr = run_chain(TOY_X0, SamplerConfig(5e-4, 25, thin=10), ball, toy_pot)
    assert tr.points.shape == (3, 3)
    np.testing.assert_array_equal(tr.steps, [0, 10, 20])
    full = run_chain(TOY_X0, SamplerConfig(5e-4, 25), ball, toy_pot)
    np.testing.assert_array_equal(tr.points, full.points[[0, 10, 20]])


def test_run_chain_is_deterministic(lp_set, toy_pot):
    fld = SublevelCurl(lp_set.g, lp_set.level, 1.0)
    cfg = SamplerConfig(5e-3, 200, fld, seed=99, fallback="euclidean")
    a = run_chain(np.zeros(3), cfg, lp_set, toy_pot)
    b = run_chain(np.zeros(3), cfg, lp_set, toy_pot)
    np.testing.assert_array_equal(a.points, b.points)
    assert a.metadata["gaussian"] == "numpy-PCG64-ziggurat"


def test_step_agrees_with_run_chain(ball, toy_pot):
    cfg = SamplerConfig(5e-3, 50, Cross3D(5.0), seed=11)
    tr = run_chain(TOY_X0, cfg, ball, toy_pot)
    st = ChainState(TOY_X0.copy(), chain_rng(11))
    for _ in range(50):
        st = step(st, cfg, ball, toy_pot)
    np.testing.assert_array_equal(st.x, tr.final)


def test_single_chain_ensemble_equals_run_chain(ball, toy_pot):
    cfg = SamplerConfig(5e-4, 100, Cross3D(5.0))
    ens = run_ensemble(TOY_X0, cfg, ball, toy_pot, 1, seed_base=4)
    tr = run_chain(TOY_X0, SamplerConfig(5e-4, 100, Cross3D(5.0), seed=derive_seed(4, 0)), ball, toy_pot)
    np.testing.assert_array_equal(ens.points[0], tr.points)
    assert ens[0].config.seed == derive_seed(4, 0)


@pytest.mark.parametrize("which", ["ball", "lp"])
def test_ensemble_rows_do_not_depend_on_batch(which, ball, lp_set, toy_pot):
    if which == "ball":
        K, fld = ball, Cross3D(5.0)
    else:
        K, fld = lp_set, SublevelCurl(lp_set.g, lp_set.level, 1.0)
    cfg = SamplerConfig(2e-2, 60, fld, fallback="euclidean")
    ens = run_ensemble(np.zeros(3), cfg, K, toy_pot, 12, seed_base=5)
    for i in (0, 7, 11):
        tr = run_chain(np.zeros(3), SamplerConfig(2e-2, 60, fld, fallback="euclidean",
                                                   seed=derive_seed(5, i)), K, toy_pot)
        np.testing.assert_array_equal(ens.points[i], tr.points)


def test_ensemble_permuted_starts_permute_paths(ball, toy_pot, rng):
    # a chain's path depends only on (seed_base, index) and its start
    X0 = ball.sample_interior(6, rng)
    cfg = SamplerConfig(5e-3, 40, Cross3D(5.0))
    a = run_ensemble(X0, cfg, ball, toy_pot, 6, seed_base=2)
    seeds = [derive_seed(2, i) for i in range(6)]
    perm = [3, 0, 5, 1, 4, 2]
    for j in perm:
        tr = run_chain(X0[j], SamplerConfig(5e-3, 40, Cross3D(5.0), seed=seeds[j]), ball, toy_pot)
        np.testing.assert_array_equal(a.points[j], tr.points)


def test_zero_field_reduces_to_plmc(ball, toy_pot):
    a = run_chain(TOY_X0, SamplerConfig(5e-3, 300, seed=1), ball, toy_pot)
    b = run_chain(TOY_X0, SamplerConfig(5e-3, 300, ZeroField(), seed=1), ball, toy_pot)
    np.testing.assert_array_equal(a.points, b.points)


def test_cross3d_on_ball_equals_plmc_with_tilted_drift(ball, toy_pot):
    fld = Cross3D(5.0)
    a = run_chain(TOY_X0, SamplerConfig(2e-2, 500, fld, seed=8), ball, toy_pot)
    b = run_chain(TOY_X0, SamplerConfig(2e-2, 500, seed=8), ball, TiltedDrift(toy_pot, fld))
    assert np.any(np.isclose(np.linalg.norm(a.points, axis=1), 1.0))
    np.testing.assert_allclose(a.points, b.points, rtol=0, atol=1e-12)


@pytest.mark.parametrize("fld", [ZeroField(), ConstantTridiag(1.0, 3), Cross3D(5.0)])
def test_every_iterate_is_feasible_on_ball(ball, toy_pot, fld):
    ens = run_ensemble(TOY_X0, SamplerConfig(5e-2, 200, fld, fallback="euclidean"), ball, toy_pot, 50, 0)
    assert np.all(ball.contains(ens.points.reshape(-1, 3)))


def test_every_iterate_is_feasible_on_lp(lp_set, toy_pot):
    fld = SublevelCurl(lp_set.g, lp_set.level, 1.0)
    ens = run_ensemble(np.zeros(3), SamplerConfig(5e-2, 200, fld, fallback="euclidean"),
                       lp_set, toy_pot, 50, 0)
    assert np.all(lp_set.contains(ens.points.reshape(-1, 3)))


def test_ray_miss_policy(toy_pot):
    K = Ball.unit(3)
    fld = ConstantTridiag(50.0, 3)
    with pytest.raises(RayMiss):
        run_ensemble(TOY_X0, SamplerConfig(0.5, 20, fld, fallback="error"), K, toy_pot, 20, 0)
    ens = run_ensemble(TOY_X0, SamplerConfig(0.5, 20, fld, fallback="euclidean"), K, toy_pot, 20, 0)
    assert ens.fallback_counts.sum() > 0
    assert np.all(K.contains(ens.points.reshape(-1, 3)))


def test_divergence_guard(toy_pot):
    K = Ball(np.zeros(3), 1e8)
    with pytest.raises(SamplerDivergence):
        run_chain(np.zeros(3), SamplerConfig(1e13, 1, seed=0), K, toy_pot)


def test_infeasible_start(ball, toy_pot):
    with pytest.raises(InfeasibleStart):
        run_chain(np.array([0.0, 0.0, 1.5]), SamplerConfig(1e-3, 1), ball, toy_pot)
    with pytest.raises(InfeasibleStart):
        run_ensemble(np.array([0.0, 0.0, 1.5]), SamplerConfig(1e-3, 1), ball, toy_pot, 3, 0)


def test_minibatch_consumes_indices_before_noise(ball):
    pot, _ = make_synthetic_linear(40, 0)
    x = np.zeros(3)
    eta, m = 1e-3, 5
    st = step(ChainState(x.copy(), chain_rng(21)), SamplerConfig(eta, 1, batch_size=m), ball, pot)
    r = chain_rng(21)
    idx = r.choice(40, m, replace=False)
    xi = r.standard_normal(3)
    y = x - eta * pot.grad_subset(x[None], idx[None])[0] + np.sqrt(2 * eta) * xi
    expect = y if np.linalg.norm(y) <= 1 else y / np.linalg.norm(y)
    np.testing.assert_allclose(st.x, expect, rtol=0, atol=1e-15)


def test_minibatch_ensemble_matches_chains(ball):
    pot, _ = make_synthetic_linear(200, 1)
    cfg = SamplerConfig(1e-3, 30, Cross3D(5.0), batch_size=10)
    ens = run_ensemble(np.zeros(3), cfg, ball, pot, 4, 9)
    tr = run_chain(np.zeros(3), SamplerConfig(1e-3, 30, Cross3D(5.0), batch_size=10,
                                              seed=derive_seed(9, 2)), ball, pot)
    np.testing.assert_array_equal(ens.points[2], tr.points)


def test_full_batch_minibatch_is_full_gradient(ball):
    pot, _ = make_synthetic_linear(30, 2)
    a = run_chain(np.zeros(3), SamplerConfig(1e-3, 20, seed=3, batch_size=30), ball, pot)
    b = run_chain(np.zeros(3), SamplerConfig(1e-3, 20, seed=3), ball, pot)
    np.testing.assert_array_equal(a.points, b.points)
    with pytest.raises(ValueError):
        run_chain(np.zeros(3), SamplerConfig(1e-3, 1, batch_size=31), ball, pot)


def test_observer_sees_every_step(ball, toy_pot):
    seen = []
    run_ensemble(TOY_X0, SamplerConfig(1e-3, 5), ball, toy_pot, 2, 0, record=False,
                 observer=lambda k, X: seen.append(k))
    assert seen == [0, 1, 2, 3, 4, 5]


@pytest.mark.parametrize("fld", [ZeroField(), Cross3D(5.0)], ids=["PLMC", "SRNLMC"])
def test_terminal_mean_within_clt_band_of_oracle(ball, toy_pot, fld):
    n = 5000
    ens = run_ensemble(TOY_X0, SamplerConfig(5e-4, 2000, fld), ball, toy_pot, n, 17, record=False)
    ref = rejection_sample(ball, GaussianProposal.from_potential(toy_pot), 100000, 3)
    band = 3 * ref.points.std(axis=0, ddof=1) / np.sqrt(n)
    assert np.all(np.abs(ens.terminal.mean(axis=0) - ref.points.mean(axis=0)) <= band)
    var_ratio = ens.terminal.var(axis=0) / ref.points.var(axis=0)
    assert np.all(np.abs(var_ratio - 1) < 0.1)
