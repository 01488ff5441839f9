import numpy as np
import pytest

from envwalk.environments import (
    env_replica,
    make_dirac,
    make_fully_correlated,
    make_lattice_product,
    query,
    shift,
)
from envwalk.families import DiracSteps, FixedAtomic, GaussianDrift, UniformPM1
from envwalk.jumplaws import law_mean
from envwalk.streams import StreamKey, derive_stream
from envwalk.walks import (
    batch_averaged_positions,
    batch_quenched_positions,
    env_chain_observable,
    exact_mean_curves,
    local_drift,
    quenched_mean_exact,
    quenched_mean_mc,
    quenched_step,
    scaled_path,
    simulate_averaged_path,
    simulate_quenched_path,
    velocity_and_covariance,
)

MIX = make_lattice_product(404, 1, UniformPM1())
FAIR = make_lattice_product(404, 1, FixedAtomic(((1.0,), (-1.0,)), (0.5, 0.5)), uniform_offset=False)
DIRAC = make_dirac(404, 1, DiracSteps(((1.0,), (-1.0,)), (0.5, 0.5)))
FC = make_fully_correlated(404, 1, UniformPM1())


def test_zero_step_path():
    p = simulate_quenched_path(MIX, 0, walk_seed=0)
    assert p.positions.shape == (1, 1)
    assert p.positions[0, 0] == 0.0


def test_path_replays():
    p1 = simulate_quenched_path(MIX, 32, walk_seed=5)
    p2 = simulate_quenched_path(MIX, 32, walk_seed=5)
    assert np.array_equal(p1.positions, p2.positions)
    p3 = simulate_quenched_path(MIX, 32, walk_seed=6)
    assert not np.array_equal(p1.positions, p3.positions)


def test_unit_steps_on_pm1_lattice():
    p = simulate_quenched_path(MIX, 100, walk_seed=1)
    steps = np.diff(p.positions[:, 0])
    assert set(np.abs(steps)) == {1.0}


def test_quenched_step_dirac_deterministic():
    s1 = derive_stream(StreamKey(1, 0, (0,), 2))
    s2 = derive_stream(StreamKey(2, 0, (9,), 2))
    assert quenched_step(DIRAC, 0, 0.0, s1) == quenched_step(DIRAC, 0, 0.0, s2)


@pytest.mark.parametrize("env", [MIX, FC, DIRAC, FAIR])
def test_batch_quenched_matches_scalar(env):
    record, pos, _ = batch_quenched_positions(env, 24, np.arange(6))
    for w in range(6):
        p = simulate_quenched_path(env, 24, walk_seed=w)
        assert np.array_equal(p.positions[:, 0], pos[:, w].astype(float))


def test_batch_averaged_matches_scalar():
    record, pos = batch_averaged_positions(MIX, 16, np.arange(5))
    for r in range(5):
        p = simulate_averaged_path(MIX, 16, replica=r)
        assert np.array_equal(p.positions[:, 0], pos[:, r].astype(float))


def test_local_drift_values():
    p = query(MIX, 0, 0.0).weights[0]
    assert local_drift(MIX) == pytest.approx(2 * p - 1)
    g_env = make_lattice_product(11, 2, GaussianDrift(2, 0.5, ((1.0, 0.0), (0.0, 1.0))))
    law = query(g_env, 0, (0.0, 0.0))
    assert np.array_equal(local_drift(g_env), law.mean)


def test_local_drift_after_shift_is_step_conditional_mean():
    env = MIX
    p = simulate_quenched_path(env, 10, walk_seed=3)
    k, xk = 4, p.positions[4, 0]
    seen = shift(env, k, xk)
    step_law = query(env, k, xk)
    assert np.array_equal(local_drift(seen), law_mean(step_law))


def test_quenched_mean_mc_dirac_zero_se():
    curve = quenched_mean_mc(DIRAC, [1, 4, 8], 200)
    assert np.all(curve.standard_errors == 0.0)
    path = simulate_quenched_path(DIRAC, 8, walk_seed=0)
    assert np.array_equal(curve.means[:, 0], path.positions[[1, 4, 8], 0])


def test_exact_vs_mc_agreement():
    env = env_replica(MIX, 12)
    grid = np.array([1, 4, 16, 32])
    mc = quenched_mean_mc(env, grid, 20000)
    exact = quenched_mean_exact(env, 32)
    dev = np.abs(mc.means[:, 0] - exact.means[grid, 0]) / mc.standard_errors[:, 0]
    assert dev.max() <= 4.0


@pytest.mark.parametrize("env", [MIX, FC, DIRAC])
def test_fast_curves_match_generic_exact(env):
    seeds = np.asarray([env.master_seed], dtype=np.uint64)
    fast = exact_mean_curves(env, 64, seeds)[0]
    generic = quenched_mean_exact(env, 64).means[:, 0]
    assert np.allclose(fast, generic, atol=1e-10)


def test_nonrandom_fair_env_has_zero_quenched_mean():
    exact = quenched_mean_exact(FAIR, 16)
    assert np.allclose(exact.means, 0.0, atol=1e-15)


def test_exact_rejects_gaussian_laws():
    env = make_lattice_product(9, 1, GaussianDrift(1, 0.5, ((1.0,),)))
    with pytest.raises(ValueError):
        quenched_mean_exact(env, 4)


def test_exact_support_cap():
    with pytest.raises(ValueError):
        quenched_mean_exact(MIX, 12, support_cap=3)


def test_velocity_and_covariance_uniform_model():
    v, v_se, cov, cov_se = velocity_and_covariance(MIX, 100000)
    assert abs(v[0]) <= 4 * v_se[0]
    assert abs(cov[0, 0] - 1.0) <= 4 * cov_se[0, 0]


def test_velocity_and_covariance_dirac_field():
    v, v_se, cov, cov_se = velocity_and_covariance(DIRAC, 50000)
    assert abs(v[0]) <= 4 * v_se[0]
    assert abs(cov[0, 0] - 1.0) <= 4 * cov_se[0, 0]


def test_velocity_and_covariance_fixed_gaussian():
    env = make_lattice_product(3, 1, GaussianDrift(1, 0.0, ((2.0,),)))
    v, v_se, cov, cov_se = velocity_and_covariance(env, 400, 25)
    assert abs(v[0]) <= 4 * v_se[0]
    assert abs(cov[0, 0] - 2.0) <= 4 * cov_se[0, 0]


def test_scaled_path_velocity_centering():
    p = simulate_quenched_path(MIX, 8, walk_seed=2)
    sp = scaled_path(p, 1.0, [1.0], centering="velocity", velocity=[0.25])
    assert sp.values[0, 0] == p.positions[1, 0] - 0.25


def test_scaled_path_dirac_quenched_mean_centering_vanishes():
    curve = quenched_mean_exact(DIRAC, 16)
    p = simulate_quenched_path(DIRAC, 16, walk_seed=0)
    sp = scaled_path(p, 0.25, [0.5, 1.0, 4.0], centering="quenched_mean", mean_curve=curve)
    assert np.all(sp.values == 0.0)


def test_scaled_path_centering_difference_identity():
    env = env_replica(MIX, 3)
    curve = quenched_mean_exact(env, 16)
    p = simulate_quenched_path(env, 16, walk_seed=0)
    t, eps, v = 1.0, 0.25, 0.0
    b = scaled_path(p, eps, [t], centering="velocity", velocity=[v])
    bt = scaled_path(p, eps, [t], centering="quenched_mean", mean_curve=curve)
    k = int(np.floor(t / eps))
    lhs = b.values[0, 0] - bt.values[0, 0]
    assert lhs == pytest.approx(np.sqrt(eps) * (curve.means[k, 0] - k * v))


def test_scaled_path_missing_centering_data():
    p = simulate_quenched_path(MIX, 4, walk_seed=0)
    with pytest.raises(ValueError):
        scaled_path(p, 0.25, [2.0], centering="velocity", velocity=[0.0])


def test_env_chain_observable_constant_function():
    est, se = env_chain_observable(MIX, 3, lambda law: 2.5, 200)
    assert est == 2.5 and se == 0.0


@pytest.mark.parametrize("env", [MIX, FC])
def test_env_chain_stationarity(env):
    # f depends on the current level only; its mean is n-free under refresh.
    f = lambda law: float(law_mean(law)[0] ** 2)
    results = {n: env_chain_observable(env, n, f, 8000) for n in (0, 4, 16)}
    for a in (0, 4):
        for b in (4, 16):
            if a >= b:
                continue
            (ea, sa), (eb, sb) = results[a], results[b]
            assert abs(ea - eb) <= 4 * np.hypot(sa, sb)


def test_martingale_property():
    # X_N - sum of local drifts along the path is mean-zero for fixed field.
    env = env_replica(MIX, 77)
    n, m = 32, 100000
    _, pos, drift = batch_quenched_positions(env, n, np.arange(m), record_steps=[n], accumulate_drift=True)
    mart = pos[0].astype(float) - drift
    se = mart.std(ddof=1) / np.sqrt(m)
    assert abs(mart.mean()) <= 4 * se


def test_averaged_walk_increment_independence():
    # classical-walk check: increment autocorrelation at lags 1..5
    n, m = 40, 10000
    _, pos = batch_averaged_positions(MIX, n, np.arange(m))
    inc = np.diff(pos.astype(float), axis=0)
    for lag in range(1, 6):
        a, b = inc[:-lag].ravel(), inc[lag:].ravel()
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) <= 4.0 / np.sqrt(a.size)


def test_two_dimensional_gaussian_walk():
    env = make_lattice_product(13, 2, GaussianDrift(2, 0.4, ((1.0, 0.2), (0.2, 0.5))))
    p = simulate_quenched_path(env, 12, walk_seed=0)
    assert p.positions.shape == (13, 2)
    assert np.array_equal(p.positions, simulate_quenched_path(env, 12, walk_seed=0).positions)
    v, v_se, cov, cov_se = velocity_and_covariance(env, 300, 10)
    d_true = np.asarray(env.family.averaged_cov)
    assert np.all(np.abs(v) <= 4 * v_se)
    assert np.all(np.abs(cov - d_true) <= 4 * cov_se)
