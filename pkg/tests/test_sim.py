from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from confined_tracer.model import WallParams, j_star, mean_gap
from confined_tracer.sim import (
    SimConfig,
    _WallLaw,
    empirical_cgf,
    halfgauss_ks,
    rayleigh_speeds,
    renewal_rate_check,
    replica_rng,
    run_ensemble,
    sample_speed,
    simulate,
    simulate_path,
    stationary_speed_test,
)


# sampling


@pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5])
def test_sample_speed_rejects_boundary_uniforms(u):
    with pytest.raises(ValueError):
        sample_speed(1.0, u)


def test_sample_speed_inverse_cdf():
    # CDF of phi_beta is 1 - exp(-beta v^2/2), and u plays the role of 1 - F
    v = sample_speed(2.0, 0.3)
    assert math.exp(-v * v) == pytest.approx(0.3, rel=1e-14)


@pytest.mark.parametrize("beta", [0.5, 1.0, 3.0])
def test_rayleigh_moments(beta):
    v = rayleigh_speeds(beta, replica_rng(7, 0).random(400_000))
    se = lambda x: x.std() / math.sqrt(x.size)
    inv = 1.0 / v
    # E[1/v] has infinite variance, so only a loose check there
    assert abs(np.mean(v * v) - 2.0 / beta) < 5 * se(v * v)
    assert abs(np.mean(v**4) - 8.0 / beta**2) < 5 * se(v**4)
    assert np.median(inv) == pytest.approx(1.0 / math.sqrt(2.0 * math.log(2.0) / beta), rel=0.01)
    assert sps.kstest(v, lambda x: -np.expm1(-0.5 * beta * x * x)).pvalue > 1e-3


def test_rayleigh_zero_uniform_is_zero_speed():
    assert rayleigh_speeds(1.0, np.array([0.0]))[0] == 0.0


# single paths


def test_log_current_matches_accumulator(noneq):
    stats, log = simulate(SimConfig(noneq, 500.0, seed=3))
    assert len(log) == stats.collisions
    assert log.current() == stats.current
    assert np.all(np.diff(log.time) > 0) and log.time[-1] <= 500.0
    assert np.all(log.k == np.arange(1, len(log) + 1))
    # sigma alternates
    assert np.all(log.sign[1:] == -log.sign[:-1])


def test_multi_chunk_accumulation_is_exact(noneq):
    rng_a, rng_b = replica_rng(5, 0), replica_rng(5, 0)
    law = _WallLaw(noneq)
    small = simulate_path(law, 2000.0, rng_a, p0_beta=0.5, chunk=64, log_limit=None)
    large = simulate_path(law, 2000.0, rng_b, p0_beta=0.5, chunk=1 << 14, log_limit=None)
    assert small.stats.collisions > 64 * 5
    assert small.stats.current == math.fsum((0.5 * small.log.speed**2 * small.log.sign).tolist())
    # different chunking consumes the uniform stream identically up to the horizon
    assert small.stats.collisions == large.stats.collisions
    assert small.stats.current == large.stats.current


def test_log_limit_keeps_tail(noneq):
    full = simulate(SimConfig(noneq, 300.0, seed=2))[1]
    tail = simulate(SimConfig(noneq, 300.0, seed=2), log_limit=10)[1]
    assert tail.truncated and len(tail) == 10
    assert np.array_equal(tail.k, full.k[-10:])


def test_horizon_before_first_hit():
    # starting at q0 = 0 with p0 = 0.1 the first hit is at S_0 = 10
    stats, log = simulate(SimConfig(WallParams(1.0, 1.0), 5.0, initial_state=(0.0, 0.1)))
    assert stats.collisions == 0 and stats.current == 0.0 and len(log) == 0


def test_first_hit_and_sign_convention():
    cfg = SimConfig(WallParams(1.0, 2.0), 50.0, initial_state=(0.25, -0.5))
    stats, log = simulate(cfg)
    # moving left from q = 0.25 at speed 0.5 reaches the left wall at S_0 = 0.5;
    # that hit is not counted, so the first record closes flight 1 at the right wall
    assert log.sign[0] == 1
    assert log.time[0] > 0.5


@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0), st.integers(0, 2**31))
@settings(max_examples=25, deadline=None)
def test_mirrored_path_reverses_current(bl, br, seed):
    # reflecting q -> 1 - q swaps walls and flips the sign of every transfer
    p, m = WallParams(bl, br), WallParams(br, bl)
    a = simulate(SimConfig(p, 50.0, seed, initial_state=(0.3, 0.7)))[0]
    b = simulate(SimConfig(m, 50.0, seed, initial_state=(0.7, -0.7)))[0]
    assert a.collisions == b.collisions
    assert a.current == -b.current


@given(st.floats(0.1, 10.0), st.integers(0, 2**31))
@settings(max_examples=25, deadline=None)
def test_equilibrium_current_bounded_by_last_flight(beta, seed):
    # with equal walls, J telescopes into differences of consecutive squared speeds
    stats, log = simulate(SimConfig(WallParams(beta, beta), 30.0, seed))
    if len(log):
        assert abs(stats.current) <= 0.5 * float(np.sum(log.speed**2)) + 1e-12


def test_config_validation(noneq):
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ValueError):
            SimConfig(noneq, bad)
    with pytest.raises(ValueError):
        SimConfig(noneq, 1.0, initial_state=(1.5, 1.0))
    with pytest.raises(ValueError):
        SimConfig(noneq, 1.0, initial_state=(0.5, 0.0))


# ensembles


def test_ensemble_independent_of_worker_count(noneq):
    cfg = SimConfig(noneq, 200.0, seed=11)
    one = run_ensemble(cfg, 6, workers=1)
    two = run_ensemble(cfg, 6, workers=2)
    assert np.array_equal(one.currents, two.currents)
    assert np.array_equal(one.collisions, two.collisions)


def test_ensemble_reproducible_and_seed_sensitive(noneq):
    a = run_ensemble(SimConfig(noneq, 100.0, seed=1), 4, workers=1)
    b = run_ensemble(SimConfig(noneq, 100.0, seed=1), 4, workers=1)
    c = run_ensemble(SimConfig(noneq, 100.0, seed=2), 4, workers=1)
    assert np.array_equal(a.currents, b.currents)
    assert not np.array_equal(a.currents, c.currents)


def test_replicas_are_distinct(noneq):
    ens = run_ensemble(SimConfig(noneq, 100.0, seed=1), 8, workers=1)
    assert len(set(ens.currents.tolist())) == 8


def test_mean_current_short_run(noneq):
    ens = run_ensemble(SimConfig(noneq, 5000.0, seed=4), 60, workers=1)
    assert abs(ens.mean_current - j_star(noneq)) < 4.0 * ens.stderr_current


def test_renewal_rate(eq):
    ens = run_ensemble(SimConfig(eq, 5000.0, seed=4), 60, workers=1)
    rep = renewal_rate_check(ens, 1.0)
    assert rep.passed
    assert ens.mean_collision_rate == pytest.approx(1.0 / mean_gap(1.0), rel=0.02)


def test_ensemble_csv(tmp_path, noneq):
    from confined_tracer.io import read_csv

    ens = run_ensemble(SimConfig(noneq, 50.0, seed=4), 3, workers=1)
    ens.to_csv(tmp_path / "e.csv")
    meta, header, rows = read_csv(tmp_path / "e.csv")
    assert meta["schema"].startswith("confined_tracer/")
    assert len(rows) == 3


# stationary law


def test_ks_accepts_half_gauss_and_rejects_rayleigh():
    rng = replica_rng(9, 0)
    half = np.abs(rng.standard_normal(5000))
    assert halfgauss_ks(half, 1.0).passed
    # the wall law itself is the wrong stationary law: a negative control
    assert not halfgauss_ks(rayleigh_speeds(1.0, rng.random(5000)), 1.0).passed
    with pytest.raises(ValueError):
        halfgauss_ks(half[:999], 1.0)


def test_stationary_speed_small(eq):
    t = 20.0 * mean_gap(1.0)
    rep = stationary_speed_test(SimConfig(eq, t, 21), [t, 1.5 * t], 1000, workers=1)
    assert rep.samples == 2000 and rep.passed


def test_stationary_speed_guards(eq, noneq):
    with pytest.raises(ValueError):
        stationary_speed_test(SimConfig(noneq, 100.0), [100.0], 2000)
    with pytest.raises(ValueError):
        stationary_speed_test(SimConfig(eq, 100.0), [1.0], 2000)
    with pytest.raises(ValueError):
        stationary_speed_test(SimConfig(eq, 100.0), [100.0], 999)


def test_probe_records_speed_of_current_flight(noneq):
    law = _WallLaw(noneq)
    res = simulate_path(law, 100.0, replica_rng(3, 0), p0_beta=0.5, log_limit=None, probes=[0.0, 37.0, 100.0])
    log = res.log
    assert res.probe_speeds[0] == abs(res.p0)
    i = int(np.searchsorted(log.time, 37.0, side="right"))
    assert res.probe_speeds[1] == log.speed[i]


# empirical CGF


def test_empirical_cgf_tilted_estimator_is_exact_at_zero(noneq):
    est = empirical_cgf(noneq, 0.0, 100.0, 20, seed=1, workers=1)
    assert est.tilted == 0.0 and est.effective_samples == pytest.approx(20.0)


def test_empirical_cgf_close_at_moderate_t(noneq):
    from confined_tracer.cgf import cgf

    est = empirical_cgf(noneq, 0.1, 500.0, 500, seed=1, workers=1)
    assert est.tilted == pytest.approx(cgf(0.1, noneq), rel=0.1)
    with pytest.raises(ValueError):
        empirical_cgf(noneq, 1.0, 10.0, 5)
