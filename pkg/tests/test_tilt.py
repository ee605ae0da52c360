from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from confined_tracer.model import WallParams, j_star
from confined_tracer.rate import legendre
from confined_tracer.sim import replica_rng
from confined_tracer.tilt import (
    TiltedLaw,
    TiltSpec,
    entropy_limit,
    entropy_rate,
    kl_divergence,
    lower_bound_certificate,
    run_tilted,
    simulate_tilted,
    switch_index,
    tilted_measure,
)

laws = st.tuples(st.floats(0.2, 5.0), st.floats(0.0, 1.0), st.floats(1e-3, 2.0))


@given(laws)
@settings(max_examples=40, deadline=None)
def test_densities_normalized(args):
    law = TiltedLaw(*args)
    eps = law.epsilon
    for pdf in (law.pdf, law.base_pdf):
        total = integrate.quad(lambda p: float(pdf(p)), 0.0, eps)[0] + integrate.quad(lambda p: float(pdf(p)), eps, math.inf)[0]
        assert total == pytest.approx(1.0, rel=1e-8)


@given(laws)
@settings(max_examples=40, deadline=None)
def test_emitted_law_is_speed_biased_base_law(args):
    # pi~(p) = p pi(p) / E_pi[p]
    law = TiltedLaw(*args)
    ps = np.array([0.3, 0.9, 1.7, 3.0]) * law.epsilon
    ps = ps[law.base_pdf(ps) > 0.0]
    ratio = law.pdf(ps) / (ps * law.base_pdf(ps))
    assert np.allclose(ratio, ratio[0], rtol=1e-10)
    assert 1.0 / ratio[0] == pytest.approx(law.mean_speed_base, rel=1e-10)


@given(laws, st.floats(0.0, 0.999999))
@settings(max_examples=60, deadline=None)
def test_sample_inverts_cdf(args, u):
    law = TiltedLaw(*args)
    p = float(law.sample(np.array([u]))[0])
    assert float(law.cdf(p)) == pytest.approx(u, abs=1e-9)


def test_samples_follow_cdf():
    from scipy import stats as sps

    law = TiltedLaw(0.5, 0.4, 0.3)
    x = law.sample(replica_rng(2, 0).random(50_000))
    assert sps.kstest(x, law.cdf).pvalue > 1e-3


def test_full_tilt_is_close_to_wall_law():
    # alpha = 1 removes only the mass below eps, which is O(eps^2)
    law = TiltedLaw(1.0, 1.0, 1e-3)
    phi = lambda p: p * np.exp(-0.5 * p * p)
    tv = 0.5 * integrate.quad(lambda p: abs(float(law.pdf(p)) - phi(p)), 0.0, 1e-3)[0]
    tv += 0.5 * integrate.quad(lambda p: abs(float(law.pdf(p)) - phi(p)), 1e-3, math.inf)[0]
    assert tv < 1e-6


def test_mean_flight_time_is_inverse_base_mean_speed():
    law = TiltedLaw(0.7, 0.3, 0.2)
    assert law.mean_flight_time() == pytest.approx(1.0 / law.mean_speed_base, rel=1e-10)


@given(laws, st.floats(0.2, 5.0))
@settings(max_examples=40, deadline=None)
def test_kl_closed_form_matches_quadrature(args, beta_ref):
    law = TiltedLaw(*args)
    assert law.kl_closed_form(beta_ref) == pytest.approx(kl_divergence(law, beta_ref), rel=1e-7, abs=1e-10)
    assert kl_divergence(law, beta_ref) >= -1e-12


def test_kl_zero_for_own_law_limit():
    law = TiltedLaw(1.0, 1.0, 1e-6)
    assert kl_divergence(law, 1.0) < 1e-10


def test_spec_for_target(noneq):
    js = j_star(noneq)
    s = TiltSpec.for_target(0.5 * js, noneq, 0.1, 0.1)
    assert s.alpha == pytest.approx(0.5) and s.direction == "forward"
    r = TiltSpec.for_target(-0.25 * js, noneq, 0.1, 0.1)
    assert r.alpha == pytest.approx(0.25) and r.direction == "reversed"
    z = TiltSpec.for_target(0.0, noneq, 0.1, 0.1)
    assert z.alpha == 0.0
    with pytest.raises(ValueError):
        TiltSpec.for_target(1.5 * js, noneq, 0.1, 0.1)
    with pytest.raises(ValueError):
        TiltSpec.for_target(0.5 * js, noneq, 0.1, 0.1, direction="reversed")
    with pytest.raises(ValueError):
        TiltSpec(0.1, 1.2, 0.1, 0.1)
    with pytest.raises(ValueError):
        tilted_measure(s, "up", noneq)


def test_switch_index_formula(noneq):
    s = TiltSpec.for_target(0.5 * j_star(noneq), noneq, 0.1, 0.2)
    a, b = tilted_measure(s, "+", noneq), tilted_measure(s, "-", noneq)
    expected = math.floor(2.0 * 1.2 * 1000.0 / (a.mean_flight_time() + b.mean_flight_time()))
    assert switch_index(s, noneq, 1000.0) == expected


def _renewal_mean(spec, params):
    plus, minus = tilted_measure(spec, "+", params), tilted_measure(spec, "-", params)
    left, right = (plus, minus) if spec.direction == "forward" else (minus, plus)
    return 0.5 * (left.second_moment() - right.second_moment()) / (left.mean_flight_time() + right.mean_flight_time())


@pytest.mark.parametrize("frac", [0.5, -0.5])
def test_tilted_mean_matches_renewal_reward(noneq, frac):
    spec = TiltSpec.for_target(frac * j_star(noneq), noneq, 0.1, 0.1)
    ens = run_tilted(spec, noneq, 2e4, 40, seed=1, workers=1)
    assert abs(ens.result.mean_current - _renewal_mean(spec, noneq)) < 4.0 * ens.result.stderr_current


def test_renewal_mean_tends_to_target(noneq):
    js = j_star(noneq)
    gaps = [abs(_renewal_mean(TiltSpec.for_target(0.5 * js, noneq, e, 0.1), noneq) - 0.5 * js) for e in (0.1, 0.01, 1e-3)]
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-3


def test_tilted_paths_stay_tilted_at_moderate_eps(noneq):
    spec = TiltSpec.for_target(0.5 * j_star(noneq), noneq, 0.1, 0.1)
    ens = run_tilted(spec, noneq, 2e4, 40, seed=3, workers=1)
    assert ens.switch_frequency >= 0.99


def test_untilted_target_gives_zero_current(noneq):
    spec = TiltSpec.for_target(0.0, noneq, 0.1, 0.1)
    ens = run_tilted(spec, noneq, 2e3, 20, seed=3, workers=1)
    # only speeds below eps while tilted, so each hit moves at most eps^2/2
    still = ens.result.collisions < ens.switch
    assert still.any()
    bound = 0.5 * 0.1**2 * ens.result.collisions[still] / 2e3
    assert np.all(np.abs(ens.result.currents[still]) / 2e3 <= bound)


def test_tilted_reproducible(noneq):
    spec = TiltSpec.for_target(0.5 * j_star(noneq), noneq, 0.1, 0.1)
    a = simulate_tilted(spec, noneq, 500.0, seed=4, replica=2)
    b = simulate_tilted(spec, noneq, 500.0, seed=4, replica=2)
    assert a == b
    one = run_tilted(spec, noneq, 500.0, 4, seed=4, workers=1)
    two = run_tilted(spec, noneq, 500.0, 4, seed=4, workers=2)
    assert np.array_equal(one.result.currents, two.result.currents)


# entropy


def test_entropy_rate_limits(noneq):
    js = j_star(noneq)
    _, rev, _ = entropy_limit(-0.5 * js, noneq)
    _, fwd, _ = entropy_limit(0.5 * js, noneq)
    assert rev == pytest.approx(legendre(-0.5 * js, noneq), abs=1e-3)
    assert fwd == pytest.approx(0.0, abs=1e-3)


def test_entropy_decreases_along_ladder(noneq):
    js = j_star(noneq)
    vals = [entropy_rate(TiltSpec.for_target(0.5 * js, noneq, e, h), noneq) for e, h in ((0.1, 0.3), (0.03, 0.1), (0.01, 0.03))]
    assert vals[0] > vals[1] > vals[2] > 0.0


def test_certificate_small_run(tmp_path, noneq):
    js = j_star(noneq)
    cert = lower_bound_certificate(0.5 * js, noneq, (0.1, 0.03), (0.3, 0.1), t=2e3, replicas=10, seed=1, workers=1)
    assert len(cert.rows) == 4
    assert cert.I_target == pytest.approx(0.0, abs=1e-7)
    cert.to_csv(tmp_path / "c.csv")
    from confined_tracer.io import read_csv

    meta, header, rows = read_csv(tmp_path / "c.csv")
    assert header[0] == "epsilon" and len(rows) == 4
