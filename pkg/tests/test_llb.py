"""LLB closures, effective field, and integrator physics properties."""

import math
from dataclasses import replace

import numpy as np
import pytest

from hamr3d import constants, llb, media

KU0 = 25.0e6
MS0 = 696.0
TC = 620.0
HK0 = 2.0 * KU0 / MS0           # 71839 Oe
GRAIN_V = np.pi * 9.0 * 6.0 * 1e-21   # cc


# ---------------------------------------------------------------------------
# Closures
# ---------------------------------------------------------------------------

def test_me_zero_kelvin_saturated():
    assert llb.equilibrium_magnetization(0.0, TC) == 1.0


def test_me_above_curie_floored():
    assert llb.equilibrium_magnetization(TC, TC) == pytest.approx(1e-3)
    assert llb.equilibrium_magnetization(900.0, TC) == pytest.approx(1e-3)


def test_me_room_temperature_value():
    # direct evaluation of (1 - 300/620)^0.365
    expected = (1.0 - 300.0 / 620.0) ** 0.365
    assert expected == pytest.approx(0.7855191, abs=1e-6)
    assert llb.equilibrium_magnetization(300.0, TC) == pytest.approx(expected)


def test_callen_callen_identity_exact():
    for T in (0.0, 100.0, 300.0, 520.0, 610.0, 700.0):
        me = llb.equilibrium_magnetization(T, TC)
        assert llb.anisotropy_constant(T, KU0, TC) == pytest.approx(
            KU0 * me ** 2, rel=1e-14)


def test_ku_zero_kelvin():
    assert llb.anisotropy_constant(0.0, KU0, TC) == pytest.approx(KU0)


def test_ku_above_curie_negligible():
    assert llb.anisotropy_constant(700.0, KU0, TC) == pytest.approx(
        KU0 * 1e-6)


def test_ku_room_temperature():
    me = (1.0 - 300.0 / 620.0) ** 0.365
    assert llb.anisotropy_constant(300.0, KU0, TC) == pytest.approx(
        KU0 * me ** 2)
    assert KU0 * me ** 2 == pytest.approx(1.5426e7, rel=1e-4)


def test_dampings_zero_kelvin():
    a_par, a_perp = llb.damping_coefficients(0.0, TC, 0.1)
    assert a_par == 0.0
    assert a_perp == pytest.approx(0.1)


def test_dampings_at_curie():
    a_par, a_perp = llb.damping_coefficients(TC, TC, 0.1)
    assert a_par == pytest.approx(2.0 * 0.1 / 3.0)
    assert a_perp == pytest.approx(2.0 * 0.1 / 3.0)
    assert a_par == pytest.approx(0.0667, abs=2e-4)


def test_damping_transverse_continuous_at_curie():
    below = llb.damping_coefficients(TC - 1e-6, TC, 0.1)[1]
    above = llb.damping_coefficients(TC + 1e-6, TC, 0.1)[1]
    assert below == pytest.approx(above, rel=1e-6)


def test_anisotropy_field_scale_zero_kelvin():
    assert llb.anisotropy_field_scale(0.0, KU0, MS0, TC) == pytest.approx(
        HK0, rel=1e-12)
    assert HK0 == pytest.approx(71839.08, abs=0.01)


def test_anisotropy_scale_constant_for_eta_two():
    for T in (100.0, 300.0, 500.0, 610.0):
        assert llb.anisotropy_field_scale(T, KU0, MS0, TC) == pytest.approx(
            HK0, rel=1e-9)


def test_switching_field_room_temperature():
    me = (1.0 - 300.0 / 620.0) ** 0.365
    hsw = llb.switching_field(300.0, KU0, MS0, TC)
    assert hsw == pytest.approx(HK0 * me, rel=1e-9)
    assert hsw > 13000.0 * 3  # write field alone cannot switch at ambient


# ---------------------------------------------------------------------------
# Effective field
# ---------------------------------------------------------------------------

def test_effective_field_equilibrium_along_easy_axis():
    me = llb.equilibrium_magnetization(300.0, TC)
    m = np.array([[0.0, 0.0, me]])
    h = llb.effective_field(m, [[0, 0, 1]], 300.0, TC, KU0, MS0,
                            [[0, 0, 0.0]])
    assert np.allclose(h[0, :2], 0.0, atol=1e-9)
    assert abs(h[0, 2]) < 1.0   # no restoring force at equilibrium length


def test_effective_field_longitudinal_restores_length():
    me = llb.equilibrium_magnetization(300.0, TC)
    short = np.array([[0.0, 0.0, 0.8 * me]])
    h = llb.effective_field(short, [[0, 0, 1]], 300.0, TC, KU0, MS0,
                            [[0, 0, 0]])
    assert h[0, 2] > 0          # pushes m back up toward m_e
    long = np.array([[0.0, 0.0, 1.2 * me]])
    h = llb.effective_field(long, [[0, 0, 1]], 300.0, TC, KU0, MS0,
                            [[0, 0, 0]])
    assert h[0, 2] < 0


def test_effective_field_anisotropy_transverse():
    # tilted m: anisotropy field pulls the transverse component down
    me = llb.equilibrium_magnetization(300.0, TC)
    th = math.radians(10.0)
    m = np.array([[me * math.sin(th), 0.0, me * math.cos(th)]])
    h = llb.effective_field(m, [[0, 0, 1]], 300.0, TC, KU0, MS0, [[0, 0, 0]])
    assert h[0, 0] == pytest.approx(-HK0 * m[0, 0], rel=1e-2)


def test_table_closures_match_exact():
    p = llb.LlbParams()
    tabs = llb.build_tables(p)
    q = np.linspace(0.0, 1.0, 4001)[1:]
    tau = q ** 4
    T = TC * (1.0 - tau)
    me = llb.equilibrium_magnetization(T, TC, p.beta_me, p.epsilon_m)
    qf = tau ** 0.25 * (llb._NT - 1)
    i = np.minimum(qf.astype(int), llb._NT - 2)
    fr = qf - i
    me_tab = tabs[0, i] + fr * (tabs[0, i + 1] - tabs[0, i])
    assert np.abs(me_tab - me).max() < 1e-6


# ---------------------------------------------------------------------------
# Integrator properties
# ---------------------------------------------------------------------------

def _uniform_stack(n_target=40, width=40.0):
    stats = media.LayerStats(Ms0_mean=MS0, Tc_mean=TC, sigma_Tc=0.0,
                             Ku0_mean=KU0, sigma_Ku=0.0, thickness=6.0,
                             grain_diameter_mean=6.0, sigma_volume=0.0)
    length = max(12.0, n_target * np.pi * 9.0 / width)
    stack = media.build_stack([stats], length, width, seed=3)
    return stack


def _ensemble(stack, params, h=(0.0, 0.0, 0.0), seed=11):
    return llb.ensemble_from_stacks([stack], [seed], params, h_static=h)


def test_fixed_point_zero_kelvin():
    stack = _uniform_stack()
    media.dc_erase(stack, 1, 0.0)
    p = llb.LlbParams(noise=False)
    ens = _ensemble(stack, p)
    llb.simulate_fixed(ens, 0.0, 1.0, p)
    assert np.allclose(ens.m, [0.0, 0.0, 1.0], atol=1e-12)


def test_magnitude_conserved_deterministic():
    # noise off, T = 300 K, m starting at m_e: |m| drift < 1e-3 over 1 ns
    stack = _uniform_stack()
    media.dc_erase(stack, 1, 300.0)
    th = math.radians(1.0)
    me = llb.equilibrium_magnetization(300.0, TC)
    stack.state[0][:] = [me * math.sin(th), 0.0, me * math.cos(th)]
    p = llb.LlbParams(noise=False)
    ens = _ensemble(stack, p)
    llb.simulate_fixed(ens, 300.0, 1.0, p)
    mm = np.linalg.norm(ens.m, axis=1)
    assert np.abs(mm - me).max() < 1e-3


def test_stoner_wohlfarth_threshold_within_2pct():
    # deterministic reversal threshold at T = 0 equals 2 Ku0 / Ms0
    stack = _uniform_stack()
    p = llb.LlbParams(noise=False)
    th = math.radians(1.0)
    for frac, switched in ((0.98, False), (1.02, True)):
        stack.state[0][:] = [math.sin(th), 0.0, math.cos(th)]
        ens = _ensemble(stack, p, h=(0.0, 0.0, -frac * HK0))
        llb.simulate_fixed(ens, 0.0, 1.0, p)
        assert bool((ens.m[:, 2] < 0).all()) is switched


def test_reversal_within_1ns_above_threshold():
    stack = _uniform_stack()
    p = llb.LlbParams(noise=False)
    th = math.radians(1.0)
    stack.state[0][:] = [math.sin(th), 0.0, math.cos(th)]
    ens = _ensemble(stack, p, h=(0.0, 0.0, -80000.0))
    llb.simulate_fixed(ens, 0.0, 1.0, p)
    assert (ens.m[:, 2] < -0.9).all()


def test_heun_second_order_convergence():
    # deterministic trajectory endpoint error scales ~ dt^2
    stack = _uniform_stack(n_target=6, width=12.0)
    th = math.radians(30.0)
    me = llb.equilibrium_magnetization(300.0, TC)

    def endpoint(dt):
        stack.state[0][:] = [me * math.sin(th), 0.0, me * math.cos(th)]
        p = llb.LlbParams(noise=False, dt=dt)
        ens = _ensemble(stack, p, h=(2000.0, 0.0, 0.0))
        llb.simulate_fixed(ens, 300.0, 0.2, p)
        return ens.m[0].copy()

    ref = endpoint(0.25e-5)
    e1 = np.linalg.norm(endpoint(4e-5) - ref)
    e2 = np.linalg.norm(endpoint(2e-5) - ref)
    ratio = e1 / e2
    assert 3.0 < ratio < 5.0


def test_demagnetization_above_curie():
    stack = _uniform_stack(n_target=110, width=60.0)
    media.dc_erase(stack, 1, 300.0)
    p = llb.LlbParams()
    ens = _ensemble(stack, p, seed=21)
    assert ens.n >= 100
    llb.simulate_fixed(ens, 700.0, 1.0, p)
    mm = np.linalg.norm(ens.m, axis=1)
    # paramagnetic fluctuation level from the closure
    chi = llb.longitudinal_susceptibility(700.0, TC)
    level = math.sqrt(3.0 * constants.K_B * 700.0 * chi / (MS0 * GRAIN_V))
    assert mm.max() < 0.1
    assert mm.mean() < 3.0 * level


def test_collapse_within_half_ns_above_curie():
    stack = _uniform_stack(n_target=30)
    media.dc_erase(stack, 1, 300.0)
    p = llb.LlbParams()
    ens = _ensemble(stack, p, seed=8)
    llb.simulate_fixed(ens, 700.0, 0.5, p)
    assert np.linalg.norm(ens.m, axis=1).max() < 0.1


@pytest.mark.slow
def test_switching_monotone_in_temperature():
    # reversed 13 kOe, 1 ns at the peak temperature, then a finite cooling
    # ramp (the heat-assisted write mechanism): switching probability is
    # non-decreasing across {500 K, Tc, Tc + 20 K}
    probs = []
    for T in (500.0, TC, TC + 20.0):
        stack = _uniform_stack(n_target=64, width=48.0)
        media.dc_erase(stack, 1, 300.0)
        p = llb.LlbParams()
        ens = _ensemble(stack, p, h=(0.0, 0.0, -13000.0), seed=int(T))
        schedule = [(T, 1.0)] + [
            (max(float(Tr), 300.0), 0.05)
            for Tr in np.arange(T - 20.0, 299.0, -20.0)]
        llb.simulate_schedule(ens, schedule, p)
        probs.append(float((ens.m[:, 2] < 0).mean()))
    assert probs[0] <= probs[1] + 0.05
    assert probs[1] <= probs[2] + 0.05
    assert probs[0] < 0.3
    assert probs[2] > 0.7


def test_instability_reported():
    stack = _uniform_stack(n_target=4, width=12.0)
    media.dc_erase(stack, 1, 300.0)
    p = llb.LlbParams(noise=False, dt=5e-3)   # grossly unstable step
    ens = _ensemble(stack, p, h=(40000.0, 0.0, 0.0))
    with pytest.raises(llb.IntegratorInstabilityError):
        llb.simulate_fixed(ens, 300.0, 0.05, p)


def test_noise_deterministic_for_seed():
    stack = _uniform_stack(n_target=10, width=24.0)
    media.dc_erase(stack, -1, 300.0)
    p = llb.LlbParams()
    final = []
    for _ in range(2):
        s = stack.copy()
        ens = llb.ensemble_from_stacks([s], [99], p)
        llb.simulate_fixed(ens, 400.0, 0.05, p)
        final.append(ens.m.copy())
    assert np.array_equal(final[0], final[1])


def test_different_seeds_differ():
    stack = _uniform_stack(n_target=10, width=24.0)
    media.dc_erase(stack, -1, 300.0)
    p = llb.LlbParams()
    outs = []
    for seed in (1, 2):
        s = stack.copy()
        ens = llb.ensemble_from_stacks([s], [seed], p)
        llb.simulate_fixed(ens, 400.0, 0.05, p)
        outs.append(ens.m.copy())
    assert not np.array_equal(outs[0], outs[1])


@pytest.mark.slow
def test_boltzmann_orientation_distribution():
    """Equilibrium m_z/|m| distribution matches Boltzmann over K_u V sin^2.

    Chi-square test on equal-probability bins plus a relative-deviation
    bound; validates the noise variances against the anisotropy energy.
    """
    stack = _uniform_stack(n_target=360, width=60.0)
    media.dc_erase(stack, 1, 300.0)
    p = llb.LlbParams()
    ens = _ensemble(stack, p, seed=13)
    ens.ms_v[:] = MS0 * GRAIN_V   # uniform volumes for a single-grain law

    samples = []

    def cap(t):
        if t > 0.3:
            u = ens.m[:, 2] / np.linalg.norm(ens.m, axis=1)
            samples.append(u.copy())

    llb.simulate_fixed(ens, 300.0, 2.3, p, on_capture=cap, capture_every=0.01)
    u = np.concatenate(samples)

    b = (llb.anisotropy_constant(300.0, KU0, TC) * GRAIN_V
         / (constants.K_B * 300.0))
    # expected density ~ exp(-b (1 - u^2)) on the upper well
    grid = np.linspace(u.min() - 1e-6, 1.0, 4001)
    pdf = np.exp(-b * (1.0 - grid ** 2))
    cdf = np.concatenate([[0.0], np.cumsum(
        0.5 * (pdf[1:] + pdf[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    # equal-probability bin edges
    deciles = np.interp(np.linspace(0, 1, 11), cdf, grid)
    obs, _ = np.histogram(u, deciles)
    exp = np.full(10, len(u) / 10.0)
    rel = np.abs(obs - exp) / exp
    chi2 = float(((obs - exp) ** 2 / exp).sum())
    assert rel.max() < 0.05
    assert chi2 / 9.0 < 3.0
