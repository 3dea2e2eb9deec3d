import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sdcoag import ClusterDistribution, ConfigError, HorizonError, InitialCondition, KernelSpec, StiffnessError, ValidationError
from sdcoag.integrator import (
    SolverConfig,
    StepDecision,
    clamp_small_negatives,
    error_norm,
    integrate,
    integrate_pair,
    step_accept_policy,
)

PAIR = InitialCondition.custom((1.0, 0.0)).build()
TIMES = [0.1, 0.5, 1.0, 5.0]


def closed_form(t):
    t = np.asarray(t, dtype=float)
    return np.stack([1.0 / (1.0 + 2.0 * t), t / (1.0 + 2.0 * t)], axis=-1)


# -- closed form ------------------------------------------------------------

def test_two_bin_closed_form_defaults():
    tr = integrate(KernelSpec.constant(1.0), PAIR, SolverConfig(t_end=5.0, sample_times=TIMES))
    np.testing.assert_array_equal(tr.times, [0.0] + TIMES)
    err = np.abs(tr.matrix() - closed_form(tr.times)).max()
    assert err <= 1e-6


def test_two_bin_at_t_one():
    tr = integrate(KernelSpec.constant(1.0), PAIR, SolverConfig(t_end=1.0))
    assert tr.states[-1].psi == pytest.approx([1 / 3, 1 / 3], abs=1e-6)
    assert len(tr.times) == 101


def test_rk4_fourth_order():
    errs = []
    for h in (0.1, 0.05, 0.025):
        cfg = SolverConfig(t_end=5.0, sample_times=TIMES, method="rk4", fixed_step=h)
        tr = integrate(KernelSpec.constant(1.0), PAIR, cfg)
        errs.append(np.abs(tr.matrix() - closed_form(tr.times)).max())
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(12.0 <= r <= 20.0 for r in ratios), ratios


def test_fixed_step_dopri_hits_sample_times():
    cfg = SolverConfig(t_end=1.0, sample_times=[0.25, 0.5, 1.0], fixed_step=0.125)
    tr = integrate(KernelSpec.constant(1.0), PAIR, cfg)
    assert tr.diagnostics[-1].step_count == 8
    assert np.abs(tr.matrix() - closed_form(tr.times)).max() <= 2e-5


# -- frozen multi-bin references (cross-checked against an independent
#    8th-order integrator at rtol 1e-13) ------------------------------------

FROZEN = [
    (KernelSpec.sum(1.0),
     [0.11450151001114718, 0.05073799995161782, 0.030000265789551374, 0.02025313997943251, 0.014734285784724986]),
    (KernelSpec.alpha_sum(0.5),
     [0.1341437991640348, 0.076877634633673, 0.05096988168223632, 0.03532623357971446, 0.02450495569903012]),
    (KernelSpec.min_power(1.0, 1.5),
     [0.2917203159168069, 0.10478659217897714, 0.051267760242997965, 0.028672872486103212, 0.016892366779033715]),
]


@pytest.mark.parametrize("kernel, expected", FROZEN, ids=lambda v: getattr(v, "family", ""))
def test_frozen_twelve_bin_reference(kernel, expected):
    y0 = InitialCondition.monodisperse().build(12)
    tight = integrate(kernel, y0, SolverConfig(t_end=1.0, rtol=1e-12, atol=1e-16, sample_times=[1.0]))
    np.testing.assert_allclose(tight.states[-1].psi[:5], expected, rtol=0, atol=1e-11)
    loose = integrate(kernel, y0, SolverConfig(t_end=1.0, sample_times=[1.0]))
    np.testing.assert_allclose(loose.states[-1].psi[:5], expected, rtol=0, atol=1e-7)


# -- invariants -------------------------------------------------------------

def test_zero_kernel_constant_trajectory():
    y0 = InitialCondition.exponential(2.0).build(10)
    tr = integrate(KernelSpec.constant(0.0), y0, SolverConfig(t_end=3.0))
    for s in tr.states:
        np.testing.assert_array_equal(s.psi, y0.psi)


def test_sum_kernel_conservation_and_positivity():
    y0 = InitialCondition.monodisperse().build(256)
    tr = integrate(KernelSpec.sum(1.0), y0, SolverConfig(t_end=10.0))
    assert tr.max_mass_drift() <= 1e-10
    mu0 = [d.mu0 for d in tr.diagnostics]
    assert all(b <= a + 1e-12 for a, b in zip(mu0, mu0[1:]))
    assert min(float(s.psi.min()) for s in tr.states) >= 0.0


@given(st.sampled_from(["constant", "sum", "alpha_sum", "min_power"]),
       st.integers(2, 24), st.floats(0.1, 3.0), st.integers(0, 2 ** 32 - 1))
def test_random_runs_conserve_mass_and_stay_non_negative(family, n, t_end, seed):
    kernel = {
        "constant": KernelSpec.constant(1.0),
        "sum": KernelSpec.sum(1.0),
        "alpha_sum": KernelSpec.alpha_sum(0.7),
        "min_power": KernelSpec.min_power(1.0, 1.0),
    }[family]
    psi = np.random.default_rng(seed).random(n)
    psi /= np.arange(1, n + 1) @ psi
    tr = integrate(kernel, InitialCondition.custom(psi).build(), SolverConfig(t_end=t_end, sample_times=[t_end]))
    assert tr.max_mass_drift() <= 1e-10
    assert tr.states[-1].psi.min() >= 0.0


def test_determinism():
    y0 = InitialCondition.exponential(3.0).build(64)
    a = integrate(KernelSpec.sum(1.0), y0, SolverConfig(t_end=2.0))
    b = integrate(KernelSpec.sum(1.0), y0, SolverConfig(t_end=2.0))
    assert np.array_equal(a.matrix(), b.matrix())
    assert a.diagnostics == b.diagnostics


def test_sampling_does_not_change_steps():
    y0 = InitialCondition.monodisperse().build(32)
    a = integrate(KernelSpec.sum(1.0), y0, SolverConfig(t_end=1.0, sample_times=[1.0]))
    b = integrate(KernelSpec.sum(1.0), y0, SolverConfig(t_end=1.0))
    assert a.diagnostics[-1].step_count == b.diagnostics[-1].step_count
    np.testing.assert_array_equal(a.states[-1].psi, b.states[-1].psi)


def test_backends_give_same_trajectory_closely():
    from sdcoag.rhs import BACKENDS
    if len(BACKENDS) < 2:
        pytest.skip("compiled backend not built")
    y0 = InitialCondition.monodisperse().build(64)
    a = integrate(KernelSpec.sum(1.0), y0, SolverConfig(t_end=1.0), backend="cython")
    b = integrate(KernelSpec.sum(1.0), y0, SolverConfig(t_end=1.0), backend="python")
    np.testing.assert_allclose(a.matrix(), b.matrix(), rtol=1e-9, atol=1e-15)


def test_integrate_pair_matches_solo_for_identical_systems():
    y0 = InitialCondition.monodisperse().build(16)
    a, b = integrate_pair(KernelSpec.sum(1.0), y0, y0, SolverConfig(t_end=1.0))
    solo = integrate(KernelSpec.sum(1.0), y0, SolverConfig(t_end=1.0))
    np.testing.assert_array_equal(a.matrix(), b.matrix())
    np.testing.assert_array_equal(a.matrix(), solo.matrix())


# -- policy and helpers -----------------------------------------------------

def test_step_accept_policy_examples():
    cfg = SolverConfig(t_end=1.0)
    ok = np.array([0.0, 1.0])
    assert step_accept_policy(ok, 0.5, cfg) is StepDecision.ACCEPT
    assert step_accept_policy(np.array([1.0, -1e-6]), 0.5, cfg) is StepDecision.REJECT_HALVE
    assert step_accept_policy(ok, 2.0, cfg) is StepDecision.REJECT_HALVE
    assert step_accept_policy(ok, math.nan, cfg) is StepDecision.REJECT_HALVE
    assert step_accept_policy(np.array([-1e-15]), 0.5, cfg) is StepDecision.ACCEPT


def test_clamp_small_negatives():
    y = np.array([-1e-15, -1e-13, 0.5])
    assert clamp_small_negatives(y, 1e-14)
    np.testing.assert_array_equal(y, [0.0, -1e-13, 0.5])
    assert not clamp_small_negatives(np.array([1.0]), 1e-14)


def test_error_norm_scaling():
    e = np.array([1e-9, 1e-12])
    y0 = np.array([1.0, 0.0])
    y1 = np.array([1.0, 0.0])
    assert error_norm(e, y0, y1, rtol=1e-8, atol=1e-12) == pytest.approx(1.0)


# -- errors -----------------------------------------------------------------

def test_horizon_error_reports_time():
    y0 = InitialCondition.monodisperse().build(16)
    with pytest.raises(HorizonError) as info:
        integrate(KernelSpec.sum(1.0), y0, SolverConfig(t_end=1.0, max_steps=3))
    assert 0.0 < info.value.t_reached < 1.0


def test_fixed_step_too_large_is_stiffness_error():
    y0 = InitialCondition.monodisperse().build(8)
    with pytest.raises(StiffnessError):
        integrate(KernelSpec.constant(1.0), y0, SolverConfig(t_end=10.0, fixed_step=5.0))


def test_negative_initial_rejected():
    with pytest.raises(ValidationError):
        integrate(KernelSpec.sum(), ClusterDistribution([-1.0, 1.0]), SolverConfig(t_end=1.0))


@pytest.mark.parametrize("kw", [
    dict(t_end=-1.0), dict(t_end=1.0, rtol=-1.0), dict(t_end=1.0, atol=0.0),
    dict(t_end=1.0, sample_times=[0.5, 0.2]), dict(t_end=1.0, sample_times=[2.0]),
    dict(t_end=1.0, method="euler"), dict(t_end=1.0, method="rk4"), dict(t_end=1.0, max_steps=0),
])
def test_solver_config_validation(kw):
    with pytest.raises(ValidationError):
        SolverConfig(**kw)


def test_solver_config_dict_round_trip_and_strictness():
    cfg = SolverConfig(t_end=2.0, rtol=1e-9, sample_times=[1.0, 2.0])
    assert SolverConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()
    with pytest.raises(ConfigError):
        SolverConfig.from_dict({"t_end": 1.0, "rtlo": 1e-8})
    with pytest.raises(ConfigError):
        SolverConfig.from_dict({"rtol": 1e-8})
    with pytest.raises(ConfigError):
        SolverConfig.from_dict({"t_end": 1.0, "rtol": -1})
