from __future__ import annotations

import math

import numpy as np
import pytest

import squidbell as sb
from conftest import MU


@pytest.fixture(scope="module")
def state_at_ta(prepared, period):
    state, _ = prepared
    return sb.evolve(state, period)


# -------------------------------------------------------------- preparation

def test_prepare_zero_steps_returns_initial_packet(basis, gauss2, outcome_grid, params):
    state, trace = sb.prepare_state(
        basis, gauss2, sb.InitialStateSpec(), 0, 1.0, -params.phi_min, outcome_grid)
    packet = sb.make_initial_state(basis, sb.InitialStateSpec())
    assert trace == []
    assert np.array_equal(state.coeffs, packet.coeffs)


def test_prepare_localizes_left(basis, prepared):
    state, _ = prepared
    assert sb.sign_probability_position(basis, state, -1) > 0.9


def test_prepare_matches_double_resolution_chain(params, gauss2, outcome_grid, basis, prepared):
    # full-chain oracle on a spacing-halved grid
    fine_basis = sb.build_basis(params, sb.GridSpec(8.0, 4099), 40)
    fine_T = sb.tunneling_period(fine_basis)
    fine_state, _ = sb.prepare_state(
        fine_basis, gauss2, sb.InitialStateSpec(), 16, fine_T, -params.phi_min,
        outcome_grid)
    p_fine = sb.sign_probability_position(fine_basis, fine_state, -1)
    p_default = sb.sign_probability_position(basis, prepared[0], -1)
    assert p_fine > 0.9
    assert abs(p_fine - p_default) < 0.02


def test_prepare_trace_reaches_asymptote(prepared):
    _, trace = prepared
    u = [r.delta_phi_eff for r in trace]
    assert abs(u[15] - u[11]) / u[15] < 0.01


def test_prepare_trace_records_steps_and_norms(prepared):
    _, trace = prepared
    assert [r.step for r in trace] == list(range(1, 17))
    assert all(0 < r.success_norm2 <= 1 + 1e-12 for r in trace)


def test_prepare_rejects_bad_args(basis, gauss2, outcome_grid):
    with pytest.raises(sb.ConfigError):
        sb.prepare_state(basis, gauss2, sb.InitialStateSpec(), -1, 1.0, 0.0, outcome_grid)
    with pytest.raises(sb.ConfigError):
        sb.prepare_state(basis, gauss2, sb.InitialStateSpec(), 1, 0.0, 0.0, outcome_grid)


def test_initial_state_spec_validation(basis):
    with pytest.raises(sb.ConfigError):
        sb.InitialStateSpec(sigma=-0.1).resolve(basis)
    with pytest.raises(sb.ConfigError):
        sb.InitialStateSpec(center=9.5).resolve(basis)
    center, sigma = sb.InitialStateSpec().resolve(basis)
    assert center == -basis.params.phi_min
    assert sigma == pytest.approx((2 * MU) ** -0.25)


# ------------------------------------------------------------ sequence plans

def test_plan_event_tables(period):
    t_ab, t_bc = period / 3, period / 5
    assert sb.SequencePlan("I", t_ab, t_bc).events() == (
        (t_ab, +1), (t_ab + t_bc, -1))
    assert sb.SequencePlan("II", t_ab, t_bc).events() == ((0.0, +1), (t_ab, +1))
    assert sb.SequencePlan("III", t_ab, t_bc).events() == (
        (0.0, -1), (t_ab + t_bc, -1))


def test_plan_rejects_nonpositive_times():
    with pytest.raises(sb.ConfigError):
        sb.SequencePlan("I", 0.0, 1.0)
    with pytest.raises(sb.ConfigError):
        sb.SequencePlan("IV", 1.0, 1.0)


# --------------------------------------------------- joint sign probabilities

def test_sign_pairs_sum_to_one(basis, gauss2, outcome_grid, state_at_ta, period):
    from squidbell.measurement import MeasurementContext
    from squidbell.protocol import _two_event_integrated

    ctx = MeasurementContext.get(basis, gauss2, outcome_grid)
    for tau in (period / 3, period / 2, 1.7 * period):
        total = sum(
            _two_event_integrated(ctx, state_at_ta.coeffs, tau, s1, s2)
            for s1 in (+1, -1) for s2 in (+1, -1))
        assert abs(total - 1.0) < 1e-6


def test_joint_probability_in_unit_interval(basis, gauss2, outcome_grid, state_at_ta, period):
    for sid in ("I", "II", "III"):
        plan = sb.SequencePlan(sid, period / 3, period / 4)
        for rep in (False, True):
            p = sb.joint_sign_probability(basis, state_at_ta, gauss2, plan,
                                          outcome_grid, representative=rep)
            assert -1e-9 <= p <= 1 + 1e-9


def test_huge_filter_factorizes_and_is_uninformative(basis, outcome_grid, state_at_ta, period):
    # a filter much wider than the outcome window neither disturbs the state
    # nor carries flux information: outcomes are window-uniform coin flips
    # and the joint probability factorizes into the two single-event
    # measured-sign probabilities
    filt = sb.FilterSpec("gaussian", 1e6)
    plan = sb.SequencePlan("I", period / 3, period / 4)
    joint = sb.joint_sign_probability(basis, state_at_ta, filt, plan, outcome_grid)
    (t1, s1), (t2, s2) = plan.events()
    d1 = sb.outcome_density(basis, sb.evolve(state_at_ta, t1), filt, outcome_grid)
    d2 = sb.outcome_density(basis, sb.evolve(state_at_ta, t2), filt, outcome_grid)
    p1, p2 = d1.sign_integral(s1), d2.sign_integral(s2)
    assert abs(joint - p1 * p2) < 1e-4
    assert abs(p1 - 0.5) < 1e-3 and abs(p2 - 0.5) < 1e-3


def test_huge_filter_leaves_state_untouched(basis, state_at_ta, params):
    filt = sb.FilterSpec("gaussian", 1e6)
    rep = sb.weight_matrix(basis, filt, params.phi_min)
    conditioned, _ = sb.apply_measurement(state_at_ta, rep)
    fidelity = abs(np.vdot(state_at_ta.coeffs, conditioned.coeffs))
    assert fidelity > 1 - 1e-10


def test_integrated_equals_bruteforce(basis, gauss2, outcome_grid, state_at_ta, period):
    plan = sb.SequencePlan("III", period / 2, period / 2)
    p_fast = sb.joint_sign_probability(basis, state_at_ta, gauss2, plan, outcome_grid)
    p_slow = sb.joint_sign_probability_bruteforce(
        basis, state_at_ta, gauss2, plan, outcome_grid)
    assert abs(p_fast - p_slow) < 1e-6


# --------------------------------------------------------- correlation triple

def test_delta_p_identity(basis, gauss2, outcome_grid, prepared, period):
    state, _ = prepared
    res = sb.correlation_triple(basis, state, gauss2, period / 3, period / 3,
                                period, outcome_grid)
    recomputed = res.p_bc_plus_minus - res.p_ab_plus_plus - res.p_ac_minus_minus
    assert res.delta_p == recomputed


def test_violations_exist_at_moderate_filter(basis, gauss2, outcome_grid, prepared, period):
    state, _ = prepared
    # interior of the first violation island seen on the default scan
    res = sb.correlation_triple(basis, state, gauss2, period / 3, period / 3,
                                period, outcome_grid)
    assert res.delta_p > 0


def test_no_violations_beyond_well_separation(basis, outcome_grid, params, period):
    filt = sb.FilterSpec("gaussian", 6.0)
    state, _ = sb.prepare_state(basis, filt, sb.InitialStateSpec(), 16, period,
                                -params.phi_min, outcome_grid)
    for frac_ab, frac_bc in ((1 / 3, 1 / 3), (1 / 2, 1 / 2), (0.7, 0.25)):
        res = sb.correlation_triple(basis, state, filt, frac_ab * period,
                                    frac_bc * period, period, outcome_grid)
        assert res.delta_p <= 0


# ------------------------------------------------------ sequence uncertainty

def test_sequence_iii_depends_only_on_total_flight(basis, gauss2, outcome_grid,
                                                   state_at_ta, period):
    pairs = [(0.3 * period, 0.7 * period), (0.5 * period, 0.5 * period),
             (0.9 * period, 0.1 * period)]
    values = [
        sb.sequence_uncertainty(basis, state_at_ta, gauss2,
                                sb.SequencePlan("III", ta, tb), outcome_grid).delta_phi_eff
        for ta, tb in pairs
    ]
    assert max(values) - min(values) < 1e-8


def test_narrow_filter_uncertainty_matches_bare_spread(basis, outcome_grid,
                                                       state_at_ta, params, period):
    # delta-filter limit: the outcome density tends to |psi|^2, so the
    # effective uncertainty is sqrt(2) times the bare flux spread about the
    # reference
    filt = sb.FilterSpec("gaussian", 0.01)
    plan = sb.SequencePlan("III", period / 2, period / 2)
    out = sb.sequence_uncertainty(basis, state_at_ta, filt, plan, outcome_grid)

    rep = sb.weight_matrix(basis, filt, -params.phi_min)
    conditioned, _ = sb.apply_measurement(state_at_ta, rep)
    final = sb.evolve(conditioned, period)
    psi = basis.wavefunction(final.coeffs)
    nodes = basis.grid.nodes()
    bare = math.sqrt(basis.quadrature_weight * float(
        np.sum((nodes + params.phi_min) ** 2 * np.abs(psi) ** 2)))
    assert abs(out.delta_phi_eff - math.sqrt(2) * bare) / (math.sqrt(2) * bare) < 1e-3


def test_uncertainty_floor_is_instrumental(basis, gauss2, outcome_grid, state_at_ta, period):
    plan = sb.SequencePlan("III", period / 2, period / 2)
    out = sb.sequence_uncertainty(basis, state_at_ta, gauss2, plan, outcome_grid)
    assert out.delta_phi_eff >= gauss2.delta_phi


# ----------------------------------------------------------------------- scan

@pytest.fixture(scope="module")
def small_scan(basis, gauss2, outcome_grid, period):
    return sb.scan(basis, gauss2, sb.InitialStateSpec(), 16, 2 * period, 8,
                   period, outcome_grid)


def test_scan_masks_match_surfaces(small_scan, params):
    g = small_scan
    assert np.array_equal(g.violation_mask, g.delta_p_values > 0)
    expected = ((g.delta_phi_eff_bc < params.delta_l)
                & (g.delta_phi_eff_ab < params.delta_l)
                & (g.delta_phi_eff_ac < params.delta_l))
    assert np.array_equal(g.distinguishable_mask, expected)


def test_scan_axes_cover_the_window(small_scan, period):
    assert small_scan.t_ab_axis[0] == pytest.approx(2 * period / 8)
    assert small_scan.t_ab_axis[-1] == pytest.approx(2 * period)
    assert np.array_equal(small_scan.t_ab_axis, small_scan.t_bc_axis)


def test_scan_probabilities_bounded(small_scan):
    assert np.all(small_scan.delta_p_values <= 1 + 1e-9)
    assert np.all(small_scan.delta_p_values >= -2 - 1e-9)
    assert np.all(small_scan.delta_phi_eff_bc >= 0)


def test_scan_deterministic_across_thread_counts(basis, gauss2, outcome_grid, period):
    runs = [
        sb.scan(basis, gauss2, sb.InitialStateSpec(), 4, 1.5 * period, 5,
                period, outcome_grid, threads=threads)
        for threads in (1, 3)
    ]
    assert np.array_equal(runs[0].delta_p_values, runs[1].delta_p_values)
    assert np.array_equal(runs[0].delta_phi_eff_ac, runs[1].delta_phi_eff_ac)


def test_scan_rejects_bad_window(basis, gauss2, outcome_grid, period):
    with pytest.raises(sb.ConfigError):
        sb.scan(basis, gauss2, sb.InitialStateSpec(), 4, 5 * period, 5,
                period, outcome_grid)
    with pytest.raises(sb.ConfigError):
        sb.scan(basis, gauss2, sb.InitialStateSpec(), 4, period, 1,
                period, outcome_grid)


def test_representative_mode_also_shows_violations(basis, gauss2, outcome_grid,
                                                   prepared, period):
    state, _ = prepared
    res = sb.correlation_triple(basis, state, gauss2, period / 3, period / 3,
                                period, outcome_grid, representative=True)
    assert res.delta_p > 0
