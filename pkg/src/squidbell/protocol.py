"""Measurement-sequence orchestration and the quiescent-time scan.

The protocol prepares the flux near one well by a stroboscopic sequence of
recorded measurements at the tunneling period, then evaluates three
two-measurement histories over a grid of quiescent-time pairs
(t_ab, t_bc):

  I   nothing at t_a, sign + at t_b = t_a + t_ab, sign - at t_c = t_b + t_bc
  II  sign + at t_a, sign + at t_b, nothing at t_c
  III sign - at t_a, nothing at t_b, sign - at t_c

The inequality witness is delta_p = P_bc(+-) - P_ab(++) - P_ac(--); any
positive value marks a violation of the realistic bound.  Alongside, each
sequence carries an effective-uncertainty surface evaluated at its final
recorded event; cells where all three stay below the well separation
delta_l count as flux-distinguishable.

Joint sign probabilities come in two modes.  The integrated mode (default)
sums first-event outcomes over the half-line exactly, conditioning each
branch with its own update matrix; the representative mode conditions on
the single result of magnitude phi_min, which is cheaper and matches the
circled results of the sequence diagrams.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    ImpossibleOutcomeError,
    ScanPointError,
    SquidBellError,
)
from .measurement import (
    FilterSpec,
    MeasurementContext,
    OutcomeGrid,
    UncertaintyResult,
    apply_measurement,
    effective_uncertainty,
    outcome_density,
    weight_matrix,
)
from .spectral import (
    SpectralBasis,
    StateVector,
    evolve,
    gaussian_packet,
    tunneling_period,
)

SEQUENCE_IDS = ("I", "II", "III")

#: branches with less weight than this fraction of the total are skipped in
#: the integrated mode (their conditional probabilities are 0/0)
_BRANCH_FLOOR = 1e-280


@dataclass(frozen=True)
class InitialStateSpec:
    """Gaussian packet before preparation; defaults follow the left well.

    center defaults to -phi_min and sigma to the harmonic ground-state width
    (2 mu)^(-1/4); the preparation sequence makes the precise choice
    unimportant.
    """

    center: float | None = None
    sigma: float | None = None

    def resolve(self, basis: SpectralBasis):
        center = -basis.params.phi_min if self.center is None else self.center
        sigma = (2.0 * basis.params.mu) ** -0.25 if self.sigma is None else self.sigma
        if not (sigma > 0):
            raise ConfigError(f"init.sigma: must be > 0, got {sigma}")
        if abs(center) > basis.grid.half_width:
            raise ConfigError(
                f"init.center: {center:g} outside the grid span "
                f"+-{basis.grid.half_width:g}"
            )
        return center, sigma


@dataclass(frozen=True)
class SequencePlan:
    """One of the three measurement histories with its quiescent times."""

    sequence_id: str
    t_ab: float
    t_bc: float

    def __post_init__(self):
        if self.sequence_id not in SEQUENCE_IDS:
            raise ConfigError(
                f"sequence_id: must be one of {SEQUENCE_IDS}, got {self.sequence_id!r}"
            )
        if not (self.t_ab > 0 and self.t_bc > 0):
            raise ConfigError(
                f"quiescent times must be > 0, got t_ab={self.t_ab}, t_bc={self.t_bc}"
            )

    def events(self):
        """Sign-resolved events as (time offset from t_a, sign)."""
        if self.sequence_id == "I":
            return ((self.t_ab, +1), (self.t_ab + self.t_bc, -1))
        if self.sequence_id == "II":
            return ((0.0, +1), (self.t_ab, +1))
        return ((0.0, -1), (self.t_ab + self.t_bc, -1))


@dataclass(frozen=True)
class CorrelationResult:
    """The three joint sign probabilities and the inequality witness."""

    p_bc_plus_minus: float
    p_ab_plus_plus: float
    p_ac_minus_minus: float

    @property
    def delta_p(self) -> float:
        return self.p_bc_plus_minus - self.p_ab_plus_plus - self.p_ac_minus_minus


class PrepStep(tuple):
    """(step, delta_phi_eff, success_norm2) record of one preparation step."""

    __slots__ = ()

    def __new__(cls, step, delta_phi_eff, success_norm2):
        return super().__new__(cls, (step, delta_phi_eff, success_norm2))

    step = property(lambda self: self[0])
    delta_phi_eff = property(lambda self: self[1])
    success_norm2 = property(lambda self: self[2])


@dataclass(frozen=True)
class ScanGrid:
    """All surfaces of one quiescent-time scan plus the derived masks."""

    t_ab_axis: np.ndarray
    t_bc_axis: np.ndarray
    delta_p_values: np.ndarray
    delta_phi_eff_bc: np.ndarray
    delta_phi_eff_ab: np.ndarray
    delta_phi_eff_ac: np.ndarray
    violation_mask: np.ndarray
    distinguishable_mask: np.ndarray

    def __post_init__(self):
        for arr in (
            self.t_ab_axis, self.t_bc_axis, self.delta_p_values,
            self.delta_phi_eff_bc, self.delta_phi_eff_ab, self.delta_phi_eff_ac,
            self.violation_mask, self.distinguishable_mask,
        ):
            arr.flags.writeable = False


def make_initial_state(basis: SpectralBasis, init: InitialStateSpec) -> StateVector:
    center, sigma = init.resolve(basis)
    state, _loss = gaussian_packet(basis, center, sigma)
    return state


def prepare_state(
    basis: SpectralBasis,
    filt: FilterSpec,
    init: InitialStateSpec,
    count: int,
    period: float,
    result_phi: float,
    grid: OutcomeGrid,
):
    """Stroboscopic preparation: count times (evolve period, record result_phi).

    Before each recorded measurement the effective uncertainty of that
    outcome (about result_phi) is evaluated, giving the per-step trace that
    exposes the approach to the asymptotic value.
    """
    if count < 0:
        raise ConfigError(f"prep.count: must be >= 0, got {count}")
    if not (period > 0):
        raise ConfigError(f"period: must be > 0, got {period}")
    state = make_initial_state(basis, init)
    weight = weight_matrix(basis, filt, result_phi)
    trace = []
    for step in range(1, count + 1):
        state = evolve(state, period)
        density = outcome_density(basis, state, filt, grid)
        unc = effective_uncertainty(density, result_phi)
        state, success = apply_measurement(state, weight)
        trace.append(PrepStep(step, unc.delta_phi_eff, success))
    return state, trace


def _phase_factors(basis: SpectralBasis, dt: float) -> np.ndarray:
    return np.exp(-1j * basis.energies * dt)


def _two_event_integrated(ctx: MeasurementContext, c_first: np.ndarray,
                          tau: float, s1: int, s2: int) -> float:
    """Exact sign coarse-graining over first outcomes on the s1 half-line.

    First-outcome weights are the exact filtered norms on the spatial grid;
    each branch keeps its own recorded first result, evolves through the
    quiescent time and is weighed by the second sign's effect form,
    normalized per branch so the four sign pairs sum to one exactly.
    """
    grid = ctx.grid
    basis = ctx.basis
    psi = basis.wavefunction(c_first)
    p1 = ctx.squared_weights @ (basis.quadrature_weight * np.abs(psi) ** 2)
    total1 = p1.sum() * grid.step
    branches = ctx.update_matrices @ c_first            # (n_out, M)
    evolved = branches * _phase_factors(basis, tau)
    num = np.einsum("om,mn,on->o", evolved.conj(), ctx.effects[s2].entries,
                    evolved, optimize=True).real
    den = np.einsum("om,mn,on->o", evolved.conj(), ctx.effect_sum,
                    evolved, optimize=True).real
    cond = np.divide(num, den, out=np.zeros_like(num), where=den > _BRANCH_FLOOR)
    return float(np.sum(grid.sign_weights(s1) * p1 * cond) * grid.step / total1)


def _two_event_representative(basis, filt, grid, c_first: np.ndarray,
                              tau: float, s1: int, s2: int) -> float:
    """Fig.-1-literal mode: condition on the single result s1 * phi_min."""
    state = StateVector(basis=basis, coeffs=c_first.copy())
    d1 = outcome_density(basis, state, filt, grid)
    p1 = d1.sign_integral(s1)
    rep = weight_matrix(basis, filt, s1 * basis.params.phi_min)
    conditioned, _ = apply_measurement(state, rep)
    d2 = outcome_density(basis, evolve(conditioned, tau), filt, grid)
    return p1 * d2.sign_integral(s2)


def joint_sign_probability(
    basis: SpectralBasis,
    state_at_ta: StateVector,
    filt: FilterSpec,
    plan: SequencePlan,
    grid: OutcomeGrid,
    representative: bool = False,
) -> float:
    """Joint probability of the plan's two recorded signs."""
    (t1, s1), (t2, s2) = plan.events()
    c_first = _phase_factors(basis, t1) * state_at_ta.coeffs
    tau = t2 - t1
    if representative:
        return _two_event_representative(basis, filt, grid, c_first, tau, s1, s2)
    ctx = MeasurementContext.get(basis, filt, grid)
    return _two_event_integrated(ctx, c_first, tau, s1, s2)


def joint_sign_probability_bruteforce(
    basis: SpectralBasis,
    state_at_ta: StateVector,
    filt: FilterSpec,
    plan: SequencePlan,
    grid: OutcomeGrid,
) -> float:
    """Slow oracle: explicit nested sum over both outcome grids.

    Loops over every first outcome on the half-line, updates and evolves the
    branch through the public single-measurement operations and integrates
    the second outcome density; no effect matrices, no vectorized stacks.
    """
    (t1, s1), (t2, s2) = plan.events()
    first = evolve(StateVector(basis=basis, coeffs=state_at_ta.coeffs.copy()), t1)
    d1 = outcome_density(basis, first, filt, grid)
    w1 = grid.sign_weights(s1)
    values = grid.values()
    total = 0.0
    for k in range(grid.n_points):
        if w1[k] == 0.0:
            continue
        weight_k = d1.density[k] * grid.step
        if weight_k <= 0.0:
            continue
        branch = StateVector(basis=basis, coeffs=first.coeffs.copy())
        try:
            branch, _ = apply_measurement(branch, weight_matrix(basis, filt, values[k]))
        except ImpossibleOutcomeError:
            continue  # the integrated path zeroes these branches too
        d2 = outcome_density(basis, evolve(branch, t2 - t1), filt, grid)
        total += w1[k] * weight_k * d2.sign_integral(s2)
    return total


def correlation_triple(
    basis: SpectralBasis,
    prepared: StateVector,
    filt: FilterSpec,
    t_ab: float,
    t_bc: float,
    t_offset_a: float,
    grid: OutcomeGrid,
    representative: bool = False,
) -> CorrelationResult:
    """Evaluate the three sequences from the same prepared state."""
    if t_offset_a < 0:
        raise ConfigError(f"t_offset_a: must be >= 0, got {t_offset_a}")
    state_at_ta = evolve(prepared, t_offset_a)
    args = (basis, state_at_ta, filt)
    return CorrelationResult(
        p_bc_plus_minus=joint_sign_probability(
            *args, SequencePlan("I", t_ab, t_bc), grid, representative),
        p_ab_plus_plus=joint_sign_probability(
            *args, SequencePlan("II", t_ab, t_bc), grid, representative),
        p_ac_minus_minus=joint_sign_probability(
            *args, SequencePlan("III", t_ab, t_bc), grid, representative),
    )


def sequence_uncertainty(
    basis: SpectralBasis,
    state_at_ta: StateVector,
    filt: FilterSpec,
    plan: SequencePlan,
    grid: OutcomeGrid,
) -> UncertaintyResult:
    """Effective uncertainty at the plan's final recorded event.

    Earlier events condition the state with the representative result
    sign * phi_min; the final event contributes its outcome density and the
    uncertainty is taken about the final event's representative result.
    """
    events = plan.events()
    phi_min = basis.params.phi_min
    state = state_at_ta
    clock = 0.0
    for offset, sign in events[:-1]:
        state = evolve(state, offset - clock)
        clock = offset
        rep = weight_matrix(basis, filt, sign * phi_min)
        state, _ = apply_measurement(state, rep)
    final_offset, final_sign = events[-1]
    state = evolve(state, final_offset - clock)
    density = outcome_density(basis, state, filt, grid)
    return effective_uncertainty(density, final_sign * phi_min)


def _scan_cell(basis, state_at_ta, filt, grid, t_ab, t_bc, representative):
    plans = [SequencePlan(sid, t_ab, t_bc) for sid in SEQUENCE_IDS]
    probs = [
        joint_sign_probability(basis, state_at_ta, filt, plan, grid, representative)
        for plan in plans
    ]
    uncs = [
        sequence_uncertainty(basis, state_at_ta, filt, plan, grid).delta_phi_eff
        for plan in plans
    ]
    delta_p = probs[0] - probs[1] - probs[2]
    return delta_p, uncs[0], uncs[1], uncs[2]


def scan(
    basis: SpectralBasis,
    filt: FilterSpec,
    init: InitialStateSpec,
    prep_count: int,
    t_max: float,
    steps: int,
    t_offset_a: float,
    grid: OutcomeGrid,
    representative: bool = False,
    threads: int = 1,
    prep_result: float | None = None,
) -> ScanGrid:
    """Fill every surface over a steps x steps grid of quiescent times.

    Axes run over (0, t_max] with uniform spacing t_max/steps.  Cells are
    independent; the row loop optionally fans out over a thread pool and the
    result is positional, so output is identical for any thread count.
    """
    if steps < 2:
        raise ConfigError(f"scan.steps: must be >= 2, got {steps}")
    period = tunneling_period(basis)
    if not (0 < t_max <= 4.0 * period):
        raise ConfigError(
            f"scan t_max: must lie in (0, 4T] = (0, {4 * period:g}], got {t_max:g}"
        )
    if threads < 1:
        raise ConfigError(f"threads: must be >= 1, got {threads}")

    result = -basis.params.phi_min if prep_result is None else prep_result
    prepared, _trace = prepare_state(basis, filt, init, prep_count, period, result, grid)
    state_at_ta = evolve(prepared, t_offset_a)

    dt = t_max / steps
    axis = dt * np.arange(1, steps + 1)
    delta_p = np.empty((steps, steps))
    u_bc = np.empty((steps, steps))
    u_ab = np.empty((steps, steps))
    u_ac = np.empty((steps, steps))

    def fill_row(i: int):
        t_ab = axis[i]
        for j, t_bc in enumerate(axis):
            try:
                cell = _scan_cell(basis, state_at_ta, filt, grid, t_ab, t_bc,
                                  representative)
            except SquidBellError as exc:
                raise ScanPointError(
                    f"scan failed at t_ab={t_ab:g}, t_bc={t_bc:g}: {exc}",
                    t_ab=t_ab, t_bc=t_bc,
                ) from exc
            delta_p[i, j], u_bc[i, j], u_ab[i, j], u_ac[i, j] = cell

    if threads == 1:
        for i in range(steps):
            fill_row(i)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill_row, range(steps)))

    delta_l = basis.params.delta_l
    return ScanGrid(
        t_ab_axis=axis,
        t_bc_axis=axis.copy(),
        delta_p_values=delta_p,
        delta_phi_eff_bc=u_bc,
        delta_phi_eff_ab=u_ab,
        delta_phi_eff_ac=u_ac,
        violation_mask=delta_p > 0,
        distinguishable_mask=(u_bc < delta_l) & (u_ab < delta_l) & (u_ac < delta_l),
    )
