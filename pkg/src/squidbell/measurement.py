"""Selective-measurement model: filters, state update, outcome statistics.

A recorded measurement with result Phi multiplies the wavefunction by a
filter weight w_Phi(phi) (unit peak; box or Gaussian of width delta_phi).
State updates happen through the matrix elements of w_Phi between energy
eigenstates.  Outcome statistics use the exact squared norm of the filtered
wavefunction, evaluated by rectangle-rule quadrature on the spatial grid:
the probability of observing Phi is ||w_Phi psi||^2 normalized over the
outcome grid.

Sign coarse-graining integrates the squared filter over a half-line of
outcomes, giving a smooth sigmoid-like function of phi whose basis matrix is
the effect operator of that sign.  Built this way the pair of effect
matrices sums to the projected identity up to the truncation/outcome-window
tolerance, and quadratic forms agree with half-line integrals of the
outcome density to rounding error.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DegenerateDensityError,
    ImpossibleOutcomeError,
)
from .spectral import SpectralBasis, StateVector

FILTER_KINDS = ("gaussian", "box")


@dataclass(frozen=True)
class FilterSpec:
    """Measurement filter: kind in {gaussian, box}, instrumental width delta_phi."""

    kind: str
    delta_phi: float

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ConfigError(
                f"filter.kind: must be one of {FILTER_KINDS}, got {self.kind!r}"
            )
        if not (self.delta_phi > 0):
            raise ConfigError(f"filter.delta_phi: must be > 0, got {self.delta_phi}")

    @property
    def density_normalizer(self) -> float:
        """Analytic 1/int w^2 dPhi: 1/(sqrt(pi) dPhi) Gaussian, 1/(2 dPhi) box."""
        if self.kind == "gaussian":
            return 1.0 / (math.sqrt(math.pi) * self.delta_phi)
        return 1.0 / (2.0 * self.delta_phi)


@dataclass(frozen=True)
class OutcomeGrid:
    """Uniform symmetric grid of recordable outcomes, including Phi = 0."""

    half_width: float
    n_points: int

    def __post_init__(self):
        if not (self.half_width > 0):
            raise ConfigError(f"outcome.half_width: must be > 0, got {self.half_width}")
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise ConfigError(
                f"outcome.points: must be an odd integer >= 3, got {self.n_points}"
            )

    @property
    def step(self) -> float:
        return 2.0 * self.half_width / (self.n_points - 1)

    def values(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.n_points)

    def sign_weights(self, sign: int) -> np.ndarray:
        """Half-line indicator; the Phi = 0 node contributes half to each sign."""
        v = self.values()
        w = (np.sign(v) == sign).astype(float)
        w[v == 0.0] = 0.5
        return w


@dataclass(frozen=True)
class WeightMatrix:
    """Matrix elements of one filter between energy eigenstates."""

    result_phi: float
    entries: np.ndarray

    def __post_init__(self):
        self.entries.flags.writeable = False


@dataclass(frozen=True)
class EffectMatrix:
    """Sign-coarse-grained effect operator in the truncated basis."""

    sign: int
    entries: np.ndarray

    def __post_init__(self):
        self.entries.flags.writeable = False


@dataclass(frozen=True)
class OutcomeDensity:
    """Normalized outcome probability density on an outcome grid.

    normalizer is the quadrature value of the unnormalized density integral
    actually divided out (the denominator of the outcome-probability rule).
    """

    grid: OutcomeGrid
    density: np.ndarray
    normalizer: float

    def __post_init__(self):
        self.density.flags.writeable = False

    def integral(self, weights: np.ndarray | None = None) -> float:
        w = 1.0 if weights is None else weights
        return float(np.sum(w * self.density) * self.grid.step)

    def sign_integral(self, sign: int) -> float:
        return self.integral(self.grid.sign_weights(sign))


@dataclass(frozen=True)
class UncertaintyResult:
    """Effective flux uncertainty of an outcome density about a result."""

    reference_phi: float
    delta_phi_eff: float


def weight_value(filt: FilterSpec, result_phi: float, phi):
    """Filter weight at phi for recorded result result_phi, unit peak."""
    if filt.kind == "gaussian":
        return np.exp(-((np.asarray(phi, dtype=float) - result_phi) ** 2)
                      / (2.0 * filt.delta_phi**2))
    return (np.abs(np.asarray(phi, dtype=float) - result_phi) < filt.delta_phi).astype(float)


def weight_matrix(basis: SpectralBasis, filt: FilterSpec, result_phi: float) -> WeightMatrix:
    """W_ij = h * sum_nodes u_i w u_j, symmetrized so W_ij == W_ji exactly.

    result_phi may lie beyond the spatial grid (recorded outcomes carry
    instrumental noise); the weight then just tapers across the grid.
    """
    if not math.isfinite(result_phi):
        raise ConfigError(f"result_phi: must be finite, got {result_phi!r}")
    w = weight_value(filt, result_phi, basis.grid.nodes())
    raw = (basis.eigenfunctions * w) @ basis.eigenfunctions.T * basis.quadrature_weight
    return WeightMatrix(result_phi=result_phi, entries=0.5 * (raw + raw.T))


class MeasurementContext:
    """Per-(basis, filter, outcome grid) cache of the heavy precomputations.

    Holds the stack of update matrices for every outcome node, the squared
    filter table used for densities, and the sign-effect matrices.  Lookup
    and insertion are guarded by a lock; insertion is idempotent, so
    concurrent builders at worst duplicate work.
    """

    _cache: dict = {}
    _lock = threading.Lock()

    def __init__(self, basis: SpectralBasis, filt: FilterSpec, grid: OutcomeGrid):
        self.basis = basis
        self.filt = filt
        self.grid = grid
        nodes = basis.grid.nodes()
        outs = grid.values()
        w = np.empty((grid.n_points, basis.grid.n_points))
        for k, phi_k in enumerate(outs):
            w[k] = weight_value(filt, phi_k, nodes)
        self.squared_weights = w**2
        u = basis.eigenfunctions
        stack = np.einsum("mg,og,ng->omn", u, w, u, optimize=True) * basis.quadrature_weight
        self.update_matrices = 0.5 * (stack + np.transpose(stack, (0, 2, 1)))
        nu = filt.density_normalizer
        self.effects = {}
        for sign in (+1, -1):
            g = nu * grid.step * (grid.sign_weights(sign) @ self.squared_weights)
            raw = (u * g) @ u.T * basis.quadrature_weight
            self.effects[sign] = EffectMatrix(sign=sign, entries=0.5 * (raw + raw.T))
        self.effect_sum = self.effects[+1].entries + self.effects[-1].entries

    @classmethod
    def get(cls, basis: SpectralBasis, filt: FilterSpec, grid: OutcomeGrid):
        key = (basis.token, filt.kind, filt.delta_phi, grid.half_width, grid.n_points)
        with cls._lock:
            ctx = cls._cache.get(key)
        if ctx is not None:
            return ctx
        ctx = cls(basis, filt, grid)
        with cls._lock:
            return cls._cache.setdefault(key, ctx)


def apply_measurement(state: StateVector, weight: WeightMatrix):
    """Record one result: c -> W c, renormalized.

    Returns (state, success_norm2) with success_norm2 the squared norm before
    renormalization; raises ImpossibleOutcomeError when the filter is
    orthogonal to the state.
    """
    new = weight.entries @ state.coeffs
    success = float(np.real(np.vdot(new, new)))
    if success < 1e-300:
        raise ImpossibleOutcomeError(
            f"filter at {weight.result_phi:g} annihilated the state"
        )
    return (
        StateVector(
            basis=state.basis,
            coeffs=new / math.sqrt(success),
            norm_accumulator=state.norm_accumulator * math.sqrt(success),
        ),
        success,
    )


def _raw_outcome_weights(basis: SpectralBasis, state: StateVector, ctx: MeasurementContext):
    """||w_Phi psi||^2 for every outcome node, by grid quadrature."""
    psi = basis.wavefunction(state.coeffs)
    rho = basis.quadrature_weight * np.abs(psi) ** 2
    return ctx.squared_weights @ rho


def outcome_density(
    basis: SpectralBasis,
    state: StateVector,
    filt: FilterSpec,
    grid: OutcomeGrid,
) -> OutcomeDensity:
    """Probability density of the recorded outcome over the outcome grid.

    density(Phi) is proportional to the squared norm of the filtered
    wavefunction and normalized by the explicit quadrature of that quantity
    over the grid (valid for both filter kinds; for the Gaussian kind the
    normalizer reproduces sqrt(pi)*delta_phi times the squared state norm).
    """
    if grid.half_width < 3.0 * basis.params.phi_min:
        raise ConfigError(
            f"outcome.half_width: must span at least 3*phi_min = "
            f"{3 * basis.params.phi_min:g}, got {grid.half_width:g}"
        )
    ctx = MeasurementContext.get(basis, filt, grid)
    raw = _raw_outcome_weights(basis, state, ctx)
    total = float(raw.sum() * grid.step)
    if total < 1e-12:
        raise DegenerateDensityError(
            f"outcome density mass {total:.3e} below 1e-12 before normalization"
        )
    return OutcomeDensity(grid=grid, density=raw / total, normalizer=total)


def sign_probability_position(basis: SpectralBasis, state: StateVector, sign: int) -> float:
    """Integral of |psi|^2 over one half-line; the phi = 0 node splits evenly."""
    nodes = basis.grid.nodes()
    w = (np.sign(nodes) == sign).astype(float)
    w[nodes == 0.0] = 0.5
    psi = basis.wavefunction(state.coeffs)
    return float(basis.quadrature_weight * np.sum(w * np.abs(psi) ** 2))


def effect_matrix(
    basis: SpectralBasis,
    filt: FilterSpec,
    sign: int,
    grid: OutcomeGrid,
) -> EffectMatrix:
    """Effect operator of the sign-coarse-grained outcome on one half-line."""
    if sign not in (+1, -1):
        raise ConfigError(f"sign: must be +1 or -1, got {sign}")
    return MeasurementContext.get(basis, filt, grid).effects[sign]


def effective_uncertainty(density: OutcomeDensity, reference_phi: float) -> UncertaintyResult:
    """sqrt(2 * int (Phi - ref)^2 P(Phi) dPhi): 1/e half-width convention.

    The factor 2 makes the value equal delta_phi exactly for the pure
    instrumental density of a point-localized state under a Gaussian filter.
    """
    second = density.integral((density.grid.values() - reference_phi) ** 2)
    return UncertaintyResult(
        reference_phi=reference_phi,
        delta_phi_eff=math.sqrt(max(0.0, 2.0 * second)),
    )
