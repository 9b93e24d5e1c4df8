"""Double-well spectrum and exact free evolution in the truncated eigenbasis.

Everything works in the dimensionless unit system hbar = 2m = 1, so the
Hamiltonian is H = -d^2/dphi^2 - (mu/2) phi^2 + (lambda/4) phi^4.  The
spectrum is obtained from the second-order central-difference discretization
with Dirichlet boundaries, which preserves parity exactly and keeps the
near-degenerate tunneling doublet a well-conditioned difference.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import (
    BasisTruncationError,
    ConfigError,
    DegenerateDoubletError,
    EigensolverError,
    NumericsError,
)

_basis_counter = itertools.count(1)

#: residual tolerance (relative to max(1, |E|)) below which a state counts
#: as converged
_RESIDUAL_TOL = 1e-8

#: basis must reach at least this many barrier depths above the well bottom
_BARRIER_SPAN_FACTOR = 2.0

_MAX_GRID_POINTS = 2**15 - 1  # hard cap for automatic doublet refinement


@dataclass(frozen=True)
class PotentialParams:
    """Quartic double-well parameters mu, lam (both > 0) and derived geometry."""

    mu: float
    lam: float

    def __post_init__(self):
        if not (self.mu > 0):
            raise ConfigError(f"mu: must be > 0, got {self.mu}")
        if not (self.lam > 0):
            raise ConfigError(f"lambda: must be > 0, got {self.lam}")

    @property
    def phi_min(self) -> float:
        """Location of the right minimum, sqrt(mu/lambda)."""
        return math.sqrt(self.mu / self.lam)

    @property
    def delta_l(self) -> float:
        """Distance between the two minima, 2*phi_min."""
        return 2.0 * self.phi_min

    @property
    def barrier_depth(self) -> float:
        """|V(phi_min)| = mu^2/(4 lambda), the depth of each well below the hump."""
        return self.mu**2 / (4.0 * self.lam)


@dataclass(frozen=True)
class GridSpec:
    """Uniform interior grid on [-half_width, half_width], Dirichlet boundaries.

    n_points must be odd so phi = 0 is a node and the grid is exactly
    symmetric.
    """

    half_width: float
    n_points: int

    def __post_init__(self):
        if not (self.half_width > 0):
            raise ConfigError(f"grid.half_width: must be > 0, got {self.half_width}")
        if self.n_points < 3:
            raise ConfigError(f"grid.points: must be >= 3, got {self.n_points}")
        if self.n_points % 2 == 0:
            raise ConfigError(
                f"grid.points: must be odd so phi=0 is a node, got {self.n_points}"
            )

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.n_points + 1)

    def nodes(self) -> np.ndarray:
        h = self.spacing
        return -self.half_width + h * np.arange(1, self.n_points + 1)

    def refined(self) -> "GridSpec":
        """Grid with half the spacing (n+1 doubles, n stays odd)."""
        return GridSpec(self.half_width, 2 * self.n_points + 1)


@dataclass(frozen=True)
class SpectralBasis:
    """Lowest-M eigenpairs of the discretized double-well Hamiltonian.

    eigenfunctions is an (M, n_points) array sampled on grid.nodes(),
    orthonormal under the rectangle rule with weight quadrature_weight.
    Instances are immutable and safe to share across threads.
    """

    params: PotentialParams
    grid: GridSpec
    energies: np.ndarray
    eigenfunctions: np.ndarray
    truncation: int
    quadrature_weight: float
    converged: np.ndarray
    token: int = field(default_factory=lambda: next(_basis_counter))

    def __post_init__(self):
        self.energies.flags.writeable = False
        self.eigenfunctions.flags.writeable = False
        self.converged.flags.writeable = False

    def wavefunction(self, coeffs: np.ndarray) -> np.ndarray:
        """psi(phi) on the grid nodes for eigenbasis coefficients."""
        return coeffs @ self.eigenfunctions


@dataclass(frozen=True)
class StateVector:
    """Normalized coefficients c_l in the energy eigenbasis of one basis.

    norm_accumulator multiplies together the norms absorbed by every
    renormalization, purely for diagnostics.
    """

    basis: SpectralBasis
    coeffs: np.ndarray
    norm_accumulator: float = 1.0

    def __post_init__(self):
        self.coeffs.flags.writeable = False

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


def potential_value(params: PotentialParams, phi):
    """Effective potential written in terms of the minima and the barrier.

    2*V(phi_min)*[1 - (phi/phi_min)^2/2]*(phi/phi_min)^2 with
    V(phi_min) = -mu^2/(4 lambda); algebraically identical to
    -(mu/2) phi^2 + (lambda/4) phi^4.
    """
    v_min = -params.barrier_depth
    r2 = np.square(phi) / params.phi_min**2
    return 2.0 * v_min * (1.0 - 0.5 * r2) * r2


def build_basis(params: PotentialParams, grid: GridSpec, truncation: int) -> SpectralBasis:
    """Solve the tridiagonal Dirichlet eigenproblem for the lowest states.

    Raises ConfigError when the grid cannot host the requested basis and
    EigensolverError when a state fails the residual check.
    """
    if truncation < 1:
        raise ConfigError(f"basis.size: must be >= 1, got {truncation}")
    if truncation >= grid.n_points:
        raise ConfigError(
            f"basis.size: must be < grid.points ({grid.n_points}), got {truncation}"
        )
    if not (grid.half_width > 2.0 * params.phi_min):
        raise ConfigError(
            f"grid.half_width: must exceed 2*phi_min = {2 * params.phi_min:g}, "
            f"got {grid.half_width:g}"
        )

    h = grid.spacing
    nodes = grid.nodes()
    diag = 2.0 / h**2 + potential_value(params, nodes)
    off = np.full(grid.n_points - 1, -1.0 / h**2)
    try:
        energies, vectors = eigh_tridiagonal(
            diag, off, select="i", select_range=(0, truncation - 1)
        )
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigensolverError(f"tridiagonal eigensolver failed: {exc}") from exc

    # The discretization commutes with the grid reflection exactly and the
    # n-th state's parity alternates (oscillation theorem), so projecting
    # each vector onto its parity sector removes the solver's tiny
    # degenerate-doublet mixing.
    funcs = np.ascontiguousarray(vectors.T) / math.sqrt(h)
    signs = np.where(np.arange(truncation) % 2 == 0, 1.0, -1.0)
    funcs = 0.5 * (funcs + signs[:, None] * funcs[:, ::-1])
    funcs /= np.sqrt(h * np.sum(funcs**2, axis=1))[:, None]
    flip = funcs[np.arange(truncation), np.argmax(np.abs(funcs), axis=1)] < 0
    funcs[flip] *= -1.0

    # per-state residual check against the tridiagonal operator
    res = diag[None, :] * vectors.T
    res[:, :-1] += off[0] * vectors.T[:, 1:]
    res[:, 1:] += off[0] * vectors.T[:, :-1]
    res -= energies[:, None] * vectors.T
    resnorm = np.linalg.norm(res, axis=1)
    scale = np.maximum(1.0, np.abs(energies)) * (2.0 / h**2)
    converged = resnorm <= _RESIDUAL_TOL * scale
    if not converged.all():
        bad = int(np.argmin(converged))
        raise EigensolverError(
            f"state {bad + 1} failed the residual check "
            f"({resnorm[bad]:.3e} vs {_RESIDUAL_TOL * scale[bad]:.3e})",
            state_index=bad,
        )

    well_bottom = -params.barrier_depth
    span_needed = well_bottom + _BARRIER_SPAN_FACTOR * params.barrier_depth
    if energies[-1] < span_needed:
        raise ConfigError(
            f"basis.size: E_M = {energies[-1]:g} does not reach "
            f"{span_needed:g} (twice the barrier above the well bottom); "
            f"increase the basis size"
        )

    return SpectralBasis(
        params=params,
        grid=grid,
        energies=energies,
        eigenfunctions=funcs,
        truncation=truncation,
        quadrature_weight=h,
        converged=converged,
    )


def doublet_splitting(basis: SpectralBasis) -> float:
    if basis.truncation < 2:
        raise ConfigError("basis.size: need at least 2 states for the doublet")
    return float(basis.energies[1] - basis.energies[0])


def tunneling_period(basis: SpectralBasis) -> float:
    """Coherent inter-well oscillation period 2*pi/(E_2 - E_1)."""
    split = doublet_splitting(basis)
    if split < 1e-12:
        raise DegenerateDoubletError(
            f"doublet splitting {split:.3e} below 1e-12; grid or precision insufficient"
        )
    return 2.0 * math.pi / split


def build_basis_with_doublet_check(
    params: PotentialParams,
    grid: GridSpec,
    truncation: int,
    rel_tol: float = 0.01,
) -> SpectralBasis:
    """Build a basis whose doublet splitting is grid-converged to rel_tol.

    The splitting is compared against a spacing-halved solve; if unstable the
    grid is refined by powers of two up to n_points = 2^15 - 1, then the
    build fails.  Returns the coarsest basis that passed.
    """
    current = grid
    while True:
        basis = build_basis(params, current, truncation)
        fine = build_basis(params, current.refined(), truncation)
        s0, s1 = doublet_splitting(basis), doublet_splitting(fine)
        if s1 > 0 and abs(s0 - s1) / s1 <= rel_tol:
            return basis
        if current.refined().n_points > _MAX_GRID_POINTS:
            raise NumericsError(
                f"doublet splitting not stable to {rel_tol:.1%} within the "
                f"{_MAX_GRID_POINTS}-point grid cap"
            )
        current = current.refined()


def project_state(basis: SpectralBasis, samples: np.ndarray):
    """Project grid samples onto the basis: c_l = h * sum(u_l * samples).

    The samples are grid-normalized first; returns (state, truncation_loss)
    and raises BasisTruncationError when the loss exceeds 1e-3.
    """
    samples = np.asarray(samples, dtype=complex)
    if samples.shape != (basis.grid.n_points,):
        raise ConfigError(
            f"samples: expected shape ({basis.grid.n_points},), got {samples.shape}"
        )
    h = basis.quadrature_weight
    gridnorm2 = h * float(np.sum(np.abs(samples) ** 2))
    if gridnorm2 <= 0.0:
        raise ConfigError("samples: zero norm")
    samples = samples / math.sqrt(gridnorm2)
    coeffs = h * (basis.eigenfunctions @ samples)
    captured = float(np.sum(np.abs(coeffs) ** 2))
    loss = 1.0 - captured
    if loss > 1e-3:
        raise BasisTruncationError(
            f"truncation loss {loss:.3e} exceeds 1e-3; basis too small for this state"
        )
    coeffs = coeffs / math.sqrt(captured)
    return StateVector(basis=basis, coeffs=coeffs), loss


def gaussian_packet(basis: SpectralBasis, center: float, sigma: float):
    """Project a Gaussian packet (|psi|^2 std = sigma) onto the basis."""
    if not (sigma > 0):
        raise ConfigError(f"sigma: must be > 0, got {sigma}")
    if abs(center) > basis.grid.half_width:
        raise ConfigError(
            f"center: {center:g} outside the grid span +-{basis.grid.half_width:g}"
        )
    nodes = basis.grid.nodes()
    samples = np.exp(-((nodes - center) ** 2) / (4.0 * sigma**2))
    return project_state(basis, samples)


def evolve(state: StateVector, dt: float) -> StateVector:
    """Free evolution c_l -> exp(-i E_l dt) c_l; exactly norm-preserving."""
    if dt < 0:
        raise ConfigError(f"dt: must be >= 0, got {dt}")
    phases = np.exp(-1j * state.basis.energies * dt)
    return StateVector(
        basis=state.basis,
        coeffs=phases * state.coeffs,
        norm_accumulator=state.norm_accumulator,
    )
