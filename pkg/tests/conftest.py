from __future__ import annotations

import numpy as np
import pytest

import squidbell as sb

MU, LAM = 9.6, 1.536


@pytest.fixture(scope="session")
def params():
    return sb.PotentialParams(mu=MU, lam=LAM)


@pytest.fixture(scope="session")
def basis(params):
    return sb.build_basis(params, sb.GridSpec(8.0, 2049), 40)


@pytest.fixture(scope="session")
def period(basis):
    return sb.tunneling_period(basis)


@pytest.fixture(scope="session")
def gauss2():
    return sb.FilterSpec("gaussian", 2.0)


@pytest.fixture(scope="session")
def outcome_grid():
    return sb.OutcomeGrid(10.0, 161)


@pytest.fixture(scope="session")
def prepared(basis, gauss2, period, outcome_grid, params):
    state, trace = sb.prepare_state(
        basis, gauss2, sb.InitialStateSpec(), 16, period, -params.phi_min, outcome_grid
    )
    return state, trace


@pytest.fixture(scope="session")
def left_packet(basis, params):
    state, _ = sb.gaussian_packet(basis, -params.phi_min, (2 * MU) ** -0.25)
    return state


@pytest.fixture(scope="session")
def right_packet(basis, params):
    state, _ = sb.gaussian_packet(basis, params.phi_min, (2 * MU) ** -0.25)
    return state


def random_state(basis, rng) -> sb.StateVector:
    c = rng.normal(size=basis.truncation) + 1j * rng.normal(size=basis.truncation)
    return sb.StateVector(basis=basis, coeffs=c / np.linalg.norm(c))
