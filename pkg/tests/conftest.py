import numpy as np
import pytest

from schrofield import (
    Potential,
    build_grid,
    build_operator,
    eigendecompose,
)


@pytest.fixture(scope="session")
def free3():
    """n=3 Dirichlet free stencil with hbar=1, m=1/2 (unit second difference)."""
    grid = build_grid(3, 0.0, 4.0, "dirichlet")
    op = build_operator(grid, Potential(np.zeros(3)), hbar=1.0, mass=0.5)
    return op


@pytest.fixture(scope="session")
def periodic4():
    grid = build_grid(4, 0.0, 4.0, "periodic")
    return build_operator(grid, Potential(np.zeros(4)), hbar=1.0, mass=0.5)


@pytest.fixture(scope="session")
def harmonic400():
    """The standard scenario: V = x^2/2 on [-10, 10], n=400, hbar=m=1."""
    grid = build_grid(400, -10.0, 10.0, "dirichlet")
    x = grid.points()
    op = build_operator(grid, Potential(0.5 * x * x), hbar=1.0, mass=1.0)
    return op, eigendecompose(op)


@pytest.fixture(scope="session")
def small_harmonic():
    """Coarse harmonic scenario for order measurements (errors above roundoff)."""
    grid = build_grid(40, -8.0, 8.0, "dirichlet")
    x = grid.points()
    op = build_operator(grid, Potential(0.5 * x * x), hbar=1.0, mass=1.0)
    return op, eigendecompose(op)


@pytest.fixture(scope="session")
def periodic_free64():
    grid = build_grid(64, 0.0, 6.4, "periodic")
    op = build_operator(grid, Potential(np.zeros(64)), hbar=1.0, mass=1.0)
    return op, eigendecompose(op)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


def low_frequency_wave(spec, rng, dt, nmodes=4, residual_target=3e-9):
    """Random superposition whose central-difference residual bound is small.

    The residual of an exactly sampled trajectory is bounded by
    sum |z_n| |kappa_n|^3 max|u_n| dt^2 / 6, so the state is weighted toward
    the smallest |kappa| modes and rescaled until that a-priori bound sits
    under residual_target. Modes with |kappa| under an absolute floor are
    skipped: dequantizing them produces field amplitudes |z|/|kappa| that
    amplify the eigensolver residual in K^2 phi past the dt^2 error.
    """
    from schrofield import WaveFunction

    kappa = spec.eigenvalues
    eligible = np.nonzero(np.abs(kappa) >= 0.05)[0]
    order = eligible[np.argsort(np.abs(kappa[eligible]))[:nmodes]]
    weights = 1.0 / np.maximum(np.abs(kappa[order]), 1e-3) ** 3
    z = weights * (rng.uniform(0.5, 1.0, nmodes) + 1j * rng.uniform(0.5, 1.0, nmodes))
    z /= np.linalg.norm(z)
    peak = np.max(np.abs(spec.vectors[:, order]), axis=0)
    bound = np.sum(np.abs(z) * np.abs(kappa[order]) ** 3 * peak) * dt * dt / 6.0
    if bound > residual_target:
        z *= residual_target / bound
    re_c = np.zeros(kappa.shape)
    im_c = np.zeros(kappa.shape)
    re_c[order] = z.real
    im_c[order] = z.imag
    return WaveFunction(re=spec.synthesize(re_c), im=spec.synthesize(im_c))


def low_mode_coefficients(rng, n, nmodes, decay=2.0):
    """Random coefficients concentrated on the lowest-energy modes.

    Eigenvalues ascend and energies are -kappa, so the low-energy modes sit at
    the end of the coefficient vector.
    """
    c = np.zeros(n)
    weights = rng.standard_normal(nmodes) / (1.0 + np.arange(nmodes)) ** decay
    c[n - nmodes:] = weights[::-1]
    return c
