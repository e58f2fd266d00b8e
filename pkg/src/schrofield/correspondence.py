"""Maps between wave functions and the real potential field.

The central identity: Psi = -K phi + i p solves the Schrodinger system
whenever (phi, p) solves the field system, exactly at the discrete level.
`quantize` applies that map; `dequantize` inverts it by solving the elliptic
equation K C = -re(Psi(0)) for the integration constant and then integrating
the imaginary part in time (in closed form per eigenmode here; by trapezoid
quadrature in `dequantize_quadrature`, which works on raw integrator output).

The inversion is unique only up to zero modes of K: the pure imaginary,
time-independent wave functions i Pi with K Pi = 0 map to nothing. That
kernel is surfaced explicitly through `kernel_basis` and through the
obstruction error of the elliptic solve, never hidden.

`wave_to_field` and `field_to_wave` are the two solution-transport maps
between the systems; their composition is -K applied componentwise.
"""

from dataclasses import dataclass

import numpy as np

from . import quadrature
from .field import FieldState, FieldTrajectory, energy_densities
from .lattice import apply, solve_elliptic
from .schrodinger import WaveFunction, WaveTrajectory


@dataclass(frozen=True, eq=False)
class KernelBasis:
    """Orthonormal basis of the kernel of K (may be empty)."""

    modes: np.ndarray  # shape (n, n_kernel), dx-orthonormal columns
    tolerance: float

    def __post_init__(self):
        m = np.array(self.modes, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "modes", m)

    @property
    def count(self):
        return self.modes.shape[1]


def quantize(op, s):
    """Wave function generated by a field state: re = -K phi, im = p."""
    return WaveFunction(re=-apply(op, s.phi), im=s.p, time=s.time)


def field_to_wave(op, s):
    """Transport a field-system solution to a wave-system solution (= quantize)."""
    return quantize(op, s)


def wave_to_field(op, psi):
    """Transport a wave-system solution to a field-system solution.

    phi = re(Psi), p = -K im(Psi). Annihilates exactly the kernel states
    i Pi, which is the non-invertible direction of the correspondence.
    """
    return FieldState(phi=psi.re, p=-apply(op, psi.im), time=psi.time)


def quantize_trajectory(op, traj):
    """Pointwise quantize; Schrodinger residual decays at second order in dt."""
    states = tuple(quantize(op, s) for s in traj.states)
    return WaveTrajectory(times=traj.times, states=states)


def kernel_basis(spec):
    """Eigenvectors of K with |kappa| below the zero-mode tolerance."""
    idx = list(spec.zero_modes)
    modes = spec.vectors[:, idx] if idx else np.zeros((spec.operator.n, 0))
    return KernelBasis(modes=np.array(modes), tolerance=spec.zero_mode_tolerance)


def dequantize(spec, psi0, t, tol=1e-10):
    """Reconstruct the field state at time t from the t=0 wave function.

    The integration constant C solves K C = -re(psi0) (zero-mode-free
    convention; obstruction raised if re(psi0) has kernel content above tol).
    The momentum is the imaginary part of the exactly propagated wave
    function, and phi(t) = C + (1/hbar) int_0^t p, evaluated mode-wise in
    closed form so no quadrature error enters.
    """
    hbar = spec.hbar
    c_const = spec.coefficients(solve_elliptic(spec, -psi0.re, tol))
    r = spec.coefficients(psi0.re)
    s = spec.coefficients(psi0.im)

    kappa = spec.eigenvalues
    zero = np.zeros(kappa.shape, dtype=bool)
    zero[list(spec.zero_modes)] = True
    kappa_safe = np.where(zero, 1.0, kappa)
    theta = kappa_safe * (float(t) / hbar)
    cos_t, sin_t = np.cos(theta), np.sin(theta)

    # int_0^t im(tau) dtau per mode, then phi = C + integral / hbar.
    integral = (s * sin_t + r * (1.0 - cos_t)) * (hbar / kappa_safe)
    phi_c = c_const + integral / hbar
    p_c = s * cos_t + r * sin_t
    if zero.any():
        phi_c[zero] = c_const[zero] + s[zero] * (float(t) / hbar)
        p_c[zero] = s[zero]
    return FieldState(
        phi=spec.synthesize(phi_c), p=spec.synthesize(p_c), time=psi0.time + float(t)
    )


def dequantize_quadrature(spec, traj, tol=1e-10):
    """Reconstruct a field trajectory from wave samples by trapezoid integration.

    Works on output of any integrator: p is copied from the stored imaginary
    parts and phi accumulates their running trapezoid integral on top of the
    elliptic constant. Requires a uniform time grid starting at t = 0.
    """
    dt = quadrature.uniform_dt(traj.times)
    if abs(float(traj.times[0])) > 1e-12 * max(dt, 1.0):
        raise ValueError("trajectory must start at t = 0")
    c_const = solve_elliptic(spec, -traj.states[0].re, tol)
    im = traj.im_matrix()
    phi_all = c_const + quadrature.cumulative_trapezoid(im, dt) / spec.hbar
    states = tuple(
        FieldState(phi=phi_all[k], p=im[k], time=traj.times[k])
        for k in range(im.shape[0])
    )
    return FieldTrajectory(times=traj.times, states=states)


def probability_and_phase(op, s):
    """Probability density and phase of the generated wave function.

    P = p^2 + (K phi)^2 pointwise, which equals |quantize(s)|^2 exactly and
    2 hbar E with E the field energy density. The phase uses the
    quadrant-correct two-argument arctangent of (p, -K phi); only its
    squared-tangent relation tan^2(S/hbar) = T/U is branch-independent.
    """
    kphi = apply(op, s.phi)
    p_dens = s.p * s.p + kphi * kphi
    phase = op.hbar * np.arctan2(s.p, -kphi)
    return p_dens, phase


def current_residual(op, traj, p_floor_rel=1e-8):
    """Residual of the energy-transport equation along a field trajectory.

    r = dE/dt + div(2 hbar^{-2} E grad S) with the gradient carrying the
    quantum scale hbar / sqrt(2m), time derivatives central on interior
    samples, and S unwrapped along x (period 2 pi hbar) before
    differentiating. Entries are NaN where the density falls below
    p_floor_rel times its trajectory maximum (the phase is undefined at
    nodes) and at the two points nearest each edge, where the spatial
    stencils do not fit. Returns an array of shape (len(times) - 2, n)
    aligned with traj.times[1:-1].
    """
    dt = quadrature.uniform_dt(traj.times)
    hbar = op.hbar
    scale = hbar / np.sqrt(2.0 * op.mass)
    dx = op.grid.dx

    e_all = np.stack([energy_densities(op, s)[2] for s in traj.states])
    p_all = []
    s_all = []
    for s in traj.states:
        p_dens, phase = probability_and_phase(op, s)
        p_all.append(p_dens)
        s_all.append(np.unwrap(phase, period=2.0 * np.pi * hbar))
    p_all = np.stack(p_all)
    s_all = np.stack(s_all)

    def grad_x(f):
        out = np.full_like(f, np.nan)
        out[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / (2.0 * dx)
        return out

    de_dt = quadrature.ddt_interior(e_all, dt)
    flux = 2.0 * e_all[1:-1] * (scale * grad_x(s_all[1:-1])) / (hbar * hbar)
    residual = de_dt + scale * grad_x(flux)

    floor = p_floor_rel * float(np.max(p_all))
    residual[p_all[1:-1] < floor] = np.nan
    return residual
