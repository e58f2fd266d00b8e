"""Four-field constrained dynamics unifying the wave and field systems.

Phase space carries (phi, p, varphi, pi) with two second-class constraints:

    c1 = varphi + K phi = 0,        c2 = pi = 0.

Consistency of the constraints fixes the multiplier v = -K p / hbar, which is
always substituted analytically, so the evolution is an honest linear ODE
system: d(phi)/dt = p/hbar, d(p)/dt = K varphi / hbar, d(varphi)/dt = v, and
d(pi)/dt = 0 identically once v is in place (the off-shell rate
(varphi + K phi)/hbar is exposed separately as a diagnostic). Both constraints
are exact invariants of the substituted flow, which makes constraint drift a
sharp integrator diagnostic.

Parameterizing the constraint surface by (varphi, p) reproduces the
Schrodinger system; parameterizing by (phi, p) reproduces the field system.
The reductions refuse off-shell input.
"""

from dataclasses import dataclass

import numpy as np

from . import quadrature
from .errors import OffShellError, StabilityError
from .field import FieldState
from .lattice import apply, inner_product, spectral_radius
from .schrodinger import WaveFunction, _field_array

RK4_STABILITY = 2.8  # |kappa| dt / hbar must stay below this
ONSHELL_RTOL = 1e-6


@dataclass(frozen=True)
class ConstrainedState:
    """Fields (phi, varphi) and momenta (p, pi) at one instant."""

    phi: np.ndarray
    p: np.ndarray
    varphi: np.ndarray
    pi: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        arrays = {}
        shape = None
        for name in ("phi", "p", "varphi", "pi"):
            a = _field_array(getattr(self, name), name)
            if shape is None:
                shape = a.shape
            elif a.shape != shape:
                raise ValueError(f"{name} has shape {a.shape}, expected {shape}")
            arrays[name] = a
        for name, a in arrays.items():
            object.__setattr__(self, name, a)
        object.__setattr__(self, "time", float(self.time))


@dataclass(frozen=True)
class ConstrainedTrajectory:
    """Time-ordered constrained-state samples."""

    times: np.ndarray
    states: tuple

    def __post_init__(self):
        t = _field_array(self.times, "times")
        states = tuple(self.states)
        if len(states) != t.shape[0]:
            raise ValueError("times and states must align")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", states)

    def stack(self, name):
        return np.stack([getattr(s, name) for s in self.states])


def multiplier_v(op, s):
    """Lagrange multiplier fixed by constraint preservation: v = -K p / hbar."""
    return -apply(op, s.p) / op.hbar


def constrained_rhs(op, s):
    """Time derivatives of (phi, p, varphi, pi) with the multiplier substituted."""
    dphi = s.p / op.hbar
    dp = apply(op, s.varphi) / op.hbar
    dvarphi = multiplier_v(op, s)
    dpi = np.zeros_like(s.pi)
    return dphi, dp, dvarphi, dpi


def offshell_pi_rate(op, s):
    """Diagnostic rate of pi before substitution: (varphi + K phi) / hbar.

    Vanishes weakly; it is the c1 constraint over hbar, i.e. minus the
    functional derivative of the Hamiltonian with respect to varphi.
    """
    return (s.varphi + apply(op, s.phi)) / op.hbar


def constrained_hamiltonian(op, s):
    """Canonical Hamiltonian including the multiplier term.

    (⟨p,p⟩ - ⟨varphi,varphi⟩) / 2 hbar - ⟨varphi, K phi⟩ / hbar + ⟨v, pi⟩.
    On shell it collapses to the field energy and to the norm functional of
    the reduced wave state.
    """
    grid = op.grid
    return (
        0.5 * (inner_product(s.p, s.p, grid) - inner_product(s.varphi, s.varphi, grid))
        / op.hbar
        - inner_product(s.varphi, apply(op, s.phi), grid) / op.hbar
        + inner_product(multiplier_v(op, s), s.pi, grid)
    )


def constraint_residuals(op, s):
    """(c1, c2) = (varphi + K phi, pi); both vanish on the constraint surface."""
    return s.varphi + apply(op, s.phi), np.array(s.pi)


def make_onshell(op, phi, p, time=0.0):
    """Constrained state on the constraint surface: varphi = -K phi, pi = 0."""
    phi = np.asarray(phi, dtype=float)
    return ConstrainedState(
        phi=phi,
        p=p,
        varphi=-apply(op, phi),
        pi=np.zeros_like(phi),
        time=time,
    )


def rk4_stability_bound(op):
    """Largest dt the RK4 step accepts: 2.8 hbar / max|kappa|."""
    return RK4_STABILITY * op.hbar / spectral_radius(op)


def step_rk4(op, s, dt):
    """Classical fourth-order Runge-Kutta step of the substituted system."""
    dt = float(dt)
    bound = rk4_stability_bound(op)
    if not 0.0 < dt < bound:
        raise StabilityError(dt, bound, "rk4")
    k = op.matrix
    hbar = op.hbar

    def rhs(phi, p, varphi):
        return p / hbar, (k @ varphi) / hbar, -(k @ p) / hbar

    y = (s.phi, s.p, s.varphi)
    k1 = rhs(*y)
    k2 = rhs(*(y[i] + 0.5 * dt * k1[i] for i in range(3)))
    k3 = rhs(*(y[i] + 0.5 * dt * k2[i] for i in range(3)))
    k4 = rhs(*(y[i] + dt * k3[i] for i in range(3)))
    out = [
        y[i] + dt * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0 for i in range(3)
    ]
    return ConstrainedState(
        phi=out[0], p=out[1], varphi=out[2], pi=s.pi, time=s.time + dt
    )


def rk4_trajectory(op, s0, dt, nsteps):
    states = [s0]
    for _ in range(int(nsteps)):
        states.append(step_rk4(op, states[-1], dt))
    times = s0.time + dt * np.arange(len(states))
    return ConstrainedTrajectory(times=times, states=tuple(states))


def _require_onshell(op, s):
    c1, c2 = constraint_residuals(op, s)
    scale = max(
        float(np.max(np.abs(s.varphi), initial=0.0)),
        float(np.max(np.abs(apply(op, s.phi)), initial=0.0)),
        float(np.max(np.abs(s.p), initial=0.0)),
        float(np.max(np.abs(s.pi), initial=0.0)),
    )
    tol = ONSHELL_RTOL * scale
    worst = max(float(np.max(np.abs(c1), initial=0.0)), float(np.max(np.abs(c2), initial=0.0)))
    if worst > tol:
        raise OffShellError(
            f"constraint residual {worst:.3e} exceeds tolerance {tol:.3e}"
        )


def reduce_to_wave(op, s):
    """Wave-picture parameterization (re, im) = (varphi, p); on-shell only."""
    _require_onshell(op, s)
    return WaveFunction(re=s.varphi, im=s.p, time=s.time)


def reduce_to_field(op, s):
    """Field-picture parameterization (phi, p); on-shell only."""
    _require_onshell(op, s)
    return FieldState(phi=s.phi, p=s.p, time=s.time)


def lagrangian_residuals(op, traj):
    """Residuals of the two Euler-Lagrange equations along a trajectory.

    r1 = hbar^2 phi_ddot - K varphi on interior time samples (central second
    differences), r2 = varphi + K phi on all samples.
    """
    dt = quadrature.uniform_dt(traj.times)
    phi = traj.stack("phi")
    varphi = traj.stack("varphi")
    r1 = op.hbar * op.hbar * quadrature.d2dt2_interior(phi, dt) - varphi[1:-1] @ op.matrix
    r2 = varphi + phi @ op.matrix
    return r1, r2


def singular_action(op, traj):
    """Action of the two-field theory along a sampled trajectory.

    Integrand: (hbar/2) phi_dot^2 + varphi^2 / 2 hbar + varphi (K phi) / hbar.
    Shifting varphi by -K phi splits it into the field action plus the square
    of the shifted field, which is the decoupling checked in the tests.
    """
    dt = quadrature.uniform_dt(traj.times)
    phi = traj.stack("phi")
    varphi = traj.stack("varphi")
    phi_dot = quadrature.ddt(phi, dt)
    kphi = phi @ op.matrix
    density = (
        0.5 * op.hbar * phi_dot * phi_dot
        + 0.5 * varphi * varphi / op.hbar
        + varphi * kphi / op.hbar
    )
    integrand = op.grid.dx * density.sum(axis=1)
    return quadrature.trapezoid(integrand, dt)
