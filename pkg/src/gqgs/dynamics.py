"""Time integration of the rotating quasi-geostrophic flow on the sphere.

The prognostic variable is the advected scalar q (potential vorticity),
related to the stream function psi by

    q = (gamma z^2 - Laplacian) psi + phi,      phi = 2 z / Ro + 2 z h,

where gamma is the Lamb parameter, Ro the Rossby number and h the bottom
topography.  The flow transports q,

    dq/dt = -{psi, q},

which conserves the mean of q, every integral of a function of q, and the
quadratic energy of the underlying weak metric.  Time stepping is classical
fixed-step RK4 so conservation drift is a clean fourth-order convergence
diagnostic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .operators import (
    d_dlambda,
    helmholtz_solver,
    integral,
    integral_power,
    l2_inner,
    mul_z,
    poisson_bracket,
    z_field,
    z_squared_field,
)
from .spectral import SpectralField, synthesis, synthesis_d_dz


class UnstableStep(RuntimeError):
    """Advective stability bound violated for the configured time step."""


def lamb_parameter(omega: float, radius: float, gravity: float, depth: float) -> float:
    """Lamb parameter 4 Omega^2 a^2 / (g H) from physical constants."""
    return 4.0 * omega**2 * radius**2 / (gravity * depth)


def lamb_parameter_from_burger(radius: float, length: float, burger: float) -> float:
    """Lamb parameter r^2 / (L^2 Bu) from a length scale and Burger number."""
    return radius**2 / (length**2 * burger)


@dataclass
class ModelParams:
    """Model configuration: physics, truncation and stepping settings."""

    gamma: float
    rossby: float = np.inf
    topography: SpectralField | None = None
    lmax: int = 32
    dt: float = 0.01
    t_end: float = 1.0
    output_every: int = 10
    cfl_constant: float = 0.5
    stability_mode: str = "warn"  # warn | abort | off

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")
        if not self.rossby > 0:
            raise ValueError(f"rossby must be positive (or inf), got {self.rossby}")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.lmax < 2:
            raise ValueError(f"lmax must be at least 2, got {self.lmax}")
        if self.output_every < 1:
            raise ValueError("output_every must be a positive step count")
        if self.stability_mode not in ("warn", "abort", "off"):
            raise ValueError(f"unknown stability mode {self.stability_mode!r}")

    @cached_property
    def coriolis_potential(self) -> SpectralField:
        """phi = 2 z / Ro + 2 z h, band-limited at lmax."""
        phi = SpectralField.zeros(self.lmax)
        if np.isfinite(self.rossby):
            phi = phi + (2.0 / self.rossby) * z_field(self.lmax)
        if self.topography is not None:
            h = self.topography.resized(self.lmax)
            phi = phi + 2.0 * mul_z(h, lmax_out=self.lmax)
        return phi


@dataclass
class SimState:
    """Potential-vorticity coefficients plus the simulation clock."""

    q: SpectralField
    t: float = 0.0


@dataclass
class Diagnostics:
    """Scalar conservation diagnostics of one state."""

    t: float
    mean_pv: float
    enstrophy: float
    casimir3: float
    energy: float
    max_abs_q: float
    spectral_tail: float

    FIELDS = ("t", "mean_pv", "enstrophy", "casimir3", "energy", "max_abs_q", "spectral_tail")

    def as_row(self) -> tuple[float, ...]:
        return (self.t, self.mean_pv, self.enstrophy, self.casimir3,
                self.energy, self.max_abs_q, self.spectral_tail)


def pv_from_stream(psi: SpectralField, p: ModelParams) -> SpectralField:
    """q = (gamma z^2 - Laplacian) psi + phi via the banded operator."""
    solver = helmholtz_solver(p.gamma, p.lmax)
    return solver.apply(psi.resized(p.lmax)) + p.coriolis_potential


def stream_from_pv(q: SpectralField, p: ModelParams) -> SpectralField:
    """Invert q = (gamma z^2 - Laplacian) psi + phi for the stream function."""
    solver = helmholtz_solver(p.gamma, p.lmax)
    return solver.solve(q.resized(p.lmax) - p.coriolis_potential)


def rhs(state: SimState, p: ModelParams) -> SpectralField:
    """Tendency dq/dt = -{psi, q} at fixed truncation."""
    return _rhs_q(state.q, p)


def _rhs_q(q: SpectralField, p: ModelParams) -> SpectralField:
    psi = stream_from_pv(q, p)
    return -poisson_bracket(psi, q, lmax=p.lmax)


def max_velocity(psi: SpectralField) -> float:
    """Max of |grad psi| on the default grid (the advecting speed)."""
    nlat, nlon = psi.lmax + 1, 2 * (psi.lmax + 1)
    pz = synthesis_d_dz(psi, nlat, nlon)
    pl = synthesis(d_dlambda(psi), nlat, nlon)
    one_minus_z2 = 1.0 - pz.rule.nodes**2
    speed2 = one_minus_z2[:, None] * pz.values**2 + pl.values**2 / one_minus_z2[:, None]
    return float(np.sqrt(np.max(speed2)))


def _stability_check(state: SimState, p: ModelParams) -> None:
    if p.stability_mode == "off":
        return
    u = max_velocity(stream_from_pv(state.q, p))
    number = p.dt * u * p.lmax
    if number > p.cfl_constant:
        msg = (
            f"advective stability bound violated at t={state.t:.6g}: "
            f"dt * max|u| * lmax = {number:.3g} > {p.cfl_constant:.3g}"
        )
        if p.stability_mode == "abort":
            raise UnstableStep(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=3)


def step_rk4(state: SimState, p: ModelParams) -> SimState:
    """One classical fourth-order Runge-Kutta step of size dt."""
    _stability_check(state, p)
    q, dt = state.q, p.dt
    k1 = _rhs_q(q, p)
    k2 = _rhs_q(q + (0.5 * dt) * k1, p)
    k3 = _rhs_q(q + (0.5 * dt) * k2, p)
    k4 = _rhs_q(q + dt * k3, p)
    qn = q + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return SimState(qn, state.t + dt)


def energy(state: SimState, p: ModelParams) -> float:
    """Quadratic energy of the weak metric.

    E = (1/2) [ <psi, (gamma z^2 - Laplacian) psi>
                - (int psi gamma z^2)^2 / int gamma z^2 ];
    the second (horizontality) term is omitted for gamma = 0, where the
    metric has no z^2 part.
    """
    psi = stream_from_pv(state.q, p)
    solver = helmholtz_solver(p.gamma, p.lmax)
    e = 0.5 * l2_inner(psi, solver.apply(psi))
    if p.gamma > 0:
        proj = l2_inner(psi, z_squared_field(p.lmax))
        e -= 0.5 * (3.0 * p.gamma / (4.0 * np.pi)) * proj * proj
    return e


def spectral_tail(q: SpectralField) -> float:
    """Energy in degrees above 0.9 lmax (Parseval convention, full +-m set)."""
    cut = 0.9 * q.lmax
    l = np.arange(q.lmax + 1)
    mask = (l > cut)[:, None]
    power = np.abs(q.coeffs) ** 2
    weighted = np.where(mask, power, 0.0)
    return float(np.sum(weighted[:, 0]) + 2.0 * np.sum(weighted[:, 1:]))


def diagnostics(state: SimState, p: ModelParams) -> Diagnostics:
    q = state.q
    grid = synthesis(q)
    return Diagnostics(
        t=state.t,
        mean_pv=integral(q),
        enstrophy=l2_inner(q, q),
        casimir3=integral_power(q, 3),
        energy=energy(state, p),
        max_abs_q=float(np.max(np.abs(grid.values))),
        spectral_tail=spectral_tail(q),
    )


def run(initial: SimState, p: ModelParams, sink=None) -> SimState:
    """Advance to t_end, emitting snapshots and diagnostics along the way.

    `sink` is any object with emit_snapshot(state) and emit_diagnostics(diag)
    methods (see the cli module for the file-writing one); pass None to run
    silently.  Emission happens at the initial state, every `output_every`
    steps, and at the final state.  t_end is realized as round(t_end / dt)
    steps of size dt.
    """
    state = initial
    _emit(sink, state, p)
    n_steps = int(round(p.t_end / p.dt)) if p.t_end > 0 else 0
    for step in range(1, n_steps + 1):
        state = step_rk4(state, p)
        if step % p.output_every == 0 or step == n_steps:
            _emit(sink, state, p)
    return state


def _emit(sink, state: SimState, p: ModelParams) -> None:
    if sink is None:
        return
    sink.emit_snapshot(state)
    sink.emit_diagnostics(diagnostics(state, p))


# ---------------------------------------------------------------------------
# Initial-condition presets (stream functions; turn into states with
# pv_from_stream).
# ---------------------------------------------------------------------------

def rossby_haurwitz(l: int, m: int, amplitude: float, lmax: int) -> SpectralField:
    """Single-harmonic traveling-wave stream function, unit L2 norm times amplitude."""
    psi = SpectralField.zeros(lmax)
    if m == 0:
        psi.coeffs[l, 0] = amplitude
    else:
        psi.coeffs[l, m] = amplitude / np.sqrt(2.0)
    return psi


def random_stream_function(
    lmax: int, seed: int = 0, slope: float = -2.0, amplitude: float = 1.0
) -> SpectralField:
    """Random-phase stream function with power-law degree spectrum l**slope.

    Deterministic for a given seed; normalized to unit L2 norm before the
    amplitude is applied.
    """
    rng = np.random.default_rng(seed)
    psi = SpectralField.zeros(lmax)
    for l in range(1, lmax + 1):
        sigma = float(l) ** (slope / 2.0)
        psi.coeffs[l, 0] = sigma * rng.standard_normal()
        re = rng.standard_normal(l)
        im = rng.standard_normal(l)
        psi.coeffs[l, 1 : l + 1] = sigma * (re + 1j * im) / np.sqrt(2.0)
    norm = np.sqrt(l2_inner(psi, psi))
    return (amplitude / norm) * psi
