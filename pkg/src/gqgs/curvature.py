"""Misiolek-criterion computations for flows on the sphere.

For Hamiltonian vector fields u = grad_perp(f), v = grad_perp(g) the
criterion is a quadratic form whose positivity along a stationary flow
certifies positive sectional curvature, hence conjugate points.  Three
variants are computed:

  mc_nu   -- the volume-preserving (L2 metric) form
             <Lap{f,g}, {f,g}> - <{Lap f, g}, {f,g}>;
  mc_A    -- the anisotropic-metric form, which decomposes as
             gamma * <f {z^2, g}, {f, g}> + mc_nu;
  mc_hat  -- the form on the one-dimensional central extension carrying the
             rotation (Coriolis) potential phi:
             mc_A - (int phi {f,g})^2 - a * <{phi, {f,g}}, g>.

Because mc_A is affine in the Lamb parameter gamma with a nonnegative slope
along the trade-wind current, each non-zonal direction g has a rotation
threshold gamma* = -mc_nu / slope beyond which the criterion turns positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import (
    l2_inner,
    laplacian,
    poisson_bracket,
    spectral_product,
    z_squared_field,
)
from .spectral import SQRT4PI, SpectralField

DEGENERACY_TOL = 1e-14


class ZonalDirection(ValueError):
    """Perturbation commutes with z^2; the rotation threshold is undefined."""


@dataclass(frozen=True)
class ExtendedVector:
    """A velocity field (through its stream function) plus a central charge."""

    f: SpectralField
    a: float = 0.0


@dataclass(frozen=True)
class MCReport:
    """Decomposition of the extended Misiolek criterion.

    gamma_threshold is the value of the Lamb parameter where mc_A crosses
    zero (0.0 if mc_nu >= 0 already, None when the direction is zonal and
    the gamma slope degenerates).  The second member's central charge never
    enters the formula and is therefore not reported.
    """

    mc_nu: float
    gamma_term: float
    mc_A: float
    cocycle_sq: float
    extension_term: float
    mc_hat: float
    gamma_threshold: float | None

    KEYS = ("mc_nu", "gamma_term", "mc_A", "cocycle_sq",
            "extension_term", "mc_hat", "gamma_threshold")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.KEYS}


def trade_wind(lmax: int = 2) -> SpectralField:
    """Stream function T(z) = (1/2) sqrt(15 / 8 pi) z^2 of the trade-wind current.

    Exact two-coefficient zonal expansion (degrees 0 and 2); a stationary
    solution of the flow for any zonal forcing.
    """
    c = 0.5 * np.sqrt(15.0 / (8.0 * np.pi))
    t = SpectralField.zeros(max(lmax, 2))
    t.coeffs[0, 0] = c * SQRT4PI / 3.0
    t.coeffs[2, 0] = c * (4.0 / 3.0) * np.sqrt(np.pi / 5.0)
    return t


def example_direction(lmax: int = 3) -> SpectralField:
    """The perturbation 15 z (1 - z^2) cos(2 lam), a single (3, 2) harmonic pair."""
    g = SpectralField.zeros(max(lmax, 3))
    g.coeffs[3, 2] = 0.5 * np.sqrt(480.0 * np.pi / 7.0)
    return g


def _working_lmax(f: SpectralField, g: SpectralField, lmax: int | None) -> int:
    # The bracket {f, g} is band-limited at lmax_f + lmax_g, so this default
    # makes every pairing below exact; pass a smaller lmax to study a fixed
    # truncation.
    return f.lmax + g.lmax if lmax is None else lmax


def _mc_nu_terms(f: SpectralField, g: SpectralField, lmax: int):
    br = poisson_bracket(f, g, lmax)
    nu = l2_inner(laplacian(br), br) - l2_inner(poisson_bracket(laplacian(f), g, lmax), br)
    return br, nu


def _gamma_term(f: SpectralField, g: SpectralField, br: SpectralField, lmax: int) -> float:
    zbr = poisson_bracket(z_squared_field(), g, lmax)
    return l2_inner(spectral_product(f, zbr, lmax), br)


def mc_nu(f: SpectralField, g: SpectralField, lmax: int | None = None) -> float:
    """L2-metric criterion <Lap{f,g}, {f,g}> - <{Lap f, g}, {f,g}>."""
    L = _working_lmax(f, g, lmax)
    _, nu = _mc_nu_terms(f, g, L)
    return nu


def mc_A(f: SpectralField, g: SpectralField, gamma: float, lmax: int | None = None) -> float:
    """Anisotropic-metric criterion gamma * <f {z^2, g}, {f,g}> + mc_nu."""
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    L = _working_lmax(f, g, lmax)
    br, nu = _mc_nu_terms(f, g, L)
    return gamma * _gamma_term(f, g, br, L) + nu


def cocycle(f: SpectralField, g: SpectralField, phi: SpectralField,
            lmax: int | None = None) -> float:
    """Central-extension cocycle Omega(u, v) = int phi {f, g}."""
    L = _working_lmax(f, g, lmax)
    return l2_inner(phi, poisson_bracket(f, g, L))


def _threshold(nu: float, gterm: float) -> float | None:
    if gterm <= DEGENERACY_TOL:
        return None
    return 0.0 if nu >= 0 else -nu / gterm


def mc_hat(u: ExtendedVector, v: ExtendedVector, phi: SpectralField,
           gamma: float, lmax: int | None = None) -> MCReport:
    """Extended criterion mc_A - (cocycle)^2 - a * <{phi, {f,g}}, g>.

    Only the first member's charge u.a enters; v.a cancels identically and
    is accepted for symmetry of the signature.
    """
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    f, g = u.f, v.f
    L = _working_lmax(f, g, lmax)
    br, nu = _mc_nu_terms(f, g, L)
    gterm = _gamma_term(f, g, br, L)
    mca = gamma * gterm + nu
    coc = l2_inner(phi, br)
    ext = l2_inner(poisson_bracket(phi, br, L), g)
    return MCReport(
        mc_nu=nu,
        gamma_term=gterm,
        mc_A=mca,
        cocycle_sq=coc * coc,
        extension_term=ext,
        mc_hat=mca - coc * coc - u.a * ext,
        gamma_threshold=_threshold(nu, gterm),
    )


def gamma_threshold(g: SpectralField, lmax: int | None = None) -> float:
    """Lamb-parameter threshold for conjugate points along the trade-wind current.

    Returns -mc_nu(T, g) / <T {z^2, g}, {T, g}> when mc_nu is negative and
    0.0 when it is already nonnegative.  Raises ZonalDirection when
    {z^2, g} vanishes (zonal g), where the slope in gamma degenerates.
    """
    t = trade_wind()
    L = _working_lmax(t, g, lmax)
    br, nu = _mc_nu_terms(t, g, L)
    gterm = _gamma_term(t, g, br, L)
    thr = _threshold(nu, gterm)
    if thr is None:
        raise ZonalDirection(
            "perturbation is zonal: {z^2, g} = 0 and the criterion is degenerate"
        )
    return thr
