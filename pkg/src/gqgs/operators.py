"""Spectral-space operators on the sphere.

Everything here acts on SpectralField coefficient sets: the Laplacian and
multiplication by z are exact sparse couplings, the anisotropic elliptic
operator gamma*z^2 - Laplacian is assembled as symmetric pentadiagonal bands
per longitude order and solved by a banded Cholesky factorization, and
quadratic nonlinearities (the Poisson bracket, pointwise products) go through
a padded transform grid so that no aliased energy enters the retained modes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import next_fast_len
from scipy.linalg import cho_solve_banded, cholesky_banded

from .spectral import (
    SQRT4PI,
    GridField,
    SpectralField,
    analysis,
    gauss_legendre,
    synthesis,
    synthesis_d_dz,
    z_coupling,
)


class SingularOperator(ValueError):
    """Elliptic solve requested outside the operator's range."""


def laplacian_eigenvalues(lmax: int) -> np.ndarray:
    l = np.arange(lmax + 1, dtype=float)
    return -l * (l + 1)


def laplacian(f: SpectralField) -> SpectralField:
    """Laplace-Beltrami operator: a(l, m) -> -l(l+1) a(l, m)."""
    return SpectralField(f.lmax, f.coeffs * laplacian_eigenvalues(f.lmax)[:, None])


def mul_z(f: SpectralField, lmax_out: int | None = None) -> SpectralField:
    """Multiply by z in coefficient space.

    The product couples degree l to l +- 1 within each order m.  By default
    the output keeps every generated mode (lmax + 1); pass lmax_out to
    truncate, e.g. back to lmax for fixed-truncation dynamics.
    """
    lmax = f.lmax
    if lmax_out is None:
        lmax_out = lmax + 1
    c = z_coupling(lmax)
    a = f.coeffs
    big = np.zeros((lmax + 2, lmax + 2), dtype=complex)
    big[1 : lmax + 2, : lmax + 1] += c * a  # c(l, m) a(l, m) feeds (l+1, m)
    big[:lmax, : lmax + 1] += c[:lmax, :] * a[1:, :]  # c(l-1, m) a(l, m) feeds (l-1, m)
    out = SpectralField.zeros(lmax_out)
    n = min(lmax_out + 1, lmax + 2)
    out.coeffs[:n, :n] = big[:n, :n]
    return out


@dataclass(frozen=True)
class BandedOperator:
    """Symmetric pentadiagonal block of gamma*z^2 - Laplacian at fixed order m.

    Row l of the block (l = m..lmax) has diagonal l(l+1) + gamma*(c(l-1,m)^2
    + c(l,m)^2) and couples to l +- 2 with gamma*c(l,m)*c(l+1,m); these are
    the exact matrix elements of z^2 in the orthonormal basis, obtained by
    composing two z-couplings through the extended degree range and
    truncating.  For gamma > 0 the block is positive definite.
    """

    m: int
    lmax: int
    gamma: float
    diag: np.ndarray
    off2: np.ndarray

    @property
    def size(self) -> int:
        return self.lmax + 1 - self.m

    def apply(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        if self.off2.size:
            y[:-2] += self.off2 * x[2:]
            y[2:] += self.off2 * x[:-2]
        return y

    def upper_banded(self) -> np.ndarray:
        """Matrix in scipy's upper banded storage (bandwidth 2)."""
        n = self.size
        ab = np.zeros((3, n))
        ab[2] = self.diag
        if self.off2.size:
            ab[0, 2:] = self.off2
        return ab

    def dense(self) -> np.ndarray:
        a = np.diag(self.diag)
        for k, v in enumerate(self.off2):
            a[k, k + 2] = a[k + 2, k] = v
        return a


def banded_operator(gamma: float, lmax: int, m: int) -> BandedOperator:
    c = z_coupling(lmax + 1)[:, m]
    l = np.arange(m, lmax + 1, dtype=float)
    czz = c[m : lmax + 1] ** 2
    czz_below = np.concatenate(([0.0], c[m : lmax] ** 2))
    diag = l * (l + 1) + gamma * (czz + czz_below)
    off2 = gamma * c[m : lmax - 1] * c[m + 1 : lmax] if lmax - m >= 2 else np.zeros(0)
    return BandedOperator(m, lmax, gamma, diag, off2)


class HelmholtzSolver:
    """Factorized application/inversion of gamma*z^2 - Laplacian at fixed lmax.

    One banded operator per order m; the Cholesky factors are computed once
    and are immutable afterwards, so a solver instance can be shared freely
    across threads.
    """

    def __init__(self, gamma: float, lmax: int):
        if gamma < 0:
            raise ValueError(f"gamma must be nonnegative, got {gamma}")
        self.gamma = float(gamma)
        self.lmax = lmax
        self.blocks = [banded_operator(self.gamma, lmax, m) for m in range(lmax + 1)]
        self._factors = None
        if self.gamma > 0:
            self._factors = [cholesky_banded(b.upper_banded()) for b in self.blocks]

    def apply(self, f: SpectralField) -> SpectralField:
        """Forward application (gamma*z^2 - Laplacian) f, truncated at lmax."""
        out = SpectralField.zeros(self.lmax)
        for m, block in enumerate(self.blocks):
            out.coeffs[m :, m] = block.apply(f.coeffs[m :, m])
        return out

    def solve(self, r: SpectralField) -> SpectralField:
        """Solve (gamma*z^2 - Laplacian) psi = r.

        For gamma = 0 the operator annihilates constants: r must then have
        (numerically) zero mean and the solution is returned mean-free.
        """
        out = SpectralField.zeros(self.lmax)
        if self.gamma == 0.0:
            scale = max(1.0, float(np.max(np.abs(r.coeffs))))
            if abs(r.coeffs[0, 0]) > 1e-12 * scale:
                raise SingularOperator(
                    "gamma = 0: the operator is singular on constants and the "
                    f"source has nonzero mean ({r.coeffs[0, 0]:.3e})"
                )
            eig = -laplacian_eigenvalues(self.lmax)
            eig[0] = 1.0  # constant mode stays zero
            out.coeffs = r.coeffs / eig[:, None]
            out.coeffs[0, 0] = 0.0
            return out
        for m, block in enumerate(self.blocks):
            col = r.coeffs[m :, m]
            rhs = np.column_stack((col.real, col.imag))
            sol = cho_solve_banded((self._factors[m], False), rhs)
            out.coeffs[m :, m] = sol[:, 0] + 1j * sol[:, 1]
        return out


@lru_cache(maxsize=32)
def helmholtz_solver(gamma: float, lmax: int) -> HelmholtzSolver:
    return HelmholtzSolver(gamma, lmax)


def helmholtz_apply(f: SpectralField, gamma: float) -> SpectralField:
    return helmholtz_solver(float(gamma), f.lmax).apply(f)


def helmholtz_solve(r: SpectralField, gamma: float) -> SpectralField:
    return helmholtz_solver(float(gamma), r.lmax).solve(r)


def d_dlambda(f: SpectralField) -> SpectralField:
    """Longitude derivative: a(l, m) -> i m a(l, m)."""
    m = np.arange(f.lmax + 1, dtype=float)[None, :]
    return SpectralField(f.lmax, f.coeffs * (1j * m))


def d_dz(f: SpectralField, nlat: int | None = None, nlon: int | None = None) -> GridField:
    """Pointwise d/dz on the grid.

    Gauss nodes exclude the poles, so the 1/(1 - z^2) factor in the Legendre
    derivative ladder is always finite.
    """
    if nlat is None:
        nlat = f.lmax + 1
    if nlon is None:
        nlon = 2 * (f.lmax + 1)
    return synthesis_d_dz(f, nlat, nlon)


def _padded_grid(deg_product: int, lmax_out: int, *degs: int) -> tuple[int, int]:
    # Quadrature must integrate (product of degree deg_product) x Y(lmax_out)
    # exactly; each factor must also be synthesizable on the grid.
    nlat = (deg_product + lmax_out) // 2 + 1
    nlon = deg_product + lmax_out + 1
    for d in (*degs, lmax_out):
        nlat = max(nlat, d + 1)
        nlon = max(nlon, 2 * d + 1)
    return nlat, next_fast_len(nlon)


def poisson_bracket(
    f: SpectralField, g: SpectralField, lmax: int | None = None
) -> SpectralField:
    """Area-preserving bracket {f, g} = f_z g_lam - f_lam g_z.

    Evaluated pointwise on a padded grid large enough that the quadratic
    product carries no aliasing into the retained modes, then analyzed back
    to `lmax` (defaults to the larger input truncation).
    """
    lout = max(f.lmax, g.lmax) if lmax is None else lmax
    nlat, nlon = _padded_grid(f.lmax + g.lmax, lout, f.lmax, g.lmax)
    fz = synthesis_d_dz(f, nlat, nlon).values
    gz = synthesis_d_dz(g, nlat, nlon).values
    fl = synthesis(d_dlambda(f), nlat, nlon).values
    gl = synthesis(d_dlambda(g), nlat, nlon).values
    bracket = GridField(fz * gl - fl * gz, gauss_legendre(nlat))
    return analysis(bracket, lout)


def spectral_product(
    f: SpectralField, g: SpectralField, lmax: int | None = None
) -> SpectralField:
    """Dealiased pointwise product f * g, truncated at `lmax`.

    The default keeps the full product degree lmax_f + lmax_g, i.e. the
    product is exact; retained modes are exact for any choice of `lmax`.
    """
    lout = f.lmax + g.lmax if lmax is None else lmax
    nlat, nlon = _padded_grid(f.lmax + g.lmax, lout, f.lmax, g.lmax)
    fv = synthesis(f, nlat, nlon).values
    gv = synthesis(g, nlat, nlon).values
    return analysis(GridField(fv * gv, gauss_legendre(nlat)), lout)


def integral(f: SpectralField) -> float:
    """Integral over the sphere, i.e. sqrt(4 pi) times the mean mode."""
    return SQRT4PI * float(f.coeffs[0, 0].real)


def l2_inner(f: SpectralField, g: SpectralField) -> float:
    """L2 pairing int f g over the sphere via the Parseval sum.

    The sum runs over the full +-m coefficient set; fields of different
    truncation pair over the common range (higher modes pair with zero).
    """
    n = min(f.lmax, g.lmax) + 1
    a = f.coeffs[:n, :n]
    b = g.coeffs[:n, :n]
    prod = (a * b.conj()).real
    return float(np.sum(prod[:, 0]) + 2.0 * np.sum(prod[:, 1:]))


def integral_power(f: SpectralField, exponent: int) -> float:
    """Integral of f**exponent via quadrature on a grid exact for that power."""
    if exponent == 1:
        return integral(f)
    deg = exponent * f.lmax
    nlat = deg // 2 + 1
    nlon = next_fast_len(max(deg + 1, 2 * f.lmax + 1))
    grid = synthesis(f, max(nlat, f.lmax + 1), nlon)
    row = np.sum(grid.values**exponent, axis=1) * (2.0 * np.pi / grid.nlon)
    return float(np.dot(grid.rule.weights, row))


def z_field(lmax: int) -> SpectralField:
    """The coordinate function z as a coefficient set (degree 1 zonal)."""
    if lmax < 1:
        raise ValueError("z needs lmax >= 1")
    out = SpectralField.zeros(lmax)
    out.coeffs[1, 0] = SQRT4PI / np.sqrt(3.0)
    return out


def z_squared_field(lmax: int = 2) -> SpectralField:
    """The function z^2 as a coefficient set (degrees 0 and 2, zonal)."""
    if lmax < 2:
        raise ValueError("z^2 needs lmax >= 2")
    out = SpectralField.zeros(lmax)
    out.coeffs[0, 0] = SQRT4PI / 3.0
    out.coeffs[2, 0] = (4.0 / 3.0) * np.sqrt(np.pi / 5.0)
    return out
