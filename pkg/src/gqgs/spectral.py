"""Spherical-harmonic analysis and synthesis on the unit sphere.

The sphere is coordinatized by the axial coordinate z in (-1, 1) and the
longitude lam in [0, 2*pi), with area element dz dlam.  Latitude circles are
placed at Gauss-Legendre nodes so that quadrature in z is exact for
polynomials, while the longitude direction uses a uniform grid and the FFT.

The basis is the orthonormal complex spherical harmonics

    Y(l, m) = P(l, m, z) * exp(i m lam),

with the Condon-Shortley sign carried by the associated Legendre functions
P(l, m, z).  A real field stores only its m >= 0 coefficients; negative
orders are implied by a(l, -m) = (-1)^m conj(a(l, m)).

Transforms here are the plain O(lmax^3) matrix kind, which is entirely
adequate at the truncations this package targets (lmax <= 128).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SQRT4PI = float(np.sqrt(4.0 * np.pi))


class GridTooSmall(ValueError):
    """Grid is too coarse to represent the requested truncation exactly."""


class RealityViolated(ValueError):
    """Coefficients do not describe a real-valued field."""


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes (ascending, in (-1, 1)) and positive weights."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.nodes.size


@lru_cache(maxsize=256)
def gauss_legendre(n: int) -> QuadratureRule:
    """Return the n-point Gauss-Legendre rule on [-1, 1].

    The rule integrates polynomials of degree <= 2n - 1 exactly and its
    weights sum to 2.  Rules are cached and immutable (arrays read-only).
    """
    if n < 1:
        raise ValueError(f"quadrature size must be a positive integer, got {n}")
    nodes, weights = np.polynomial.legendre.leggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights)


def alp_table(lmax: int, nodes) -> np.ndarray:
    """Tabulate normalized associated Legendre functions at the given nodes.

    Returns an array of shape (len(nodes), lmax + 1, lmax + 1) indexed
    [node, l, m]; entries with m > l are zero.  The normalization makes the
    harmonics P(l, m, z) * exp(i m lam) orthonormal for the measure dz dlam,
    i.e. 2*pi * int P(l, m, z)^2 dz = 1.  Values are generated by the usual
    stable three-term recurrence in l at fixed m, seeded along the sectoral
    diagonal (which carries the Condon-Shortley sign).
    """
    if lmax < 0:
        raise ValueError(f"lmax must be nonnegative, got {lmax}")
    z = np.asarray(nodes, dtype=float)
    s = np.sqrt(1.0 - z * z)
    p = np.zeros((z.size, lmax + 1, lmax + 1))
    p[:, 0, 0] = 1.0 / SQRT4PI
    for m in range(1, lmax + 1):
        p[:, m, m] = -np.sqrt((2 * m + 1) / (2.0 * m)) * s * p[:, m - 1, m - 1]
    for m in range(lmax):
        p[:, m + 1, m] = np.sqrt(2 * m + 3.0) * z * p[:, m, m]
        for l in range(m + 2, lmax + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(
                ((2 * l + 1.0) * (l - 1 - m) * (l - 1 + m))
                / ((2 * l - 3.0) * (l - m) * (l + m))
            )
            p[:, l, m] = a * z * p[:, l - 1, m] - b * p[:, l - 2, m]
    return p


def z_coupling(lmax: int) -> np.ndarray:
    """Coefficients c(l, m) of z * Y(l, m) = c(l, m) Y(l+1, m) + c(l-1, m) Y(l-1, m).

    Shape (lmax + 1, lmax + 1), zero where m > l.
    """
    l = np.arange(lmax + 1, dtype=float)[:, None]
    m = np.arange(lmax + 1, dtype=float)[None, :]
    with np.errstate(invalid="ignore"):
        c = np.sqrt(((l + 1 - m) * (l + 1 + m)) / ((2 * l + 1) * (2 * l + 3)))
    return np.where(m <= l, c, 0.0)


def alp_deriv_table(lmax: int, nodes) -> np.ndarray:
    """Tabulate d/dz of the normalized associated Legendre functions.

    Uses the exact ladder relation
        (1 - z^2) dP(l, m)/dz = (l + 1) c(l-1, m) P(l-1, m) - l c(l, m) P(l+1, m)
    where c are the z-coupling coefficients; nodes must avoid z = +-1.
    """
    z = np.asarray(nodes, dtype=float)
    p = alp_table(lmax + 1, z)
    c = z_coupling(lmax + 1)
    dp = np.zeros((z.size, lmax + 1, lmax + 1))
    one_minus_z2 = 1.0 - z * z
    for m in range(lmax + 1):
        for l in range(m, lmax + 1):
            acc = -l * c[l, m] * p[:, l + 1, m]
            if l - 1 >= m:
                acc = acc + (l + 1) * c[l - 1, m] * p[:, l - 1, m]
            dp[:, l, m] = acc / one_minus_z2
    return dp


@dataclass
class SpectralField:
    """Spherical-harmonic coefficients of a real scalar field.

    coeffs[l, m] multiplies Y(l, m) for 0 <= m <= l <= lmax; the m > l
    triangle is zero and the negative orders are implied by reality.
    """

    lmax: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        n = self.lmax + 1
        if c.shape != (n, n):
            raise ValueError(
                f"coefficient array must have shape ({n}, {n}), got {c.shape}"
            )
        self.coeffs = c

    @classmethod
    def zeros(cls, lmax: int) -> "SpectralField":
        return cls(lmax, np.zeros((lmax + 1, lmax + 1), dtype=complex))

    def copy(self) -> "SpectralField":
        return SpectralField(self.lmax, self.coeffs.copy())

    def resized(self, lmax: int) -> "SpectralField":
        """Zero-pad or truncate to a new maximum degree."""
        if lmax == self.lmax:
            return self.copy()
        out = np.zeros((lmax + 1, lmax + 1), dtype=complex)
        n = min(lmax, self.lmax) + 1
        out[:n, :n] = self.coeffs[:n, :n]
        return SpectralField(lmax, out)

    def validate(self) -> "SpectralField":
        """Check finiteness and the m <= l storage convention; return self."""
        if not np.all(np.isfinite(self.coeffs.view(float))):
            raise ValueError("non-finite spectral coefficient")
        bad = np.triu(self.coeffs, k=1)
        if np.any(bad != 0):
            raise ValueError("nonzero coefficient with m > l")
        return self

    # Linear-space conveniences; these keep field algebra readable downstream.
    def __add__(self, other: "SpectralField") -> "SpectralField":
        if other.lmax != self.lmax:
            raise ValueError("degree mismatch in field addition")
        return SpectralField(self.lmax, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        if other.lmax != self.lmax:
            raise ValueError("degree mismatch in field subtraction")
        return SpectralField(self.lmax, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.lmax, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.lmax, -self.coeffs)


@dataclass
class GridField:
    """Real values on a Gauss-Legendre (z) x uniform (longitude) grid."""

    values: np.ndarray
    rule: QuadratureRule

    @property
    def nlat(self) -> int:
        return self.values.shape[0]

    @property
    def nlon(self) -> int:
        return self.values.shape[1]

    @property
    def longitudes(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.nlon) / self.nlon


@lru_cache(maxsize=64)
def _tables(lmax: int, nlat: int):
    rule = gauss_legendre(nlat)
    return rule, alp_table(lmax, rule.nodes)


@lru_cache(maxsize=64)
def _deriv_tables(lmax: int, nlat: int):
    rule = gauss_legendre(nlat)
    return rule, alp_deriv_table(lmax, rule.nodes)


def default_grid_shape(lmax: int) -> tuple[int, int]:
    """Smallest grid used by default: nlat = lmax + 1, nlon = 2 (lmax + 1)."""
    return lmax + 1, 2 * (lmax + 1)


def _check_grid(lmax: int, nlat: int, nlon: int) -> None:
    if nlat < lmax + 1 or nlon < 2 * lmax + 1:
        raise GridTooSmall(
            f"grid {nlat} x {nlon} cannot hold truncation lmax={lmax}; "
            f"need nlat >= {lmax + 1} and nlon >= {2 * lmax + 1}"
        )


def _fourier_to_grid(fourier: np.ndarray, nlon: int) -> np.ndarray:
    # fourier[k, m] holds the m-th longitude coefficient on latitude row k.
    half = np.zeros((fourier.shape[0], nlon // 2 + 1), dtype=complex)
    half[:, : fourier.shape[1]] = fourier
    half[:, 0] = half[:, 0].real
    return np.fft.irfft(half, n=nlon, axis=1) * nlon


def synthesis(
    spec: SpectralField, nlat: int | None = None, nlon: int | None = None
) -> GridField:
    """Evaluate a coefficient set pointwise on an nlat x nlon grid.

    The m = 0 coefficients of a real field must be real; an implied imaginary
    part above 1e-10 raises RealityViolated, smaller residues are discarded.
    """
    lmax = spec.lmax
    if nlat is None or nlon is None:
        dlat, dlon = default_grid_shape(lmax)
        nlat = dlat if nlat is None else nlat
        nlon = dlon if nlon is None else nlon
    _check_grid(lmax, nlat, nlon)
    rule, p = _tables(lmax, nlat)
    fourier = np.einsum("klm,lm->km", p, spec.coeffs)
    residue = float(np.max(np.abs(fourier[:, 0].imag), initial=0.0))
    if residue > 1e-10:
        raise RealityViolated(
            f"zonal coefficients imply an imaginary part of {residue:.3e}"
        )
    return GridField(_fourier_to_grid(fourier, nlon), rule)


def synthesis_d_dz(spec: SpectralField, nlat: int, nlon: int) -> GridField:
    """Pointwise d/dz of the field, via the Legendre derivative ladder."""
    _check_grid(spec.lmax, nlat, nlon)
    rule, dp = _deriv_tables(spec.lmax, nlat)
    fourier = np.einsum("klm,lm->km", dp, spec.coeffs)
    return GridField(_fourier_to_grid(fourier, nlon), rule)


def analysis(field: GridField, lmax: int) -> SpectralField:
    """Project grid values onto harmonics up to lmax.

    Exact (to roundoff) whenever the grid resolves the integrand, i.e. for
    band-limited input on a grid satisfying nlat >= lmax + 1 and
    nlon >= 2 lmax + 1.
    """
    nlat, nlon = field.nlat, field.nlon
    _check_grid(lmax, nlat, nlon)
    rule, p = _tables(lmax, nlat)
    if field.rule is not rule and not np.array_equal(field.rule.nodes, rule.nodes):
        p = alp_table(lmax, field.rule.nodes)
    fourier = np.fft.rfft(field.values, axis=1)[:, : lmax + 1]
    weighted = fourier * (2.0 * np.pi / nlon) * field.rule.weights[:, None]
    return SpectralField(lmax, np.einsum("klm,km->lm", p, weighted))
