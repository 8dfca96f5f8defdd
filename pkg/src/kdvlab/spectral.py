"""Fourier-side representation of real mean-zero fields on the 2*pi torus.

A field u(x) = sum_xi c(xi) e^{i xi x} is stored through its coefficients
c(xi) = (1/2pi) int_0^{2pi} u(x) e^{-i xi x} dx for 0 <= xi <= K only; the
negative half of the band is implied by c(-xi) = conj(c(xi)), so Hermitian
symmetry holds by construction and never has to be re-checked.  The collocation
grid carries M >= 4K+1 points, which makes the quadratic product below exact
(no aliasing back into the band, which only needs M > 3K).

Norms follow the counting-measure convention: ||u||_{H^s}^2 =
sum_{xi != 0} (1+xi^2)^s |c(xi)|^2, so cos(x) has L2 norm sqrt(1/2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Sobolev indices the package promises to handle; outside this window the
# discrete weights over- or underflow long before the math goes wrong.
S_MIN = -0.75
S_MAX = 6.0


class GridMismatchError(ValueError):
    """Two fields from different grids were combined."""


class AliasingError(ValueError):
    """A physical-space request cannot represent the band exactly."""


def _check_s(s: float) -> float:
    s = float(s)
    if not S_MIN <= s <= S_MAX:
        raise ValueError(f"Sobolev index s={s} outside supported range [{S_MIN}, {S_MAX}]")
    return s


@dataclass(frozen=True)
class GridSpec:
    """Spectral band |xi| <= K plus an M-point collocation grid, M >= 4K+1."""

    K: int
    M: int

    def __post_init__(self) -> None:
        if self.K < 2:
            raise ValueError(f"K={self.K}: need at least two modes")
        if self.M < 4 * self.K + 1:
            raise AliasingError(f"M={self.M} < 4K+1={4 * self.K + 1}: product dealiasing would fail")

    @classmethod
    def for_modes(cls, K: int) -> "GridSpec":
        """Smallest even grid satisfying the dealiasing margin."""
        return cls(K, 4 * K + 4)

    def nodes(self) -> np.ndarray:
        """Collocation points x_j = 2*pi*j/M."""
        return 2.0 * np.pi * np.arange(self.M) / self.M

    def wavenumbers(self) -> np.ndarray:
        """Nonnegative half of the band, 0..K."""
        return np.arange(self.K + 1)


@dataclass
class SpectralField:
    """Real field on the torus held as its nonnegative-frequency coefficients.

    ``coeffs[xi]`` is c(xi) for xi = 0..K.  The zero mode is usually 0 (the
    flows here preserve mean zero exactly) but a quadratic product legitimately
    carries one, so the constructor does not force it; use
    :meth:`require_mean_zero` where the invariant matters.
    """

    grid: GridSpec
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (self.grid.K + 1,):
            raise GridMismatchError(f"coefficient array has shape {c.shape}, expected ({self.grid.K + 1},)")
        self.coeffs = c

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, grid: GridSpec) -> "SpectralField":
        return cls(grid, np.zeros(grid.K + 1, dtype=np.complex128))

    @classmethod
    def from_modes(cls, grid: GridSpec, modes: dict[int, complex]) -> "SpectralField":
        """Build from {xi: c(xi)} with positive xi; the mirror half is implied.

        ``from_modes(g, {1: 0.5})`` is cos(x).
        """
        c = np.zeros(grid.K + 1, dtype=np.complex128)
        for xi, val in modes.items():
            if not 1 <= xi <= grid.K:
                raise ValueError(f"mode {xi} outside 1..{grid.K}")
            c[xi] = val
        return cls(grid, c)

    # -- basic accessors ----------------------------------------------------

    def coeff(self, xi: int) -> complex:
        """c(xi) for any integer xi; conjugate mirror below zero, 0 beyond the band."""
        a = abs(int(xi))
        if a > self.grid.K:
            return 0.0 + 0.0j
        val = self.coeffs[a]
        return complex(np.conj(val)) if xi < 0 else complex(val)

    def full_coeffs(self) -> np.ndarray:
        """Dense band -K..K (index xi+K), for the multilinear sums."""
        neg = np.conj(self.coeffs[-1:0:-1])
        return np.concatenate([neg, self.coeffs])

    @property
    def mean(self) -> float:
        return float(self.coeffs[0].real)

    def require_mean_zero(self, tol: float = 1e-10) -> None:
        if abs(self.coeffs[0]) > tol:
            raise ValueError(f"zero mode drifted to {self.coeffs[0]:.3e} (tol {tol:.1e})")

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    # -- arithmetic (value semantics) ---------------------------------------

    def _compat(self, other: "SpectralField") -> None:
        if self.grid != other.grid:
            raise GridMismatchError(f"grids differ: {self.grid} vs {other.grid}")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._compat(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._compat(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, a: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * float(a))

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)


# -- transforms -------------------------------------------------------------


def from_physical(samples: np.ndarray, grid: GridSpec) -> SpectralField:
    """Forward transform of point samples on the collocation grid.

    c(xi) = (1/M) sum_j samples_j e^{-i xi x_j}.  The zero mode is forced to 0:
    callers of this entry point are constructing mean-zero states.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape != (grid.M,):
        raise GridMismatchError(f"sample array has shape {samples.shape}, expected ({grid.M},)")
    spec = np.fft.rfft(samples) / grid.M
    c = spec[: grid.K + 1].copy()
    c[0] = 0.0
    return SpectralField(grid, c)


def _transform_keep_mean(samples: np.ndarray, grid: GridSpec) -> SpectralField:
    spec = np.fft.rfft(samples) / grid.M
    return SpectralField(grid, spec[: grid.K + 1].copy())


def to_physical(f: SpectralField, M: int | None = None) -> np.ndarray:
    """Evaluate the field at M equispaced points (default: the grid's own M).

    Exact for any M >= 2K+1; fewer points cannot carry the band.
    """
    K = f.grid.K
    if M is None:
        M = f.grid.M
    if M < 2 * K + 1:
        raise AliasingError(f"M={M} < 2K+1={2 * K + 1}: band does not fit")
    spec = np.zeros(M // 2 + 1, dtype=np.complex128)
    spec[: K + 1] = f.coeffs * M
    return np.fft.irfft(spec, n=M)


# -- multiplier operations --------------------------------------------------


def project_low(f: SpectralField, N: float) -> SpectralField:
    """Sharp cutoff onto |xi| <= N (the low-frequency projector)."""
    if N <= 0:
        raise ValueError(f"cutoff N={N} must be positive")
    xi = f.grid.wavenumbers()
    return SpectralField(f.grid, np.where(xi <= N, f.coeffs, 0.0))


def project_high(f: SpectralField, N: float) -> SpectralField:
    """Complement projector onto |xi| > N."""
    if N <= 0:
        raise ValueError(f"cutoff N={N} must be positive")
    xi = f.grid.wavenumbers()
    return SpectralField(f.grid, np.where(xi > N, f.coeffs, 0.0))


def derivative(f: SpectralField, order: int = 1) -> SpectralField:
    """d^order/dx^order via the (i xi)^order multiplier.  Kills the mean for order >= 1."""
    if order < 0:
        raise ValueError("derivative order must be nonnegative")
    xi = f.grid.wavenumbers().astype(np.float64)
    return SpectralField(f.grid, (1j * xi) ** order * f.coeffs)


def bessel_potential(f: SpectralField, s: float) -> SpectralField:
    """(1 - d^2/dx^2)^{s/2}, the smoothing/roughening weight (1+xi^2)^{s/2}."""
    s = _check_s(s)
    xi = f.grid.wavenumbers().astype(np.float64)
    return SpectralField(f.grid, (1.0 + xi**2) ** (s / 2.0) * f.coeffs)


def sobolev_norm(f: SpectralField, s: float) -> float:
    """H^s norm over the nonzero modes, ascending-frequency summation order."""
    s = _check_s(s)
    xi = np.arange(1, f.grid.K + 1, dtype=np.float64)
    w = (1.0 + xi**2) ** s
    mags = np.abs(f.coeffs[1:]) ** 2
    return float(np.sqrt(2.0 * np.sum(w * mags)))


def l2_norm(f: SpectralField) -> float:
    return sobolev_norm(f, 0.0)


def dealiased_product(a: SpectralField, b: SpectralField) -> SpectralField:
    """Pointwise product a*b truncated back to the band, alias-free.

    Both factors are synthesised on the M-point grid (M >= 4K+1 > 3K, so the
    quadratic modes up to 2K cannot fold back onto |xi| <= K), multiplied, and
    re-transformed.  The zero mode of the product is kept: the mean of a*b is
    honest data that callers such as the convective term annihilate themselves
    via their own i*xi factor.
    """
    a._compat(b)
    pa = to_physical(a)
    pb = to_physical(b)
    return _transform_keep_mean(pa * pb, a.grid)


def convolution_oracle(a: SpectralField, b: SpectralField) -> SpectralField:
    """Direct O(K^2) convolution of the two coefficient sets; the slow reference
    the transform path must reproduce."""
    a._compat(b)
    K = a.grid.K
    fa = a.full_coeffs()
    fb = b.full_coeffs()
    out = np.zeros(K + 1, dtype=np.complex128)
    for xi in range(0, K + 1):
        s = 0.0 + 0.0j
        for e1 in range(max(-K, xi - K), min(K, xi + K) + 1):
            s += fa[e1 + K] * fb[xi - e1 + K]
        out[xi] = s
    return SpectralField(a.grid, out)
