"""Time integration of the damped, forced KdV flow on the torus.

In spectral form the equation u_t + u_xxx + (1/2)(u^2)_x + g u = f reads

    d/dt c(xi) = (i xi^3 - g) c(xi) - (i xi / 2) (u^2)^(xi) + fhat(xi),

and the linear symbol is handled exactly by both steppers (an exponential RK4
after Cox--Matthews with Kassam--Trefethen contour coefficients, and an
integrating-factor RK4 as a cross-check).  The quadratic term is evaluated by
the alias-free padded product, so the semidiscrete system is the exact Galerkin
truncation: with g = 0, f = 0 it conserves both the L2 norm and the Hamiltonian
(1/2)||u_x||^2 - (1/6) mean(u^3), which makes those drifts pure time-stepping
diagnostics.

The high/low frequency splitting u = v + w evolves the pair

    v_t + v_xxx + (1/2)(v^2)_x + g v = -(1/2) P_N ((u^2)_x - (v^2)_x) + f,
    w_t + w_xxx + g w = Q_N (w w_x - (u w)_x),

whose sum reproduces the full flow identically; the w right-hand side is kept
in the transport form above, algebraically equal to -(1/2) Q_N ((u^2)_x -
(v^2)_x).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .imethod import IMultiplier
from .spectral import (
    GridSpec,
    SpectralField,
    project_high,
    project_low,
    sobolev_norm,
    to_physical,
)

SCHEMES = ("exponential-rk4", "integrating-factor-rk4")


class DivergenceError(RuntimeError):
    """The trajectory left float range; carries the time and last finite norm."""

    def __init__(self, t: float, norm: float):
        self.t = t
        self.norm = norm
        super().__init__(f"solution diverged at t={t:.6g} (last finite L2 norm {norm:.6g})")


@dataclass(frozen=True)
class KdvParams:
    """Everything the steppers need: damping, forcing, cutoff, grid, stepping.

    ``dt`` is the requested step; runners shrink it through :func:`stable_dt`
    when the data demands it.  ``n_split`` is the splitting cutoff N.
    ``nonlinear=False`` switches off the quadratic term (the forcing stays),
    which turns both steppers into the exact linear propagator.
    """

    gamma: float
    s: float
    n_split: float
    forcing: SpectralField
    grid: GridSpec
    dt: float
    integrator: str = "exponential-rk4"
    nonlinear: bool = True

    def __post_init__(self) -> None:
        if self.gamma < 0:
            raise ValueError(f"damping gamma={self.gamma} must be >= 0")
        if not 0.0 < self.dt <= 1.0:
            raise ValueError(f"dt={self.dt} outside the stability budget (0, 1]")
        if self.n_split < 1:
            raise ValueError(f"splitting cutoff N={self.n_split} must be >= 1")
        if self.integrator not in SCHEMES:
            raise ValueError(f"integrator {self.integrator!r} not one of {SCHEMES}")
        if self.forcing.grid != self.grid:
            raise ValueError("forcing lives on a different grid")
        self.forcing.require_mean_zero()


@dataclass
class SolverState:
    u: SpectralField
    t: float


@dataclass
class SplitState:
    v: SpectralField
    w: SpectralField
    t: float

    @property
    def total(self) -> SpectralField:
        return self.v + self.w


@dataclass
class RegularityState:
    """v further decomposed as y + z + g_tail against the stationary profile."""

    y: SpectralField
    z: SpectralField
    g_tail: SpectralField
    t: float


def stable_dt(u0: SpectralField, params: KdvParams) -> float:
    """Transport-limited step: min(0.5 / (K max|u0| + 1), requested dt).

    The linear symbol is integrated exactly, so only the advective part
    constrains the step; this uses the initial amplitude, which is the right
    scale for damped runs (amplitudes only shrink toward the forcing level).
    """
    sup = float(np.max(np.abs(to_physical(u0))))
    return min(0.5 / (params.grid.K * sup + 1.0), params.dt)


def lifetime_hint(u0: SpectralField, params: KdvParams) -> float:
    """Scheduling-only local existence scale (||I u0|| + ||I f||)^{-3.1}, clamped
    to [dt, 1].  Used to pick report cadences, never to gate correctness."""
    im = IMultiplier(params.n_split, params.s)
    size = np.sqrt(im.weighted_l2_sq(u0)) + np.sqrt(im.weighted_l2_sq(params.forcing))
    if size == 0.0:
        return 1.0
    return float(min(1.0, max(params.dt, size**-3.1)))


# -- propagator machinery ----------------------------------------------------


def _linear_symbol(grid: GridSpec, gamma: float) -> np.ndarray:
    xi = grid.wavenumbers().astype(np.float64)
    return 1j * xi**3 - gamma


def _phi_coefficients(L: np.ndarray, dt: float, npts: int = 64) -> tuple[np.ndarray, ...]:
    """ETDRK4 weights by averaging over a unit circle around each dt*L.

    The integrands are entire, so the circle mean equals the value at the
    centre and the trapezoid rule converges spectrally; this sidesteps the
    removable singularities at dt*L = 0 without case splits.
    """
    z = dt * L
    r = np.exp(2j * np.pi * (np.arange(npts) + 0.5) / npts)
    LR = z[..., None] + r
    eLR = np.exp(LR)
    Q = dt * np.mean((np.exp(LR / 2.0) - 1.0) / LR, axis=-1)
    f1 = dt * np.mean((-4.0 - LR + eLR * (4.0 - 3.0 * LR + LR**2)) / LR**3, axis=-1)
    f2 = dt * np.mean((2.0 + LR + eLR * (-2.0 + LR)) / LR**3, axis=-1)
    f3 = dt * np.mean((-4.0 - 3.0 * LR - LR**2 + eLR * (4.0 - LR)) / LR**3, axis=-1)
    return Q, f1, f2, f3


class _Etdrk4:
    def __init__(self, L: np.ndarray, dt: float):
        self.E = np.exp(dt * L)
        self.E2 = np.exp(dt * L / 2.0)
        self.Q, self.f1, self.f2, self.f3 = _phi_coefficients(L, dt)

    def step(self, y: np.ndarray, nonlin) -> np.ndarray:
        n1 = nonlin(y)
        a = self.E2 * y + self.Q * n1
        na = nonlin(a)
        b = self.E2 * y + self.Q * na
        nb = nonlin(b)
        c = self.E2 * a + self.Q * (2.0 * nb - n1)
        nc = nonlin(c)
        return self.E * y + self.f1 * n1 + 2.0 * self.f2 * (na + nb) + self.f3 * nc


class _IfRk4:
    def __init__(self, L: np.ndarray, dt: float):
        self.dt = dt
        self.E = np.exp(dt * L)
        self.E2 = np.exp(dt * L / 2.0)

    def step(self, y: np.ndarray, nonlin) -> np.ndarray:
        h = self.dt
        k1 = nonlin(y)
        k2 = nonlin(self.E2 * (y + 0.5 * h * k1))
        k3 = nonlin(self.E2 * y + 0.5 * h * k2)
        k4 = nonlin(self.E * y + h * self.E2 * k3)
        return self.E * y + (h / 6.0) * (self.E * k1 + 2.0 * self.E2 * (k2 + k3) + k4)


_PROPAGATORS: dict[tuple, object] = {}


def _propagator(grid: GridSpec, gamma: float, dt: float, scheme: str):
    key = (grid.K, float(gamma), float(dt), scheme)
    if key not in _PROPAGATORS:
        if len(_PROPAGATORS) > 16:
            _PROPAGATORS.clear()
        L = _linear_symbol(grid, gamma)
        cls = _Etdrk4 if scheme == "exponential-rk4" else _IfRk4
        _PROPAGATORS[key] = cls(L, dt)
    return _PROPAGATORS[key]


# -- nonlinear right-hand sides ---------------------------------------------


def _product_coeffs(ca: np.ndarray, cb: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Alias-free banded product on raw half-spectra (mean retained)."""
    M = grid.M
    half = M // 2 + 1
    buf = np.zeros(half, dtype=np.complex128)
    buf[: grid.K + 1] = ca * M
    pa = np.fft.irfft(buf, n=M)
    buf[:] = 0.0
    buf[: grid.K + 1] = cb * M
    pb = np.fft.irfft(buf, n=M)
    return np.fft.rfft(pa * pb)[: grid.K + 1] / M


def _full_nonlinearity(params: KdvParams):
    grid = params.grid
    ixi = 1j * grid.wavenumbers().astype(np.float64)
    fhat = params.forcing.coeffs

    if not params.nonlinear:
        def lin_only(c: np.ndarray) -> np.ndarray:
            return np.broadcast_to(fhat, c.shape).copy()

        return lin_only

    def nonlin(c: np.ndarray) -> np.ndarray:
        return -0.5 * ixi * _product_coeffs(c, c, grid) + fhat

    return nonlin


def _split_nonlinearity(params: KdvParams):
    grid = params.grid
    xi = grid.wavenumbers().astype(np.float64)
    ixi = 1j * xi
    low = xi <= params.n_split
    high = ~low
    fhat = params.forcing.coeffs

    if not params.nonlinear:
        def lin_only(y: np.ndarray) -> np.ndarray:
            out = np.zeros_like(y)
            out[0] = fhat
            return out

        return lin_only

    def nonlin(y: np.ndarray) -> np.ndarray:
        v, w = y
        u = v + w
        vv = _product_coeffs(v, v, grid)
        ww = _product_coeffs(w, w, grid)
        uw = _product_coeffs(u, w, grid)
        uu = vv + 2.0 * uw - ww  # u^2 = v^2 + 2uw - w^2
        out = np.empty_like(y)
        out[0] = -0.5 * ixi * vv - 0.5 * (ixi * (uu - vv)) * low + fhat
        out[1] = (0.5 * ixi * ww - ixi * uw) * high
        return out

    return nonlin


def w_rhs_forms(v: SpectralField, w: SpectralField, params: KdvParams) -> tuple[np.ndarray, np.ndarray]:
    """The two algebraic forms of the w equation's right-hand side.

    Returns (Q_N[w w_x - (uw)_x], -(1/2) Q_N[(u^2)_x - (v^2)_x]) as coefficient
    arrays; they agree up to roundoff since u^2 - v^2 = 2uw - w^2 exactly.
    """
    grid = params.grid
    xi = grid.wavenumbers().astype(np.float64)
    ixi = 1j * xi
    high = xi > params.n_split
    u = v + w
    ww = _product_coeffs(w.coeffs, w.coeffs, grid)
    uw = _product_coeffs(u.coeffs, w.coeffs, grid)
    uu = _product_coeffs(u.coeffs, u.coeffs, grid)
    vv = _product_coeffs(v.coeffs, v.coeffs, grid)
    primary = (0.5 * ixi * ww - ixi * uw) * high
    reference = -0.5 * ixi * (uu - vv) * high
    return primary, reference


# -- stepping ----------------------------------------------------------------


def _checked(c: np.ndarray, t: float, prev: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(c)):
        flat = prev.reshape(-1)
        norm = float(np.sqrt(2.0 * np.sum(np.abs(flat) ** 2)))
        raise DivergenceError(t, norm)
    return c


def step_full(state: SolverState, params: KdvParams, dt: float | None = None) -> SolverState:
    """Advance the full flow by one step (the requested dt by default)."""
    h = params.dt if dt is None else dt
    prop = _propagator(params.grid, params.gamma, h, params.integrator)
    nonlin = _full_nonlinearity(params)
    c = prop.step(state.u.coeffs, nonlin)
    c = _checked(c, state.t + h, state.u.coeffs)
    out = SpectralField(params.grid, c)
    out.require_mean_zero()
    return SolverState(out, state.t + h)


def init_split(u0: SpectralField, params: KdvParams) -> SplitState:
    """Project the initial state onto the two frequency ranges."""
    return SplitState(project_low(u0, params.n_split), project_high(u0, params.n_split), 0.0)


def step_split(state: SplitState, params: KdvParams, dt: float | None = None) -> SplitState:
    """Advance the coupled (v, w) system by one step; v + w tracks the full flow."""
    h = params.dt if dt is None else dt
    prop = _propagator(params.grid, params.gamma, h, params.integrator)
    nonlin = _split_nonlinearity(params)
    y = np.stack([state.v.coeffs, state.w.coeffs])
    y2 = prop.step(y, nonlin)
    y2 = _checked(y2, state.t + h, y)
    v = SpectralField(params.grid, y2[0])
    w = SpectralField(params.grid, y2[1])
    v.require_mean_zero()
    w.require_mean_zero()
    return SplitState(v, w, state.t + h)


# -- stationary profile and the regularity ledger ---------------------------


def stationary_profile(forcing: SpectralField, gamma: float) -> SpectralField:
    """Solve g_xxx + gamma g = f mode by mode: ghat = fhat / (gamma - i xi^3)."""
    if gamma <= 0:
        raise ValueError(f"stationary profile needs gamma > 0, got {gamma}")
    xi = forcing.grid.wavenumbers().astype(np.float64)
    return SpectralField(forcing.grid, forcing.coeffs / (gamma - 1j * xi**3))


def stationary_residual(g: SpectralField, forcing: SpectralField, gamma: float) -> float:
    """||g_xxx + gamma g - f||_{L2}; zero for the profile above."""
    from .spectral import derivative, l2_norm

    return l2_norm(derivative(g, 3) + gamma * g - forcing)


def regularity_view(
    state: SplitState, params: KdvParams, profile: SpectralField | None = None
) -> RegularityState:
    """Split v into y = P_N v, the tail profile g_tail = Q_N g, and the
    remainder z = Q_N v - g_tail, so v = y + z + g_tail identically."""
    g = stationary_profile(params.forcing, params.gamma) if profile is None else profile
    g_tail = project_high(g, params.n_split)
    y = project_low(state.v, params.n_split)
    z = project_high(state.v, params.n_split) - g_tail
    return RegularityState(y=y, z=z, g_tail=g_tail, t=state.t)


# -- conserved quantities ----------------------------------------------------


def hamiltonian(u: SpectralField) -> float:
    """(1/2)||u_x||^2 - (1/6) mean(u^3) in the counting-measure normalisation;
    conserved by the undamped unforced Galerkin flow."""
    xi = np.arange(1, u.grid.K + 1, dtype=np.float64)
    grad_sq = 2.0 * float(np.sum(xi**2 * np.abs(u.coeffs[1:]) ** 2))
    p = to_physical(u)
    cubic = float(np.mean(p**3))
    return 0.5 * grad_sq - cubic / 6.0


def mass_l2(u: SpectralField) -> float:
    return sobolev_norm(u, 0.0)


# -- trajectory drivers ------------------------------------------------------


def _plan_steps(T: float, dt: float) -> tuple[int, float]:
    n = max(1, int(np.ceil(T / dt - 1e-12)))
    return n, T / n


def evolve_full(u0: SpectralField, params: KdvParams, T: float, n_report: int = 50):
    """Yield SolverState at ~n_report evenly spaced times from 0 to T inclusive.

    The step is the stability-limited one, rounded down so the horizon is hit
    exactly.
    """
    dt = stable_dt(u0, params)
    n, h = _plan_steps(T, dt)
    every = max(1, n // max(1, n_report))
    st = SolverState(u0.copy(), 0.0)
    yield st
    for k in range(1, n + 1):
        st = step_full(st, params, h)
        if k % every == 0 or k == n:
            yield st


def evolve_split(u0: SpectralField, params: KdvParams, T: float, n_report: int = 50):
    dt = stable_dt(u0, params)
    n, h = _plan_steps(T, dt)
    every = max(1, n // max(1, n_report))
    st = init_split(u0, params)
    yield st
    for k in range(1, n + 1):
        st = step_split(st, params, h)
        if k % every == 0 or k == n:
            yield st


def with_dt(params: KdvParams, dt: float) -> KdvParams:
    return replace(params, dt=dt)
