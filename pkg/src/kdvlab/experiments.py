"""Long-horizon diagnostics built on the steppers in :mod:`.dynamics`.

Each runner wraps one question the dissipative theory asks of the flow: how
trajectories enter a common absorbing ball, how fast the high-frequency
remainder w decays, whether the low half plus the tail profile really gains
three derivatives, how the weighted energy ||I u||^2 balances its damping,
forcing and trilinear flux, and what a discrete window sees of the space-time
norm.  Runners return plain numbers next to a :class:`TrajectoryRecord`, and
the persistence helpers round-trip that record losslessly, so every verdict
stays recomputable from the written trace alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dynamics import (
    KdvParams,
    SolverState,
    SplitState,
    evolve_full,
    evolve_split,
    init_split,
    stable_dt,
    step_full,
    step_split,
)
from .imethod import IMultiplier, modified_energy
from .spectral import (
    GridSpec,
    SpectralField,
    l2_norm,
    project_high,
    project_low,
    sobolev_norm,
)

CSV_HEADER = "t,l2,hs,hs_w,hs3_v,E2,E3,E4"

#: Below this the H^s norm of w counts as underflowed rather than measured.
UNDERFLOW_FLOOR = 1e-290


# -- records and fits ---------------------------------------------------------


@dataclass
class TrajectoryRecord:
    """Uniform measurement table for one trajectory.

    All arrays share one length and ``times`` increases strictly.  ``hs_w``
    and ``hs3_v`` hold ||w||_{H^s} and ||v||_{H^{s+3}}; split runs fill them
    from the evolved pair, full runs from the frequency projections at the
    cutoff.  The energy columns are zero unless the run was handed a
    smoothing multiplier.  ``meta`` keeps the parameters the run used.
    """

    times: np.ndarray
    l2: np.ndarray
    hs: np.ndarray
    hs_w: np.ndarray
    hs3_v: np.ndarray
    E2: np.ndarray
    E3: np.ndarray
    E4: np.ndarray
    meta: KdvParams | None = None

    def __post_init__(self) -> None:
        n = len(self.times)
        for name, arr in self.columns().items():
            if len(arr) != n:
                raise ValueError(f"column {name} has length {len(arr)}, expected {n}")
        t = np.asarray(self.times, dtype=np.float64)
        if n >= 2 and not np.all(np.diff(t) > 0.0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    def columns(self) -> dict[str, np.ndarray]:
        """The persisted columns, in file order."""
        return {
            "t": self.times,
            "l2": self.l2,
            "hs": self.hs,
            "hs_w": self.hs_w,
            "hs3_v": self.hs3_v,
            "E2": self.E2,
            "E3": self.E3,
            "E4": self.E4,
        }

    def window(self, t0: float, t1: float) -> np.ndarray:
        """Boolean mask for t0 <= t <= t1 (inclusive, with roundoff slack)."""
        t = np.asarray(self.times, dtype=np.float64)
        pad = 1e-9 * max(1.0, abs(t1))
        return (t >= t0 - pad) & (t <= t1 + pad)


@dataclass(frozen=True)
class FitReport:
    """Least-squares line through log-norm data on a time window.

    ``underflow`` marks runs whose tail fell below the floating-point floor
    inside the window; the fit then covers only the measurable part (and the
    slope is -inf when fewer than three points survive).
    """

    slope: float
    intercept: float
    r2: float
    window: tuple[float, float]
    underflow: bool = False


def _linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    total = y - y.mean()
    ss_tot = float(np.dot(total, total))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.dot(resid, resid)) / ss_tot
    return float(slope), float(intercept), r2


def fit_log_decay(
    times: np.ndarray, values: np.ndarray, window: tuple[float, float]
) -> FitReport:
    """Fit log(values) linearly in time over the window.

    Points at or below :data:`UNDERFLOW_FLOOR` are dropped and flagged; if
    fewer than three points remain the decay already beat the measurement,
    which is reported as slope -inf with a perfect fit.
    """
    t = np.asarray(times, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    t0, t1 = window
    pad = 1e-9 * max(1.0, abs(t1))
    inside = (t >= t0 - pad) & (t <= t1 + pad)
    if not np.any(inside):
        raise ValueError(f"no samples inside the fit window [{t0:.6g}, {t1:.6g}]")
    usable = inside & (v > UNDERFLOW_FLOOR)
    underflow = bool(np.any(inside & ~usable))
    if int(np.sum(usable)) < 3:
        return FitReport(-math.inf, -math.inf, 1.0, (float(t0), float(t1)), True)
    slope, intercept, r2 = _linear_fit(t[usable], np.log(v[usable]))
    return FitReport(slope, intercept, r2, (float(t0), float(t1)), underflow)


# -- building records ---------------------------------------------------------


class _Rows:
    def __init__(self, params: KdvParams):
        self.params = params
        self.data: dict[str, list[float]] = {name: [] for name in CSV_HEADER.split(",")}

    def add(
        self,
        t: float,
        u: SpectralField,
        v: SpectralField,
        w: SpectralField,
        im: IMultiplier | None,
        order: int,
    ) -> None:
        p = self.params
        d = self.data
        d["t"].append(float(t))
        d["l2"].append(l2_norm(u))
        d["hs"].append(sobolev_norm(u, p.s))
        d["hs_w"].append(sobolev_norm(w, p.s))
        d["hs3_v"].append(sobolev_norm(v, p.s + 3.0))
        if im is None:
            d["E2"].append(0.0)
            d["E3"].append(0.0)
            d["E4"].append(0.0)
        else:
            rep = modified_energy(u, im, order=order, t=t)
            d["E2"].append(rep.E2)
            d["E3"].append(rep.E3)
            d["E4"].append(rep.E4)

    def finish(self) -> TrajectoryRecord:
        arrays = {k: np.asarray(v, dtype=np.float64) for k, v in self.data.items()}
        return TrajectoryRecord(
            times=arrays["t"],
            l2=arrays["l2"],
            hs=arrays["hs"],
            hs_w=arrays["hs_w"],
            hs3_v=arrays["hs3_v"],
            E2=arrays["E2"],
            E3=arrays["E3"],
            E4=arrays["E4"],
            meta=self.params,
        )


def record_full(
    u0: SpectralField,
    params: KdvParams,
    T: float,
    im: IMultiplier | None = None,
    order: int = 4,
    n_report: int = 50,
) -> TrajectoryRecord:
    """Run the full solver and tabulate norms (and energies when im is given).

    The w/v columns come from the frequency split of u at the cutoff, which
    for the full flow is a diagnostic projection, not an evolved pair.
    """
    rows = _Rows(params)
    N = params.n_split
    for st in evolve_full(u0, params, T, n_report):
        rows.add(st.t, st.u, project_low(st.u, N), project_high(st.u, N), im, order)
    return rows.finish()


def record_split(
    u0: SpectralField,
    params: KdvParams,
    T: float,
    im: IMultiplier | None = None,
    order: int = 4,
    n_report: int = 50,
) -> TrajectoryRecord:
    """Run the coupled (v, w) solver and tabulate norms of the evolved pair."""
    rows = _Rows(params)
    for st in evolve_split(u0, params, T, n_report):
        rows.add(st.t, st.total, st.v, st.w, im, order)
    return rows.finish()


# -- initial data and forcing recipes ----------------------------------------


def initial_single_mode(grid: GridSpec, mode: int, amplitude: float) -> SpectralField:
    """amplitude * cos(mode x)."""
    mode = int(mode)
    if not 1 <= mode <= grid.K:
        raise ValueError(f"mode {mode} outside the resolved band [1, {grid.K}]")
    c = np.zeros(grid.K + 1, dtype=np.complex128)
    c[mode] = 0.5 * amplitude
    return SpectralField(grid, c)


def initial_power_law(
    grid: GridSpec,
    exponent: float,
    seed: int,
    norm_s: float | None = None,
    radius: float = 1.0,
) -> SpectralField:
    """|c(xi)| proportional to <xi>^exponent with uniform random phases.

    When ``norm_s`` is given the field is rescaled to H^{norm_s} norm
    ``radius``; otherwise to L2 norm ``radius``.
    """
    rng = np.random.default_rng(seed)
    xi = np.arange(1, grid.K + 1, dtype=np.float64)
    phases = rng.uniform(0.0, 2.0 * np.pi, grid.K)
    c = np.zeros(grid.K + 1, dtype=np.complex128)
    c[1:] = 0.5 * (1.0 + xi**2) ** (exponent / 2.0) * np.exp(1j * phases)
    f = SpectralField(grid, c)
    size = l2_norm(f) if norm_s is None else sobolev_norm(f, norm_s)
    f.coeffs *= radius / size
    return f


def initial_random_band(
    grid: GridSpec,
    lo: int,
    hi: int,
    seed: int,
    radius: float = 1.0,
    norm_s: float = 0.0,
) -> SpectralField:
    """Gaussian random coefficients on lo <= xi <= hi, H^{norm_s}-normalised."""
    lo, hi = int(lo), int(hi)
    if not 1 <= lo <= hi <= grid.K:
        raise ValueError(f"band [{lo}, {hi}] not inside the resolved band [1, {grid.K}]")
    rng = np.random.default_rng(seed)
    c = np.zeros(grid.K + 1, dtype=np.complex128)
    n = hi - lo + 1
    c[lo : hi + 1] = 0.5 * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    f = SpectralField(grid, c)
    f.coeffs *= radius / sobolev_norm(f, norm_s)
    return f


# -- absorbing ball -----------------------------------------------------------


def run_absorbing_ball(
    ensemble: Sequence[SpectralField],
    params: KdvParams,
    T: float,
    n_report: int = 60,
) -> dict:
    """Drive an ensemble with one set of parameters and locate a common ball.

    Requires the initial H^s norms to span at least two decades, so the
    report actually exercises contraction from far outside and far inside.
    The ball radius is 1.05 times the largest tail supremum of ||u||_{H^s}
    over [T/2, T]; entry times are when each member last crosses into it.
    """
    if len(ensemble) < 2:
        raise ValueError("absorbing-ball run needs at least two ensemble members")
    norms0 = [sobolev_norm(u, params.s) for u in ensemble]
    span = max(norms0) / min(norms0)
    if span < 100.0 * (1.0 - 1e-9):
        raise ValueError(
            f"initial H^s norms span a factor {span:.3g}; need at least 1e2 "
            "(two decades) to probe the ball from both sides"
        )
    records = [record_full(u, params, T, n_report=n_report) for u in ensemble]
    tails = []
    for rec in records:
        mask = rec.window(T / 2.0, T)
        tails.append(float(np.max(rec.hs[mask])))
    radius = 1.05 * max(tails)
    entries = []
    for rec in records:
        hs = rec.hs
        inside = np.maximum.accumulate(hs[::-1])[::-1] <= radius
        k = int(np.argmax(inside))
        entries.append(float(rec.times[k]) if inside[k] else math.inf)
    return {
        "radius": radius,
        "tail_sup": tails,
        "entry_times": entries,
        "initial_norms": norms0,
        "records": records,
    }


# -- decay of the remainder ---------------------------------------------------


def run_decay(
    u0: SpectralField, params: KdvParams, T: float, n_report: int = 60
) -> FitReport:
    """Fit the exponential rate of ||w||_{H^s} over [T/4, T].

    The initial data must put something above the cutoff, otherwise w stays
    identically zero and the rate is vacuous.
    """
    if l2_norm(project_high(u0, params.n_split)) == 0.0:
        raise ValueError(
            f"initial data has no modes above the cutoff N={params.n_split}; "
            "nothing to measure"
        )
    rec = record_split(u0, params, T, n_report=n_report)
    return fit_log_decay(rec.times, rec.hs_w, (T / 4.0, T))


# -- smoothing of the low half ------------------------------------------------


def run_smoothing(
    u0: SpectralField, params: KdvParams, T: float, n_report: int = 60
) -> dict:
    """Tail supremum of ||v||_{H^{s+3}} over [T/2, T] for the split flow."""
    rec = record_split(u0, params, T, n_report=n_report)
    mask = rec.window(T / 2.0, T)
    return {"tail_sup": float(np.max(rec.hs3_v[mask])), "record": rec}


# -- energy identity ----------------------------------------------------------


def _flux3_m3(u: SpectralField, im: IMultiplier) -> float:
    """Lam3(M3; u, u, u) by dense enumeration; real by conjugate symmetry."""
    K = u.grid.K
    band = np.arange(-K, K + 1)
    x1 = band[:, None]
    x2 = band[None, :]
    x3 = -x1 - x2
    valid = (x1 != 0) & (x2 != 0) & (x3 != 0) & (np.abs(x3) <= K)
    m2 = im.weights(np.arange(0, K + 1)) ** 2
    x3s = np.where(valid, x3, 1)
    mult = (1j / 3.0) * (
        m2[np.abs(x1)] * x1 + m2[np.abs(x2)] * x2 + m2[np.abs(x3s)] * x3s
    )
    a = u.full_coeffs()
    prod = a[x1 + K] * a[x2 + K] * a[np.where(valid, x3 + K, 0)]
    total = complex(np.sum(np.where(valid, mult, 0.0) * prod))
    if abs(total.imag) > 1e-8 * max(1.0, abs(total.real)):
        raise ArithmeticError(f"Lam3(M3) not real: {total}")
    return total.real


def _energy_rhs(u: SpectralField, params: KdvParams, im: IMultiplier) -> float:
    """-2 gamma E2 + forcing pairing + trilinear flux, the exact d/dt of E2."""
    e2 = im.weighted_l2_sq(u)
    m2 = im.weights(np.arange(1, u.grid.K + 1)) ** 2
    pair = 4.0 * float(
        np.sum(m2 * np.real(params.forcing.coeffs[1:] * np.conj(u.coeffs[1:])))
    )
    flux = _flux3_m3(u, im) if params.nonlinear else 0.0
    return -2.0 * params.gamma * e2 + pair + flux


def _identity_pass(
    u0: SpectralField,
    params: KdvParams,
    im: IMultiplier,
    T: float,
    h: float,
    n_report: int,
    drift_order: int,
    want_record: bool,
):
    n = max(2, int(np.ceil(T / h - 1e-12)))
    h = T / n
    every = max(1, n // max(1, n_report))
    marks = set(range(every, n, every))
    rows = _Rows(params) if want_record else None
    N = params.n_split

    def note(st: SolverState) -> None:
        if rows is not None:
            rows.add(
                st.t,
                st.u,
                project_low(st.u, N),
                project_high(st.u, N),
                im,
                drift_order,
            )

    times, fd, rhs = [], [], []
    prev = SolverState(u0.copy(), 0.0)
    note(prev)
    curr = step_full(prev, params, h)
    for k in range(1, n):
        new = step_full(curr, params, h)
        if k in marks:
            e_minus = im.weighted_l2_sq(prev.u)
            e_plus = im.weighted_l2_sq(new.u)
            times.append(curr.t)
            fd.append((e_plus - e_minus) / (2.0 * h))
            rhs.append(_energy_rhs(curr.u, params, im))
            note(curr)
        prev, curr = curr, new
    note(curr)
    fd = np.asarray(fd)
    rhs = np.asarray(rhs)
    scale = max(float(np.max(np.abs(fd))), float(np.max(np.abs(rhs))), 1e-300)
    rel = np.abs(fd - rhs) / scale
    record = rows.finish() if rows is not None else None
    return np.asarray(times), rel, record


def run_energy_identity(
    u0: SpectralField,
    params: KdvParams,
    im: IMultiplier,
    T: float,
    n_report: int = 12,
    drift_order: int = 4,
) -> dict:
    """Check d/dt ||I u||^2 = -2 gamma E2 + 2<I u, I f> + Lam3(M3) discretely.

    Centred finite differences of E2 across single steps are compared with
    the algebraic right-hand side at interior snapshots; the residual is
    normalised by the largest side seen.  A second pass at half the step
    exposes the convergence order.  The drift block tracks how far E2 and the
    corrected energies move from their initial values over the same run,
    which is the payoff measurement when damping and forcing are off.
    """
    h = stable_dt(u0, params)
    times, rel, record = _identity_pass(
        u0, params, im, T, h, n_report, drift_order, want_record=True
    )
    _, rel_fine, _ = _identity_pass(
        u0, params, im, T, h / 2.0, n_report, drift_order, want_record=False
    )
    coarse = float(np.max(rel))
    fine = float(np.max(rel_fine))
    if fine > 0.0 and coarse > 0.0:
        order = math.log2(coarse / fine)
    else:
        order = math.inf
    drift: dict[str, float] = {}
    for name, col in (("E2", record.E2), ("E3", record.E3), ("E4", record.E4)):
        d = np.abs(col - col[0])
        drift[f"d{name}_sup"] = float(np.max(d))
        drift[f"d{name}_end"] = float(d[-1])
    for tag in ("sup", "end"):
        lo = drift[f"dE2_{tag}"]
        hi = drift[f"dE4_{tag}"]
        drift[f"ratio42_{tag}"] = hi / lo if lo > 0.0 else math.nan
    return {
        "times": times,
        "residual_rel": rel,
        "max_residual_rel": coarse,
        "fine_max_residual_rel": fine,
        "observed_order": order,
        "dt": h,
        "drift": drift,
        "record": record,
    }


# -- omega-limit probes -------------------------------------------------------


def run_omega_limit(
    ensemble: Sequence[SpectralField],
    params: KdvParams,
    T: float,
    probes: Sequence[float],
    eta: float | None = None,
    n_eta: int = 3,
) -> dict:
    """Late-time compactness diagnostics for an ensemble.

    At each probe time in [T/2, T] this records the smooth-plus-small bound
    ||v||_{H^{s+3}} + ||w||_{H^s}, and around each probe it advances by small
    multiples of ``eta`` to test that t -> u(t) moves H^s-linearly in the
    offset (an equicontinuity proxy).  Pairwise H^s distances between members
    are taken at the last probe.  Probe times snap to the step grid.
    """
    if len(ensemble) < 1:
        raise ValueError("omega-limit run needs at least one ensemble member")
    probes = sorted(float(p) for p in probes)
    if not probes:
        raise ValueError("need at least one probe time")
    pad = 1e-9 * max(1.0, T)
    for p in probes:
        if p < T / 2.0 - pad or p > T + pad:
            raise ValueError(
                f"probe time {p:.6g} outside the late-time window [{T / 2.0:.6g}, {T:.6g}]"
            )
    if n_eta < 2:
        raise ValueError(f"n_eta={n_eta} gives too few offsets to fit a line")

    bound = 0.0
    finals: list[SpectralField] = []
    fits: list[FitReport] = []
    eta_used = None
    for u0 in ensemble:
        h = stable_dt(u0, params)
        want = eta if eta is not None else max(h, T / 500.0)
        k_eta = max(1, int(round(want / h)))
        eta_used = k_eta * h
        roles: dict[int, list[tuple[int, int]]] = {}
        for pi, p in enumerate(probes):
            base = max(1, int(round(p / h)))
            for j in range(0, n_eta + 1):
                roles.setdefault(base + j * k_eta, []).append((pi, j))
        last = max(roles)
        bases: dict[int, SpectralField] = {}
        dists: dict[int, list[tuple[float, float]]] = {pi: [] for pi in range(len(probes))}
        st = init_split(u0, params)
        for k in range(1, last + 1):
            st = step_split(st, params, h)
            if k not in roles:
                continue
            u = st.total
            for pi, j in roles[k]:
                if j == 0:
                    bases[pi] = u
                    bound = max(bound, sobolev_norm(st.v, params.s + 3.0) + sobolev_norm(st.w, params.s))
                    if pi == len(probes) - 1:
                        finals.append(u)
                else:
                    dists[pi].append((j * eta_used, sobolev_norm(u - bases[pi], params.s)))
        for pi in range(len(probes)):
            pairs = sorted(dists[pi])
            x = np.asarray([a for a, _ in pairs])
            y = np.asarray([b for _, b in pairs])
            floor = 1e-9 * max(1.0, sobolev_norm(bases[pi], params.s))
            if np.max(y) <= floor:
                # the state does not move on this scale; continuity is trivial
                fits.append(FitReport(0.0, 0.0, 1.0, (0.0, float(x[-1]))))
            else:
                slope, intercept, r2 = _linear_fit(x, y)
                fits.append(FitReport(slope, intercept, r2, (0.0, float(x[-1]))))

    m = len(finals)
    pairwise = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            pairwise[i, j] = pairwise[j, i] = sobolev_norm(finals[i] - finals[j], params.s)
    return {
        "bound": bound,
        "pairwise": pairwise,
        "pairwise_max": float(np.max(pairwise)) if m > 1 else 0.0,
        "equicontinuity": fits,
        "equicontinuity_r2_min": min(f.r2 for f in fits),
        "probe_times": probes,
        "eta": eta_used,
    }


# -- windowed space-time norm -------------------------------------------------


def xsb_norm_estimate(
    times: Sequence[float],
    snapshots: Sequence[SpectralField],
    s: float,
    b: float,
    window: tuple[float, float] | None = None,
) -> float:
    """Discrete X^{s,b} estimate from equally spaced snapshots.

    The snapshots inside the window are tapered by a raised cosine and
    transformed in time; the estimate sums <xi>^{2s} <tau - xi^3>^{2b} over
    the modulation lattice of the window.  At b = 0 this collapses to the
    tapered time-l2 average of the H^s norms, and it is nondecreasing in b
    since every modulation weight is at least one.
    """
    if not 0.0 <= b <= 0.5:
        raise ValueError(f"modulation exponent b={b} must lie in [0, 0.5]")
    t = np.asarray(times, dtype=np.float64)
    if len(t) != len(snapshots):
        raise ValueError(f"{len(t)} times against {len(snapshots)} snapshots")
    if window is not None:
        t0, t1 = window
        pad = 1e-9 * max(1.0, abs(t1))
        keep = np.flatnonzero((t >= t0 - pad) & (t <= t1 + pad))
    else:
        keep = np.arange(len(t))
    n = len(keep)
    if n < 8:
        raise ValueError(f"space-time estimate needs at least 8 snapshots, got {n}")
    t = t[keep]
    grid = snapshots[keep[0]].grid
    steps = np.diff(t)
    if not np.allclose(steps, steps[0], rtol=1e-6, atol=1e-12 * max(1.0, abs(t[-1]))):
        raise ValueError("snapshots must be equally spaced in time")
    delta = float(steps[0])
    C = np.stack([snapshots[k].coeffs for k in keep])
    taper = np.hanning(n)
    X = np.fft.fft(taper[:, None] * C, axis=0) / math.sqrt(n)
    tau = 2.0 * np.pi * np.fft.fftfreq(n, d=delta)
    xi = np.arange(1, grid.K + 1, dtype=np.float64)
    jap = (1.0 + xi**2) ** s
    mod = (1.0 + (tau[:, None] - xi[None, :] ** 3) ** 2) ** b
    total = 2.0 * np.sum(jap * np.mean(mod * np.abs(X[:, 1:]) ** 2, axis=0))
    return float(np.sqrt(total))


# -- persistence --------------------------------------------------------------


def persist(record: TrajectoryRecord, path: str | Path) -> Path:
    """Write the record as CSV with a mandatory header and 17 significant
    digits per value, which round-trips float64 exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = record.columns()
    lines = [CSV_HEADER]
    for row in zip(*cols.values()):
        lines.append(",".join("%.17g" % v for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_trace(path: str | Path) -> TrajectoryRecord:
    """Read a persisted trace back into a record (without parameters)."""
    lines = Path(path).read_text().strip().split("\n")
    if lines[0].strip() != CSV_HEADER:
        raise ValueError(f"trace header {lines[0]!r} does not match {CSV_HEADER!r}")
    rows = [[float(tok) for tok in ln.split(",")] for ln in lines[1:] if ln.strip()]
    names = CSV_HEADER.split(",")
    if rows:
        arrays = {n: np.asarray(col) for n, col in zip(names, zip(*rows))}
    else:
        arrays = {n: np.zeros(0) for n in names}
    return TrajectoryRecord(
        times=arrays["t"],
        l2=arrays["l2"],
        hs=arrays["hs"],
        hs_w=arrays["hs_w"],
        hs3_v=arrays["hs3_v"],
        E2=arrays["E2"],
        E3=arrays["E3"],
        E4=arrays["E4"],
    )


def params_summary(params: KdvParams) -> dict:
    """JSON-ready digest of the parameters behind a run."""
    return {
        "K": params.grid.K,
        "gamma": params.gamma,
        "s": params.s,
        "n_split": params.n_split,
        "dt": params.dt,
        "integrator": params.integrator,
        "nonlinear": params.nonlinear,
        "forcing_l2": l2_norm(params.forcing),
    }


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, FitReport):
        return {
            "slope": obj.slope,
            "intercept": obj.intercept,
            "r2": obj.r2,
            "window": list(obj.window),
            "underflow": obj.underflow,
        }
    raise TypeError(f"cannot serialise {type(obj).__name__} into the summary")


def write_summary(
    path: str | Path,
    suite: str,
    params: KdvParams,
    thresholds: dict,
    measurements: dict,
    verdicts: dict,
) -> Path:
    """Write the suite summary JSON with a fixed top-level key order.

    Every verdict must be a plain boolean; infinities are written as the
    strings "inf"/"-inf" so the file stays valid JSON.
    """
    for name, value in verdicts.items():
        if not isinstance(value, (bool, np.bool_)):
            raise ValueError(f"verdict {name!r} must be boolean, got {value!r}")
    payload = {
        "suite": suite,
        "params": params_summary(params),
        "thresholds": thresholds,
        "measurements": measurements,
        "verdicts": {k: bool(v) for k, v in verdicts.items()},
    }

    def clean(x):
        if isinstance(x, float) and not math.isfinite(x):
            return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        if isinstance(x, (np.floating, np.integer, np.ndarray, FitReport)):
            return clean(_jsonable(x))
        return x

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(clean(payload), indent=2) + "\n")
    return path
