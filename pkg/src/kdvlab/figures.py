"""Figure rendering for trajectory records and fits.

Everything draws through the Agg backend into files, never onto a screen, so
the CLI can run headless.  Figures are a reporting convenience; no verdict
depends on them.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be fixed first)
import numpy as np  # noqa: E402

from .experiments import FitReport, TrajectoryRecord  # noqa: E402

#: Keyword arguments that keep PNG output byte-stable across reruns.
SAVE_KW = {"dpi": 110, "metadata": {"Software": None}}


def _finish(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, **SAVE_KW)
    plt.close(fig)
    return path


def render_norms(record: TrajectoryRecord, path: str | Path, title: str = "") -> Path:
    """Two panels: the H^s / L2 norms and the split-pair norms, over time."""
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9.0, 3.4))
    t = record.times
    ax0.plot(t, record.l2, label="$\\|u\\|_{L^2}$")
    ax0.plot(t, record.hs, label="$\\|u\\|_{H^s}$")
    ax0.set_xlabel("t")
    ax0.legend(frameon=False)
    ax1.semilogy(t, np.maximum(record.hs_w, 1e-300), label="$\\|w\\|_{H^s}$")
    ax1.plot(t, record.hs3_v, label="$\\|v\\|_{H^{s+3}}$")
    ax1.set_xlabel("t")
    ax1.legend(frameon=False)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _finish(fig, path)


def render_energies(record: TrajectoryRecord, path: str | Path, title: str = "") -> Path:
    """Drift of E2 and the corrected energies from their initial values."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    t = record.times
    for name, col in (("E2", record.E2), ("E3", record.E3), ("E4", record.E4)):
        if np.any(col != 0.0):
            ax.plot(t, col - col[0], label=f"{name} drift")
    ax.set_xlabel("t")
    ax.axhline(0.0, color="0.7", lw=0.8)
    ax.legend(frameon=False)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _finish(fig, path)


def render_decay_fit(
    record: TrajectoryRecord, fit: FitReport, path: str | Path
) -> Path:
    """log ||w||_{H^s} with the fitted line over its window."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    t = record.times
    ax.semilogy(t, np.maximum(record.hs_w, 1e-300), ".", ms=3, label="$\\|w\\|_{H^s}$")
    if np.isfinite(fit.slope):
        tt = np.linspace(fit.window[0], fit.window[1], 50)
        ax.semilogy(tt, np.exp(fit.intercept + fit.slope * tt), "-",
                    label=f"slope {fit.slope:.3f}")
    ax.set_xlabel("t")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _finish(fig, path)


def render_ensemble(
    records: Sequence[TrajectoryRecord],
    path: str | Path,
    radius: float | None = None,
) -> Path:
    """All ensemble H^s norms on one log axis, with the ball radius if given."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for rec in records:
        ax.semilogy(rec.times, np.maximum(rec.hs, 1e-300), lw=1.0)
    if radius is not None:
        ax.axhline(radius, color="k", ls="--", lw=0.9, label=f"radius {radius:.3g}")
        ax.legend(frameon=False)
    ax.set_xlabel("t")
    ax.set_ylabel("$\\|u\\|_{H^s}$")
    fig.tight_layout()
    return _finish(fig, path)


def render_scaling(table: dict[float, dict[str, float]], path: str | Path) -> Path:
    """Correction-size ratios against the cutoff, log-log."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    cutoffs = sorted(table)
    for key, marker in (("ratio3", "o"), ("ratio4", "s")):
        vals = [table[N][key] for N in cutoffs]
        ax.loglog(cutoffs, vals, marker + "-", label=key)
    ax.set_xlabel("N")
    ax.set_ylabel("ensemble max ratio")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _finish(fig, path)
