"""Command-line front end: one JSON config in, one suite of artifacts out.

Every invocation runs a single suite and writes ``<out>/<suite>/trace.csv``,
``summary.json`` and the suite's figures.  Outputs are a pure function of the
config plus the seed, byte for byte, so reruns can be diffed.  The process
exits 0 only when every verdict in the summary is true, 1 on a false verdict,
2 on a config error and 3 when the trajectory diverges.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import figures
from .dynamics import DivergenceError, KdvParams, stable_dt, step_full
from .experiments import (
    TrajectoryRecord,
    _Rows,
    initial_power_law,
    initial_random_band,
    initial_single_mode,
    params_summary,
    persist,
    record_full,
    record_split,
    run_absorbing_ball,
    run_decay,
    run_energy_identity,
    run_omega_limit,
    run_smoothing,
    write_summary,
    xsb_norm_estimate,
)
from .imethod import IMultiplier
from .spectral import GridSpec, SpectralField, project_high, project_low

SUITES = ("simulate", "split", "energy", "absorbing", "decay", "smoothing", "omega", "xsb")
RECIPES = ("single-mode", "rough-power-law", "random-band")

_COMMON_KEYS = {"suite", "K", "gamma", "s", "n_split", "dt", "T", "seed", "n_report", "data", "forcing"}
_SUITE_KEYS = {
    "absorbing": {"radii"},
    "omega": {"radii", "probes"},
    "energy": {"im_cutoff"},
    "xsb": {"b"},
}


class ConfigError(ValueError):
    """Raised for any malformed config; the message names key and constraint."""


def _require(cond: bool, key: str, constraint: str, value) -> None:
    if not cond:
        raise ConfigError(f"config key {key!r}: {constraint} (got {value!r})")


def parse_config(source: str | Path | dict) -> dict:
    """Validate a config mapping (or JSON file) and fill in defaults.

    Unknown keys are rejected outright; every failure message names the
    offending key and the constraint it broke.
    """
    if isinstance(source, dict):
        raw = dict(source)
    else:
        text = Path(source).read_text()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config is not valid JSON: {err}") from err
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object at top level")

    suite = raw.get("suite")
    _require(suite in SUITES, "suite", f"must be one of {', '.join(SUITES)}", suite)
    allowed = _COMMON_KEYS | _SUITE_KEYS.get(suite, set())
    unknown = sorted(set(raw) - allowed)
    if unknown:
        extra = sorted(set(raw) & (set().union(*_SUITE_KEYS.values()) - allowed))
        if extra:
            raise ConfigError(
                f"config key {extra[0]!r}: does not apply to suite {suite!r}"
            )
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")

    cfg: dict = {"suite": suite}

    K = raw.get("K")
    _require(isinstance(K, int) and not isinstance(K, bool) and K > 0, "K",
             "must be a positive integer", K)
    cfg["K"] = K

    gamma = raw.get("gamma")
    _require(isinstance(gamma, (int, float)) and gamma >= 0, "gamma",
             "must be a number >= 0", gamma)
    if suite == "decay":
        _require(gamma > 0, "gamma", "decay suite needs gamma > 0", gamma)
    cfg["gamma"] = float(gamma)

    s = raw.get("s")
    _require(isinstance(s, (int, float)) and -0.75 <= s < 0, "s",
             "must lie in [-0.75, 0)", s)
    cfg["s"] = float(s)

    n_split = raw.get("n_split", 16)
    _require(isinstance(n_split, (int, float)) and n_split >= 1, "n_split",
             "must be a number >= 1", n_split)
    cfg["n_split"] = float(n_split)

    dt = raw.get("dt", 1.0)
    _require(isinstance(dt, (int, float)) and 0 < dt <= 1, "dt",
             "must lie in (0, 1]; omit it to use the stability rule", dt)
    cfg["dt"] = float(dt)

    T = raw.get("T")
    if T is None:
        _require(cfg["gamma"] > 0, "T", "required when gamma = 0", T)
        cfg["T"] = 10.0 / cfg["gamma"]
    else:
        _require(isinstance(T, (int, float)) and T > 0, "T", "must be > 0", T)
        cfg["T"] = float(T)

    seed = raw.get("seed", 0)
    _require(isinstance(seed, int) and not isinstance(seed, bool), "seed",
             "must be an integer", seed)
    cfg["seed"] = seed

    n_report = raw.get("n_report", 60)
    _require(isinstance(n_report, int) and n_report >= 2, "n_report",
             "must be an integer >= 2", n_report)
    cfg["n_report"] = n_report

    cfg["data"] = _check_recipe(raw.get("data", {"type": "single-mode", "mode": 1, "amplitude": 1.0}), "data")
    cfg["forcing"] = _check_recipe(raw.get("forcing", {"type": "none"}), "forcing", allow_none=True)

    if suite in ("absorbing", "omega"):
        radii = raw.get("radii", [0.1, 1.0, 10.0])
        ok = (isinstance(radii, list) and len(radii) >= 1
              and all(isinstance(r, (int, float)) and r > 0 for r in radii))
        _require(ok, "radii", "must be a non-empty list of positive numbers", radii)
        cfg["radii"] = [float(r) for r in radii]
    if suite == "omega":
        probes = raw.get("probes")
        if probes is None:
            probes = [0.6 * cfg["T"], 0.8 * cfg["T"], 0.95 * cfg["T"]]
        ok = (isinstance(probes, list) and len(probes) >= 1
              and all(isinstance(p, (int, float)) for p in probes))
        _require(ok, "probes", "must be a non-empty list of times", probes)
        for p in probes:
            _require(cfg["T"] / 2 <= p <= cfg["T"], "probes",
                     f"every probe must lie in [T/2, T] = [{cfg['T'] / 2:.6g}, {cfg['T']:.6g}]", p)
        cfg["probes"] = [float(p) for p in probes]
    if suite == "energy":
        im_cutoff = raw.get("im_cutoff", cfg["n_split"])
        _require(isinstance(im_cutoff, (int, float)) and im_cutoff >= 1, "im_cutoff",
                 "must be a number >= 1", im_cutoff)
        cfg["im_cutoff"] = float(im_cutoff)
    if suite == "xsb":
        b = raw.get("b", 0.25)
        _require(isinstance(b, (int, float)) and 0 <= b <= 0.5, "b",
                 "must lie in [0, 0.5]", b)
        cfg["b"] = float(b)
    return cfg


def _check_recipe(spec: dict, key: str, allow_none: bool = False) -> dict:
    _require(isinstance(spec, dict), key, "must be an object with a 'type' field", spec)
    kind = spec.get("type")
    kinds = RECIPES + (("none",) if allow_none else ())
    _require(kind in kinds, f"{key}.type", f"must be one of {', '.join(kinds)}", kind)
    fields = {"none": set(), "single-mode": {"mode", "amplitude"},
              "rough-power-law": {"exponent", "radius"},
              "random-band": {"lo", "hi", "radius"}}[kind]
    unknown = sorted(set(spec) - fields - {"type"})
    _require(not unknown, f"{key}.{unknown[0] if unknown else ''}",
             f"not a field of recipe {kind!r}", unknown)
    out = {"type": kind}
    if kind == "single-mode":
        mode = spec.get("mode", 1)
        _require(isinstance(mode, int) and mode >= 1, f"{key}.mode",
                 "must be an integer >= 1", mode)
        amp = spec.get("amplitude", 1.0)
        _require(isinstance(amp, (int, float)), f"{key}.amplitude", "must be a number", amp)
        out |= {"mode": mode, "amplitude": float(amp)}
    elif kind == "rough-power-law":
        expo = spec.get("exponent")
        _require(isinstance(expo, (int, float)), f"{key}.exponent", "must be a number", expo)
        radius = spec.get("radius", 1.0)
        _require(isinstance(radius, (int, float)) and radius > 0, f"{key}.radius",
                 "must be a positive number", radius)
        out |= {"exponent": float(expo), "radius": float(radius)}
    elif kind == "random-band":
        lo, hi = spec.get("lo"), spec.get("hi")
        _require(isinstance(lo, int) and lo >= 1, f"{key}.lo", "must be an integer >= 1", lo)
        _require(isinstance(hi, int) and hi >= lo, f"{key}.hi", "must be an integer >= lo", hi)
        radius = spec.get("radius", 1.0)
        _require(isinstance(radius, (int, float)) and radius > 0, f"{key}.radius",
                 "must be a positive number", radius)
        out |= {"lo": lo, "hi": hi, "radius": float(radius)}
    return out


# -- field construction -------------------------------------------------------


def build_field(recipe: dict, grid: GridSpec, s: float, seed: int, radius: float | None = None) -> SpectralField:
    """Realise a recipe on the grid; ``radius`` overrides the configured size."""
    kind = recipe["type"]
    if kind == "none":
        return SpectralField(grid, np.zeros(grid.K + 1, dtype=np.complex128))
    if kind == "single-mode":
        f = initial_single_mode(grid, recipe["mode"], recipe["amplitude"])
        if radius is not None:
            from .spectral import sobolev_norm

            f.coeffs *= radius / sobolev_norm(f, s)
        return f
    if kind == "rough-power-law":
        return initial_power_law(grid, recipe["exponent"], seed, norm_s=s,
                                 radius=radius if radius is not None else recipe["radius"])
    if kind == "random-band":
        K = grid.K
        if not recipe["lo"] <= K:
            raise ConfigError(f"config key 'data.lo': band start {recipe['lo']} exceeds K={K}")
        hi = min(recipe["hi"], K)
        return initial_random_band(grid, recipe["lo"], hi, seed, norm_s=s,
                                   radius=radius if radius is not None else recipe["radius"])
    raise ConfigError(f"config key 'type': unhandled recipe {kind!r}")


def build_params(cfg: dict) -> KdvParams:
    grid = GridSpec.for_modes(cfg["K"])
    forcing = build_field(cfg["forcing"], grid, cfg["s"], cfg["seed"] + 7919)
    return KdvParams(
        gamma=cfg["gamma"],
        s=cfg["s"],
        n_split=cfg["n_split"],
        forcing=forcing,
        grid=grid,
        dt=cfg["dt"],
    )


def _ensemble(cfg: dict, params: KdvParams) -> list[SpectralField]:
    return [
        build_field(cfg["data"], params.grid, cfg["s"], cfg["seed"] + i, radius=r)
        for i, r in enumerate(cfg["radii"])
    ]


# -- suite runners ------------------------------------------------------------


def _suite_simulate(cfg, params, out):
    u0 = build_field(cfg["data"], params.grid, cfg["s"], cfg["seed"])
    im = IMultiplier(params.n_split, params.s)
    rec = record_full(u0, params, cfg["T"], im=im, order=4, n_report=cfg["n_report"])
    persist(rec, out / "trace.csv")
    figures.render_norms(rec, out / "norms.png")
    figures.render_energies(rec, out / "energies.png")
    finite = bool(np.all([np.all(np.isfinite(col)) for col in rec.columns().values()]))
    return rec, {"n_report": cfg["n_report"]}, {
        "final_l2": rec.l2[-1], "final_hs": rec.hs[-1], "final_E4": rec.E4[-1],
    }, {"finite": finite}


def _suite_split(cfg, params, out):
    u0 = build_field(cfg["data"], params.grid, cfg["s"], cfg["seed"])
    rec_s = record_split(u0, params, cfg["T"], n_report=cfg["n_report"])
    rec_f = record_full(u0, params, cfg["T"], n_report=cfg["n_report"])
    # identical report grids: compare the recomposed norms pointwise
    l2_gap = float(np.max(np.abs(rec_s.l2 - rec_f.l2)))
    per_time = l2_gap / max(cfg["T"], 1e-300)
    persist(rec_s, out / "trace.csv")
    figures.render_norms(rec_s, out / "norms.png")
    thr = {"l2_gap_per_time": 1e-9}
    meas = {"l2_gap": l2_gap, "l2_gap_per_time": per_time}
    return rec_s, thr, meas, {"consistent": per_time <= thr["l2_gap_per_time"]}


def _suite_energy(cfg, params, out):
    u0 = build_field(cfg["data"], params.grid, cfg["s"], cfg["seed"])
    im = IMultiplier(cfg["im_cutoff"], params.s)
    rep = run_energy_identity(u0, params, im, cfg["T"], n_report=cfg["n_report"])
    rec = rep["record"]
    persist(rec, out / "trace.csv")
    figures.render_norms(rec, out / "norms.png")
    figures.render_energies(rec, out / "energies.png")
    thr = {"min_order": 1.8}
    meas = {
        "max_residual_rel": rep["max_residual_rel"],
        "fine_max_residual_rel": rep["fine_max_residual_rel"],
        "observed_order": rep["observed_order"],
        "dt": rep["dt"],
        "drift": rep["drift"],
    }
    return rec, thr, meas, {"second_order": rep["observed_order"] >= thr["min_order"]}


def _suite_absorbing(cfg, params, out):
    rep = run_absorbing_ball(_ensemble(cfg, params), params, cfg["T"], n_report=cfg["n_report"])
    persist(rep["records"][0], out / "trace.csv")
    figures.render_ensemble(rep["records"], out / "ensemble.png", radius=rep["radius"])
    forced = np.any(params.forcing.coeffs != 0.0)
    entered = all(math.isfinite(e) for e in rep["entry_times"])
    thr = {"tail_agreement": 1.1, "unforced_tail": 1e-4}
    meas = {
        "radius": rep["radius"], "tail_sup": rep["tail_sup"],
        "entry_times": rep["entry_times"], "initial_norms": rep["initial_norms"],
    }
    verdicts = {"entered": entered}
    if forced:
        verdicts["tails_agree"] = max(rep["tail_sup"]) <= thr["tail_agreement"] * min(rep["tail_sup"])
    else:
        final = max(rec.hs[-1] for rec in rep["records"])
        meas["final_hs"] = final
        verdicts["decayed"] = final <= thr["unforced_tail"]
    return rep["records"][0], thr, meas, verdicts


def _suite_decay(cfg, params, out):
    u0 = build_field(cfg["data"], params.grid, cfg["s"], cfg["seed"])
    rec = record_split(u0, params, cfg["T"], n_report=cfg["n_report"])
    from .experiments import fit_log_decay

    fit = fit_log_decay(rec.times, rec.hs_w, (cfg["T"] / 4.0, cfg["T"]))
    persist(rec, out / "trace.csv")
    figures.render_decay_fit(rec, fit, out / "decay_fit.png")
    thr = {"max_slope": -0.5 * params.gamma}
    meas = {"fit": fit, "w0": rec.hs_w[0], "wT": rec.hs_w[-1]}
    ok = fit.underflow or fit.slope <= thr["max_slope"]
    return rec, thr, meas, {"decays_at_half_rate": bool(ok)}


def _suite_smoothing(cfg, params, out):
    u0 = build_field(cfg["data"], params.grid, cfg["s"], cfg["seed"])
    rep = run_smoothing(u0, params, cfg["T"], n_report=cfg["n_report"])
    rec = rep["record"]
    persist(rec, out / "trace.csv")
    figures.render_norms(rec, out / "norms.png")
    thr = {}
    meas = {"tail_sup_hs3_v": rep["tail_sup"]}
    return rec, thr, meas, {"finite": math.isfinite(rep["tail_sup"])}


def _suite_omega(cfg, params, out):
    members = _ensemble(cfg, params)
    rep = run_omega_limit(members, params, cfg["T"], cfg["probes"])
    rec = record_split(members[0], params, cfg["T"], n_report=cfg["n_report"])
    persist(rec, out / "trace.csv")
    figures.render_norms(rec, out / "norms.png")
    thr = {"min_r2": 0.9}
    meas = {
        "bound": rep["bound"], "pairwise_max": rep["pairwise_max"],
        "equicontinuity_r2_min": rep["equicontinuity_r2_min"], "eta": rep["eta"],
    }
    ok = rep["equicontinuity_r2_min"] >= thr["min_r2"]
    return rec, thr, meas, {"equicontinuous": bool(ok)}


def _suite_xsb(cfg, params, out):
    u0 = build_field(cfg["data"], params.grid, cfg["s"], cfg["seed"])
    T = cfg["T"]
    h = stable_dt(u0, params)
    n = max(64, int(np.ceil(T / h - 1e-12)))
    h = T / n
    start = max(1, n // 2)
    stride = max(1, (n - start) // 31)
    marks = set(range(start, n + 1, stride))
    rows = _Rows(params)
    times, snaps = [], []
    from .dynamics import SolverState

    st = SolverState(u0.copy(), 0.0)
    for k in range(1, max(marks) + 1):
        st = step_full(st, params, h)
        if k in marks:
            times.append(st.t)
            snaps.append(st.u.copy())
            rows.add(st.t, st.u, project_low(st.u, params.n_split),
                     project_high(st.u, params.n_split), None, 2)
    rec = rows.finish()
    est_b = xsb_norm_estimate(times, snaps, params.s, cfg["b"])
    est_0 = xsb_norm_estimate(times, snaps, params.s, 0.0)
    persist(rec, out / "trace.csv")
    figures.render_norms(rec, out / "norms.png")
    thr = {"b": cfg["b"]}
    meas = {"estimate": est_b, "estimate_b0": est_0, "snapshots": len(times)}
    return rec, thr, meas, {"monotone_in_b": est_b >= est_0 * (1.0 - 1e-12)}


_RUNNERS = {
    "simulate": _suite_simulate,
    "split": _suite_split,
    "energy": _suite_energy,
    "absorbing": _suite_absorbing,
    "decay": _suite_decay,
    "smoothing": _suite_smoothing,
    "omega": _suite_omega,
    "xsb": _suite_xsb,
}


def dispatch(cfg: dict, out_root: str | Path, quiet: bool = False) -> dict:
    """Run the configured suite and write its artifacts; returns the verdicts."""
    out = Path(out_root) / cfg["suite"]
    out.mkdir(parents=True, exist_ok=True)
    params = build_params(cfg)
    try:
        _, thresholds, measurements, verdicts = _RUNNERS[cfg["suite"]](cfg, params, out)
    except DivergenceError as err:
        payload = {
            "suite": cfg["suite"],
            "params": params_summary(params),
            "error": {"type": "divergence", "t": err.t, "last_norm": err.norm},
        }
        (out / "summary.json").write_text(json.dumps(payload, indent=2) + "\n")
        raise
    write_summary(out / "summary.json", cfg["suite"], params, thresholds, measurements, verdicts)
    if not quiet:
        for name, ok in verdicts.items():
            print(f"{cfg['suite']}: {name}: {'pass' if ok else 'FAIL'}")
    return verdicts


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="kdvlab",
        description="Run one diagnostic suite for the damped forced KdV flow.",
    )
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument("--out", default="out", help="output root directory")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--quiet", action="store_true", help="suppress the verdict lines")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError:
        print(f"config error: no such file: {args.config}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg["seed"] = args.seed

    try:
        verdicts = dispatch(cfg, args.out, quiet=args.quiet)
    except DivergenceError as err:
        print(f"divergence at t={err.t:.6g}; failure summary written", file=sys.stderr)
        return 3
    return 0 if all(verdicts.values()) else 1


if __name__ == "__main__":
    sys.exit(main())
