"""kdvlab: pseudo-spectral laboratory for the weakly damped, forced KdV flow.

Layers, lowest first:

- :mod:`kdvlab.spectral` -- band-limited real fields, transforms, projectors,
  Sobolev norms, alias-free products;
- :mod:`kdvlab.imethod` -- the smoothing multiplier, multilinear functionals,
  and the flux/correction energy hierarchy E2/E3/E4;
- :mod:`kdvlab.dynamics` -- exponential integrators for the full flow and its
  high/low frequency splitting, stationary profile, regularity bookkeeping;
- :mod:`kdvlab.experiments` -- long-time suites (absorbing ball, tail decay,
  smoothing, energy identities, omega-limit probes, X_{s,b} diagnostics) with
  CSV/JSON reporting;
- :mod:`kdvlab.cli` -- config-driven runner, one directory of artifacts per
  suite.
"""

from .spectral import (
    AliasingError,
    GridMismatchError,
    GridSpec,
    SpectralField,
    bessel_potential,
    dealiased_product,
    derivative,
    from_physical,
    l2_norm,
    project_high,
    project_low,
    sobolev_norm,
    to_physical,
)
from .imethod import (
    CancellationError,
    EnergyReport,
    IMultiplier,
    correction3,
    correction4,
    correction_scaling_table,
    energy_flux3,
    energy_flux4,
    energy_flux5,
    modified_energy,
    multilinear,
    resonance,
    symmetrize,
)
from .dynamics import (
    DivergenceError,
    KdvParams,
    RegularityState,
    SolverState,
    SplitState,
    hamiltonian,
    init_split,
    lifetime_hint,
    regularity_view,
    stable_dt,
    stationary_profile,
    step_full,
    step_split,
)
from .experiments import (
    FitReport,
    TrajectoryRecord,
    fit_log_decay,
    initial_power_law,
    initial_random_band,
    initial_single_mode,
    persist,
    read_trace,
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

__version__ = "0.1.0"
