"""Quantum Fisher information near gap closings and its codimension scaling.

The QFI with respect to a mass-like parameter ``m`` of a gapped ground state
diverges or stays finite at the gap closing depending only on the
codimension ``p`` of the closing:

* ``p = 1``: ``QFI ~ 1/|m|``
* ``p = 2``: ``QFI ~ ln(1/|m|)``
* ``p = 3``: ``QFI -> const - c|m|`` (finite, with a cusp)

Modules: :mod:`models` (Hamiltonians), :mod:`spectrum` (eigen-decomposition),
:mod:`qgt` (quantum metric), :mod:`integrate` (Brillouin-zone / momentum
integration and sweeps), :mod:`scaling` (singularity classification).
"""

__version__ = "0.1.0"

from .errors import AtCriticalityError, ConvergenceError, InsufficientDataError, NoiseFloorError
from .integrate import (
    ContinuumSource,
    QuadratureConfig,
    SweepError,
    SweepResult,
    geometric_grid,
    qfi_continuum,
    qfi_with_error,
    scaled_integral,
    sweep,
)
from .models import (
    ModelSpec,
    chern_model,
    clifford_generators,
    evaluate,
    evaluate_dm,
    linearized_model,
    model_from_id,
    ssh_model,
    weyl_model,
    with_gapped_band,
)
from .qgt import chern_number, metric_mm_closed, metric_mm_overlap, metric_mm_sum, winding_number
from .scaling import FitReport, classify_singularity, difference_series, rg_check
from .spectrum import eigh, gap

__all__ = [
    "AtCriticalityError", "ConvergenceError", "InsufficientDataError", "NoiseFloorError",
    "ContinuumSource", "QuadratureConfig", "SweepError", "SweepResult", "geometric_grid",
    "qfi_continuum", "qfi_with_error", "scaled_integral", "sweep",
    "ModelSpec", "chern_model", "clifford_generators", "evaluate", "evaluate_dm",
    "linearized_model", "model_from_id", "ssh_model", "weyl_model", "with_gapped_band",
    "chern_number", "metric_mm_closed", "metric_mm_overlap", "metric_mm_sum", "winding_number",
    "FitReport", "classify_singularity", "difference_series", "rg_check",
    "eigh", "gap",
]
