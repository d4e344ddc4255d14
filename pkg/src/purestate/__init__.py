"""Simulation lab for identifying the purest of K unknown quantum states."""
from .kernels import BACKEND
from .qcore import (
    DensityMatrix,
    EnsembleSpec,
    GapProfile,
    StateEnsemble,
    UnitaryMatrix,
    alpha_from_purity,
    depolarized_state,
    gap_profile,
    make_ensemble,
    purity,
    sample_haar_unitary,
)
from .identify import phase_budgets, run_cm_pqsi, run_im_pqsi, run_uniform_baseline, theoretical_exponents

__version__ = "0.1.0"
