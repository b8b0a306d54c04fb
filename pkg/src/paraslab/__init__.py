"""Numerical laboratory for u_t = D1 Δu + v^p, v_t = D2 Δv + u^q with singular data."""
from .diagnostics import (
    BoundCheckReport,
    lemma21_check,
    lemma22_check,
    lemma23_check,
    lemma23_log_integral,
    necessary_condition_check,
    sufficiency_hypothesis_check,
)
from .exponents import (
    CaseLabel,
    ExponentSet,
    HypothesisError,
    ParameterError,
    SystemParams,
    classify,
    derive_exponents,
    lebesgue_indices,
)
from .harness import RunConfig, SweepResult, load_config, run_config, sweep_threshold
from .mild import MildRunReport, PicardOptions, picard_evolve, verify_supersolution_caseA
from .profiles import (
    LogModulator,
    OrliczSpec,
    RadialProfile,
    TableModulator,
    atom_profile,
    ball_measure,
    constant_profile,
    make_optimal_profile,
    sample_to_grid,
    scale_profile,
    sup_ball_measure,
)
from .semigroup import GridField, TimeGrid, apply_semigroup_grid, apply_semigroup_radial, uloc_norm

__version__ = "0.1.0"
