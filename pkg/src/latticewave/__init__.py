"""Coined quantum-walk simulator for search and wave communication on periodic lattices."""

__version__ = "0.1.0"

from .lattice import (
    LatticeError,
    LatticeSpec,
    MarkedSet,
    WaveState,
    build_lattice,
    coin_matrix,
    dense_operator,
    marked_set,
    state_from_flat,
    step_perturbed,
    step_unperturbed,
    symmetric_vertex_state,
    translate_state,
    uniform_state,
    vertex_probabilities,
    vertex_probability,
)
from .spectral import (
    BlochMode,
    CouplingEstimate,
    CrossingModel,
    LambdaSweep,
    PerturberState,
    bloch_eigenphases,
    bloch_eigenvector,
    coupling_epsilon,
    crossing_gap,
    crossing_model,
    dense_eigenphases,
    exact_perturber_state,
    lambda_sweep,
    perturber_residual,
    perturber_state,
)
from .protocols import (
    MarkEvent,
    RunRecord,
    ScenarioConfig,
    SwitchProbeResult,
    run_continuous,
    run_search,
    run_switch_probe,
    run_transfer,
)
from .scenario import ScenarioDoc, ScenarioError, config_to_dict, parse_scenario

__all__ = [name for name in dir() if not name.startswith("_")]
