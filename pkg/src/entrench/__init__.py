"""Tie formation with triangle and spillover incentives on two-layer networks,
and the persistence of structure after sudden tie-cost shocks."""

from .core import (
    LAYERS,
    IllegalMoveError,
    IncentiveParams,
    ModeError,
    Move,
    MoveKind,
    MultiplexNetwork,
    apply_move,
    degree,
    marginal_add,
    marginal_drop,
    marginal_rewire,
    spillover_count,
    triangle_count,
    utility,
)
from .dynamics import RoundLog, SimConfig, agent_turn, run_round, run_to_equilibrium
from .metrics import MetricsRecord, resilience
from .shocks import ExperimentResult, ShockSpec, run_condition, run_one_layer_shock, run_single_layer

__version__ = "0.1.0"
