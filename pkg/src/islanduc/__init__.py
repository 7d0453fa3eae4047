"""Frequency-secure robust unit commitment toolkit for island power systems.

Workflow: load an island description (grid_model), solve adaptive robust
unit commitment with a conventional reserve rule (uc_formulation,
robust_solver), dispatch each wind scenario and simulate single-unit
outages (sfr_simulator), label the incidents and fit a logistic
acceptability model (lr_constraint), then re-solve the commitment with the
learned security rows and compare (experiment, cli).
"""

__version__ = "0.1.0"

from . import errors
from .grid_model import (GeneratorSpec, SystemSpec, UncertaintyBox,
                         WindScenarioSet, load_system, load_wind_csv,
                         scenario_envelope)
from .uc_formulation import LRModel, PWLCost, piecewise_cost
from .robust_solver import (BendersCut, CommitmentSchedule, Dispatch,
                            ReservePolicy, RobustOptions, RobustSolution,
                            SecurityPolicy, solve_ed, solve_extensive_oracle,
                            solve_robust_uc)

__all__ = [
    "errors", "GeneratorSpec", "SystemSpec", "UncertaintyBox",
    "WindScenarioSet", "load_system", "load_wind_csv", "scenario_envelope",
    "LRModel", "PWLCost", "piecewise_cost", "BendersCut",
    "CommitmentSchedule", "Dispatch", "ReservePolicy", "RobustOptions",
    "RobustSolution", "SecurityPolicy", "solve_ed",
    "solve_extensive_oracle", "solve_robust_uc", "__version__",
]
