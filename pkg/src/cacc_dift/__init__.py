"""Platoon CACC with a dynamic information flow topology.

Discrete-time simulation of a two-predecessor-following platoon whose
controller switches among four gain rows (CACC1/CACC2/CACC3/ACC) as V2V
links fail, plus frequency-domain string-stability analysis.
"""

from .comm import CommTopology, LinkModel, link_success_prob, sample_topology
from .control import (
    DEFAULT_GAINS,
    ConfigError,
    ControlInputs,
    ControllerGains,
    Mode,
    control_command,
    feedforward_step,
    select_mode,
    spacing_error,
    spacing_error_rate,
)
from .dynamics import SimulationError, VehicleState, step_plant
from .sim import (
    LeaderTrajectory,
    PlatoonConfig,
    RunMetrics,
    RunTrace,
    compare,
    load_leader_trajectory,
    run,
    synthetic_leader,
)
from .stability import FrequencyGrid, HInfResult, TransferFunction, build_ss, hinf_norm, magnitude, region_check

__version__ = "0.1.0"
