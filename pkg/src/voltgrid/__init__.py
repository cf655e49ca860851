"""voltgrid: distribution-feeder voltage regulation toolkit.

AC power flow on radial feeders, PV smart-inverter simulation under baseline,
autonomous Volt-Var, and learned coordinated control, plus the training and
evaluation machinery for the coordinating agent.
"""
from .ddpg import (
    DdpgAgent,
    DdpgConfig,
    OuNoise,
    ReplayBuffer,
    TerminationTracker,
    TrainingLog,
    load_agent,
    save_agent,
    train,
)
from .environment import (
    RewardBreakdown,
    RewardConfig,
    ScenarioError,
    StateLayout,
    VoltageControlEnv,
    classify_zone,
    reward,
)
from .inverter import (
    DroopCurve,
    DroopEquilibrium,
    InverterSpec,
    InverterState,
    apply_var_priority,
    droop_q,
    solve_droop_equilibrium,
)
from .network import (
    AdmittanceMatrix,
    Bus,
    Line,
    LoadSpec,
    NetworkModel,
    ParameterError,
    SchemaError,
    TopologyError,
    build_admittance,
    build_network,
    load_network,
)
from .power_flow import (
    InjectionVector,
    PowerFlowError,
    PowerFlowSolution,
    SolverOptions,
    build_injections,
    compute_losses,
    solve,
)
from .scenario import (
    ProfileSet,
    Scenario,
    generate_synthetic_year,
    load_profiles,
    sample_envelope_scenario,
    sample_training_scenario,
    scenario_at,
    training_stream,
    write_profiles,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
