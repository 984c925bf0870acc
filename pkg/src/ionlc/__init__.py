"""Simulation toolkit for a parametrically coupled ion / LC-circuit interface.

Subpackage map:

    qalgebra        tensor layouts, operators, states
    device          circuit and trap parameter derivations (SI)
    electrostatics  electrode geometry factor via relaxation solve
    hamiltonians    lab / interaction / RWA frames and envelopes
    dynamics        adaptive pure-state and Lindblad propagation
    protocols       swap, sideband, loop-sequence and sensing experiments
    config, cli     YAML run configs and the `ionlc` command

The flat names re-exported here are the working vocabulary of the
protocol layer; anything deeper is imported from its module.
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    cli,
    config,
    device,
    dynamics,
    electrostatics,
    hamiltonians,
    protocols,
    qalgebra,
)
from .device import DeviceParams, effective_coupling  # noqa: F401
from .dynamics import (  # noqa: F401
    EvolutionSpec,
    NumericalError,
    SimulationResult,
    evolve_lindblad,
    evolve_pure,
)
from .hamiltonians import (  # noqa: F401
    interaction_frame_hamiltonian,
    lab_frame_hamiltonian,
    rwa_hamiltonian,
    scaled_hierarchy,
)
from .protocols import (  # noqa: F401
    cat_metrology,
    full_budget_run,
    heating_resistance_scan,
    ms_sequence,
    run_schedule,
    swap_schedule,
    two_ion_phase_gate,
)
from .qalgebra import ModeLayout, QOperator, QState  # noqa: F401
