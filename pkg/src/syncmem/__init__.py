"""Simulator and control-waveform designer for a synchronous cavity-oscillator memory.

The package splits along the workflow: build envelopes and grids
(`envelopes`), design control waveforms that write a target pulse into
the long-lived oscillator and read it back out (`design`), integrate the
coupled cavity-oscillator equations of motion (`dynamics`), and score
the resulting memory as a quantum channel (`metrology`). The `cli`
module ties these together into the `syncmem` command.
"""

from .design import (
    ControlSchedule,
    CouplingDesign,
    DetuningDesign,
    MemoryParams,
    PhaseMarkers,
    coupling_residual,
    design_coupling_general,
    design_coupling_sech,
    design_detuning_sech,
    detuning_consistency_residual,
    time_reversed_readout,
    write_schedule_csv,
)
from .dynamics import (
    EnergyBalance,
    ProtocolResult,
    ProtocolTiming,
    StateTrajectory,
    energy_balance,
    integrate,
    mirror_residual,
    run_protocol,
    vacuum_output_residual,
    write_trajectory_csv,
)
from .envelopes import (
    Envelope,
    ModeFunction,
    TimeGrid,
    l2_norm_sq,
    make_grid,
    mask_window,
    normalize_mode,
    project,
    read_envelope_csv,
    sech_input,
    write_envelope_csv,
)
from .errors import (
    DegenerateInputError,
    DesignInfeasibleError,
    InvalidArgumentError,
    StiffnessError,
    UnsupportedInputError,
)
from .metrology import (
    EfficiencyReport,
    FidelityReport,
    FockState,
    HaarEstimate,
    bounded_fidelity,
    classical_coherent_bound,
    clone_bound,
    coherent_fidelity,
    efficiency,
    fidelity_report,
    format_fidelity_table,
    haar_average_fidelity,
    invert_bounded_fidelity,
    loss_channel,
    qm_efficiency_threshold,
    standard_modes,
    write_fidelity_csv,
)

__all__ = [
    "ControlSchedule",
    "CouplingDesign",
    "DetuningDesign",
    "EfficiencyReport",
    "EnergyBalance",
    "Envelope",
    "FidelityReport",
    "FockState",
    "HaarEstimate",
    "MemoryParams",
    "ModeFunction",
    "PhaseMarkers",
    "ProtocolResult",
    "ProtocolTiming",
    "StateTrajectory",
    "TimeGrid",
    "bounded_fidelity",
    "classical_coherent_bound",
    "clone_bound",
    "coherent_fidelity",
    "coupling_residual",
    "design_coupling_general",
    "design_coupling_sech",
    "design_detuning_sech",
    "detuning_consistency_residual",
    "efficiency",
    "energy_balance",
    "fidelity_report",
    "format_fidelity_table",
    "haar_average_fidelity",
    "integrate",
    "invert_bounded_fidelity",
    "loss_channel",
    "mirror_residual",
    "qm_efficiency_threshold",
    "run_protocol",
    "standard_modes",
    "time_reversed_readout",
    "vacuum_output_residual",
    "write_fidelity_csv",
    "write_trajectory_csv",
    "l2_norm_sq",
    "make_grid",
    "mask_window",
    "normalize_mode",
    "project",
    "read_envelope_csv",
    "sech_input",
    "write_envelope_csv",
    "DegenerateInputError",
    "DesignInfeasibleError",
    "InvalidArgumentError",
    "StiffnessError",
    "UnsupportedInputError",
]

__version__ = "0.1.0"
