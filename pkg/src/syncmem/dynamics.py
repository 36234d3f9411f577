"""Time-domain propagation of the cavity and oscillator modes.

The two coupled modes evolve under

    da/dt = -(kappa + i delta) a + g b + sqrt(2 kappa) A_in
    db/dt = -(gamma + i Delta) b - g a

with piecewise-defined controls supplied by a :class:`ControlSchedule`.
Integration uses a fixed-step fourth-order Runge-Kutta sweep; control
and drive values at half steps are linear interpolants of the grid
samples.  A resolution guard rejects steps too coarse for the fastest
control before any work is done.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .design import ControlSchedule, CouplingDesign, DetuningDesign, MemoryParams, time_reversed_readout
from .envelopes import Envelope, TimeGrid, sech_input
from .errors import DegenerateInputError, InvalidArgumentError, StiffnessError

_RATE_GUARD = 0.05


@dataclass(frozen=True)
class ProtocolTiming:
    """Timing of a store-and-release run.

    Attributes:
        t0: Center of the input pulse; the write phase ends at t = 0.
        T_hold: Idle time between the end of the write and the start of
            the read, in units of 1/kappa.
        T_I: Duration of the input pulse's passage used to classify a
            run: holds longer than this count as memory operation
            rather than mere reflection delay.
    """

    t0: float
    T_hold: float
    T_I: float = 1.0

    def __post_init__(self) -> None:
        for name in ("t0", "T_hold", "T_I"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidArgumentError(f"{name} must be finite, got {value!r}")
        if self.T_hold < 0:
            raise InvalidArgumentError(f"T_hold must be >= 0, got {self.T_hold}")
        if self.T_I <= 0:
            raise InvalidArgumentError(f"T_I must be > 0, got {self.T_I}")

    @property
    def is_memory_regime(self) -> bool:
        """Whether the hold outlasts the input pulse's own passage."""
        return self.T_hold > self.T_I


@dataclass(frozen=True, eq=False)
class StateTrajectory:
    """Cavity and oscillator amplitudes sampled on a common grid."""

    a: Envelope
    b: Envelope

    def __post_init__(self) -> None:
        if self.a.grid != self.b.grid:
            raise InvalidArgumentError("cavity and oscillator trajectories must share a grid")

    @property
    def grid(self) -> TimeGrid:
        return self.a.grid


@dataclass(frozen=True, eq=False)
class ProtocolResult:
    """Complete record of one store-and-release run."""

    trajectory: StateTrajectory
    A_in: Envelope
    A_out: Envelope
    timing: ProtocolTiming
    params: MemoryParams
    schedule: ControlSchedule

    def __post_init__(self) -> None:
        grid = self.schedule.grid
        for name in ("A_in", "A_out"):
            if getattr(self, name).grid != grid:
                raise InvalidArgumentError(f"{name} must live on the schedule grid")
        if self.trajectory.grid != grid:
            raise InvalidArgumentError("trajectory must live on the schedule grid")
        root = math.sqrt(2.0 * self.params.kappa)
        expected = root * self.trajectory.a.samples - self.A_in.samples
        scale = max(1.0, float(np.max(np.abs(self.A_in.samples))))
        if np.max(np.abs(self.A_out.samples - expected)) > 1e-9 * scale:
            raise InvalidArgumentError(
                "A_out must equal sqrt(2 kappa) a - A_in on every sample"
            )


def _check_resolution(params: MemoryParams, schedule: ControlSchedule) -> None:
    """Reject steps too coarse to resolve the fastest control."""
    dt = schedule.grid.dt
    rates = {
        "g": float(np.max(np.abs(schedule.g))),
        "delta": float(np.max(np.abs(schedule.delta))),
        "Delta": float(np.max(np.abs(schedule.Delta))),
        "kappa": params.kappa,
    }
    control = max(rates, key=lambda k: rates[k])
    max_rate = rates[control]
    if dt * max_rate > _RATE_GUARD:
        raise StiffnessError(control, max_rate, dt, _RATE_GUARD / max_rate)


def _rk4_sweep(
    ca: list,
    cb: list,
    g: list,
    drive: list,
    dt: float,
    lo: int,
    hi: int,
    a: list,
    b: list,
) -> None:
    """Advance (a, b) in place from sample lo to sample hi.

    ca and cb hold the per-sample damping-plus-detuning coefficients
    -(kappa + i delta) and -(gamma + i Delta); drive holds
    sqrt(2 kappa) A_in.  Half-step values are midpoint averages of the
    adjacent samples.  Plain Python scalars keep the per-step cost low.
    """
    h = dt
    h2 = 0.5 * h
    h6 = h / 6.0
    ai = a[lo]
    bi = b[lo]
    for i in range(lo, hi):
        ca0 = ca[i]
        ca1 = ca[i + 1]
        cam = 0.5 * (ca0 + ca1)
        cb0 = cb[i]
        cb1 = cb[i + 1]
        cbm = 0.5 * (cb0 + cb1)
        g0 = g[i]
        g1 = g[i + 1]
        gm = 0.5 * (g0 + g1)
        d0 = drive[i]
        d1 = drive[i + 1]
        dm = 0.5 * (d0 + d1)
        k1a = ca0 * ai + g0 * bi + d0
        k1b = cb0 * bi - g0 * ai
        a2 = ai + h2 * k1a
        b2 = bi + h2 * k1b
        k2a = cam * a2 + gm * b2 + dm
        k2b = cbm * b2 - gm * a2
        a3 = ai + h2 * k2a
        b3 = bi + h2 * k2b
        k3a = cam * a3 + gm * b3 + dm
        k3b = cbm * b3 - gm * a3
        a4 = ai + h * k3a
        b4 = bi + h * k3b
        k4a = ca1 * a4 + g1 * b4 + d1
        k4b = cb1 * b4 - g1 * a4
        ai = ai + h6 * (k1a + 2.0 * (k2a + k3a) + k4a)
        bi = bi + h6 * (k1b + 2.0 * (k2b + k3b) + k4b)
        a[i + 1] = ai
        b[i + 1] = bi


def _coefficient_lists(
    params: MemoryParams, schedule: ControlSchedule, A_in: Envelope
) -> tuple[list, list, list, list]:
    ca = (-(params.kappa + 1j * schedule.delta)).tolist()
    cb = (-(params.gamma + 1j * schedule.Delta)).tolist()
    g = schedule.g.tolist()
    drive = (math.sqrt(2.0 * params.kappa) * A_in.samples).tolist()
    return ca, cb, g, drive


def integrate(
    params: MemoryParams,
    schedule: ControlSchedule,
    A_in: Envelope,
    a_init: complex = 0j,
    b_init: complex = 0j,
) -> StateTrajectory:
    """Propagate both modes across the schedule's full grid.

    Args:
        params: Damping rates of the two modes.
        schedule: Controls sampled on the integration grid.
        A_in: Input field envelope on the same grid.
        a_init: Cavity amplitude at the first sample.
        b_init: Oscillator amplitude at the first sample.

    Returns:
        The sampled trajectory of both modes.

    Raises:
        StiffnessError: If dt cannot resolve the fastest control.
        InvalidArgumentError: If the input envelope lives on a
            different grid than the schedule.
    """
    if A_in.grid != schedule.grid:
        raise InvalidArgumentError("input envelope must live on the schedule grid")
    _check_resolution(params, schedule)
    n = schedule.grid.n_points
    a = [0j] * n
    b = [0j] * n
    a[0] = complex(a_init)
    b[0] = complex(b_init)
    ca, cb, g, drive = _coefficient_lists(params, schedule, A_in)
    _rk4_sweep(ca, cb, g, drive, schedule.grid.dt, 0, n - 1, a, b)
    return StateTrajectory(
        a=Envelope(schedule.grid, np.asarray(a)),
        b=Envelope(schedule.grid, np.asarray(b)),
    )


def _analytic_hold_fill(
    times: np.ndarray,
    lo: int,
    hi: int,
    t_ref: float,
    a_ref: complex,
    b_ref: complex,
    rate_a: complex,
    rate_b: complex,
    a: list,
    b: list,
) -> None:
    """Fill samples lo..hi with freely decaying amplitudes.

    With the coupling off the two modes decouple and decay exactly as
    a(t) = a_ref exp(-rate_a (t - t_ref)) and likewise for b, so the
    hold advances in closed form instead of by quadrature.
    """
    lapse = times[lo : hi + 1] - t_ref
    a[lo : hi + 1] = (a_ref * np.exp(-rate_a * lapse)).tolist()
    b[lo : hi + 1] = (b_ref * np.exp(-rate_b * lapse)).tolist()


def run_protocol(
    params: MemoryParams,
    design: CouplingDesign | DetuningDesign,
    timing: ProtocolTiming,
    a0: complex = 1.0 + 0j,
    *,
    a_init: complex = 0j,
    b_init: complex = 0j,
    hold_coupling: float = 0.0,
    hold_cavity_detuning: float = 0.0,
    hold_oscillator_detuning: float = 0.0,
) -> ProtocolResult:
    """Run a full write, hold, and read sequence for a pulse design.

    The write and read phases are integrated numerically.  When the
    hold coupling is zero the hold phase advances analytically: each
    mode decays freely, no drive is applied, and the idle stretch costs
    no integration error however long it lasts.  A nonzero hold
    coupling forces numerical integration across all three phases.

    Args:
        params: Damping rates of the two modes.
        design: Write-phase pulse design ending at t = 0.
        timing: Pulse center and hold duration; timing.t0 must match
            the design's pulse center when the design has one.
        a0: Input pulse amplitude scale.
        a_init: Cavity amplitude at the start of the write.
        b_init: Oscillator amplitude at the start of the write.
        hold_coupling: Coupling pinned during the hold.
        hold_cavity_detuning: Cavity detuning pinned during the hold.
        hold_oscillator_detuning: Oscillator detuning pinned during
            the hold.

    Returns:
        The full run record, including the reconstructed output field
        A_out = sqrt(2 kappa) a - A_in.
    """
    write_grid = design.schedule.grid
    if design.pulse_center is not None:
        if abs(timing.t0 - design.pulse_center) > 0.25 * write_grid.dt:
            raise InvalidArgumentError(
                f"timing.t0 = {timing.t0} does not match the design pulse center "
                f"{design.pulse_center}"
            )
    schedule = time_reversed_readout(
        design,
        timing.T_hold,
        hold_coupling=hold_coupling,
        hold_cavity_detuning=hold_cavity_detuning,
        hold_oscillator_detuning=hold_oscillator_detuning,
    )
    _check_resolution(params, schedule)
    grid = schedule.grid
    n = grid.n_points
    times = grid.times()

    if design.pulse_center is not None:
        A_in = sech_input(grid, a0=a0, t_center=design.pulse_center)
    else:
        samples = np.zeros(n, dtype=np.complex128)
        n_write = write_grid.n_points
        samples[:n_write] = math.sqrt(2.0 * params.kappa) * a0 * design.a_target.samples
        A_in = Envelope(grid, samples)

    a = [0j] * n
    b = [0j] * n
    a[0] = complex(a_init)
    b[0] = complex(b_init)
    ca, cb, g, drive = _coefficient_lists(params, schedule, A_in)
    dt = grid.dt

    i_write_end = schedule.phases.write[1] - 1
    if schedule.phases.read[0] == schedule.phases.write[1]:
        # zero hold: the write-end sample doubles as the read seed
        read_sweep_start = i_write_end
    else:
        # the read phase opens on the sample at t = T_hold
        read_sweep_start = schedule.phases.read[0]

    _rk4_sweep(ca, cb, g, drive, dt, 0, i_write_end, a, b)

    if read_sweep_start > i_write_end:
        if hold_coupling == 0.0:
            _analytic_hold_fill(
                times,
                i_write_end + 1,
                read_sweep_start,
                float(times[i_write_end]),
                a[i_write_end],
                b[i_write_end],
                params.kappa + 1j * hold_cavity_detuning,
                params.gamma + 1j * hold_oscillator_detuning,
                a,
                b,
            )
        else:
            _rk4_sweep(ca, cb, g, drive, dt, i_write_end, read_sweep_start, a, b)

    _rk4_sweep(ca, cb, g, drive, dt, read_sweep_start, n - 1, a, b)

    a_env = Envelope(grid, np.asarray(a))
    b_env = Envelope(grid, np.asarray(b))
    A_out = Envelope(grid, math.sqrt(2.0 * params.kappa) * a_env.samples - A_in.samples)
    return ProtocolResult(
        trajectory=StateTrajectory(a=a_env, b=b_env),
        A_in=A_in,
        A_out=A_out,
        timing=timing,
        params=params,
        schedule=schedule,
    )


def _input_scale(result: ProtocolResult) -> float:
    scale = float(np.max(np.abs(result.A_in.samples)))
    if scale == 0.0:
        raise DegenerateInputError("input envelope is identically zero")
    return scale


def vacuum_output_residual(result: ProtocolResult) -> float:
    """Largest leaked output before the read begins, relative to the input peak.

    A faithful write keeps the output port dark through the write and
    hold phases; this reduction measures how dark.
    """
    scale = _input_scale(result)
    stop = result.schedule.phases.read[0]
    leak = np.abs(result.A_out.samples[:stop])
    return float(np.max(leak)) / scale


def mirror_residual(result: ProtocolResult) -> float:
    """Deviation from A_out(t) = -A_in(T_hold - t), relative to the input peak.

    The run grid is symmetric about T_hold / 2, so the time-reflected
    input is the reversed sample array.
    """
    scale = _input_scale(result)
    mismatch = np.abs(result.A_out.samples + result.A_in.samples[::-1])
    return float(np.max(mismatch)) / scale


class EnergyBalance(NamedTuple):
    """Pulse energies through the three phases of a run."""

    input_energy: float
    stored_energy: float
    output_energy: float


def energy_balance(result: ProtocolResult) -> EnergyBalance:
    """Input energy over the write, |b|^2 at the write end, output energy over the read."""
    dt = result.schedule.grid.dt
    w_hi = result.schedule.phases.write[1]
    r_lo = result.schedule.phases.read[0]
    e_in = float(np.trapezoid(np.abs(result.A_in.samples[:w_hi]) ** 2, dx=dt))
    e_out = float(np.trapezoid(np.abs(result.A_out.samples[r_lo:]) ** 2, dx=dt))
    stored = float(np.abs(result.trajectory.b.samples[w_hi - 1]) ** 2)
    return EnergyBalance(e_in, stored, e_out)


def write_trajectory_csv(result: ProtocolResult, path: str) -> None:
    """Write the full run record as CSV.

    Columns: t, ain_re, ain_im, a_re, a_im, b_re, b_im, aout_re,
    aout_im, g, delta, Delta.
    """
    times = result.schedule.grid.times()
    columns = (
        result.A_in.samples,
        result.trajectory.a.samples,
        result.trajectory.b.samples,
        result.A_out.samples,
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,ain_re,ain_im,a_re,a_im,b_re,b_im,aout_re,aout_im,g,delta,Delta\n")
        for i, t in enumerate(times):
            parts = [f"{t:.12e}"]
            for col in columns:
                z = col[i]
                parts.append(f"{z.real:.12e}")
                parts.append(f"{z.imag:.12e}")
            parts.append(f"{result.schedule.g[i]:.12e}")
            parts.append(f"{result.schedule.delta[i]:.12e}")
            parts.append(f"{result.schedule.Delta[i]:.12e}")
            fh.write(",".join(parts) + "\n")
