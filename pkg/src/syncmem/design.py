"""Inverse design of the write-phase controls and the time-reversed readout.

The memory absorbs an incoming pulse perfectly when the outgoing field
vanishes during the write: sqrt(2*kappa)*a(t) - A_in(t) = 0. Feeding
that back into the equations of motion turns the design problem into
algebra: given the cavity trajectory a(t) the controls follow. Two
strategies are implemented, a time-dependent coupling g(t) at zero
detuning, and fixed coupling with time-dependent detunings (sech pulses
only). Readout schedules are the time reverse of the write.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.special import expit

from .envelopes import Envelope, TimeGrid, _sech
from .errors import (
    DegenerateInputError,
    DesignInfeasibleError,
    InvalidArgumentError,
    UnsupportedInputError,
)

__all__ = [
    "MemoryParams",
    "PhaseMarkers",
    "ControlSchedule",
    "CouplingDesign",
    "DetuningDesign",
    "design_coupling_sech",
    "design_coupling_general",
    "design_detuning_sech",
    "time_reversed_readout",
    "coupling_residual",
    "detuning_consistency_residual",
    "write_schedule_csv",
]

# Fraction of the peak below which the cavity amplitude counts as empty;
# the coupling is frozen there instead of divided by a vanishing a.
_A_LIVE_FRACTION = 1e-6
# Division guard for b^2 at the window start, where it is exactly zero
# by construction. Round-off scale only; the cavity-amplitude mask is
# what keeps the ill-conditioned leading edge out of the live region.
_B2_LIVE_FRACTION = 1e-24
# b^2 below this fraction of the squared cavity peak is a real
# infeasibility (the target rises faster than the cavity can fill),
# not round-off.
_B2_INFEASIBLE_FRACTION = -1e-8
# The variable-detuning schedule grows like e^|tau|; cap the half-width.
_DETUNING_HALF_WIDTH_CAP = 6.0


@dataclass(frozen=True)
class MemoryParams:
    """Fixed physical rates, in units where the cavity damping is 1."""

    kappa: float = 1.0
    gamma: float = 0.0

    def __post_init__(self) -> None:
        if not (self.kappa > 0.0) or not np.isfinite(self.kappa):
            raise InvalidArgumentError(f"kappa must be positive, got {self.kappa}")
        if self.gamma < 0.0 or not np.isfinite(self.gamma):
            raise InvalidArgumentError(f"gamma must be >= 0, got {self.gamma}")


@dataclass(frozen=True)
class PhaseMarkers:
    """Half-open index ranges for the write, hold and read phases."""

    write: tuple[int, int]
    hold: tuple[int, int]
    read: tuple[int, int]

    def __post_init__(self) -> None:
        w, h, r = self.write, self.hold, self.read
        ok = (
            0 <= w[0] <= w[1] == h[0] <= h[1] == r[0] <= r[1]
            and w[0] == 0
        )
        if not ok:
            raise InvalidArgumentError(
                f"phase ranges must partition the grid contiguously, got "
                f"write={w}, hold={h}, read={r}"
            )

    @property
    def n_points(self) -> int:
        return self.read[1]


def _as_real_control(name: str, values: np.ndarray, n: int) -> np.ndarray:
    arr = np.asarray(values)
    if np.iscomplexobj(arr):
        if np.max(np.abs(arr.imag)) != 0.0:
            raise InvalidArgumentError(f"control '{name}' must be purely real")
        arr = arr.real
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise InvalidArgumentError(
            f"control '{name}' must have {n} samples, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"control '{name}' has non-finite samples")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ControlSchedule:
    """Sampled controls g(t), delta(t), Delta(t) plus phase markers.

    delta detunes the cavity, Delta the oscillator. All three arrays
    are real by construction; the design procedures never produce
    complex detunings.
    """

    grid: TimeGrid
    g: np.ndarray
    delta: np.ndarray
    Delta: np.ndarray
    phases: PhaseMarkers

    def __post_init__(self) -> None:
        n = self.grid.n_points
        object.__setattr__(self, "g", _as_real_control("g", self.g, n))
        object.__setattr__(self, "delta", _as_real_control("delta", self.delta, n))
        object.__setattr__(self, "Delta", _as_real_control("Delta", self.Delta, n))
        if self.phases.n_points != n:
            raise InvalidArgumentError(
                f"phase ranges cover {self.phases.n_points} points, grid has {n}"
            )


@dataclass(frozen=True, eq=False)
class CouplingDesign:
    """Write-phase schedule with variable coupling, plus its targets.

    a_target and b_target are the cavity and oscillator trajectories the
    schedule is built to produce for a unit-amplitude input; the actual
    amplitude scales in linearly at simulation time. pulse_center is the
    arrival time of the sech input for the closed-form family, and None
    for designs built from a sampled envelope.
    """

    schedule: ControlSchedule
    b_target: Envelope
    a_target: Envelope
    pulse_center: float | None

    def __post_init__(self) -> None:
        peak = float(np.max(np.abs(self.b_target.samples)))
        start = abs(self.b_target.samples[0])
        if peak > 0.0 and start > 1e-4 * peak:
            raise InvalidArgumentError(
                f"designed oscillator amplitude must start from (near) zero; "
                f"got |b(start)| = {start:.3g} against peak {peak:.3g}"
            )


@dataclass(frozen=True, eq=False)
class DetuningDesign:
    """Write-phase schedule with fixed coupling and variable detunings.

    b1 and b2 are the real and imaginary parts of the designed
    oscillator trajectory for a unit-amplitude input.
    """

    schedule: ControlSchedule
    b1: Envelope
    b2: Envelope
    pulse_center: float


def _write_only_phases(n: int) -> PhaseMarkers:
    return PhaseMarkers(write=(0, n), hold=(n, n), read=(n, n))


def design_coupling_sech(t0: float, grid: TimeGrid) -> CouplingDesign:
    """Closed-form coupling schedule absorbing sech(t - t0) into the memory.

    The cavity follows a(t) = sech(tau) with tau = t - t0, the oscillator
    fills up as b(t) = e^tau * sech(tau) (limit 2 per unit input
    amplitude), and the coupling that makes the output vanish is
    g(t) = -sech(tau). The schedule does not depend on the input
    amplitude. The grid must reach back at least 8 pulse widths before
    the peak so that b starts from (numerically) zero.
    """
    if grid.t_start > t0 - 8.0 + 1e-6 * grid.dt:
        raise InvalidArgumentError(
            f"grid must start at or before t0 - 8 = {t0 - 8.0:g} "
            f"(got {grid.t_start:g}); the oscillator target must start from zero"
        )
    tau = grid.times() - t0
    sech = _sech(tau)
    a_target = Envelope(grid, sech)
    # e^tau * sech(tau) = 2 / (1 + e^(-2 tau)), i.e. a logistic ramp
    b_target = Envelope(grid, 2.0 * expit(2.0 * tau))
    zeros = np.zeros(grid.n_points)
    schedule = ControlSchedule(
        grid, -sech, zeros, zeros, _write_only_phases(grid.n_points)
    )
    return CouplingDesign(schedule, b_target, a_target, pulse_center=t0)


def _derivative_o4(y: np.ndarray, dt: float) -> np.ndarray:
    """Fourth-order finite-difference derivative on a uniform grid."""
    n = y.shape[0]
    if n < 5:
        raise InvalidArgumentError("need at least 5 samples to differentiate")
    d = np.empty_like(y)
    d[2:-2] = (-y[4:] + 8.0 * y[3:-1] - 8.0 * y[1:-3] + y[:-4]) / (12.0 * dt)
    d[0] = (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) / (
        12.0 * dt
    )
    d[1] = (-3.0 * y[0] - 10.0 * y[1] + 18.0 * y[2] - 6.0 * y[3] + y[4]) / (12.0 * dt)
    d[-2] = (3.0 * y[-1] + 10.0 * y[-2] - 18.0 * y[-3] + 6.0 * y[-4] - y[-5]) / (
        12.0 * dt
    )
    d[-1] = (25.0 * y[-1] - 48.0 * y[-2] + 36.0 * y[-3] - 16.0 * y[-4] + 3.0 * y[-5]) / (
        12.0 * dt
    )
    return d


def design_coupling_general(
    a_desired: Envelope, params: MemoryParams = MemoryParams()
) -> CouplingDesign:
    """Coupling schedule for an arbitrary real, nonnegative cavity target.

    With the output held at zero during the write, the oscillator energy
    is fixed by bookkeeping alone:

        b^2(t) = 2*kappa*integral(a^2, start..t) - a^2(t) + a^2(start)

    and the coupling follows as g = (da/dt - kappa*a)/b. The target must
    start from zero (within 1e-6 of its peak) so that b(start) = 0. If
    b^2 dips genuinely negative the target rises faster than e^(kappa*t)
    and no coupling can realize it. Tiny negative round-off values are
    clipped to zero, and g is frozen at its nearest computed value
    wherever the cavity is essentially empty, where its value is
    physically irrelevant.
    """
    grid = a_desired.grid
    samples = a_desired.samples
    peak = float(np.max(np.abs(samples)))
    if peak <= 0.0:
        raise DegenerateInputError("cavity target is identically zero")
    if np.max(np.abs(samples.imag)) > 1e-12 * peak:
        raise UnsupportedInputError("cavity target must be purely real")
    a = samples.real.astype(np.float64)
    if np.min(a) < -1e-12 * peak:
        raise UnsupportedInputError("cavity target must be nonnegative")
    if abs(a[0]) > 1e-6 * peak:
        raise UnsupportedInputError(
            f"cavity target must start from zero (<= 1e-6 of peak); "
            f"got a(start) = {a[0]:.3g} with peak {peak:.3g}"
        )

    kappa = params.kappa
    dt = grid.dt
    a_sq = a * a
    b_sq = 2.0 * kappa * cumulative_simpson(a_sq, dx=dt, initial=0.0) - a_sq + a_sq[0]
    if np.min(b_sq) < _B2_INFEASIBLE_FRACTION * peak * peak:
        t_bad = grid.times()[int(np.argmin(b_sq))]
        raise DesignInfeasibleError(
            f"target rises faster than the cavity can fill: b^2 reaches "
            f"{np.min(b_sq):.3g} at t = {t_bad:g} (limit is da/dt <= kappa*a)"
        )
    b = np.sqrt(np.clip(b_sq, 0.0, None))

    da = _derivative_o4(a, dt)
    live = (np.abs(a) > _A_LIVE_FRACTION * peak) & (
        b_sq > _B2_LIVE_FRACTION * float(np.max(b_sq))
    )
    if not np.any(live):
        raise DegenerateInputError("cavity target is never appreciably nonzero")
    g = np.zeros(grid.n_points)
    g[live] = (da[live] - kappa * a[live]) / b[live]
    # freeze g outside the live region at the nearest live value
    live_idx = np.flatnonzero(live)
    all_idx = np.arange(grid.n_points)
    pos = np.searchsorted(live_idx, all_idx)
    left = live_idx[np.clip(pos - 1, 0, live_idx.size - 1)]
    right = live_idx[np.clip(pos, 0, live_idx.size - 1)]
    nearest = np.where(all_idx - left <= right - all_idx, left, right)
    g = np.where(live, g, g[nearest])

    zeros = np.zeros(grid.n_points)
    schedule = ControlSchedule(grid, g, zeros, zeros, _write_only_phases(grid.n_points))
    return CouplingDesign(
        schedule, Envelope(grid, b), Envelope(grid, a), pulse_center=None
    )


def design_detuning_sech(t0: float, grid: TimeGrid) -> DetuningDesign:
    """Detuning schedule absorbing sech(t - t0) at fixed coupling g = 1.

    The cavity again follows a(t) = sech(tau), while the oscillator
    picks up a complex trajectory b = b1 + i*b2 with b1 = -e^tau sech^2(tau)
    and b2 = e^tau sech(tau) tanh(tau). The detunings that realize it are

        delta(tau) = e^tau  * tanh(tau)
        Delta(tau) = e^-tau * tanh(tau) + sech(tau)

    Both grow like e^|tau|, so the write window may extend at most 6
    widths past the pulse center, and Delta (which diverges toward the
    window start, where the oscillator is still empty) follows its
    closed form only from tau = -(t_end - t0) onward, mirroring its
    active range on the read side. Before that point it freezes at the
    active-edge value: a large constant detuning keeps the oscillator
    response suppressed by 1/|Delta| exactly as the diverging closed
    form would, without shrinking the resolvable step size.
    """
    half_width = grid.t_end - t0
    if half_width <= 0.0:
        raise InvalidArgumentError(
            f"write window must extend past the pulse center t0 = {t0:g}"
        )
    if half_width > _DETUNING_HALF_WIDTH_CAP + 1e-9:
        raise InvalidArgumentError(
            f"write window extends {half_width:g} pulse widths past the center; "
            f"the detunings grow like e^tau and are capped at "
            f"{_DETUNING_HALF_WIDTH_CAP:g} widths"
        )
    tau = grid.times() - t0
    sech = _sech(tau)
    tanh = np.tanh(tau)
    ramp = 2.0 * expit(2.0 * tau)  # e^tau * sech(tau)

    delta = np.exp(tau) * tanh
    Delta = np.zeros(grid.n_points)
    active = tau >= -half_width
    Delta[active] = np.exp(-tau[active]) * tanh[active] + sech[active]
    Delta[~active] = Delta[int(np.argmax(active))]

    b1 = Envelope(grid, -ramp * sech)
    b2 = Envelope(grid, ramp * tanh)
    g = np.ones(grid.n_points)
    schedule = ControlSchedule(grid, g, delta, Delta, _write_only_phases(grid.n_points))
    return DetuningDesign(schedule, b1, b2, pulse_center=t0)


def time_reversed_readout(
    design: CouplingDesign | DetuningDesign,
    T_hold: float,
    *,
    hold_coupling: float = 0.0,
    hold_cavity_detuning: float = 0.0,
    hold_oscillator_detuning: float = 0.0,
) -> ControlSchedule:
    """Full write/hold/read schedule from a write design.

    The write phase must end at t = 0. The hold runs over [0, T_hold]
    with all controls off by default (an alternative hold with nonzero
    coupling or constant detunings can be requested through the keyword
    arguments). The read phase over [T_hold, T_hold - t_start] replays
    the write controls reflected about t = T_hold/2: g picks up its
    write value at the mirrored time and both detunings flip sign. The
    storage time must be a whole number of grid steps so that the
    reflection lands exactly on grid points.
    """
    ws = design.schedule
    wgrid = ws.grid
    dt = wgrid.dt
    if abs(wgrid.t_end) > 1e-6 * dt:
        raise InvalidArgumentError(
            f"write phase must end at t = 0, got t_end = {wgrid.t_end:g}"
        )
    if T_hold < 0.0:
        raise InvalidArgumentError(f"storage time must be >= 0, got {T_hold}")
    n_T = int(round(T_hold / dt))
    if abs(n_T * dt - T_hold) > 1e-6 * dt:
        raise InvalidArgumentError(
            f"storage time {T_hold:g} is not a whole number of grid steps dt = {dt:g}"
        )

    i_w = wgrid.n_points - 1
    i_h = i_w + n_T
    n = 2 * i_w + n_T + 1
    grid = TimeGrid(wgrid.t_start, dt, n)

    g = np.empty(n)
    delta = np.empty(n)
    Delta = np.empty(n)
    g[: i_w + 1] = ws.g
    delta[: i_w + 1] = ws.delta
    Delta[: i_w + 1] = ws.Delta
    g[i_w + 1 : i_h] = hold_coupling
    delta[i_w + 1 : i_h] = hold_cavity_detuning
    Delta[i_w + 1 : i_h] = hold_oscillator_detuning
    # T_hold = 0 keeps the shared seam sample at its write value; the
    # reflection is its own inverse there for g but not for the detunings.
    read_lo = max(i_h, i_w + 1)
    idx = np.arange(read_lo, n)
    src = n - 1 - idx
    g[idx] = ws.g[src]
    delta[idx] = -ws.delta[src]
    Delta[idx] = -ws.Delta[src]

    phases = PhaseMarkers(write=(0, i_w + 1), hold=(i_w + 1, read_lo), read=(read_lo, n))
    return ControlSchedule(grid, g, delta, Delta, phases)


def coupling_residual(design: CouplingDesign, kappa: float = 1.0) -> float:
    """Worst-case defect of the vacuum-output relation for a coupling design.

    Returns max |(da/dt - g*b)/a - kappa| over the write phase, evaluated
    wherever the cavity holds more than 1e-6 of its peak amplitude. A
    faithful design keeps this below 1e-3.
    """
    sched = design.schedule
    lo, hi = sched.phases.write
    a = design.a_target.samples.real[lo:hi]
    b = design.b_target.samples.real[lo:hi]
    g = sched.g[lo:hi]
    da = _derivative_o4(a, sched.grid.dt)
    live = np.abs(a) > _A_LIVE_FRACTION * np.max(np.abs(a))
    return float(np.max(np.abs((da[live] - g[live] * b[live]) / a[live] - kappa)))


def detuning_consistency_residual(design: DetuningDesign, kappa: float = 1.0) -> float:
    """Worst-case defect of the reality condition for a detuning design.

    The detunings are real only if (db1/dt + a)*b1 + (db2/dt)*b2
    vanishes. Returns the maximum of that expression over the write
    phase, normalized by kappa*|b|^2 pointwise.
    """
    sched = design.schedule
    lo, hi = sched.phases.write
    dt = sched.grid.dt
    tau = sched.grid.times()[lo:hi] - design.pulse_center
    a = _sech(tau)
    b1 = design.b1.samples.real[lo:hi]
    b2 = design.b2.samples.real[lo:hi]
    db1 = _derivative_o4(b1, dt)
    db2 = _derivative_o4(b2, dt)
    defect = (db1 + a) * b1 + db2 * b2
    return float(np.max(np.abs(defect) / (kappa * (b1 * b1 + b2 * b2))))


_PHASE_LABELS = ("write", "hold", "read")


def write_schedule_csv(schedule: ControlSchedule, path: str) -> None:
    """Write a schedule as CSV columns t, g, delta, Delta, phase."""
    labels = np.empty(schedule.grid.n_points, dtype=object)
    for name, (lo, hi) in zip(
        _PHASE_LABELS, (schedule.phases.write, schedule.phases.hold, schedule.phases.read)
    ):
        labels[lo:hi] = name
    t = schedule.grid.times()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "g", "delta", "Delta", "phase"])
        for k in range(schedule.grid.n_points):
            writer.writerow(
                [
                    f"{t[k]:.12e}",
                    f"{schedule.g[k]:.12e}",
                    f"{schedule.delta[k]:.12e}",
                    f"{schedule.Delta[k]:.12e}",
                    labels[k],
                ]
            )
