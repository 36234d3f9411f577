"""Time grids, complex field envelopes and mode functions.

Everything downstream (waveform design, integration, efficiency
estimates) works with envelopes sampled on a shared uniform grid, so the
grid type enforces the invariants once: strictly positive step, at least
two points, and exact arithmetic for derived times based on integer
indices rather than accumulated floats.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import ceil

import numpy as np

from .errors import DegenerateInputError, InvalidArgumentError

__all__ = [
    "TimeGrid",
    "Envelope",
    "ModeFunction",
    "make_grid",
    "sech_input",
    "l2_norm_sq",
    "project",
    "normalize_mode",
    "mask_window",
    "write_envelope_csv",
    "read_envelope_csv",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling grid t_k = t_start + k*dt, k = 0 .. n_points-1."""

    t_start: float
    dt: float
    n_points: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.t_start):
            raise InvalidArgumentError("grid start must be finite")
        if not (self.dt > 0.0) or not np.isfinite(self.dt):
            raise InvalidArgumentError(f"grid step must be positive, got {self.dt}")
        if self.n_points < 2:
            raise InvalidArgumentError(
                f"grid needs at least two points, got {self.n_points}"
            )

    @property
    def t_end(self) -> float:
        return self.t_start + (self.n_points - 1) * self.dt

    @property
    def span(self) -> float:
        return (self.n_points - 1) * self.dt

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_points)

    def index_of(self, t: float) -> int:
        """Nearest grid index to time t; t must lie on the grid within dt/4."""
        k = round((t - self.t_start) / self.dt)
        if k < 0 or k >= self.n_points:
            raise InvalidArgumentError(f"time {t} lies outside the grid")
        if abs(self.t_start + k * self.dt - t) > 0.25 * self.dt:
            raise InvalidArgumentError(f"time {t} does not fall on a grid point")
        return k


def make_grid(t_start: float, t_end: float, dt: float) -> TimeGrid:
    """Grid from t_start to at least t_end in steps of dt.

    The number of intervals is ceil((t_end - t_start)/dt) with a small
    relative tolerance so that spans which are an exact multiple of dt do
    not gain a spurious extra point from floating-point noise.
    """
    if not (t_end > t_start):
        raise InvalidArgumentError(
            f"grid end {t_end} must exceed grid start {t_start}"
        )
    if not (dt > 0.0):
        raise InvalidArgumentError(f"grid step must be positive, got {dt}")
    ratio = (t_end - t_start) / dt
    if ratio > 1e8:
        raise InvalidArgumentError(
            f"grid would need {ratio:.3g} steps; refuse more than 1e8"
        )
    n_intervals = max(1, ceil(ratio - 1e-9))
    return TimeGrid(t_start, dt, n_intervals + 1)


@dataclass(frozen=True, eq=False)
class Envelope:
    """Complex field amplitude sampled on a grid.

    Samples are stored as an immutable complex128 array with one value
    per grid point. Scalar multiplication and same-grid addition are
    provided because the protocol assembly code composes envelopes; any
    richer algebra would just invite grid mismatches.
    """

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.samples, dtype=np.complex128)
        if arr.ndim != 1 or arr.shape[0] != self.grid.n_points:
            raise InvalidArgumentError(
                f"expected {self.grid.n_points} samples, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr.view(np.float64))):
            raise InvalidArgumentError("envelope samples must be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __mul__(self, factor: complex) -> "Envelope":
        return Envelope(self.grid, self.samples * complex(factor))

    __rmul__ = __mul__

    def __add__(self, other: "Envelope") -> "Envelope":
        self._require_same_grid(other)
        return Envelope(self.grid, self.samples + other.samples)

    def __sub__(self, other: "Envelope") -> "Envelope":
        self._require_same_grid(other)
        return Envelope(self.grid, self.samples - other.samples)

    def _require_same_grid(self, other: "Envelope") -> None:
        if self.grid != other.grid:
            raise InvalidArgumentError("envelopes live on different grids")


def l2_norm_sq(env: Envelope) -> float:
    """Integral of |A(t)|^2 over the grid (trapezoid rule)."""
    return float(np.trapezoid(np.abs(env.samples) ** 2, dx=env.grid.dt))


def project(mode: "ModeFunction | Envelope", env: Envelope) -> complex:
    """Overlap integral of conj(u) with A on the shared grid."""
    u = mode.envelope if isinstance(mode, ModeFunction) else mode
    if u.grid != env.grid:
        raise InvalidArgumentError("mode and envelope live on different grids")
    return complex(np.trapezoid(np.conj(u.samples) * env.samples, dx=env.grid.dt))


@dataclass(frozen=True, eq=False)
class ModeFunction:
    """Unit-norm temporal mode u(t), the thing field amplitudes live in."""

    envelope: Envelope

    def __post_init__(self) -> None:
        norm_sq = l2_norm_sq(self.envelope)
        if abs(norm_sq - 1.0) > 1e-9:
            raise InvalidArgumentError(
                f"mode function must have unit norm, got |u|^2 = {norm_sq!r}"
            )

    @property
    def grid(self) -> TimeGrid:
        return self.envelope.grid


def normalize_mode(env: Envelope) -> ModeFunction:
    """Scale an envelope to unit L2 norm."""
    norm_sq = l2_norm_sq(env)
    if norm_sq <= 0.0 or not np.isfinite(norm_sq):
        raise DegenerateInputError("cannot normalize a zero-norm envelope")
    return ModeFunction(env * (1.0 / np.sqrt(norm_sq)))


def _sech(x: np.ndarray) -> np.ndarray:
    """1/cosh(x), evaluated as 2*exp(-|x|)/(1 + exp(-2|x|)).

    This form underflows to zero in the far tails instead of overflowing
    the way 1/cosh does for |x| beyond ~710.
    """
    ax = np.abs(x)
    return 2.0 * np.exp(-ax) / (1.0 + np.exp(-2.0 * ax))


def sech_input(grid: TimeGrid, a0: complex = 1.0 + 0.0j, t_center: float = 0.0) -> Envelope:
    """Hyperbolic-secant drive sqrt(2)*a0*sech(t - t_center).

    This is the input waveform whose write produces cavity amplitude
    a(t) = a0*sech(t - t_center) with no field leaking back out.
    """
    return Envelope(grid, np.sqrt(2.0) * complex(a0) * _sech(grid.times() - t_center))


def mask_window(env: Envelope, t_lo: float = -np.inf, t_hi: float = np.inf) -> Envelope:
    """Zero the envelope outside the closed time window [t_lo, t_hi]."""
    t = env.grid.times()
    keep = (t >= t_lo) & (t <= t_hi)
    return Envelope(env.grid, np.where(keep, env.samples, 0.0))


def write_envelope_csv(env: Envelope, path: str) -> None:
    """Write one envelope as CSV columns t, re, im."""
    t = env.grid.times()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "re", "im"])
        for tk, zk in zip(t, env.samples):
            writer.writerow([f"{tk:.12e}", f"{zk.real:.12e}", f"{zk.imag:.12e}"])


def read_envelope_csv(path: str) -> Envelope:
    """Read an envelope written by write_envelope_csv.

    The time column is used to reconstruct the grid; it must be uniform
    to within 1e-9 of its median step.
    """
    t_vals: list[float] = []
    z_vals: list[complex] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["t", "re", "im"]:
            raise InvalidArgumentError(f"{path} is not an envelope CSV (bad header)")
        for row in reader:
            if not row:
                continue
            t_vals.append(float(row[0]))
            z_vals.append(complex(float(row[1]), float(row[2])))
    if len(t_vals) < 2:
        raise InvalidArgumentError(f"{path} holds fewer than two samples")
    t = np.asarray(t_vals)
    steps = np.diff(t)
    dt = float(np.median(steps))
    if dt <= 0 or np.max(np.abs(steps - dt)) > 1e-9 * max(1.0, abs(dt)):
        raise InvalidArgumentError(f"{path} does not hold a uniform time grid")
    grid = TimeGrid(float(t[0]), dt, len(t_vals))
    return Envelope(grid, np.asarray(z_vals, dtype=np.complex128))
