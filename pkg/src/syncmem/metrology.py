"""Retrieval efficiency and fidelity benchmarks for the memory channel.

The memory acts on the designated temporal mode as a beam splitter of
transmissivity eta mixing the signal with vacuum.  This module extracts
eta from simulation records, evaluates the closed-form fidelities and
classical bounds for that channel, and cross-checks the closed forms
against a brute-force Fock-space oracle: apply the loss channel to
Haar-random states and average the overlap with the input.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from .dynamics import ProtocolResult
from .envelopes import Envelope, ModeFunction, mask_window, normalize_mode, project
from .errors import DegenerateInputError, InvalidArgumentError

_MC_CHUNK = 4096
_MIN_MC_SAMPLES = 1000


@dataclass(frozen=True)
class EfficiencyReport:
    """Mode-matched retrieval efficiency of one run.

    Attributes:
        amplitude_efficiency: Recovered fraction of the mode amplitude.
        intensity_efficiency: Its square, the recovered intensity
            fraction, clipped to [0, 1].
        in_amplitude: Input-mode amplitude the write received.
        out_amplitude: Output-mode amplitude the read released.
    """

    amplitude_efficiency: float
    intensity_efficiency: float
    in_amplitude: complex
    out_amplitude: complex


def standard_modes(result: ProtocolResult) -> tuple[ModeFunction, ModeFunction]:
    """Input mode and its time-reflected twin for a protocol run.

    The input mode is the write-windowed input envelope, normalized.
    The expected output mode is the same envelope reflected about
    t = T_hold / 2 and windowed to the read, which on the run's
    symmetric grid is just the reversed sample array.
    """
    grid = result.schedule.grid
    T = result.timing.T_hold
    if abs((grid.t_start + grid.t_end) - T) > 0.25 * grid.dt:
        raise InvalidArgumentError(
            "run grid is not symmetric about T_hold/2; cannot reflect the input mode"
        )
    u_in = normalize_mode(mask_window(result.A_in, t_hi=0.0))
    reflected = Envelope(grid, result.A_in.samples[::-1])
    u_out = normalize_mode(mask_window(reflected, t_lo=T))
    return u_in, u_out


def efficiency(
    result: ProtocolResult,
    expected_out_mode: ModeFunction | None = None,
    in_mode: ModeFunction | None = None,
) -> EfficiencyReport:
    """Project the run onto its modes and form the efficiency ratio.

    Args:
        result: A completed protocol run.
        expected_out_mode: Mode the read phase should emit into;
            defaults to the time-reflected input mode.
        in_mode: Mode carrying the input; defaults to the normalized
            write-window input.

    Returns:
        The efficiency report; the intensity efficiency is
        |out amplitude / in amplitude|^2.

    Raises:
        DegenerateInputError: If the input-mode amplitude is below
            1e-12.
        InvalidArgumentError: If the intensity ratio exceeds 1 by more
            than 1e-6, which signals mismatched modes rather than a
            physical run.
    """
    if expected_out_mode is None or in_mode is None:
        default_in, default_out = standard_modes(result)
        in_mode = in_mode if in_mode is not None else default_in
        expected_out_mode = expected_out_mode if expected_out_mode is not None else default_out
    a_in = project(in_mode, result.A_in)
    if abs(a_in) < 1e-12:
        raise DegenerateInputError("input carries no amplitude in the input mode")
    a_out = project(expected_out_mode, result.A_out)
    eta = abs(a_out / a_in) ** 2
    if eta > 1.0 + 1e-6:
        raise InvalidArgumentError(
            f"intensity efficiency {eta!r} exceeds 1 beyond tolerance; "
            "output mode does not match this run"
        )
    eta = min(max(eta, 0.0), 1.0)
    return EfficiencyReport(
        amplitude_efficiency=math.sqrt(eta),
        intensity_efficiency=eta,
        in_amplitude=a_in,
        out_amplitude=a_out,
    )


def _check_eta(eta: float) -> float:
    if not (0.0 <= eta <= 1.0):
        raise InvalidArgumentError(f"eta must lie in [0, 1], got {eta!r}")
    return float(eta)


def _check_n_bar(n_bar: float) -> float:
    if not (n_bar >= 0.0 and math.isfinite(n_bar)):
        raise InvalidArgumentError(f"n_bar must be finite and >= 0, got {n_bar!r}")
    return float(n_bar)


def coherent_fidelity(eta: float, n_bar: float) -> float:
    """Mean fidelity over a coherent-state ensemble of mean photon number n_bar."""
    eta = _check_eta(eta)
    n_bar = _check_n_bar(n_bar)
    return 1.0 / (1.0 + n_bar * (1.0 - math.sqrt(eta)) ** 2)


def classical_coherent_bound(n_bar: float) -> float:
    """Best classical measure-and-regenerate fidelity for the same ensemble."""
    n_bar = _check_n_bar(n_bar)
    return (1.0 + n_bar) / (2.0 * n_bar + 1.0)


def qm_efficiency_threshold(n_bar: float) -> float:
    """Efficiency above which the memory beats the classical bound."""
    n_bar = _check_n_bar(n_bar)
    return (1.0 - math.sqrt(1.0 / (n_bar + 1.0))) ** 2


def _check_n_m(n_m: int) -> int:
    if isinstance(n_m, bool) or not isinstance(n_m, (int, np.integer)):
        raise InvalidArgumentError(f"photon-number cap must be an integer, got {n_m!r}")
    return int(n_m)


def bounded_fidelity(eta: float, n_m: int) -> float:
    """Haar-mean fidelity for states of at most n_m photons (closed form).

    Only n_m = 1 and n_m = 2 have closed forms; higher caps go through
    haar_average_fidelity.
    """
    eta = _check_eta(eta)
    n_m = _check_n_m(n_m)
    root = math.sqrt(eta)
    if n_m == 1:
        return (eta + 2.0 * root + 3.0) / 6.0
    if n_m == 2:
        return (eta * eta + 2.0 * eta * root + 3.0 * eta + 2.0 * root + 4.0) / 12.0
    raise InvalidArgumentError(f"no closed form for photon-number cap {n_m}")


def clone_bound(n_m: int) -> float:
    """Classical fidelity ceiling 2/(n_m+2) for states of at most n_m photons."""
    n_m = _check_n_m(n_m)
    if n_m < 1:
        raise InvalidArgumentError(f"photon-number cap must be >= 1, got {n_m}")
    return 2.0 / (n_m + 2.0)


def invert_bounded_fidelity(target: float, n_m: int) -> float:
    """Efficiency at which the closed-form bounded fidelity equals target."""
    n_m = _check_n_m(n_m)
    lo = bounded_fidelity(0.0, n_m)
    hi = bounded_fidelity(1.0, n_m)
    if not (lo <= target <= hi):
        raise InvalidArgumentError(
            f"target fidelity {target!r} is outside the reachable range [{lo:.6g}, {hi:.6g}]"
        )
    return float(brentq(lambda e: bounded_fidelity(e, n_m) - target, 0.0, 1.0, xtol=1e-14))


@dataclass(frozen=True, eq=False)
class FockState:
    """Pure state on photon-number levels 0..n_m."""

    coefficients: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.coefficients, dtype=np.complex128)
        if arr.ndim != 1 or arr.size < 1:
            raise InvalidArgumentError("coefficients must be a nonempty vector")
        if not np.all(np.isfinite(arr.view(np.float64))):
            raise InvalidArgumentError("coefficients must be finite")
        norm_sq = float(np.sum(np.abs(arr) ** 2))
        if abs(norm_sq - 1.0) > 1e-12:
            raise InvalidArgumentError(
                f"state must be normalized, got |psi|^2 = {norm_sq!r}"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "coefficients", arr)

    @property
    def n_levels(self) -> int:
        return int(self.coefficients.size)


def _loss_kraus(n_levels: int, eta: float) -> list[np.ndarray]:
    """Kraus operators of the beam-splitter loss channel on n_levels levels.

    Operator l removes l photons: its only nonzero entries are
    K_l[m-l, m] = sqrt(C(m, l) (1-eta)^l eta^(m-l)).
    """
    ops = []
    for loss in range(n_levels):
        K = np.zeros((n_levels, n_levels))
        for m in range(loss, n_levels):
            K[m - loss, m] = math.sqrt(
                math.comb(m, loss) * (1.0 - eta) ** loss * eta ** (m - loss)
            )
        ops.append(K)
    return ops


def loss_channel(state: FockState | np.ndarray, eta: float) -> np.ndarray:
    """Send a state through the beam-splitter loss channel.

    Args:
        state: A FockState, a 1-d coefficient vector, or a 2-d density
            matrix (so channel outputs can be fed back in).
        eta: Transmissivity of the channel.

    Returns:
        The output density matrix over the same levels.
    """
    eta = _check_eta(eta)
    if isinstance(state, FockState):
        rho = np.outer(state.coefficients, np.conj(state.coefficients))
    else:
        arr = np.asarray(state, dtype=np.complex128)
        if arr.ndim == 1:
            vec = FockState(arr).coefficients
            rho = np.outer(vec, np.conj(vec))
        elif arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
            if abs(np.trace(arr).real - 1.0) > 1e-9 or abs(np.trace(arr).imag) > 1e-9:
                raise InvalidArgumentError("density matrix must have unit trace")
            rho = arr
        else:
            raise InvalidArgumentError(
                f"state must be a vector or square matrix, got shape {arr.shape}"
            )
    out = np.zeros_like(rho)
    for K in _loss_kraus(rho.shape[0], eta):
        out += K @ rho @ K.T
    return out


class HaarEstimate(NamedTuple):
    """Monte Carlo mean with its standard error and sample count."""

    mean: float
    stderr: float
    n_samples: int


def _haar_chunk_sums(eta: float, n_levels: int, count: int, seed_seq) -> tuple[float, float]:
    """Fidelity sum and sum of squares over one reproducible chunk."""
    rng = np.random.default_rng(seed_seq)
    z = rng.standard_normal((count, n_levels)) + 1j * rng.standard_normal((count, n_levels))
    psi = z / np.linalg.norm(z, axis=1, keepdims=True)
    fid = np.zeros(count)
    for K in _loss_kraus(n_levels, eta):
        amp = np.sum(np.conj(psi) * (psi @ K.T), axis=1)
        fid += np.abs(amp) ** 2
    return float(np.sum(fid)), float(np.sum(fid * fid))


def haar_average_fidelity(
    eta: float,
    n_m: int,
    n_samples: int,
    seed: int,
    workers: int = 1,
) -> HaarEstimate:
    """Estimate the Haar-mean fidelity by brute-force sampling.

    States are drawn as normalized complex-Gaussian coefficient
    vectors.  Sampling is split into fixed-size chunks, each driven by
    its own child of the seed sequence, so the estimate is identical
    for any worker count and reproducible for a fixed seed.

    Args:
        eta: Channel transmissivity.
        n_m: Photon-number cap; states live on n_m + 1 levels.
        n_samples: Total number of sampled states, at least 1000.
        seed: Seed for the sampling stream.
        workers: Process count for chunk evaluation.

    Returns:
        The estimate with its standard error.
    """
    eta = _check_eta(eta)
    n_m = _check_n_m(n_m)
    if n_m < 1:
        raise InvalidArgumentError(f"photon-number cap must be >= 1, got {n_m}")
    if n_samples < _MIN_MC_SAMPLES:
        raise InvalidArgumentError(
            f"need at least {_MIN_MC_SAMPLES} samples for a usable estimate, got {n_samples}"
        )
    n_levels = n_m + 1
    n_chunks = (n_samples + _MC_CHUNK - 1) // _MC_CHUNK
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    counts = [
        _MC_CHUNK if (i + 1) * _MC_CHUNK <= n_samples else n_samples - i * _MC_CHUNK
        for i in range(n_chunks)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            sums = list(
                pool.map(
                    _haar_chunk_sums,
                    [eta] * n_chunks,
                    [n_levels] * n_chunks,
                    counts,
                    children,
                )
            )
    else:
        sums = [
            _haar_chunk_sums(eta, n_levels, counts[i], children[i]) for i in range(n_chunks)
        ]
    total = 0.0
    total_sq = 0.0
    for s, s2 in sums:
        total += s
        total_sq += s2
    mean = total / n_samples
    if n_samples > 1:
        variance = max(total_sq - n_samples * mean * mean, 0.0) / (n_samples - 1)
        stderr = math.sqrt(variance / n_samples)
    else:
        stderr = float("nan")
    return HaarEstimate(mean=mean, stderr=stderr, n_samples=n_samples)


@dataclass(frozen=True)
class FidelityReport:
    """Every fidelity measure and verdict for one (eta, n_bar) point."""

    eta: float
    n_bar: float
    F_coherent: float
    F_classical_coherent: float
    eta_threshold: float
    F1: float
    F2: float
    clone_bound_1: float
    clone_bound_2: float
    verdict_coherent: bool
    verdict_n1: bool
    verdict_n2: bool


def fidelity_report(eta: float, n_bar: float) -> FidelityReport:
    """Evaluate all fidelity measures and bounds at one point."""
    eta = _check_eta(eta)
    n_bar = _check_n_bar(n_bar)
    F_coherent = coherent_fidelity(eta, n_bar)
    F_classical = classical_coherent_bound(n_bar)
    F1 = bounded_fidelity(eta, 1)
    F2 = bounded_fidelity(eta, 2)
    cb1 = clone_bound(1)
    cb2 = clone_bound(2)
    return FidelityReport(
        eta=eta,
        n_bar=n_bar,
        F_coherent=F_coherent,
        F_classical_coherent=F_classical,
        eta_threshold=qm_efficiency_threshold(n_bar),
        F1=F1,
        F2=F2,
        clone_bound_1=cb1,
        clone_bound_2=cb2,
        verdict_coherent=F_coherent > F_classical,
        verdict_n1=F1 > cb1,
        verdict_n2=F2 > cb2,
    )


_REPORT_COLUMNS = (
    "eta",
    "n_bar",
    "F_coherent",
    "F_classical_coherent",
    "eta_threshold",
    "F1",
    "F2",
    "clone_bound_1",
    "clone_bound_2",
    "verdict_coherent",
    "verdict_n1",
    "verdict_n2",
)


def _report_cells(report: FidelityReport) -> list[str]:
    cells = []
    for name in _REPORT_COLUMNS:
        value = getattr(report, name)
        if isinstance(value, bool):
            cells.append("pass" if value else "fail")
        else:
            cells.append(f"{value:.6f}")
    return cells


def write_fidelity_csv(reports: Sequence[FidelityReport], path: str) -> None:
    """Write fidelity reports as CSV, one row per report."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(_REPORT_COLUMNS) + "\n")
        for report in reports:
            fh.write(",".join(_report_cells(report)) + "\n")


def format_fidelity_table(reports: Sequence[FidelityReport]) -> str:
    """Render fidelity reports as an aligned plain-text table."""
    rows = [list(_REPORT_COLUMNS)] + [_report_cells(r) for r in reports]
    widths = [max(len(row[i]) for row in rows) for i in range(len(_REPORT_COLUMNS))]
    lines = []
    for row in rows:
        lines.append("  ".join(cell.rjust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)
