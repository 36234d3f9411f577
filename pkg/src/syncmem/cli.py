"""Config-driven batch runner for the memory protocol.

Subcommands:
    run      simulate one scenario; writes trajectory.csv, schedule.csv
             and summary.csv into the output directory
    sweep    rerun a scenario across one axis; writes sweep.csv with one
             summary row per value, sorted by the axis
    verdict  print PASS/FAIL lines for the rows of a summary CSV
    oracle   Monte Carlo average fidelity of the loss channel

A scenario is specified by a flat key = value config file, command-line
flags overriding it, or both. All defaults reproduce the lossless
variable-coupling round trip, so a bare ``syncmem run`` regenerates the
primary dataset. Exit codes: 0 success, 2 configuration error, 3 step
size too coarse for the control schedule.

The ``SYNCMEM_WORKERS`` environment variable sets the worker-pool size
for sweeps and the Monte Carlo oracle; results do not depend on it.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from .design import (
    MemoryParams,
    design_coupling_sech,
    design_detuning_sech,
    write_schedule_csv,
)
from .dynamics import (
    ProtocolResult,
    ProtocolTiming,
    run_protocol,
    vacuum_output_residual,
    write_trajectory_csv,
)
from .envelopes import make_grid
from .errors import (
    DegenerateInputError,
    DesignInfeasibleError,
    InvalidArgumentError,
    StiffnessError,
    UnsupportedInputError,
)
from .metrology import bounded_fidelity, efficiency, fidelity_report, haar_average_fidelity

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICS = 3

_WORKERS_ENV = "SYNCMEM_WORKERS"

# the sech designers need this much lead-in before the pulse center so
# the memory starts from (numerically) zero
_WINDOW_BEFORE_PULSE = 8.0

# per-case default step: the detuning schedule of case 2 swings ~440x
# harder than the coupling of case 1, so it needs a finer grid to clear
# the integrator's resolution guard
_DEFAULT_DT = {1: 1e-3, 2: 2.5e-4}

_CONFIG_ERRORS = (
    InvalidArgumentError,
    DesignInfeasibleError,
    UnsupportedInputError,
    DegenerateInputError,
)

_SWEEP_AXES = ("T_hold", "gamma_over_kappa", "n_bar")


@dataclass(frozen=True)
class ScenarioConfig:
    """One fully specified protocol run.

    case selects the control channel: 1 shapes the coupling at zero
    detuning, 2 shapes both detunings at fixed coupling. The input is
    a0 * sech(t - t0), written over [t0 - 8, 0], held for T_hold, and
    read back time-reversed. Fidelity columns are evaluated for a
    coherent-state ensemble of mean photon number n_bar.
    """

    case: int = 1
    t0: float = -5.0
    T_hold: float = 5.0
    a0: complex = 1.0 + 0j
    gamma_over_kappa: float = 0.0
    n_bar: float = 20.0
    dt: float = 1e-3
    output_dir: str = "out"

    def __post_init__(self) -> None:
        if isinstance(self.case, bool) or self.case not in (1, 2):
            raise InvalidArgumentError(f"case must be 1 or 2, got {self.case!r}")
        for name in ("t0", "T_hold", "gamma_over_kappa", "n_bar", "dt"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
                raise InvalidArgumentError(f"{name} must be a finite real, got {value!r}")
        a0 = complex(self.a0)
        if not (np.isfinite(a0.real) and np.isfinite(a0.imag)):
            raise InvalidArgumentError(f"a0 must be finite, got {self.a0!r}")
        object.__setattr__(self, "a0", a0)
        if self.gamma_over_kappa < 0.0:
            raise InvalidArgumentError(f"gamma_over_kappa must be >= 0, got {self.gamma_over_kappa!r}")
        if self.n_bar < 0.0:
            raise InvalidArgumentError(f"n_bar must be >= 0, got {self.n_bar!r}")
        if self.T_hold < 0.0:
            raise InvalidArgumentError(f"T_hold must be >= 0, got {self.T_hold!r}")
        if not self.dt > 0.0:
            raise InvalidArgumentError(f"dt must be positive, got {self.dt!r}")
        if not isinstance(self.output_dir, str) or not self.output_dir:
            raise InvalidArgumentError("output_dir must be a nonempty path")


@dataclass(frozen=True)
class SweepConfig:
    """A scenario repeated along one axis."""

    base: ScenarioConfig
    axis: str
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.axis not in _SWEEP_AXES:
            raise InvalidArgumentError(
                f"axis must be one of {', '.join(_SWEEP_AXES)}; got {self.axis!r}"
            )
        values = tuple(float(v) for v in self.values)
        if not values:
            raise InvalidArgumentError("values must be a non-empty list")
        if not all(np.isfinite(v) for v in values):
            raise InvalidArgumentError("values must all be finite")
        object.__setattr__(self, "values", values)

    def points(self) -> list[ScenarioConfig]:
        return [replace(self.base, **{self.axis: value}) for value in self.values]


def _parse_case(text: str) -> int:
    return int(text)


def _parse_complex(text: str) -> complex:
    return complex(text.replace(" ", ""))


_FIELD_PARSERS = {
    "case": _parse_case,
    "t0": float,
    "T_hold": float,
    "a0": _parse_complex,
    "gamma_over_kappa": float,
    "n_bar": float,
    "dt": float,
    "output_dir": str,
}

assert set(_FIELD_PARSERS) == {f.name for f in fields(ScenarioConfig)}


def parse_config_file(path: str) -> dict:
    """Read a flat ``key = value`` scenario file.

    Blank lines and ``#`` comments are ignored. Keys are ScenarioConfig
    field names; unknown keys and unparsable values are rejected.
    """
    values: dict = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, text = line.partition("=")
            key = key.strip()
            text = text.strip()
            if not sep or not key:
                raise InvalidArgumentError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            if key not in _FIELD_PARSERS:
                raise InvalidArgumentError(
                    f"{path}:{lineno}: unknown key {key!r}; valid keys: {', '.join(sorted(_FIELD_PARSERS))}"
                )
            try:
                values[key] = _FIELD_PARSERS[key](text)
            except ValueError as exc:
                raise InvalidArgumentError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return values


_FLAG_TO_FIELD = (
    ("case", "case"),
    ("t0", "t0"),
    ("T", "T_hold"),
    ("a0", "a0"),
    ("gamma", "gamma_over_kappa"),
    ("nbar", "n_bar"),
    ("dt", "dt"),
    ("out", "output_dir"),
)


def _assemble_scenario(args: argparse.Namespace) -> ScenarioConfig:
    """Merge config file and flags into a validated scenario.

    Precedence: flags over file over defaults. The step defaults per
    case when neither source sets it.
    """
    values: dict = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for flag, field in _FLAG_TO_FIELD:
        override = getattr(args, flag, None)
        if override is not None:
            values[field] = override
    if "dt" not in values:
        values["dt"] = _DEFAULT_DT.get(values.get("case", 1), 1e-3)
    return ScenarioConfig(**values)


def _worker_count() -> int:
    raw = os.environ.get(_WORKERS_ENV)
    if raw is None or not raw.strip():
        return 1
    try:
        count = int(raw)
    except ValueError:
        raise InvalidArgumentError(f"{_WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if count < 1:
        raise InvalidArgumentError(f"{_WORKERS_ENV} must be a positive integer, got {raw!r}")
    return count


_SUMMARY_COLUMNS = (
    "case",
    "t0",
    "T_hold",
    "a0",
    "gamma_over_kappa",
    "n_bar",
    "dt",
    "sqrt_eta",
    "eta",
    "vacuum_residual",
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
    "error",
)


def _fmt(value: float) -> str:
    return f"{value:.12e}"


def _fmt_complex(value: complex) -> str:
    return f"{value.real:.12g}{value.imag:+.12g}j"


def _config_cells(config: ScenarioConfig) -> dict:
    return {
        "case": str(config.case),
        "t0": f"{config.t0:.12g}",
        "T_hold": f"{config.T_hold:.12g}",
        "a0": _fmt_complex(config.a0),
        "gamma_over_kappa": f"{config.gamma_over_kappa:.12g}",
        "n_bar": f"{config.n_bar:.12g}",
        "dt": f"{config.dt:.12g}",
    }


def _execute_scenario(config: ScenarioConfig) -> tuple[ProtocolResult, dict]:
    """Run one scenario and score it. Returns the run and its summary row."""
    grid = make_grid(config.t0 - _WINDOW_BEFORE_PULSE, 0.0, config.dt)
    designer = design_coupling_sech if config.case == 1 else design_detuning_sech
    design = designer(config.t0, grid)
    params = MemoryParams(gamma=config.gamma_over_kappa)
    timing = ProtocolTiming(t0=config.t0, T_hold=config.T_hold)
    result = run_protocol(params, design, timing, a0=config.a0)
    report = efficiency(result)
    fid = fidelity_report(report.intensity_efficiency, config.n_bar)
    row = _config_cells(config)
    row.update(
        sqrt_eta=_fmt(report.amplitude_efficiency),
        eta=_fmt(report.intensity_efficiency),
        vacuum_residual=_fmt(vacuum_output_residual(result)),
        F_coherent=_fmt(fid.F_coherent),
        F_classical_coherent=_fmt(fid.F_classical_coherent),
        eta_threshold=_fmt(fid.eta_threshold),
        F1=_fmt(fid.F1),
        F2=_fmt(fid.F2),
        clone_bound_1=_fmt(fid.clone_bound_1),
        clone_bound_2=_fmt(fid.clone_bound_2),
        verdict_coherent="pass" if fid.verdict_coherent else "fail",
        verdict_n1="pass" if fid.verdict_n1 else "fail",
        verdict_n2="pass" if fid.verdict_n2 else "fail",
        error="",
    )
    return result, row


def _sweep_point(config: ScenarioConfig) -> dict:
    """Summary row for one sweep point; failures become the error cell."""
    try:
        return _execute_scenario(config)[1]
    except (StiffnessError, *_CONFIG_ERRORS) as exc:
        row = {column: "" for column in _SUMMARY_COLUMNS}
        row.update(_config_cells(config))
        row["error"] = " ".join(str(exc).split())
        return row


def _write_summary_csv(rows: list[dict], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_SUMMARY_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


def _cmd_run(args: argparse.Namespace) -> int:
    config = _assemble_scenario(args)
    os.makedirs(config.output_dir, exist_ok=True)
    result, row = _execute_scenario(config)
    paths = {
        "trajectory": os.path.join(config.output_dir, "trajectory.csv"),
        "schedule": os.path.join(config.output_dir, "schedule.csv"),
        "summary": os.path.join(config.output_dir, "summary.csv"),
    }
    write_trajectory_csv(result, paths["trajectory"])
    write_schedule_csv(result.schedule, paths["schedule"])
    _write_summary_csv([row], paths["summary"])
    for path in paths.values():
        print(f"wrote {path}")
    keys = ("sqrt_eta", "eta", "vacuum_residual", "F_coherent", "verdict_coherent")
    print("summary: " + " ".join(f"{key}={row[key]}" for key in keys))
    return EXIT_OK


def _parse_values(text: str) -> tuple[float, ...]:
    parts = [piece.strip() for piece in text.split(",")]
    try:
        return tuple(float(piece) for piece in parts if piece)
    except ValueError as exc:
        raise InvalidArgumentError(f"bad --values entry: {exc}") from exc


def _cmd_sweep(args: argparse.Namespace) -> int:
    base = _assemble_scenario(args)
    sweep = SweepConfig(base=base, axis=args.axis, values=_parse_values(args.values))
    os.makedirs(base.output_dir, exist_ok=True)
    points = sweep.points()
    workers = _worker_count()
    if workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(points))) as pool:
            rows = list(pool.map(_sweep_point, points))
    else:
        rows = [_sweep_point(point) for point in points]
    order = sorted(range(len(rows)), key=lambda i: sweep.values[i])
    rows = [rows[i] for i in order]
    path = os.path.join(base.output_dir, "sweep.csv")
    _write_summary_csv(rows, path)
    print(f"wrote {path}")
    for row in rows:
        status = row["error"] or f"F_coherent={row['F_coherent']} sqrt_eta={row['sqrt_eta']}"
        print(f"{sweep.axis}={row[sweep.axis]}: {status}")
    return EXIT_OK


def _verdict_lines(eta: float, n_bar: float) -> list[str]:
    fid = fidelity_report(eta, n_bar)
    def text(flag: bool) -> str:
        return "PASS" if flag else "FAIL"
    return [
        f"  coherent n_bar={n_bar:g}: F={fid.F_coherent:.6f} bound={fid.F_classical_coherent:.6f} {text(fid.verdict_coherent)}",
        f"  n_m=1: F={fid.F1:.6f} bound={fid.clone_bound_1:.6f} {text(fid.verdict_n1)}",
        f"  n_m=2: F={fid.F2:.6f} bound={fid.clone_bound_2:.6f} {text(fid.verdict_n2)}",
    ]


def _cmd_verdict(args: argparse.Namespace) -> int:
    with open(args.summary, newline="") as fh:
        reader = csv.DictReader(fh)
        columns = reader.fieldnames or []
        rows = list(reader)
    for needed in ("eta", "n_bar"):
        if needed not in columns:
            raise InvalidArgumentError(f"{args.summary}: no {needed!r} column")
    if not rows:
        raise InvalidArgumentError(f"{args.summary}: no data rows")
    if args.row is not None:
        if not 1 <= args.row <= len(rows):
            raise InvalidArgumentError(
                f"--row must be in 1..{len(rows)} for {args.summary}, got {args.row}"
            )
        selected = [(args.row, rows[args.row - 1])]
    else:
        selected = list(enumerate(rows, start=1))
    blocks = []
    for index, row in selected:
        try:
            eta = float(row["eta"])
            n_bar = float(row["n_bar"])
        except (TypeError, ValueError):
            raise InvalidArgumentError(
                f"{args.summary} row {index}: eta/n_bar missing or not numeric"
            ) from None
        blocks.append([f"row {index}: eta={eta:.6f} n_bar={n_bar:g}", *_verdict_lines(eta, n_bar)])
    for block in blocks:
        for line in block:
            print(line)
    return EXIT_OK


def _cmd_oracle(args: argparse.Namespace) -> int:
    estimate = haar_average_fidelity(
        args.eta, args.nm, args.samples, seed=args.seed, workers=_worker_count()
    )
    line = (
        f"mean={estimate.mean:.9f} stderr={estimate.stderr:.3e} "
        f"n_samples={estimate.n_samples}"
    )
    if args.nm in (1, 2):
        line += f" closed_form={bounded_fidelity(args.eta, args.nm):.9f}"
    print(line)
    return EXIT_OK


def _add_scenario_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value scenario file; flags override it")
    parser.add_argument("--case", type=int, choices=(1, 2), default=None,
                        help="1: shaped coupling, 2: shaped detunings")
    parser.add_argument("--t0", type=float, default=None, help="input pulse center (default -5)")
    parser.add_argument("--T", type=float, default=None, help="hold duration T_hold (default 5)")
    parser.add_argument("--a0", type=_parse_complex, default=None, metavar="C",
                        help="input amplitude, e.g. 1 or 0.3-0.4j (default 1)")
    parser.add_argument("--gamma", type=float, default=None,
                        help="oscillator damping relative to the cavity (default 0)")
    parser.add_argument("--nbar", type=float, default=None,
                        help="coherent-ensemble mean photon number (default 20)")
    parser.add_argument("--dt", type=float, default=None,
                        help="integrator step (default 1e-3 for case 1, 2.5e-4 for case 2)")
    parser.add_argument("--out", default=None, help="output directory (default ./out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="syncmem",
        description="Write, hold, and read a shaped light pulse in a cavity-oscillator memory.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    run_parser = subparsers.add_parser("run", help="simulate one scenario and score it")
    _add_scenario_flags(run_parser)
    run_parser.set_defaults(handler=_cmd_run)

    sweep_parser = subparsers.add_parser("sweep", help="rerun a scenario across one axis")
    _add_scenario_flags(sweep_parser)
    sweep_parser.add_argument("--axis", required=True, choices=_SWEEP_AXES)
    sweep_parser.add_argument("--values", required=True,
                              help="comma-separated axis values, e.g. 5,10,15,20")
    sweep_parser.set_defaults(handler=_cmd_sweep)

    verdict_parser = subparsers.add_parser(
        "verdict", help="PASS/FAIL the rows of a summary CSV against the memory benchmarks"
    )
    verdict_parser.add_argument("summary", help="summary.csv or sweep.csv produced by run/sweep")
    verdict_parser.add_argument("--row", type=int, default=None, help="1-based data row (default: all)")
    verdict_parser.set_defaults(handler=_cmd_verdict)

    oracle_parser = subparsers.add_parser(
        "oracle", help="Monte Carlo average fidelity of the loss channel over random pure states"
    )
    oracle_parser.add_argument("--eta", type=float, required=True, help="intensity transmission in [0, 1]")
    oracle_parser.add_argument("--nm", type=int, required=True, help="photon-number cap of the input space")
    oracle_parser.add_argument("--samples", type=int, default=100_000)
    oracle_parser.add_argument("--seed", type=int, default=0)
    oracle_parser.set_defaults(handler=_cmd_oracle)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        return args.handler(args)
    except StiffnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entrypoint() -> None:
    """Console-script shim."""
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
