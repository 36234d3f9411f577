import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from syncmem import (
    Envelope,
    MemoryParams,
    ProtocolTiming,
    design_coupling_sech,
    make_grid,
    mask_window,
    normalize_mode,
    project,
    run_protocol,
)
from syncmem.errors import DegenerateInputError, InvalidArgumentError
from syncmem.metrology import (
    FockState,
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

T0 = -5.0


@pytest.fixture(scope="module")
def quick_run():
    design = design_coupling_sech(T0, make_grid(T0 - 8.0, 0.0, 5e-3))
    return run_protocol(MemoryParams(), design, ProtocolTiming(t0=T0, T_hold=5.0))


def test_coherent_fidelity_values():
    assert coherent_fidelity(1.0, 20.0) == 1.0
    assert abs(coherent_fidelity(0.0, 20.0) - 1.0 / 21.0) < 1e-15
    assert coherent_fidelity(0.3, 0.0) == 1.0


def test_coherent_fidelity_rejects_bad_input():
    with pytest.raises(InvalidArgumentError):
        coherent_fidelity(-0.1, 20.0)
    with pytest.raises(InvalidArgumentError):
        coherent_fidelity(1.1, 20.0)
    with pytest.raises(InvalidArgumentError):
        coherent_fidelity(0.5, -1.0)


def test_classical_coherent_bound_values():
    assert abs(classical_coherent_bound(20.0) - 21.0 / 41.0) < 1e-15
    assert classical_coherent_bound(0.0) == 1.0
    assert abs(classical_coherent_bound(1e6) - 0.5) < 1e-6


def test_qm_efficiency_threshold_values():
    assert abs(qm_efficiency_threshold(20.0) - 0.611183) < 1e-6
    assert qm_efficiency_threshold(0.0) == 0.0


def test_threshold_identity_on_random_ensembles():
    rng = np.random.default_rng(7)
    for n_bar in rng.uniform(0.0, 100.0, 100):
        gap = coherent_fidelity(qm_efficiency_threshold(n_bar), n_bar) - classical_coherent_bound(n_bar)
        assert abs(gap) < 1e-10


def test_bounded_fidelity_values():
    assert abs(bounded_fidelity(0.5, 1) - 0.819036) < 1e-6
    assert abs(bounded_fidelity(0.25, 2) - 0.505208) < 1e-6
    assert abs(bounded_fidelity(0.23, 2) - 0.493556) < 1e-6
    assert bounded_fidelity(0.0, 1) == 0.5
    assert bounded_fidelity(1.0, 1) == 1.0
    assert abs(bounded_fidelity(0.0, 2) - 1.0 / 3.0) < 1e-15
    assert bounded_fidelity(1.0, 2) == 1.0


def test_bounded_fidelity_rejects_unsupported_caps():
    with pytest.raises(InvalidArgumentError):
        bounded_fidelity(0.5, 3)
    with pytest.raises(InvalidArgumentError):
        bounded_fidelity(0.5, 0)
    with pytest.raises(InvalidArgumentError):
        bounded_fidelity(0.5, True)


def test_fidelities_strictly_increase_with_eta():
    grid = np.linspace(0.0, 1.0, 1001)
    for values in (
        [coherent_fidelity(e, 20.0) for e in grid],
        [bounded_fidelity(e, 1) for e in grid],
        [bounded_fidelity(e, 2) for e in grid],
    ):
        assert all(b > a for a, b in zip(values, values[1:]))


def test_clone_bound_values():
    assert abs(clone_bound(1) - 2.0 / 3.0) < 1e-15
    assert clone_bound(2) == 0.5
    with pytest.raises(InvalidArgumentError):
        clone_bound(0)


def test_invert_bounded_fidelity():
    # F1 hits the one-photon clone bound at sqrt(eta) = sqrt(2) - 1
    assert abs(invert_bounded_fidelity(2.0 / 3.0, 1) - (3.0 - 2.0 * math.sqrt(2.0))) < 1e-10
    root = invert_bounded_fidelity(0.5, 2)
    assert abs(root - 0.241066) < 1e-5
    assert abs(bounded_fidelity(root, 2) - 0.5) < 1e-12
    with pytest.raises(InvalidArgumentError):
        invert_bounded_fidelity(0.2, 2)


def test_fock_state_validation():
    state = FockState(np.array([0.6, 0.0, 0.8j]))
    assert state.n_levels == 3
    with pytest.raises(ValueError):
        state.coefficients[0] = 1.0
    with pytest.raises(InvalidArgumentError):
        FockState(np.array([0.6, 0.8j, 0.1]))
    with pytest.raises(InvalidArgumentError):
        FockState(np.array([]))


def test_loss_channel_single_photon():
    rho = loss_channel(FockState(np.array([0.0, 1.0])), 0.5)
    assert_allclose(rho, np.diag([0.5, 0.5]), atol=1e-15)


def test_loss_channel_endpoints():
    state = FockState(np.array([0.6, 0.0, 0.8j]))
    pure = np.outer(state.coefficients, state.coefficients.conj())
    assert_allclose(loss_channel(state, 1.0), pure, atol=1e-15)
    assert_allclose(loss_channel(state, 0.0), np.diag([1.0, 0.0, 0.0]), atol=1e-15)


def test_loss_channel_is_physical():
    rng = np.random.default_rng(11)
    for _ in range(10):
        z = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        state = FockState(z / np.linalg.norm(z))
        rho = loss_channel(state, rng.uniform(0.0, 1.0))
        assert abs(np.trace(rho) - 1.0) < 1e-10
        assert np.max(np.abs(rho - rho.conj().T)) < 1e-12
        assert np.min(np.linalg.eigvalsh(rho)) > -1e-12


def test_loss_channel_never_raises_photon_number():
    # a single photon embedded in a three-level space never populates
    # the two-photon level
    rho = loss_channel(np.array([0.0, 1.0, 0.0]), 0.7)
    assert np.max(np.abs(rho[2, :])) == 0.0
    assert np.max(np.abs(rho[:, 2])) == 0.0


def test_loss_channel_composition_law():
    rng = np.random.default_rng(13)
    for _ in range(10):
        z = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        state = FockState(z / np.linalg.norm(z))
        eta_1, eta_2 = rng.uniform(0.0, 1.0, 2)
        twice = loss_channel(loss_channel(state, eta_2), eta_1)
        once = loss_channel(state, eta_1 * eta_2)
        assert np.max(np.abs(twice - once)) < 1e-10


def test_loss_channel_rejects_junk():
    with pytest.raises(InvalidArgumentError):
        loss_channel(np.eye(2) * 0.7, 0.5)
    with pytest.raises(InvalidArgumentError):
        loss_channel(np.zeros((2, 3)), 0.5)


def test_haar_estimate_matches_closed_forms():
    for n_m in (1, 2):
        for eta in (0.0, 0.25, 0.5, 0.75):
            est = haar_average_fidelity(eta, n_m, 20_000, seed=2026)
            ref = bounded_fidelity(eta, n_m)
            assert est.stderr > 0.0
            assert abs(est.mean - ref) < 4.0 * est.stderr


def test_haar_estimate_is_exact_at_unit_transmission():
    est = haar_average_fidelity(1.0, 2, 5_000, seed=0)
    assert abs(est.mean - 1.0) < 1e-12
    assert est.stderr < 1e-12


def test_haar_estimate_reproducibility():
    first = haar_average_fidelity(0.5, 2, 10_000, seed=99)
    again = haar_average_fidelity(0.5, 2, 10_000, seed=99)
    parallel = haar_average_fidelity(0.5, 2, 10_000, seed=99, workers=2)
    other = haar_average_fidelity(0.5, 2, 10_000, seed=100)
    assert first == again
    assert first == parallel
    assert first.mean != other.mean
    assert first.n_samples == 10_000


def test_haar_estimate_rejects_bad_input():
    with pytest.raises(InvalidArgumentError):
        haar_average_fidelity(0.5, 2, 999, seed=1)
    with pytest.raises(InvalidArgumentError):
        haar_average_fidelity(0.5, 0, 2000, seed=1)
    with pytest.raises(InvalidArgumentError):
        haar_average_fidelity(1.5, 2, 2000, seed=1)


def test_efficiency_from_run(quick_run):
    report = efficiency(quick_run)
    assert 0.999 < report.amplitude_efficiency < 1.0
    assert abs(report.intensity_efficiency - report.amplitude_efficiency**2) < 1e-12
    # the input mode catches the whole pulse energy scale
    assert abs(report.in_amplitude - 2.0) < 1e-3
    # the released pulse carries the mirror's sign flip
    assert report.out_amplitude.real < 0.0
    u_in, u_out = standard_modes(quick_run)
    explicit = efficiency(quick_run, expected_out_mode=u_out, in_mode=u_in)
    assert explicit == report


def test_efficiency_rejects_orthogonal_input_mode(quick_run):
    u_in, _ = standard_modes(quick_run)
    grid = quick_run.schedule.grid
    t = grid.times()
    odd = mask_window(Envelope(grid, np.tanh(t - T0) / np.cosh(t - T0)), t_hi=0.0)
    samples = odd.samples.copy()
    for _ in range(2):
        overlap = project(u_in, Envelope(grid, samples))
        samples = samples - overlap * u_in.envelope.samples
    orthogonal = normalize_mode(Envelope(grid, samples))
    with pytest.raises(DegenerateInputError):
        efficiency(quick_run, in_mode=orthogonal)


def test_efficiency_flags_mode_mismatch(quick_run):
    # a nearly orthogonal input mode inflates the amplitude ratio far
    # past unity, which is mismatch, not physics
    grid = quick_run.schedule.grid
    t = grid.times()
    odd = np.tanh(t - T0) / np.cosh(t - T0)
    odd_mode = normalize_mode(mask_window(Envelope(grid, odd), t_hi=0.0))
    with pytest.raises(InvalidArgumentError):
        efficiency(quick_run, in_mode=odd_mode)


def test_fidelity_report_verdicts():
    report = fidelity_report(0.871**2, 20.0)
    assert abs(report.F_coherent - 0.75) < 0.01
    assert report.verdict_coherent
    borderline = fidelity_report(0.23, 20.0)
    assert abs(borderline.F2 - 0.4936) < 1e-4
    assert not borderline.verdict_n2
    assert borderline.verdict_n1
    perfect = fidelity_report(1.0, 20.0)
    assert perfect.verdict_coherent and perfect.verdict_n1 and perfect.verdict_n2


def test_fidelity_report_serialization(tmp_path):
    reports = [fidelity_report(0.75, 20.0), fidelity_report(0.23, 20.0)]
    path = tmp_path / "fidelity.csv"
    write_fidelity_csv(reports, str(path))
    lines = path.read_text().splitlines()
    assert lines[0].startswith("eta,n_bar,F_coherent,")
    assert len(lines) == 3
    assert lines[1].endswith("pass")
    assert lines[2].endswith("fail")
    table = format_fidelity_table(reports)
    rows = table.splitlines()
    assert len(rows) == 3
    assert rows[0].split() == list(lines[0].split(","))
    assert len(set(len(r) for r in rows)) == 1
