import csv
import io
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chiralgiant import defaults
from chiralgiant.cascade import dark_state_odes
from chiralgiant.cli import TransferSection, baseline_transfer
from chiralgiant.transfer import (RATE_FLOOR, TransferPlan, amplitude_schedule, fidelity_sweep, pulse_rates,
                                  run_transfer, sweep_csv, transfer_atoms)

GMAX = defaults.mhz(7.0)


def test_pulse_rate_limits():
    ga, gb = pulse_rates(0.0, GMAX)
    assert ga == pytest.approx(GMAX) and gb == pytest.approx(GMAX)
    assert pulse_rates(-1.0, GMAX)[0] == pytest.approx(RATE_FLOOR * GMAX)
    assert pulse_rates(1.0, GMAX)[0] == GMAX
    with pytest.raises(ValueError):
        pulse_rates(0.0, 0.0)


def test_pulse_rates_mirror(rng):
    t = rng.uniform(-100e-9, 100e-9, 100)
    ga, gb = pulse_rates(t, GMAX)
    ga_m, _ = pulse_rates(-t, GMAX)
    assert np.array_equal(gb, ga_m)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e-6, 1e-6), st.floats(0.0, 5e-9))
def test_pulse_rates_bounded_and_delayed(t, tau):
    ga, gb = pulse_rates(t, GMAX, tau)
    assert RATE_FLOOR * GMAX <= ga <= GMAX and RATE_FLOOR * GMAX <= gb <= GMAX
    assert gb == pulse_rates(tau - t, GMAX)[0]


def test_pulse_rate_formula():
    t = -np.linspace(1e-9, 50e-9, 20)
    e = np.exp(GMAX * t)
    assert np.allclose(pulse_rates(t, GMAX, floor=0.0)[0], GMAX * e / (2 - e), rtol=1e-14)


def test_amplitude_schedule():
    assert amplitude_schedule(GMAX, GMAX, 0.8) == pytest.approx(0.8)
    assert amplitude_schedule(GMAX / 4, GMAX, 0.8) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        amplitude_schedule(GMAX, GMAX, 0.6, a1_limit=0.5)
    with pytest.raises(ValueError):
        amplitude_schedule(2 * GMAX, GMAX, 0.4)


def test_plan_windows():
    p = TransferPlan(gamma_max=GMAX, t_f=80e-9, separation=0.03, group_velocity=2e7)
    assert p.t_i == -p.t_f
    assert p.tau == pytest.approx(1.5e-9) and p.schedule_delay == p.tau
    assert replace(p, delay_correction=False).schedule_delay == 0
    fl = replace(p, start="floor", start_level=1e-3)
    assert pulse_rates(fl.t_i, GMAX)[0] == pytest.approx(1e-3 * GMAX, rel=1e-9)
    sa, sb = p.scales(np.array([-1e-6, 0.0, 1e-6]))
    assert sa[-1] == 1.0 and sb[0] == 1.0
    for bad in (dict(gamma_max=0.0), dict(start="late"), dict(group_velocity=0.0)):
        with pytest.raises(ValueError):
            replace(p, **bad)


def test_sweep_csv_format():
    rows = [{"L_ab_cells": 4.0, "delta0_ghz": -0.25, "fidelity": 0.9, "corrected": True, "error": ""},
            {"L_ab_cells": 8.0, "delta0_ghz": -0.25, "fidelity": float("nan"), "corrected": False,
             "error": 'WindowingError: "boundary", reached'}]
    text = sweep_csv(rows)
    assert text.count("\r\n") == 3
    parsed = list(csv.reader(io.StringIO(text, newline="")))
    assert parsed[0][0] == "L_ab_over_lambda_m"
    assert parsed[2][4] == rows[1]["error"]


def test_sweep_records_cell_errors(small_bs):
    """An in-gap detuning cannot host a transfer; the error is recorded and the sweep continues."""
    plan = TransferPlan(gamma_max=GMAX, t_f=20e-9)
    wq = small_bs.band1_top + defaults.ghz(0.1)
    rows = fidelity_sweep(small_bs, [2], [-0.25, 0.3], plan, wq, 513.9, corrections=(True,))
    assert len(rows) == 2
    ok, bad = rows
    assert ok["error"] == "" and 0 <= ok["fidelity"] <= 1
    assert np.isnan(bad["fidelity"]) and bad["error"]


def test_transfer_argument_checks(small_bs):
    plan = TransferPlan(gamma_max=GMAX)
    wq = small_bs.band1_top + defaults.ghz(0.1)
    atoms, _ = transfer_atoms(small_bs, plan, wq, defaults.ghz(0.35), (0.0, 1.0), 513.9)
    with pytest.raises(ValueError):
        run_transfer(plan, small_bs, atoms[:1])
    with pytest.raises(ValueError):
        transfer_atoms(small_bs, replace(plan, a1_limit=0.1), wq, defaults.ghz(0.35), (0.0, 1.0), 513.9)


# ---------------------------------------------------------------- full runs


@pytest.fixture(scope="module")
def baseline(device):
    return baseline_transfer(device, TransferSection(), frame_every=4e-9)


@pytest.fixture(scope="module")
def decoupled(device):
    """Baseline plan with the receiver switched off (A_1^b = 0) and no delay."""
    sec = TransferSection(delay_correction=False)
    drive = defaults.ghz(sec.omega_d_ghz)
    plan = TransferPlan(gamma_max=defaults.mhz(sec.gamma_max_mhz), t_f=sec.t_f_us * 1e-6,
                        separation=sec.l_ab * device.params.cell_length, group_velocity=device.group_velocity(drive),
                        delay_correction=False)
    atoms, _ = transfer_atoms(device.bs, plan, device.qubit_frequency, drive, sec.points, device.prefactor)
    atoms[1] = replace(atoms[1], coupling=atoms[1].coupling.with_a1(0.0))
    return plan, atoms, run_transfer(plan, device.bs, atoms, frame_every=None)


@pytest.mark.slow
def test_receiver_decoupled(decoupled):
    assert decoupled[2].fidelity < 0.01


@pytest.mark.slow
def test_emitted_packet_time_reversal_symmetry(decoupled, device):
    """Without a receiver the pulse schedule emits a packet that is symmetric in time, hence in space."""
    from chiralgiant.dynamics import field_on_lattice
    plan, atoms, res = decoupled
    fin = res.trajectory.final
    x, psi = field_on_lattice(device.bs, fin.modes, fin.t, atoms[0].effective_frequency, samples_per_cell=4)
    dens = np.abs(psi) ** 2
    right = x > atoms[0].coupling.x2
    x, dens = x[right], dens[right]
    # smooth over the lattice period before locating the centre
    per = 4
    dens = np.convolve(dens, np.ones(per) / per, mode="same")
    centre = np.sum(x * dens) / np.sum(dens)
    mirrored = np.interp(2 * centre - x, x, dens, left=0.0, right=0.0)
    core = np.abs(x - centre) < 0.5 * (x.max() - centre)
    rms = np.sqrt(np.mean((dens[core] - mirrored[core]) ** 2)) / np.sqrt(np.mean(dens[core] ** 2))
    assert rms < 0.10


@pytest.mark.slow
def test_dark_state_leakage(baseline):
    assert baseline[1].leakage < 0.05


@pytest.mark.slow
def test_simulation_matches_dark_state_odes(baseline):
    """Cascaded ODE in retarded time: atom b sees atom a's field tau later."""
    plan, res = baseline
    tr = res.trajectory
    t, tau = tr.times, plan.tau
    ra = lambda s: float(plan.rates(s)[0])
    rb = lambda s: float(plan.rates(s + tau)[1])
    _, mu_a, mu_b, _ = dark_state_odes(ra, rb, 1.0, 0.0, (t[0], t[-1]), t_eval=t)
    assert np.max(np.abs(tr.populations[:, 0] - np.abs(mu_a) ** 2)) < 0.03
    pb_ode = np.interp(t - tau, t, np.abs(mu_b) ** 2, left=0.0)
    assert np.max(np.abs(tr.populations[:, 1] - pb_ode)) < 0.03


@pytest.mark.slow
def test_longer_window_raises_fidelity(device, baseline):
    _, short = baseline_transfer(device, TransferSection(t_f_us=0.04), frame_every=None)
    assert short.fidelity < baseline[1].fidelity
