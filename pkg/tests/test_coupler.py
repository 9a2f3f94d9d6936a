import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chiralgiant import defaults
from chiralgiant.coupler import (CouplerParams, CouplingModel, DriveSignal, balance_dc_bias,
                                 calibrate_prefactor, chiral_phase, coupling_at, coupling_gk, junction_phase,
                                 loop_inductance_shift, modulation_spectrum, mutual_inductance, optimal_phase,
                                 renormalized_coupling)

CP = CouplerParams()


def test_beta_is_table_value():
    assert CP.beta == pytest.approx(0.2)


def test_junction_phase_zero_and_small_beta():
    assert junction_phase(0.0, 0.2) == 0.0
    x = np.linspace(-1, 1, 11)
    assert np.allclose(junction_phase(x, 0.0), 2 * np.pi * x)


def test_junction_phase_fixed_point_oracle():
    beta, phi_ext = 0.2, 0.25
    phi = 2 * np.pi * phi_ext
    for _ in range(200):
        phi = 2 * np.pi * phi_ext - beta * np.sin(phi)
    assert junction_phase(phi_ext, beta) == pytest.approx(phi, abs=1e-10)


def test_junction_residual_random(rng):
    x = rng.uniform(-3, 3, 1000)
    beta = rng.uniform(0, 0.99, 1000)
    phi = np.array([junction_phase(a, b) for a, b in zip(x, beta)])
    assert np.max(np.abs(phi + beta * np.sin(phi) - 2 * np.pi * x)) < 1e-12


def test_mutual_inductance_limits():
    # phi_J = pi/2  <=>  2 pi phi_ext = pi/2 + beta
    phi_ext = (np.pi / 2 + CP.beta) / (2 * np.pi)
    assert mutual_inductance(phi_ext, CP) == pytest.approx(0.0, abs=1e-12 * CP.mutual_scale)
    weak = CouplerParams(shared_inductance=1e-15)
    x = np.linspace(0, 1, 9)
    assert np.allclose(mutual_inductance(x, weak) / weak.mutual_scale, np.cos(2 * np.pi * x), atol=1e-5)
    assert loop_inductance_shift(phi_ext, phi_ext, CP) == pytest.approx(2 * CP.shared_inductance)


def test_flattened_extrema():
    # beta > 0 flattens the maximum relative to a pure cosine: M(0)/scale = 1/(1+beta)
    assert mutual_inductance(0.0, CP) / CP.mutual_scale == pytest.approx(1 / 1.2)
    assert mutual_inductance(0.5, CP) / CP.mutual_scale == pytest.approx(-1 / 0.8)


def test_spectrum_static_flux():
    spec = modulation_spectrum(DriveSignal(0.25, 0.0), CP)
    assert np.allclose(spec.amplitudes[1:], 0.0, atol=1e-14)


def test_spectrum_at_large_drive():
    d = 0.4 * np.pi
    bias = balance_dc_bias(d, CP)
    spec = modulation_spectrum(DriveSignal(bias, d, phase=0.3), CP)
    a = spec.amplitudes
    assert abs(a[0]) < 1e-6
    assert a[2] / a[1] < 0.2
    # the root in [0, 1/2] is in antiphase with the drive, its mirror follows it
    assert np.angle(np.exp(1j * (spec.phases[1] - 0.3 - np.pi))) == pytest.approx(0, abs=1e-8)
    mirror = modulation_spectrum(DriveSignal(balance_dc_bias(d, CP, in_phase=True), d, phase=0.3), CP)
    assert mirror.phases[1] == pytest.approx(0.3, abs=1e-8)
    assert mirror.amplitudes[1] == pytest.approx(a[1], rel=1e-10)


def test_spectrum_resynthesis_oracle():
    d = 0.3 * np.pi
    drive = DriveSignal(balance_dc_bias(d, CP), d)
    spec = modulation_spectrum(drive, CP, n_max=40)
    theta = np.linspace(0, 2 * np.pi, 999, endpoint=False)
    direct = mutual_inductance(drive.flux(theta), CP) / CP.mutual_scale
    rms = np.sqrt(np.mean((spec.synthesize(theta) - direct) ** 2)) / np.sqrt(np.mean(direct ** 2))
    assert rms < 1e-4
    json.dumps(spec.to_dict())


def test_balance_dc_bias_cases():
    tiny = CouplerParams(shared_inductance=1e-15)
    assert balance_dc_bias(0.5, tiny) == pytest.approx(0.25, abs=1e-6)
    bias = balance_dc_bias(0.1 * np.pi, CP)
    assert abs(modulation_spectrum(DriveSignal(bias, 0.1 * np.pi), CP).amplitudes[0]) < 1e-6
    other = modulation_spectrum(DriveSignal(1 - bias, 0.1 * np.pi), CP).amplitudes[0]
    assert abs(other) < 1e-6
    with pytest.raises(ValueError):
        balance_dc_bias(0.0, CP)


def test_symmetric_phase_symmetric_coupling(mid_bs):
    cm = CouplingModel(0.2 * mid_bs.params.cell_length, 0.8 * mid_bs.params.cell_length, 0.0)
    g = np.abs(coupling_gk(mid_bs, cm))
    n = mid_bs.n_modes
    j = np.arange(1, n // 2 - 1)
    assert np.allclose(g[n // 2 - 1 + j], g[n // 2 - 1 - j], rtol=1e-10)


def test_cosine_form_zero(params):
    lam = params.cell_length
    k = 0.31 * params.k_m
    phi = optimal_phase(params, 0.0, lam, k)
    assert np.angle(np.exp(1j * (k * lam - phi))) == pytest.approx(np.pi, abs=1e-9) or \
        np.angle(np.exp(1j * (k * lam - phi))) == pytest.approx(-np.pi, abs=1e-9)
    cm = CouplingModel(0.0, lam, phi)
    assert abs(coupling_at(params, cm, k, 1.0)) < 1e-10 * abs(coupling_at(params, cm, -k, 1.0))


def test_reference_phase_nonperiodic_points(params, device):
    lam = params.cell_length
    k = device.resonant_k(defaults.ghz(defaults.PHASE_POINT_DRIVE_GHZ))
    phi = chiral_phase(params, 0.2 * lam, 0.8 * lam, k, +1)
    assert abs(phi) / np.pi == pytest.approx(0.28, abs=0.01)
    cm = CouplingModel(0.2 * lam, 0.8 * lam, phi)
    assert renormalized_coupling(params, cm, -k) < 1e-9 * renormalized_coupling(params, cm, k)


def test_phase_scan_oracle(params):
    lam = params.cell_length
    k = 0.37 * params.k_m
    scan = np.linspace(-np.pi, np.pi, 2000, endpoint=False)
    mags = [abs(coupling_at(params, CouplingModel(0.2 * lam, 0.8 * lam, p), k, 1.0)) for p in scan]
    best = scan[int(np.argmin(mags))]
    phi = optimal_phase(params, 0.2 * lam, 0.8 * lam, k)
    assert abs(np.angle(np.exp(1j * (best - phi)))) <= 2 * np.pi / 2000


def test_degenerate_points(params):
    with pytest.raises(ValueError):
        optimal_phase(params, 0.1, 0.1, 1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 0.49), st.floats(-np.pi, np.pi))
def test_mirror_identity(frac, phi_c):
    from chiralgiant.pcw_band import PcwParams
    p = PcwParams()
    lam = p.cell_length
    k = frac * p.k_m
    cm = CouplingModel(0.2 * lam, 0.8 * lam, phi_c)
    a = abs(coupling_at(p, cm, k, 1.0))
    b = abs(coupling_at(p, cm.with_phase(-phi_c), -k, 1.0))
    assert abs(a - b) <= 1e-10 * max(a, 1e-30) + 1e-300


def test_quadratic_scaling_in_a1(params):
    lam = params.cell_length
    k = 0.3 * params.k_m
    cm = CouplingModel(0.0, lam, 0.4)
    vals = [renormalized_coupling(params, cm.with_a1(a), k) ** 2 for a in (0.1, 0.2, 0.4)]
    assert vals[1] / vals[0] == pytest.approx(4.0, rel=1e-12)
    assert vals[2] / vals[0] == pytest.approx(16.0, rel=1e-12)


def test_renormalized_coupling_length_independent(params):
    lam = params.cell_length
    cm = CouplingModel(0.0, lam, 0.4, prefactor=500.0)
    k = 0.2 * params.k_m
    g1 = abs(coupling_at(params, cm, k, 3.0)) * np.sqrt(3.0 / (2 * np.pi))
    g2 = abs(coupling_at(params, cm, k, 30.0)) * np.sqrt(30.0 / (2 * np.pi))
    assert g1 == pytest.approx(g2, rel=1e-12)
    assert renormalized_coupling(params, cm, k) == pytest.approx(g1, rel=1e-12)


def test_prefactor_calibration(device):
    from chiralgiant.transfer import chiral_rates
    drive = defaults.ghz(defaults.CALIBRATION_DRIVE_GHZ)
    cm = device.coupling(drive, (0.0, 1.0), a1=0.5)
    assert sum(device.rates(cm, drive)) == pytest.approx(defaults.mhz(3.0), rel=1e-6)
    w = device.omega_eff(drive)
    assert sum(chiral_rates(device.bs, cm, w)) == pytest.approx(defaults.mhz(3.0), rel=1e-6)
    with pytest.raises(ValueError):
        calibrate_prefactor(device.params, device.band_top * 1.01, 1.0)
