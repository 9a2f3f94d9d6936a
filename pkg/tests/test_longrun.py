"""Full-scale (N = 10^4) checks; opt in with ``pytest --longrun``."""
import pytest

from chiralgiant import defaults
from chiralgiant.cli import TransferSection, baseline_transfer, nonmarkov_comparison, run_emission
from chiralgiant.device import build_device

pytestmark = pytest.mark.longrun


@pytest.fixture(scope="module")
def big():
    return build_device(n_modes=10_000)


def test_emission_full_scale(big):
    r = run_emission(big, defaults.ghz(0.29), (0.0, 1.0), rate=defaults.mhz(3.0))
    assert r["beta_plus"] >= 0.95
    assert abs(r["fitted_gamma"] / r["gamma"] - 1) < 0.05


@pytest.mark.parametrize("d0", [0.0, 0.1])
def test_band_edge_full_scale(big, d0):
    r = nonmarkov_comparison(big, defaults.ghz(d0), band="real")
    assert abs(r["late_sim"] - r["res0_sq"]) / r["res0_sq"] < 0.05


def test_transfer_full_scale(big):
    on = baseline_transfer(big, TransferSection(), frame_every=None)[1].fidelity
    off = baseline_transfer(big, TransferSection(delay_correction=False), frame_every=None)[1].fidelity
    assert abs(on - 0.97) <= 0.02 and on > off
