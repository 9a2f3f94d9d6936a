"""Calibrated device: band structure, qubit frequency and coupling prefactor.

Bundles the steps every experiment repeats: sample the bands, place the
qubit a fixed detuning above band 1, and calibrate the coupling prefactor
so that the reference amplitude map holds (A_1 = 0.5 gives 2 pi x 3 MHz at
Omega_d/2pi = 0.55 GHz for points (0, lambda_m)).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import defaults
from .coupler import CouplingModel, calibrate_prefactor, chiral_phase
from .pcw_band import BandStructure, PcwParams, bloch_group_velocity, build_band_structure, resonant_mode
from .transfer import chiral_rates

__all__ = ["Device", "build_device"]


@dataclass
class Device:
    bs: BandStructure
    qubit_frequency: float
    prefactor: float

    @property
    def params(self) -> PcwParams:
        return self.bs.params

    @property
    def band_top(self) -> float:
        return self.bs.band1_top

    def omega_eff(self, drive_frequency: float) -> float:
        return self.qubit_frequency - drive_frequency

    def delta0(self, drive_frequency: float) -> float:
        """Detuning of omega_eff from the band-1 top (rad/s)."""
        return self.omega_eff(drive_frequency) - self.band_top

    def drive_for_delta0(self, delta0: float) -> float:
        return self.qubit_frequency - self.band_top - delta0

    def resonant_k(self, drive_frequency: float) -> float:
        return abs(resonant_mode(self.bs, self.omega_eff(drive_frequency))[0])

    def group_velocity(self, drive_frequency: float) -> float:
        return bloch_group_velocity(self.resonant_k(drive_frequency), self.params)

    def coupling(self, drive_frequency: float, points=(0.0, 1.0), a1: float = defaults.A1_MAX,
                 phi_c=None, direction: int = +1) -> CouplingModel:
        """Coupling at ``points`` (cell units); phi_c defaults to the chiral optimum."""
        lam = self.params.cell_length
        x1, x2 = points[0] * lam, points[1] * lam
        if phi_c is None:
            phi_c = chiral_phase(self.params, x1, x2, self.resonant_k(drive_frequency), direction)
        return CouplingModel(x1, x2, phi_c, a1, self.prefactor)

    def rates(self, cm: CouplingModel, drive_frequency: float):
        """Markovian (Gamma_+, Gamma_-) in rad/s."""
        return chiral_rates(self.bs, cm, self.omega_eff(drive_frequency))

    def a1_for_rate(self, cm: CouplingModel, drive_frequency: float, rate: float) -> float:
        """A_1 giving total Markovian rate ``rate`` for this geometry and phase."""
        total = sum(self.rates(cm, drive_frequency))
        return cm.a1 * float(np.sqrt(rate / total))


def build_device(params: PcwParams = PcwParams(), n_modes: int = 4096,
                 qubit_detuning: float = defaults.ghz(defaults.QUBIT_DETUNING_GHZ),
                 calibration_rate: float = defaults.mhz(defaults.CALIBRATION_RATE_MHZ),
                 calibration_drive: float = defaults.ghz(defaults.CALIBRATION_DRIVE_GHZ)) -> Device:
    """Sample the bands and calibrate the prefactor for ``params``."""
    bs = build_band_structure(params, n_modes)
    wq = bs.band1_top + qubit_detuning
    pref = calibrate_prefactor(params, wq - calibration_drive, calibration_rate)
    return Device(bs, wq, pref)
