"""Chiral emission and state transfer with modulated giant atoms on a photonic-crystal waveguide."""

__version__ = "0.1.0"

from .pcw_band import BandStructure, PcwParams, build_band_structure, calibrate_period, resonant_mode  # noqa: E402
from .coupler import CouplerParams, CouplingModel, DriveSignal, ModulationSpectrum, modulation_spectrum  # noqa: E402
from .dynamics import AtomSpec, SingleExcitationState, assemble_interaction, evolve  # noqa: E402
from .nonmarkov import BandEdgeModel, find_poles, reconstruct_amplitude  # noqa: E402
from .cascade import CascadeModel, SlhTriplet, series_product  # noqa: E402
from .transfer import TransferPlan, pulse_rates, run_transfer  # noqa: E402
from .device import Device, build_device  # noqa: E402

__all__ = [
    "BandStructure", "PcwParams", "build_band_structure", "calibrate_period", "resonant_mode",
    "CouplerParams", "CouplingModel", "DriveSignal", "ModulationSpectrum", "modulation_spectrum",
    "AtomSpec", "SingleExcitationState", "assemble_interaction", "evolve",
    "BandEdgeModel", "find_poles", "reconstruct_amplitude",
    "CascadeModel", "SlhTriplet", "series_product",
    "TransferPlan", "pulse_rates", "run_transfer",
    "Device", "build_device",
]
