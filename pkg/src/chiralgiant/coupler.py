"""Flux-modulated Josephson coupling loops and the resulting coupling g_k.

Each coupling point is a loop whose junction phase phi_J obeys
``phi_J + beta sin(phi_J) = 2 pi Phi_ext / Phi_0``; the loop mediates a
mutual inductance ``M_g = (L_0^2/L_T) cos(phi_J) / (1 + beta cos(phi_J))``.
Driving Phi_ext at Omega_d makes M_g(t) periodic; its first harmonic A_1,
carrying the drive phase, sets the red-sideband coupling

    g_k = G_k [u_k(x_1) + exp(i(k x_d - phi_c)) u_k(x_2)],
    G_k = (A_1/2) (L_0^2/L_T) sqrt(w_q w_1(k) / (L_tot L_Q)) exp(i k x_1).

Circuit constants are rarely known individually, so ``CouplingModel`` carries
a single prefactor ``C = (L_0^2/L_T) sqrt(w_q / (l_0 L_Q))`` that turns this
into ``G_k = (A_1/2) C sqrt(w_1(k)/L) exp(i k x_1)`` for a line of length L.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from . import defaults
from .pcw_band import BandStructure, PcwParams, bloch_group_velocity, solve_bloch

__all__ = [
    "CouplerParams",
    "DriveSignal",
    "ModulationSpectrum",
    "CouplingModel",
    "DegeneratePointError",
    "junction_phase",
    "mutual_inductance",
    "loop_inductance_shift",
    "modulation_spectrum",
    "balance_dc_bias",
    "bloch_amplitude_at",
    "coupling_gk",
    "coupling_at",
    "renormalized_coupling",
    "optimal_phase",
    "chiral_phase",
    "calibrate_prefactor",
]


class DegeneratePointError(ValueError):
    """Raised when the Bloch amplitude vanishes at a coupling point."""


@dataclass(frozen=True)
class CouplerParams:
    """Lumped constants of one coupling loop and the transmon it feeds.

    Inductances in H, ``qubit_frequency`` in rad/s.  ``beta = 2 L_0 / L_T``.
    """

    shared_inductance: float = 0.1e-9
    junction_inductance: float = 1.0e-9
    transmon_inductance: float = 10e-9
    qubit_frequency: float = defaults.ghz(3.66)

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError(f"screening beta={self.beta} must lie in (0, 1)")

    @property
    def beta(self) -> float:
        return 2 * self.shared_inductance / self.junction_inductance

    @property
    def mutual_scale(self) -> float:
        """L_0^2 / L_T, the unit of M_g."""
        return self.shared_inductance ** 2 / self.junction_inductance

    def prefactor(self, inductance_per_length: float) -> float:
        """Coupling prefactor C for these circuit constants."""
        return self.mutual_scale * np.sqrt(self.qubit_frequency / (inductance_per_length * self.transmon_inductance))


@dataclass(frozen=True)
class DriveSignal:
    """Phi_ext(t) = Phi_b + (Phi_0/2pi) d cos(Omega_d t + phase), Phi_b in Phi_0 units."""

    dc_bias: float = 0.25
    amplitude: float = 0.0
    frequency: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0 or self.frequency < 0:
            raise ValueError("drive amplitude and frequency must be non-negative")

    def flux(self, theta):
        """External flux (Phi_0 units) at drive phase angle theta = Omega_d t."""
        return self.dc_bias + self.amplitude / (2 * np.pi) * np.cos(theta + self.phase)


@dataclass(frozen=True)
class ModulationSpectrum:
    """M_g(t) = (L_0^2/L_T) sum_n A_n cos(n Omega_d t + phi_n).

    ``amplitudes[0]`` is the signed dc part; ``phases[0]`` is 0 by convention.
    """

    amplitudes: np.ndarray
    phases: np.ndarray

    def synthesize(self, theta) -> np.ndarray:
        n = np.arange(self.amplitudes.size)
        theta = np.asarray(theta, dtype=float)
        return np.cos(np.multiply.outer(theta, n) + self.phases) @ self.amplitudes

    def to_dict(self) -> dict:
        return {"amplitudes": self.amplitudes.tolist(), "phases": self.phases.tolist()}


def junction_phase(phi_ext, beta: float, tol: float = 1e-13, max_iter: int = 200):
    """Solve phi_J + beta sin(phi_J) = 2 pi phi_ext for 0 <= beta < 1.

    ``phi_ext`` is in flux-quantum units and may be an array.  The left side
    is strictly increasing, so the root sits in ``[x - beta, x + beta]`` with
    ``x = 2 pi phi_ext``; Newton steps leaving that bracket, or failing to
    halve the residual, are replaced by bisection.
    """
    if not 0 <= beta < 1:
        raise ValueError("beta must lie in [0, 1)")
    x = 2 * np.pi * np.asarray(phi_ext, dtype=float)
    lo, hi = x - beta, x + beta
    phi = x - beta * np.sin(x)
    f_prev = np.full_like(x, np.inf)
    for _ in range(max_iter):
        f = phi + beta * np.sin(phi) - x
        if np.all(np.abs(f) < tol):
            break
        lo = np.where(f < 0, phi, lo)
        hi = np.where(f > 0, phi, hi)
        trial = phi - f / (1 + beta * np.cos(phi))
        bad = (trial <= lo) | (trial >= hi) | (np.abs(f) > 0.5 * np.abs(f_prev))
        f_prev = f
        phi = np.where(bad, 0.5 * (lo + hi), trial)
    return phi if phi.ndim else float(phi)


def _mutual_unit(phi_ext, beta):
    c = np.cos(junction_phase(phi_ext, beta))
    return c / (1 + beta * c)


def mutual_inductance(phi_ext, params: CouplerParams):
    """Effective PCW-atom mutual inductance M_g (H) at external flux phi_ext."""
    return params.mutual_scale * _mutual_unit(phi_ext, params.beta)


def loop_inductance_shift(phi_ext_1, phi_ext_2, params: CouplerParams):
    """Extra transmon inductance L_s = 2 L_0 + M_g1 + M_g2 from the two loops."""
    return 2 * params.shared_inductance + mutual_inductance(phi_ext_1, params) + mutual_inductance(phi_ext_2, params)


def modulation_spectrum(drive: DriveSignal, params: CouplerParams, n_max: int = 4, n_samples: int = 2048) -> ModulationSpectrum:
    """Fourier harmonics of M_g(t) over one drive period, in units L_0^2/L_T.

    On a uniform periodic grid the trapezoid rule is the plain mean, so the
    coefficients come straight from an FFT.
    """
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    n_samples = max(n_samples, 1024, 4 * n_max)
    theta = 2 * np.pi * np.arange(n_samples) / n_samples
    m = _mutual_unit(drive.flux(theta), params.beta)
    c = np.fft.rfft(m)[: n_max + 1] / n_samples
    amps = 2 * np.abs(c)
    amps[0] = c[0].real
    phases = np.angle(c)
    phases[0] = 0.0
    return ModulationSpectrum(amps, phases)


def balance_dc_bias(d: float, params: CouplerParams, in_phase: bool = False, tol: float = 1e-10) -> float:
    """DC flux bias (Phi_0 units) cancelling the dc harmonic A_0.

    The root in [0, 1/2] is returned; there the first harmonic is in
    antiphase with the drive.  ``in_phase=True`` returns the mirror root
    ``1 - Phi_b``, whose first harmonic follows the drive phase.
    """
    if d <= 0:
        raise ValueError("ac amplitude d must be positive")

    def dc(phi_b):
        return modulation_spectrum(DriveSignal(phi_b, d), params, 2).amplitudes[0]

    a, b = 0.0, 0.5
    if dc(a) * dc(b) > 0:
        raise ValueError(f"no dc zero crossing for d={d} in [0, 0.5] Phi_0")
    root = brentq(dc, a, b, xtol=1e-14)
    if abs(dc(root)) > tol:
        raise ValueError(f"dc balance not reached: A_0={dc(root):.3e}")
    return 1.0 - root if in_phase else root


@dataclass(frozen=True)
class CouplingModel:
    """Two-point coupling geometry of one giant atom.

    Positions in m; ``phi_c`` is the local modulation phase of point 2
    relative to point 1 (rad); ``prefactor`` is C in rad s^-1 m^1/2.
    """

    x1: float
    x2: float
    phi_c: float = 0.0
    a1: float = defaults.A1_MAX
    prefactor: float = 1.0

    @property
    def x_d(self) -> float:
        return self.x2 - self.x1

    def with_phase(self, phi_c: float) -> "CouplingModel":
        return replace(self, phi_c=phi_c)

    def with_a1(self, a1: float) -> "CouplingModel":
        return replace(self, a1=a1)

    def shifted(self, dx: float) -> "CouplingModel":
        return replace(self, x1=self.x1 + dx, x2=self.x2 + dx)


def bloch_amplitude_at(params: PcwParams, k: float, x) -> np.ndarray:
    """Band-1 u_k(x) at an arbitrary (off-grid) wavenumber."""
    _, c = solve_bloch(k, params, 1)
    m = params.fourier_order
    orders = np.arange(-m, m + 1)
    return np.exp(1j * params.k_m * np.multiply.outer(np.asarray(x, dtype=float), orders)) @ c[0]


def _gk(k, omega, u1, u2, cm: CouplingModel, length: float):
    scale = 0.5 * cm.a1 * cm.prefactor * np.sqrt(omega / length)
    return scale * (np.exp(1j * k * cm.x1) * u1 + np.exp(1j * (k * cm.x2 - cm.phi_c)) * u2)


def coupling_gk(bs: BandStructure, cm: CouplingModel, k=None) -> np.ndarray:
    """Complex band-1 coupling g_k (rad/s) on the grid, or at grid points ``k``."""
    u = bs.bloch_amplitude(np.array([cm.x1, cm.x2]), band=0)
    g = _gk(bs.k_grid, bs.frequencies[:, 0], u[:, 0], u[:, 1], cm, bs.length)
    if k is None:
        return g
    idx = np.array([bs.index_of(kk) for kk in np.atleast_1d(k)])
    return g[idx] if np.ndim(k) else g[idx[0]]


def coupling_at(params: PcwParams, cm: CouplingModel, k: float, length: float) -> complex:
    """g_k at an arbitrary band-1 wavenumber for a line of the given length."""
    omega = solve_bloch(k, params, 1)[0][0]
    u1, u2 = bloch_amplitude_at(params, k, [cm.x1, cm.x2])
    return complex(_gk(k, omega, u1, u2, cm, length))


def renormalized_coupling(params: PcwParams, cm: CouplingModel, k: float) -> float:
    """|g'_k| = |g_k| sqrt(L/2pi); independent of the line length."""
    return abs(coupling_at(params, cm, k, 2 * np.pi))


def optimal_phase(params: PcwParams, x1: float, x2: float, k_r: float) -> float:
    """phi_c that makes g_{+k_r} vanish, wrapped to (-pi, pi].

    Solves arg[u(x_2)/u(x_1) exp(i k_r x_d)] - phi_c = pi.  Because
    u_{-k} = conj(u_k), the same magnitude with opposite sign makes
    g_{-k_r} vanish instead; see ``chiral_phase``.
    """
    if x1 == x2:
        raise ValueError("coupling points must differ")
    u1, u2 = bloch_amplitude_at(params, k_r, [x1, x2])
    if abs(u1) < 1e-12:
        raise DegeneratePointError(f"u(x1) vanishes at x1={x1}")
    phi = np.angle(u2 / u1 * np.exp(1j * k_r * (x2 - x1))) - np.pi
    phi = np.angle(np.exp(1j * phi))
    return float(np.pi if np.isclose(phi, -np.pi) else phi)


def chiral_phase(params: PcwParams, x1: float, x2: float, k_r: float, direction: int = +1) -> float:
    """phi_c for emission towards +x (direction=+1, decouples -k_r) or -x."""
    phi = optimal_phase(params, x1, x2, k_r)
    return -phi if direction > 0 else phi


def calibrate_prefactor(params: PcwParams, omega_eff: float, target_rate: float, a1: float = defaults.A1_MAX,
                        points=(0.0, 1.0), direction: int = +1) -> float:
    """Prefactor C giving total Markovian rate ``target_rate`` (rad/s).

    Couplings are placed at ``points`` (units of the cell length) with the
    chiral phase for ``direction``.  The population decay rate into each
    direction is 2 pi |g'_{+-k_r}|^2 / v_g and scales as C^2.
    """
    from .pcw_band import zone_edge_gap  # local: avoid widening the import surface

    top, _ = zone_edge_gap(params)
    if not 0 < omega_eff < top:
        raise ValueError("omega_eff must lie inside band 1")
    k_r = brentq(lambda k: solve_bloch(k, params, 1)[0][0] - omega_eff, 1e-9 * params.k_m, 0.5 * params.k_m, xtol=1e-16)
    lam = params.cell_length
    x1, x2 = points[0] * lam, points[1] * lam
    cm = CouplingModel(x1, x2, chiral_phase(params, x1, x2, k_r, direction), a1, 1.0)
    v = bloch_group_velocity(k_r, params)
    unit_rate = 2 * np.pi * (renormalized_coupling(params, cm, k_r) ** 2 + renormalized_coupling(params, cm, -k_r) ** 2) / v
    return float(np.sqrt(target_rate / unit_rate))
