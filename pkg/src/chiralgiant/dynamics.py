"""Single-excitation dynamics of giant atoms on the discretized band 1.

In the interaction picture with detunings ``D_k = w_eff - w_1(k)``

    dc_e/dt = -i sum_k g_k exp(i D_k t) c_k,
    dc_k/dt = -i sum_atoms conj(g_k) exp(-i D_k t) c_e.

Each atom carries its own g_k (position phases included), so propagation,
retardation and cascading between atoms emerge from the mode sum.  With
this sign choice a mode with k > 0 carries energy towards +x.

The mode grid is a ring of N cells, ``x in [-L/2, L/2)``; amplitudes are
evolved with classic RK4.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.constants import hbar

from .coupler import CouplingModel, coupling_gk
from .pcw_band import BandStructure

__all__ = [
    "AtomSpec",
    "SingleExcitationState",
    "Trajectory",
    "Interaction",
    "ConfigurationError",
    "NormDriftError",
    "WindowingError",
    "NonExponentialError",
    "assemble_interaction",
    "default_time_step",
    "evolve",
    "field_profile",
    "field_on_lattice",
    "directional_flux_and_beta",
    "momentum_beta",
    "fit_decay_rate",
]


class ConfigurationError(ValueError):
    """Raised for atom frequencies outside the regime the model covers."""


class NormDriftError(RuntimeError):
    """Raised when the integrator loses more than the tolerated norm."""


class WindowingError(RuntimeError):
    """Raised when the emitted field reaches the guard band of the ring."""


class NonExponentialError(ValueError):
    """Raised when a population trace cannot be fitted by a single exponential."""


@dataclass(frozen=True)
class AtomSpec:
    """One giant atom.

    ``schedule(t)`` scales A_1 relative to ``coupling.a1`` (default 1);
    ``frequency_offset(t)`` adds an extra detuning of the atom in rad/s,
    e.g. a drive chirp compensating the Lamb shift.
    """

    coupling: CouplingModel
    qubit_frequency: float
    drive_frequency: float = 0.0
    schedule: Optional[Callable[[float], float]] = None
    frequency_offset: Optional[Callable[[float], float]] = None

    @property
    def effective_frequency(self) -> float:
        return self.qubit_frequency - self.drive_frequency

    def scale(self, t: float) -> float:
        return 1.0 if self.schedule is None else float(self.schedule(t))

    def offset(self, t: float) -> float:
        return 0.0 if self.frequency_offset is None else float(self.frequency_offset(t))


@dataclass
class SingleExcitationState:
    """Schrodinger-picture-free amplitudes in the interaction picture at time t."""

    atoms: np.ndarray
    modes: np.ndarray
    t: float = 0.0

    @classmethod
    def excited(cls, n_atoms: int, n_modes: int, which: int = 0, t: float = 0.0) -> "SingleExcitationState":
        atoms = np.zeros(n_atoms, dtype=complex)
        atoms[which] = 1.0
        return cls(atoms, np.zeros(n_modes, dtype=complex), t)

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.atoms) ** 2) + np.sum(np.abs(self.modes) ** 2))

    def copy(self) -> "SingleExcitationState":
        return SingleExcitationState(self.atoms.copy(), self.modes.copy(), self.t)


@dataclass
class Trajectory:
    """Sampled populations; ``snapshots`` holds (t, mode amplitudes) pairs."""

    times: np.ndarray
    populations: np.ndarray
    final: SingleExcitationState
    norm_drift: float
    snapshots: list = field(default_factory=list)
    steps: int = 0

    def to_csv_rows(self):
        header = ["t_us"] + [f"pop_{i}" for i in range(self.populations.shape[1])]
        rows = [[f"{t * 1e6:.9g}"] + [f"{p:.9g}" for p in row] for t, row in zip(self.times, self.populations)]
        return header, rows


class _StaticAtom:
    """Stand-in for atoms of an explicit mode set: constant coupling, no offset."""

    @staticmethod
    def scale(t):
        return 1.0

    @staticmethod
    def offset(t):
        return 0.0


class Interaction:
    """Precomputed couplings and detunings for a set of atoms on one band structure."""

    def __init__(self, bs: BandStructure, atoms: Sequence[AtomSpec]):
        if not atoms:
            raise ConfigurationError("at least one atom is required")
        band1 = bs.frequencies[:, 0]
        for a in atoms:
            w_eff = a.effective_frequency
            if bs.frequencies.shape[1] > 1:
                lo2, hi2 = bs.frequencies[:, 1].min(), bs.frequencies[:, 1].max()
                if lo2 <= w_eff <= hi2:
                    raise ConfigurationError("effective frequency resonant with band 2; rotating-wave form invalid")
                if not bs.gap_edges[0] < a.qubit_frequency < bs.gap_edges[1]:
                    raise ConfigurationError("bare qubit frequency must lie inside the band gap")
            if w_eff <= 0:
                raise ConfigurationError("effective frequency must be positive")
        self.bs = bs
        self.atoms = list(atoms)
        self.g = np.array([coupling_gk(bs, a.coupling) for a in atoms])
        self.detuning = np.array([a.effective_frequency - band1 for a in atoms])
        self.max_rate = max(max(a.drive_frequency for a in atoms), float(np.abs(self.detuning).max()))

    @classmethod
    def from_couplings(cls, g, detuning, drive_frequency: float = 0.0) -> "Interaction":
        """Interaction for explicit mode sets (e.g. model continua).

        ``g`` and ``detuning`` have shape (n_atoms, n_modes); atoms carry no
        schedule or frequency offset.
        """
        self = cls.__new__(cls)
        self.bs = None
        self.g = np.atleast_2d(np.asarray(g, dtype=complex))
        self.detuning = np.broadcast_to(np.atleast_2d(np.asarray(detuning, dtype=float)), self.g.shape).copy()
        self.atoms = [_StaticAtom() for _ in range(self.g.shape[0])]
        self.max_rate = max(drive_frequency, float(np.abs(self.detuning).max()))
        return self

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def n_modes(self) -> int:
        return self.g.shape[1]

    def weighted_couplings(self, t: float) -> np.ndarray:
        """g_k exp(i D_k t) times the schedule, one row per atom."""
        s = np.array([a.scale(t) for a in self.atoms])
        return (s[:, None] * self.g) * np.exp(1j * self.detuning * t)

    def apply(self, t: float, atoms: np.ndarray, modes: np.ndarray):
        """Time derivatives (d atoms/dt, d modes/dt) at time t."""
        gw = self.weighted_couplings(t)
        return self._apply(gw, t, atoms, modes)

    def _apply(self, gw, t, atoms, modes):
        da = -1j * (gw @ modes)
        off = np.array([a.offset(t) for a in self.atoms])
        if np.any(off):
            da = da - 1j * off * atoms
        dm = -1j * (np.conj(gw).T @ atoms)
        return da, dm


def assemble_interaction(bs: BandStructure, atoms: Sequence[AtomSpec]) -> Interaction:
    """Build the interaction-picture generator for ``atoms`` on band 1."""
    return Interaction(bs, atoms)


def default_time_step(inter: Interaction) -> float:
    """1/(50 f_max) with f_max the fastest rotation in the problem."""
    return 2 * np.pi / inter.max_rate / 50


def evolve(inter: Interaction, state: SingleExcitationState, t1: float, dt: Optional[float] = None,
           sample_every: float = 0.5e-9, snapshot_every: Optional[float] = None,
           stop: Optional[Callable[[SingleExcitationState], bool]] = None,
           drift_tol: float = 1e-4) -> Trajectory:
    """Integrate from ``state.t`` to ``t1`` with RK4.

    Phase factors exp(i D_k t) are advanced by multiplication with a fixed
    half-step factor and refreshed exactly every few hundred steps.
    ``stop(state)`` is checked at sample times and ends the run early.
    """
    t0 = state.t
    if t1 < t0:
        raise ValueError("t1 must not precede the state time")
    dt_max = default_time_step(inter)
    dt = dt_max if dt is None else dt
    if dt > dt_max * (1 + 1e-12):
        raise ValueError(f"dt={dt:.3e} exceeds the stability rule dt <= {dt_max:.3e}")
    n_steps = int(np.ceil((t1 - t0) / dt - 1e-9)) if t1 > t0 else 0
    if n_steps:
        dt = (t1 - t0) / n_steps
    sample_stride = max(1, int(round(sample_every / dt)))
    snap_stride = None if snapshot_every is None else max(1, int(round(snapshot_every / dt)))

    a = state.atoms.astype(complex).copy()
    m = state.modes.astype(complex).copy()
    n0 = state.norm
    g = inter.g
    half = np.exp(0.5j * inter.detuning * dt)
    times, pops, snaps = [t0], [np.abs(a) ** 2], []
    if snap_stride:
        snaps.append((t0, m.copy()))

    def scaled(t, ph):
        s = np.array([at.scale(t) for at in inter.atoms])
        return (s[:, None] * g) * ph

    t = t0
    ph = np.exp(1j * inter.detuning * t)
    step = 0
    for step in range(1, n_steps + 1):
        ph_mid = ph * half
        ph_end = ph_mid * half
        g0, gm, g1 = scaled(t, ph), scaled(t + 0.5 * dt, ph_mid), scaled(t + dt, ph_end)
        k1a, k1m = inter._apply(g0, t, a, m)
        k2a, k2m = inter._apply(gm, t + 0.5 * dt, a + 0.5 * dt * k1a, m + 0.5 * dt * k1m)
        k3a, k3m = inter._apply(gm, t + 0.5 * dt, a + 0.5 * dt * k2a, m + 0.5 * dt * k2m)
        k4a, k4m = inter._apply(g1, t + dt, a + dt * k3a, m + dt * k3m)
        a = a + dt / 6 * (k1a + 2 * k2a + 2 * k3a + k4a)
        m = m + dt / 6 * (k1m + 2 * k2m + 2 * k3m + k4m)
        t = t0 + step * dt
        ph = np.exp(1j * inter.detuning * t) if step % 256 == 0 else ph_end
        if step % sample_stride == 0 or step == n_steps:
            norm = float(np.sum(np.abs(a) ** 2) + np.sum(np.abs(m) ** 2))
            if abs(norm - n0) > drift_tol:
                raise NormDriftError(f"norm drift {abs(norm - n0):.2e} at t={t:.3e}s; reduce dt (now {dt:.3e}s)")
            times.append(t)
            pops.append(np.abs(a) ** 2)
            if stop is not None and stop(SingleExcitationState(a, m, t)):
                break
        if snap_stride and step % snap_stride == 0:
            snaps.append((t, m.copy()))
    final = SingleExcitationState(a, m, t)
    return Trajectory(np.array(times), np.array(pops), final, abs(final.norm - n0), snaps, step)


def _schrodinger_modes(bs: BandStructure, modes: np.ndarray, t: float, omega_ref: float) -> np.ndarray:
    """Mode amplitudes with the interaction-picture phase exp(i D_k t) restored."""
    return modes * np.exp(1j * (omega_ref - bs.frequencies[:, 0]) * t)


def _field_weights(bs: BandStructure, modes, t, omega_ref):
    w = bs.frequencies[:, 0]
    amp = np.sqrt(hbar * np.maximum(w, 0.0) / (2 * bs.length))
    return _schrodinger_modes(bs, modes, t, omega_ref) * amp


def field_profile(bs: BandStructure, state: SingleExcitationState, x, omega_ref: float, chunk: int = 256) -> np.ndarray:
    """psi(x) = sum_k c_k sqrt(hbar w_k / 2L) exp(ikx) u_k(x) at arbitrary points.

    ``omega_ref`` is the effective atomic frequency defining the rotating
    frame.  Cost is O(N * len(x)); use ``field_on_lattice`` for whole-ring maps.
    """
    x = np.asarray(x, dtype=float)
    half = bs.length / 2
    if np.any(x < -half - 1e-12) or np.any(x > half + 1e-12):
        raise ValueError("x must lie in [-L/2, L/2]")
    wts = _field_weights(bs, state.modes, state.t, omega_ref)
    flat = x.ravel()
    out = np.empty(flat.size, dtype=complex)
    for s in range(0, flat.size, chunk):
        xs = flat[s:s + chunk]
        u = bs.bloch_amplitude(xs, band=0)
        out[s:s + chunk] = (wts[:, None] * np.exp(1j * np.outer(bs.k_grid, xs)) * u).sum(axis=0)
    return out.reshape(x.shape)


def field_on_lattice(bs: BandStructure, modes: np.ndarray, t: float, omega_ref: float, samples_per_cell: int = 8):
    """Field on the whole ring via FFTs; returns (x, psi) with x in [-L/2, L/2).

    On x = l lambda_m + s the factor exp(i k_j x) factorizes into an
    N-point DFT over j times a per-offset phase, one FFT per plane-wave order.
    """
    n = bs.n_modes
    lam = bs.params.cell_length
    km = bs.params.k_m
    mo = bs.params.fourier_order
    orders = np.arange(-mo, mo + 1)
    wts = _field_weights(bs, modes, t, omega_ref)
    j = np.arange(n) - (n // 2 - 1)
    l = np.arange(n)
    cells = np.where(l < n // 2, l, l - n)
    psi = np.empty((n, samples_per_cell), dtype=complex)
    a = wts[:, None] * bs.coeffs[:, 0, :]
    shift = np.exp(2j * np.pi * np.outer(j[0], l) / n).ravel()
    for si in range(samples_per_cell):
        s = lam * si / samples_per_cell
        b = a * np.exp(1j * bs.k_grid * s)[:, None]
        # sum_j b_j exp(2 pi i j l / N) with j starting at j[0]
        tr = np.fft.ifft(b, axis=0) * n * shift[:, None]
        psi[:, si] = tr @ np.exp(1j * km * s * orders)
    x = (cells[:, None] * lam + lam * np.arange(samples_per_cell)[None, :] / samples_per_cell)
    order = np.argsort(x.ravel(), kind="stable")
    return x.ravel()[order], psi.ravel()[order]


def directional_flux_and_beta(bs: BandStructure, state: SingleExcitationState, atom_position: float, omega_ref: float,
                              guard: float = 0.05, samples_per_cell: int = 8, leak_tol: float = 1e-3):
    """Integrated intensity right and left of the atom and the chiral factors.

    The ring is cut at +-L/2; the outer ``guard`` fraction of L is excluded,
    and any appreciable intensity inside it raises WindowingError.
    """
    x, psi = field_on_lattice(bs, state.modes, state.t, omega_ref, samples_per_cell)
    inten = np.abs(psi) ** 2
    half = bs.length / 2
    edge = half * (1 - 2 * guard)
    total = np.trapezoid(inten, x)
    outer = np.abs(x) > edge
    if total > 0 and np.trapezoid(np.where(outer, inten, 0.0), x) > leak_tol * total:
        raise WindowingError("emitted field reached the boundary guard band")
    right = (x >= atom_position) & ~outer
    left = (x <= atom_position) & ~outer
    phi_r = abs(np.trapezoid(inten[right], x[right]))
    phi_l = abs(np.trapezoid(inten[left], x[left]))
    tot = phi_r + phi_l
    if tot == 0:
        return 0.0, 0.0, 0.5, 0.5
    beta_p = phi_r / tot
    return phi_r, phi_l, beta_p, 1.0 - beta_p


def momentum_beta(bs: BandStructure, state: SingleExcitationState) -> float:
    """Fraction of the field excitation in right-moving (k > 0) modes."""
    p = np.abs(state.modes) ** 2
    tot = p.sum()
    return float(p[bs.k_grid > 0].sum() / tot) if tot > 0 else 0.5


def fit_decay_rate(times, populations, window=(0.1, 0.9), monotone_tol: float = 1e-3) -> float:
    """Population decay rate from a least-squares fit of ln P(t).

    Only samples with P in ``window`` are used; the trace must fall
    monotonically there (up to ``monotone_tol``), otherwise
    NonExponentialError is raised.
    """
    t = np.asarray(times, dtype=float)
    p = np.asarray(populations, dtype=float)
    sel = (p >= window[0]) & (p <= window[1])
    if sel.sum() < 3:
        raise NonExponentialError("fewer than three samples inside the fit window")
    idx = np.flatnonzero(sel)
    seg = p[idx[0]:idx[-1] + 1]
    if np.any(np.diff(seg) > monotone_tol):
        raise NonExponentialError("population is not monotone inside the fit window")
    slope, _ = np.polyfit(t[sel], np.log(p[sel]), 1)
    return float(-slope)
