"""Bloch bands of a transmission line with square-wave modulated inductance.

The node flux obeys ``c_g d2phi/dt2 = d/dx[(1/l(x)) dphi/dx]`` with
``1/l(x) = (1/l_0)(1 + delta_alpha * sgn cos(k_m x))``.  Expanding the Bloch
function ``u_k(x) = sum_n c_n exp(i n k_m x)`` gives the Hermitian eigenproblem

    c_g w^2 c_n = sum_m eta_{n-m} (k + n k_m)(k + m k_m) c_m

which is truncated to ``n, m in [-M, M]``.  Because 1/l(x) jumps while the
current (1/l) dphi/dx stays continuous, the truncated Toeplitz matrix of
eta converges only as 1/M.  The default ``"inverse"`` factorization replaces
it by the inverse of the truncated Toeplitz matrix of l(x) itself, which
has the same limit and converges orders of magnitude faster.  The direct
``"laurent"`` form is kept for comparison.

Frequencies are angular (rad/s) throughout; wavenumbers are in rad/m.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "PcwParams",
    "BandStructure",
    "BlochMode",
    "BlochSolverError",
    "NoResonantMode",
    "inverse_inductance_fourier",
    "inductance_fourier",
    "bloch_matrix",
    "solve_bloch",
    "bloch_group_velocity",
    "build_band_structure",
    "group_velocity",
    "resonant_mode",
    "zone_edge_gap",
    "calibrate_period",
]


class BlochSolverError(RuntimeError):
    """Raised when the plane-wave eigenproblem cannot be solved at a k point."""


class NoResonantMode(ValueError):
    """Raised when a frequency has no propagating band-1 mode."""


@dataclass(frozen=True)
class PcwParams:
    """Waveguide constants (SI units).

    ``fourier_order`` is the plane-wave truncation M; orders n in [-M, M]
    are kept.
    """

    capacitance_per_length: float = 2e-10
    inductance_per_length: float = 5e-6
    modulation_depth: float = 0.3
    cell_length: float = 3.875935913724168e-3
    fourier_order: int = 15
    factorization: str = "inverse"

    def __post_init__(self):
        if self.capacitance_per_length <= 0:
            raise ValueError("capacitance_per_length must be positive")
        if self.inductance_per_length <= 0:
            raise ValueError("inductance_per_length must be positive")
        if not 0 <= self.modulation_depth < 1:
            raise ValueError("modulation_depth must lie in [0, 1)")
        if self.cell_length <= 0:
            raise ValueError("cell_length must be positive")
        if self.fourier_order < 1:
            raise ValueError("fourier_order must be >= 1")
        if self.factorization not in ("inverse", "laurent"):
            raise ValueError("factorization must be 'inverse' or 'laurent'")

    @property
    def k_m(self) -> float:
        return 2 * np.pi / self.cell_length

    @property
    def bare_velocity(self) -> float:
        """Phase velocity of the unmodulated line, 1/sqrt(l_0 c_g)."""
        return 1.0 / np.sqrt(self.inductance_per_length * self.capacitance_per_length)

    def with_cell_length(self, cell_length: float) -> "PcwParams":
        return replace(self, cell_length=cell_length)


def inverse_inductance_fourier(params: PcwParams) -> np.ndarray:
    """Complex-exponential Fourier coefficients of 1/l(x).

    Returns ``eta`` of length ``4M + 1`` with ``eta[j]`` holding the order
    ``n = j - 2M``, so that ``1/l(x) = sum_n eta_n exp(i n k_m x)``.

    With ``sgn cos(t) = (4/pi) sum_{odd n>0} (-1)^((n-1)/2) cos(n t) / n``
    each cosine splits evenly over +n and -n, so for odd n

        eta_{+-n} = (delta_alpha / l_0) (2/pi) (-1)^((|n|-1)/2) / |n|

    and even orders other than zero vanish.
    """
    m2 = 2 * params.fourier_order
    n = np.arange(-m2, m2 + 1)
    eta = np.zeros(n.size)
    eta[m2] = 1.0 / params.inductance_per_length
    odd = (n % 2) == 1
    na = np.abs(n[odd])
    sign = np.where(((na - 1) // 2) % 2 == 0, 1.0, -1.0)
    eta[odd] = (params.modulation_depth / params.inductance_per_length) * (2 / np.pi) * sign / na
    return eta


def inductance_fourier(params: PcwParams) -> np.ndarray:
    """Fourier coefficients of l(x) itself, same layout as the eta series.

    l(x) takes the values l_0/(1 + delta_alpha) and l_0/(1 - delta_alpha), so
    it is again a square wave about its mean.
    """
    m2 = 2 * params.fourier_order
    l0, da = params.inductance_per_length, params.modulation_depth
    n = np.arange(-m2, m2 + 1)
    coef = np.zeros(n.size)
    coef[m2] = 0.5 * l0 * (1 / (1 + da) + 1 / (1 - da))
    swing = 0.5 * l0 * (1 / (1 + da) - 1 / (1 - da))
    odd = (n % 2) == 1
    na = np.abs(n[odd])
    sign = np.where(((na - 1) // 2) % 2 == 0, 1.0, -1.0)
    coef[odd] = swing * (2 / np.pi) * sign / na
    return coef


@lru_cache(maxsize=32)
def _stiffness(params: PcwParams) -> np.ndarray:
    """Truncated operator standing in for eta_{n-m}, shape (2M+1, 2M+1)."""
    m = params.fourier_order
    orders = np.arange(-m, m + 1)
    diff = orders[:, None] - orders[None, :] + 2 * m
    if params.factorization == "laurent":
        return inverse_inductance_fourier(params)[diff]
    return np.linalg.inv(inductance_fourier(params)[diff])


def bloch_matrix(k: float, params: PcwParams) -> np.ndarray:
    """Real symmetric matrix whose eigenvalues are w^2 at wavenumber ``k``."""
    m = params.fourier_order
    q = k + np.arange(-m, m + 1) * params.k_m
    h = _stiffness(params) * np.outer(q, q) / params.capacitance_per_length
    return 0.5 * (h + h.T)


def _fix_phase(vecs: np.ndarray) -> np.ndarray:
    # largest-magnitude coefficient made real positive (columns are modes)
    idx = np.argmax(np.abs(vecs), axis=0)
    pivot = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(pivot) / pivot)[None, :]


def _enforce_zero_k_symmetry(vecs: np.ndarray) -> np.ndarray:
    # at k = 0 modes are even or odd under n -> -n; odd ones get a factor i
    # so that c_n = conj(c_{-n}) holds there too
    out = vecs.astype(complex)
    for j in range(vecs.shape[1]):
        v = vecs[:, j]
        if np.linalg.norm(v - v[::-1]) > np.linalg.norm(v + v[::-1]):
            out[:, j] = 1j * v
    return out


def solve_bloch(k: float, params: PcwParams, n_bands: int = 2):
    """Lowest ``n_bands`` Bloch solutions at wavenumber ``k``.

    Returns ``(omegas, coeffs)`` with ``omegas`` of shape ``(n_bands,)`` in
    rad/s and ``coeffs`` of shape ``(n_bands, 2M + 1)``, each row normalized
    to unit 2-norm with its largest coefficient real positive.
    """
    h = bloch_matrix(k, params)
    try:
        w2, vecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(h)
        raise BlochSolverError(f"eigensolver failed at k={k!r} (cond={cond:.3e})") from exc
    w2 = w2[:n_bands]
    vecs = vecs[:, :n_bands]
    if np.any(w2 < -1e-9 * abs(h).max()):
        raise BlochSolverError(f"negative w^2 at k={k!r}: {w2}")
    omegas = np.sqrt(np.clip(w2, 0.0, None))
    vecs = _fix_phase(vecs)
    if k == 0.0:
        vecs = _enforce_zero_k_symmetry(vecs)
    return omegas, np.ascontiguousarray(vecs.T, dtype=complex)


def bloch_group_velocity(k: float, params: PcwParams, band: int = 0) -> float:
    """Exact dw/dk from the Hellmann-Feynman theorem, w dw/dk = c^+ (dH/dk) c / 2."""
    omegas, coeffs = solve_bloch(k, params, band + 1)
    m = params.fourier_order
    q = k + np.arange(-m, m + 1) * params.k_m
    dh = _stiffness(params) * (q[:, None] + q[None, :]) / params.capacitance_per_length
    c = coeffs[band]
    dw2 = np.real(np.conj(c) @ dh @ c)
    w = omegas[band]
    if w == 0.0:
        return params.bare_velocity
    return dw2 / (2 * w)


@dataclass(frozen=True)
class BlochMode:
    band: int
    k: float
    omega: float
    coeffs: np.ndarray
    k_m: float

    def u(self, x) -> np.ndarray:
        """Cell-periodic amplitude u_lk(x)."""
        x = np.asarray(x, dtype=float)
        m = (self.coeffs.size - 1) // 2
        orders = np.arange(-m, m + 1)
        return np.exp(1j * self.k_m * np.multiply.outer(x, orders)) @ self.coeffs


@dataclass(frozen=True)
class BandStructure:
    """Bloch bands sampled on a uniform grid over (-k_m/2, k_m/2].

    ``frequencies[j, l]`` is w_{l+1}(k_j) and ``coeffs[j, l, :]`` the
    plane-wave amplitudes c_n for n in [-M, M].  Instances are treated as
    read-only and can be shared between workers.
    """

    params: PcwParams
    k_grid: np.ndarray
    frequencies: np.ndarray
    coeffs: np.ndarray
    gap_edges: tuple = field(default=(0.0, 0.0))

    @property
    def n_modes(self) -> int:
        return self.k_grid.size

    @property
    def length(self) -> float:
        """Real-space length equivalent to the k discretization."""
        return self.n_modes * self.params.cell_length

    @property
    def dk(self) -> float:
        return 2 * np.pi / self.length

    @property
    def gap_width(self) -> float:
        return self.gap_edges[1] - self.gap_edges[0]

    @property
    def band1_top(self) -> float:
        return self.gap_edges[0]

    def index_of(self, k: float) -> int:
        j = int(round(k / self.dk)) + self.n_modes // 2 - 1
        if not 0 <= j < self.n_modes or not np.isclose(self.k_grid[j], k, rtol=0, atol=1e-9 * self.dk):
            raise KeyError(f"k={k!r} is not on the grid")
        return j

    def mode(self, band: int, j: int) -> BlochMode:
        return BlochMode(band, self.k_grid[j], self.frequencies[j, band], self.coeffs[j, band], self.params.k_m)

    def bloch_amplitude(self, x, band: int = 0) -> np.ndarray:
        """u_{band,k}(x) for every grid k; shape ``(n_modes,) + shape(x)``."""
        x = np.asarray(x, dtype=float)
        m = self.params.fourier_order
        orders = np.arange(-m, m + 1)
        phase = np.exp(1j * self.params.k_m * np.multiply.outer(x, orders))
        out = self.coeffs[:, band, :] @ phase.reshape(-1, orders.size).T
        return out.reshape((self.n_modes,) + x.shape)


def build_band_structure(params: PcwParams, n_modes: int = 4096, n_bands: int = 2) -> BandStructure:
    """Sample ``n_bands`` bands on ``n_modes`` uniformly spaced k points.

    Only k >= 0 is solved; negative-k data are built from the time-reversal
    identity c_n(-k) = conj(c_{-n}(k)), so the symmetry holds exactly.
    """
    if n_modes < 2 or n_modes % 2:
        raise ValueError("n_modes must be even and >= 2")
    half = n_modes // 2
    dk = params.k_m / n_modes
    k_grid = np.arange(-half + 1, half + 1) * dk
    n_pw = 2 * params.fourier_order + 1
    freqs = np.empty((n_modes, n_bands))
    coeffs = np.empty((n_modes, n_bands, n_pw), dtype=complex)
    zero = half - 1
    for j in range(zero, n_modes):
        try:
            w, c = solve_bloch(k_grid[j], params, n_bands)
        except BlochSolverError as exc:
            raise BlochSolverError(f"band structure failed at grid index {j}: {exc}") from exc
        freqs[j] = w
        coeffs[j] = c
    # k_{zero - i} = -k_{zero + i}
    for i in range(1, half):
        freqs[zero - i] = freqs[zero + i]
        coeffs[zero - i] = np.conj(coeffs[zero + i, :, ::-1])
    gap = (float(freqs[:, 0].max()), float(freqs[:, 1].min())) if n_bands >= 2 else (float(freqs[:, 0].max()), np.nan)
    return BandStructure(params, k_grid, freqs, coeffs, gap)


def group_velocity(bs: BandStructure, band: int, k: float) -> float:
    """dw/dk on the grid: centered differences, one-sided at the zone edge."""
    kg = bs.k_grid
    if k < kg[0] or k > kg[-1]:
        raise ValueError(f"k={k!r} outside grid range [{kg[0]}, {kg[-1]}]")
    v = np.gradient(bs.frequencies[:, band], kg)
    return float(np.interp(k, kg, v))


def resonant_mode(bs: BandStructure, omega: float, rtol: float = 1e-10):
    """Wavenumbers +-k_r with w_1(k_r) = omega, refined off-grid.

    Raises NoResonantMode if omega lies outside band 1.
    """
    half = bs.n_modes // 2
    kpos = bs.k_grid[half - 1:]
    wpos = bs.frequencies[half - 1:, 0]
    if not wpos[0] < omega <= wpos[-1]:
        raise NoResonantMode(f"omega={omega!r} outside band 1 ({wpos[0]}, {wpos[-1]}]")
    hit = np.flatnonzero(wpos == omega)
    if hit.size:
        kr = float(kpos[hit[0]])
        return kr, -kr
    j = int(np.searchsorted(wpos, omega))
    lo, hi = kpos[j - 1], kpos[j]
    params = bs.params
    kr = brentq(lambda k: solve_bloch(k, params, 1)[0][0] - omega, lo, hi, xtol=1e-14 * params.k_m, rtol=rtol)
    return float(kr), -float(kr)


def zone_edge_gap(params: PcwParams):
    """Band-1 top and band-2 bottom, both reached at k = k_m/2."""
    w, _ = solve_bloch(0.5 * params.k_m, params, 2)
    return float(w[0]), float(w[1])


def calibrate_period(params: PcwParams, target_gap: float, bracket=(0.5e-3, 20e-3)) -> float:
    """Cell length whose first gap width equals ``target_gap`` (rad/s)."""
    if target_gap <= 0:
        raise ValueError("target_gap must be positive")

    def mismatch(lam):
        lo, hi = zone_edge_gap(params.with_cell_length(lam))
        return (hi - lo) - target_gap

    a, b = bracket
    fa, fb = mismatch(a), mismatch(b)
    if fa * fb > 0:
        raise ValueError(f"no cell length in {bracket} gives gap {target_gap / 2 / np.pi / 1e9:.4f} GHz")
    return brentq(mismatch, a, b, xtol=1e-15, rtol=1e-13)
