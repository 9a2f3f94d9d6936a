"""Laplace-domain analysis of giant-atom decay near and away from the band edge.

With ``D_k = w_eff - w_1(k)`` the atomic amplitude is
``c_e(s) = 1/(s + Sigma(s))`` with ``Sigma(s) = sum_k |g_k|^2/(s - i D_k)``.

Away from the band edge the rates follow from the linearized dispersion
(population rates ``Gamma_pm = 2 pi |g'_pm|^2 / v_g``).  Near the band top
``w_1 ~ w_top - a q^2`` (``a = -alpha_0 > 0``, q measured from the zone edge)
and the continuum integral over q gives

    Sigma(s) = i pi |g'|^2 / sqrt(a (delta_0 + i s)),

with ``delta_0 = w_eff - w_top``.  The square root has its cut where
``delta_0 + i s`` is negative imaginary, i.e. on the horizontal line
``s = i delta_0 + y`` with ``y < 0``.  Closing the Bromwich contour leaves
the bound pole on the imaginary axis, the decay pole on the second sheet
(when the deformed contour encloses it) and a line integral along the cut.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq

from .coupler import CouplingModel, coupling_gk, renormalized_coupling
from .pcw_band import BandStructure, bloch_group_velocity, resonant_mode

__all__ = [
    "BandEdgeModel",
    "PoleSet",
    "BranchPointError",
    "PoleSearchError",
    "ValidityWarning",
    "markovian_rates",
    "lamb_shifts",
    "fit_band_edge",
    "renormalize",
    "model_band_modes",
    "band_edge_model",
    "sqrt_sheet",
    "band_edge_self_energy",
    "self_energy_derivative",
    "find_poles",
    "branch_cut_amplitude",
    "reconstruct_amplitude",
    "steady_state_population",
    "weights_table",
]


class BranchPointError(ValueError):
    """Raised when the self-energy is evaluated at the branch point."""


class PoleSearchError(RuntimeError):
    """Raised when Newton's method fails to locate the decay pole."""


class ValidityWarning(UserWarning):
    """Issued when a Markovian estimate is used too close to the band edge."""


def markovian_rates(g_plus: float, g_minus: float, v_g: float, v_min: float = 1e5):
    """Directional population decay rates (Gamma_+, Gamma_-, Gamma).

    ``g_plus``/``g_minus`` are |g'_{+-k_r}| in rad s^-1 m^1/2 and ``v_g`` in m/s.
    """
    if v_g <= 0:
        raise ValueError("group velocity must be positive")
    if v_g < v_min:
        warnings.warn(f"v_g={v_g:.3g} m/s: too close to the band edge for a Markovian rate", ValidityWarning)
    gp = 2 * np.pi * g_plus ** 2 / v_g
    gm = 2 * np.pi * g_minus ** 2 / v_g
    return gp, gm, gp + gm


def _branch_pv(k, w, f, omega, v_r):
    """PV of int f(k)/(omega - w(k)) dk over a grid on which w is monotone.

    The pole at k_r is removed by subtracting f(k_r)/(v_r (k_r - k)),
    whose PV integral is a logarithm.
    """
    kr = float(np.interp(omega, w, k)) if w[-1] > w[0] else float(np.interp(omega, w[::-1], k[::-1]))
    fr = float(np.interp(kr, k, f))
    slope = v_r if w[-1] > w[0] else -v_r
    with np.errstate(divide="ignore", invalid="ignore"):
        h = f / (omega - w) - fr / (slope * (kr - k))
    bad = ~np.isfinite(h) | (np.abs(k - kr) < 1e-9 * (k[-1] - k[0]))
    if bad.any():
        h[bad] = np.interp(k[bad], k[~bad], h[~bad])
    return float(np.trapezoid(h, k) + fr / slope * np.log((kr - k[0]) / (k[-1] - kr)))


def lamb_shifts(bs: BandStructure, cm: CouplingModel, omega_eff: float):
    """Lamb shifts (Delta_+, Delta_-) from right- and left-moving modes, rad/s.

    ``Delta = PV sum_k |g_k|^2/(w_eff - w_k)`` over the finite zone; a positive
    value raises the atomic frequency.
    """
    k_r, _ = resonant_mode(bs, omega_eff)
    v_r = bloch_group_velocity(k_r, bs.params)
    dens = np.abs(coupling_gk(bs, cm)) ** 2 * bs.length / (2 * np.pi)
    w = bs.frequencies[:, 0]
    k = bs.k_grid
    out = []
    for side in (k >= 0, k <= 0):
        out.append(_branch_pv(k[side], w[side], dens[side], omega_eff, v_r))
    return out[0], out[1]


@dataclass(frozen=True)
class BandEdgeModel:
    """Quadratic band-edge continuum: w_1 = w_top - curvature q^2.

    ``coupling`` is |g'_{k_0}| (rad s^-1 m^1/2), ``curvature`` = -alpha_0 > 0
    (m^2 rad/s), ``delta0`` = w_eff - w_top (rad/s).  ``lamb_offset`` is the
    part of ``delta0`` produced by off-resonant modes outside the quadratic
    region (see ``renormalize``); it only rotates the phase of c_e(t).
    """

    coupling: float
    curvature: float
    delta0: float
    lamb_offset: float = 0.0

    def __post_init__(self):
        if self.curvature <= 0:
            raise ValueError("curvature (-alpha_0) must be positive: the band top is a maximum")
        if self.coupling < 0:
            raise ValueError("coupling must be non-negative")

    @property
    def alpha0(self) -> float:
        return -self.curvature

    @property
    def bare_delta0(self) -> float:
        return self.delta0 - self.lamb_offset

    @property
    def strength(self) -> float:
        """pi |g'|^2 / sqrt(a), the prefactor of the self-energy."""
        return np.pi * self.coupling ** 2 / np.sqrt(self.curvature)


def fit_band_edge(bs: BandStructure, n_points: int = 9):
    """(w_top, alpha_0) from a quadratic fit on grid points nearest the zone edge.

    Points on both sides of k_m/2 are folded onto q = |k| - k_m/2.
    """
    km = bs.params.k_m
    q = np.abs(bs.k_grid) - 0.5 * km
    idx = np.argsort(np.abs(q))[:n_points]
    c2, c1, c0 = np.polyfit(q[idx], bs.frequencies[idx, 0], 2)
    return float(c0), float(c2)


def renormalize(model: BandEdgeModel, g2, detunings, iterations: int = 4) -> BandEdgeModel:
    """Absorb the non-quadratic remainder of a discrete self-energy into delta_0.

    Below the continuum (s = i y, y < delta_0) both the mode sum
    ``sum |g_k|^2/(D_k - y)`` and the quadratic term ``S/sqrt(delta_0 - y)``
    are real; their difference eps varies slowly on the scale of the
    band-edge dynamics, so it acts as a constant Lamb shift and the model
    with ``delta_0 + eps`` reproduces the discrete spectrum near the edge.
    eps is evaluated at the bound-pole position, iterated to consistency.
    """
    g2 = np.asarray(g2, dtype=float)
    dk = np.asarray(detunings, dtype=float)
    bare = model.bare_delta0
    S = model.strength
    eps = 0.0
    for _ in range(iterations):
        trial = replace(model, delta0=bare + eps, lamb_offset=eps)
        y = _bound_pole(trial) - eps
        if y >= bare:
            y = bare - max(S ** (2 / 3), 1e-300)
        eps = float(np.sum(g2 / (dk - y)) - S / np.sqrt(bare - y))
    return replace(model, delta0=bare + eps, lamb_offset=eps)


def band_edge_model(bs: BandStructure, cm: CouplingModel, omega_eff: float, n_points: int = 9,
                    renormalized: bool = True) -> BandEdgeModel:
    """Band-edge model with alpha_0 fitted from ``bs`` and g' taken at k_0 = k_m/2.

    With ``renormalized`` the off-resonant remainder of the full band-1 mode
    sum is folded into delta_0 (see ``renormalize``).
    """
    top, alpha0 = fit_band_edge(bs, n_points)
    g = renormalized_coupling(bs.params, cm, 0.5 * bs.params.k_m)
    model = BandEdgeModel(g, -alpha0, omega_eff - top)
    if not renormalized:
        return model
    g2 = np.abs(coupling_gk(bs, cm)) ** 2
    return renormalize(model, g2, omega_eff - bs.frequencies[:, 0])


def model_band_modes(model: BandEdgeModel, n_modes: int, q_max: float):
    """Discretized quadratic continuum matching ``model`` (bare detuning).

    Returns (g_j, D_j) for q_j uniform on [-q_max, q_max) with
    |g_j|^2 = |g'|^2 dq and D_j = delta_0 + a q_j^2.
    """
    dq = 2 * q_max / n_modes
    q = -q_max + dq * np.arange(n_modes)
    g = np.full(n_modes, model.coupling * np.sqrt(dq), dtype=complex)
    return g, model.bare_delta0 + model.curvature * q * q


def sqrt_sheet(w, sheet: int = 1):
    """sqrt(w) with the cut on the negative imaginary axis; sheet 2 is its negative."""
    r = np.exp(0.25j * np.pi) * np.sqrt(-1j * np.asarray(w, dtype=complex))
    return r if sheet == 1 else -r


def band_edge_self_energy(s, model: BandEdgeModel, sheet: int = 1):
    """Sigma(s) on the requested Riemann sheet."""
    w = model.delta0 + 1j * np.asarray(s, dtype=complex)
    if np.any(np.abs(w) == 0):
        raise BranchPointError("self-energy evaluated at the branch point s = i delta_0")
    return 1j * model.strength / sqrt_sheet(w, sheet)


def self_energy_derivative(s, model: BandEdgeModel, sheet: int = 1):
    w = model.delta0 + 1j * np.asarray(s, dtype=complex)
    return 0.5 * model.strength / sqrt_sheet(w, sheet) ** 3


@dataclass(frozen=True)
class PoleSet:
    """Bound pole s_0, decay pole s_1 (second sheet), residues and weights.

    ``decay_enclosed`` tells whether the deformed contour picks up s_1.
    """

    s0: complex
    s1: complex
    res0: complex
    res1: complex
    decay_enclosed: bool

    @property
    def raw_weights(self):
        r1 = self.res1 if self.decay_enclosed else 0.0
        return abs(self.res0), abs(r1), abs(1 - self.res0 - r1)

    @property
    def weights(self):
        w = np.array(self.raw_weights)
        return tuple(w / w.sum())

    def to_dict(self) -> dict:
        c = lambda z: [float(np.real(z)), float(np.imag(z))]
        return {"s0": c(self.s0), "s1": c(self.s1), "res0": c(self.res0), "res1": c(self.res1),
                "decay_enclosed": self.decay_enclosed, "weights": [float(x) for x in self.weights]}


def _bound_pole(model: BandEdgeModel) -> float:
    """Im s_0 for the bound state.

    With r = sqrt(delta_0 - y) > 0 the pole condition y + S/r = 0 becomes
    r^3 - delta_0 r - S = 0, which has exactly one positive root.
    """
    S, d = model.strength, model.delta0
    if S == 0:
        return min(0.0, d)
    g = lambda r: r ** 3 - d * r - S
    hi = max(1.0, 2 * np.sqrt(abs(d)), 2 * S ** (1 / 3))
    while g(hi) < 0:
        hi *= 2
    r = brentq(g, 0.0, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
    return float(d - r * r)


def _principal_sheet2(s, model):
    """Sigma continued through the principal-root cut (root negated)."""
    w = model.delta0 + 1j * complex(s)
    return 1j * model.strength / (-np.sqrt(w))


def _decay_pole(model: BandEdgeModel, seed: complex, max_iter: int = 100) -> complex:
    """Damped complex Newton for s + Sigma_II(s) = 0 (step halving on residual increase)."""
    S = model.strength
    s = complex(seed)
    F = lambda z: z + _principal_sheet2(z, model)
    dF = lambda z: 1 + 0.5 * S / (-np.sqrt(model.delta0 + 1j * z)) ** 3
    fs = F(s)
    path = [s]
    for _ in range(max_iter):
        step = fs / dF(s)
        lam = 1.0
        while True:
            trial = s - lam * step
            ft = F(trial)
            if abs(ft) < abs(fs) or lam < 1e-6:
                break
            lam /= 2
        s, fs = trial, ft
        path.append(s)
        if abs(lam * step) <= 1e-14 * max(1.0, abs(s)):
            return s
    raise PoleSearchError(f"Newton did not converge; last iterates {path[-3:]}")


def find_poles(model: BandEdgeModel) -> PoleSet:
    """Bound and decay poles of 1/(s + Sigma(s)) with their residues.

    In terms of sigma = sqrt(delta_0 + i s) the residue is 1/(1 + S/(2 sigma^3)).
    The decay pole is searched on the second sheet of the principal root; it
    contributes to c_e(t) only if that root value coincides with the branch
    used along the horizontal cut, i.e. if the deformed contour encloses it.
    """
    S, d = model.strength, model.delta0
    y0 = _bound_pole(model)
    s0 = 1j * y0
    res0 = 1.0 / (1.0 + self_energy_derivative(s0, model, 1)) if S > 0 else 1.0
    scale = max(S ** (2 / 3), 1e-300)
    if d < 0 and S / np.sqrt(-d) < 0.3 * abs(d):
        seed = complex(-S / np.sqrt(-d), 0.0)
    else:
        seed = scale * np.exp(-0.75j * np.pi) + 1j * d
    if S == 0:
        return PoleSet(complex(s0), complex(1j * d), complex(res0), 0j, False)
    try:
        s1 = _decay_pole(model, seed)
    except PoleSearchError:
        s1 = _decay_pole(model, scale * (-1 + 0.2j) + 1j * d)
    w1 = d + 1j * s1
    sigma1 = -np.sqrt(w1)
    res1 = 1.0 / (1.0 + 0.5 * S / sigma1 ** 3)
    enclosed = bool(abs(sqrt_sheet(w1, 1) - sigma1) < 1e-8 * abs(sigma1) and s1.real < 0)
    return PoleSet(complex(s0), complex(s1), complex(res0), complex(res1), enclosed)


def _cut_integrand(u, t, model: BandEdgeModel):
    """2u [f_up - f_down](y = -u^2) along the cut, f = e^{st}/(s + Sigma)."""
    S, d = model.strength, model.delta0
    s = -u * u + 1j * d
    up = 1j * S / (u * np.exp(0.75j * np.pi))
    dn = 1j * S / (u * np.exp(-0.25j * np.pi))
    e = np.exp(s * t)
    return 2 * u * (e / (s + up) - e / (s + dn))


def branch_cut_amplitude(t, model: BandEdgeModel, rel_tol: float = 1e-8) -> complex:
    """Contribution of the cut, -(1/2 pi i) int_{-inf}^0 [f_up - f_down] dy."""
    t = float(t)
    if t < 0:
        raise ValueError("t must be non-negative")
    S = model.strength
    scale = max(S ** (2 / 3), abs(model.delta0), 1e-300)
    if S == 0:
        return 0j
    # truncate where the integrand is negligible: exp(-u^2 t) < 1e-12, or the
    # bare 2S/u^4 tail integrates to below 1e-12
    u_decay = np.sqrt(np.log(1e12) / t) if t > 0 else np.inf
    u_tail = (2e12 * S / 3) ** (1 / 3)
    u_max = max(min(u_decay, u_tail), 10 * np.sqrt(scale))
    pts = [np.sqrt(scale)] if np.sqrt(scale) < u_max else None
    # c_e is O(1), so an absolute floor far below 1e-6 keeps quad from chasing zeros
    tol = dict(points=pts, limit=400, epsrel=rel_tol, epsabs=1e-10)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        re, err_re = quad(lambda u: _cut_integrand(u, t, model).real, 0, u_max, **tol)
        im, err_im = quad(lambda u: _cut_integrand(u, t, model).imag, 0, u_max, **tol)
    if max(err_re, err_im) > 1e-6 * max(1.0, abs(re + 1j * im)) * 2 * np.pi:
        raise RuntimeError(f"branch-cut quadrature did not converge at t={t:.3e}")
    return complex(-(re + 1j * im) / (2j * np.pi))


def reconstruct_amplitude(t, model: BandEdgeModel, poles: PoleSet | None = None) -> np.ndarray:
    """c_e(t) = sum of enclosed pole terms + cut contribution.

    The phase exp(-i lamb_offset t) restores the frame of the bare detuning.
    """
    poles = find_poles(model) if poles is None else poles
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = poles.res0 * np.exp(poles.s0 * t)
    if poles.decay_enclosed:
        out = out + poles.res1 * np.exp(poles.s1 * t)
    out = out + np.array([branch_cut_amplitude(tt, model) for tt in t])
    return out * np.exp(-1j * model.lamb_offset * t)


def steady_state_population(model: BandEdgeModel):
    """(|Res(s_0)|^2, found).

    The bound pole always exists for this self-energy; ``found`` is False
    only for a vanishing coupling, where the value 0 is returned.
    """
    if model.strength == 0:
        return 0.0, False
    s0 = 1j * _bound_pole(model)
    res0 = 1.0 / (1.0 + self_energy_derivative(s0, model, 1))
    return float(abs(res0) ** 2), True


def weights_table(coupling: float, curvature: float, delta0_values):
    """Rows (delta_0, w_0, w_1, w_2) for a detuning sweep."""
    rows = []
    for d in np.asarray(delta0_values, dtype=float):
        p = find_poles(BandEdgeModel(coupling, curvature, float(d)))
        rows.append((float(d),) + tuple(float(x) for x in p.weights))
    return rows
