"""SLH networks of two giant atoms and their cascaded master equation.

Operators act on the two-qubit space with basis |ab>, single-qubit order
(e, g), so the flat index is 2*a + b with e = 0.  The single-excitation
plus vacuum sector {|eg>, |ge>, |gg>} is closed under the dynamics and
carries the 3x3 density matrix.

Series product of single-channel triplets (G2 downstream of G1):

    S = S2 S1,  L = L2 + S2 L1,  H = H1 + H2 + Im(L2^dag S2 L1),

with Im(X) = (X - X^dag)/2i.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.integrate import solve_ivp

__all__ = [
    "SlhTriplet",
    "CascadeModel",
    "PositivityError",
    "SIGMA_MINUS",
    "SIGMA_Z",
    "sector",
    "series_product",
    "chain",
    "point_triplets",
    "build_chiral_network",
    "jump_operators",
    "effective_hamiltonian",
    "lindblad_rhs",
    "master_equation_step",
    "integrate_me",
    "dark_state_odes",
    "constant_rate_solution",
]

_SM = np.array([[0, 0], [1, 0]], dtype=complex)  # |g><e| in (e, g) order
_SZ = np.diag([1.0, -1.0]).astype(complex)
_I2 = np.eye(2, dtype=complex)

SIGMA_MINUS = {"a": np.kron(_SM, _I2), "b": np.kron(_I2, _SM)}
SIGMA_Z = {"a": np.kron(_SZ, _I2), "b": np.kron(_I2, _SZ)}
IDENTITY = np.eye(4, dtype=complex)
ZERO = np.zeros((4, 4), dtype=complex)

# |eg>, |ge>, |gg>
SECTOR = np.array([1, 2, 3])


class PositivityError(RuntimeError):
    """Raised when the density matrix loses positivity beyond tolerance."""


def sector(op: np.ndarray) -> np.ndarray:
    """Restriction of a 4x4 operator to the single-excitation + vacuum sector."""
    return op[np.ix_(SECTOR, SECTOR)]


def _im(x: np.ndarray) -> np.ndarray:
    return (x - x.conj().T) / 2j


@dataclass(frozen=True)
class SlhTriplet:
    """Single-channel (S, L, H) triplet with 4x4 operators."""

    S: complex = 1.0
    L: np.ndarray = ZERO
    H: np.ndarray = ZERO

    def __post_init__(self):
        if not np.isclose(abs(self.S), 1.0, atol=1e-12):
            raise ValueError("scattering coefficient must have unit modulus")
        if not np.allclose(self.H, self.H.conj().T, atol=1e-12 * max(1.0, np.abs(self.H).max())):
            raise ValueError("Hamiltonian must be Hermitian")

    @classmethod
    def phase(cls, phi: float) -> "SlhTriplet":
        """Pure propagation element (e^{i phi}, 0, 0)."""
        return cls(np.exp(1j * phi), ZERO, ZERO)


def series_product(downstream: SlhTriplet, upstream: SlhTriplet) -> SlhTriplet:
    """downstream <| upstream."""
    s2, l2, h2 = downstream.S, downstream.L, downstream.H
    s1, l1, h1 = upstream.S, upstream.L, upstream.H
    return SlhTriplet(s2 * s1, l2 + s2 * l1, h1 + h2 + _im(l2.conj().T @ (s2 * l1)))


def chain(*elements: SlhTriplet) -> SlhTriplet:
    """G_n <| ... <| G_1 for elements listed downstream first."""
    out = elements[-1]
    for g in reversed(elements[:-1]):
        out = series_product(g, out)
    return out


@dataclass(frozen=True)
class CascadeModel:
    """Two giant atoms a (upstream) and b on a chiral channel.

    ``gamma_*`` are per-point rates (rad/s), optionally different for the two
    points via ``gamma_*2``; ``phi_*`` the internal propagation phases,
    ``phi_L`` = k_r L_ab, ``phi_c_*`` the modulation phase differences and
    ``omega_*`` the atomic frequencies in the rotating frame.
    """

    gamma_a: float
    gamma_b: float
    phi_a: float
    phi_b: float
    phi_L: float = 0.0
    phi_c_a: float = 0.0
    phi_c_b: float = 0.0
    omega_a: float = 0.0
    omega_b: float = 0.0
    gamma_a2: float | None = None
    gamma_b2: float | None = None

    def __post_init__(self):
        for g in (self.gamma_a, self.gamma_b, self.gamma_a2, self.gamma_b2):
            if g is not None and g < 0:
                raise ValueError("rates must be non-negative")

    @classmethod
    def chiral(cls, rate_a: float, rate_b: float, phi_a: float, phi_b: float, phi_L: float = 0.0, **kw) -> "CascadeModel":
        """Right-chiral model from total rates Gamma_i = 2 gamma_i sin^2(phi_i).

        The modulation phases satisfy phi_i - phi_c_i = pi, which removes the
        left-moving jump operator.
        """
        ga = rate_a / (2 * np.sin(phi_a) ** 2)
        gb = rate_b / (2 * np.sin(phi_b) ** 2)
        return cls(ga, gb, phi_a, phi_b, phi_L, phi_a - np.pi, phi_b - np.pi, **kw)

    def point_rates(self, atom: str):
        g1 = self.gamma_a if atom == "a" else self.gamma_b
        g2 = self.gamma_a2 if atom == "a" else self.gamma_b2
        return g1, (g1 if g2 is None else g2)

    @property
    def rates(self):
        """Total chiral rates (Gamma_a, Gamma_b) = 2 gamma sin^2(phi)."""
        return (2 * self.gamma_a * np.sin(self.phi_a) ** 2, 2 * self.gamma_b * np.sin(self.phi_b) ** 2)

    @property
    def renormalized_frequencies(self):
        """omega_i - sin(2 phi_i) gamma_i / 2 (see module notes on the factor)."""
        return (self.omega_a - 0.5 * np.sin(2 * self.phi_a) * self.gamma_a,
                self.omega_b - 0.5 * np.sin(2 * self.phi_b) * self.gamma_b)


def point_triplets(model: CascadeModel, atom: str):
    """(G_R1, G_R2, G_L1, G_L2) for the two coupling points of one atom."""
    g1, g2 = model.point_rates(atom)
    sm, sz = SIGMA_MINUS[atom], SIGMA_Z[atom]
    omega = model.omega_a if atom == "a" else model.omega_b
    phi_c = model.phi_c_a if atom == "a" else model.phi_c_b
    l1 = np.sqrt(g1 / 2) * sm
    l2 = np.exp(-1j * phi_c) * np.sqrt(g2 / 2) * sm
    return (SlhTriplet(1.0, l1, 0.5 * omega * sz), SlhTriplet(1.0, l2, ZERO),
            SlhTriplet(1.0, l1, ZERO), SlhTriplet(1.0, l2, ZERO))


def build_chiral_network(model: CascadeModel):
    """Right- and left-channel triplets of the two-atom network.

    Right channel, light travelling a1 -> a2 -> b1 -> b2; left channel
    b2 -> b1 -> a2 -> a1, with the propagation phases in between.
    """
    ra1, ra2, la1, la2 = point_triplets(model, "a")
    rb1, rb2, lb1, lb2 = point_triplets(model, "b")
    pa, pb, pl = (SlhTriplet.phase(p) for p in (model.phi_a, model.phi_b, model.phi_L))
    right = chain(rb2, pb, rb1, pl, ra2, pa, ra1)
    left = chain(la1, pa, la2, pl, lb1, pb, lb2)
    return right, left


def jump_operators(model: CascadeModel, keep_delay_phase: bool = True):
    """S_a, S_b with S_i = 2i sin(phi_i) sqrt(gamma_i/2) sigma_-^i.

    ``keep_delay_phase`` keeps the factor exp(i(phi_L + phi_b)) on S_a that the
    no-delay regime drops; populations do not depend on it.
    """
    sa = 2j * np.sin(model.phi_a) * np.sqrt(model.gamma_a / 2) * SIGMA_MINUS["a"]
    sb = 2j * np.sin(model.phi_b) * np.sqrt(model.gamma_b / 2) * SIGMA_MINUS["b"]
    if keep_delay_phase:
        sa = np.exp(1j * (model.phi_L + model.phi_b)) * sa
    return sa, sb


def effective_hamiltonian(model: CascadeModel, keep_delay_phase: bool = False) -> np.ndarray:
    """H_eff = sum w~_i sigma_z^i / 2 - (i/2)(S_a^dag S_a + S_b^dag S_b + 2 S_b^dag S_a).

    w~_i are the renormalized frequencies, which carry the Lamb shifts of the
    right-channel chain.
    """
    sa, sb = jump_operators(model, keep_delay_phase)
    wa, wb = model.renormalized_frequencies
    h = 0.5 * wa * SIGMA_Z["a"] + 0.5 * wb * SIGMA_Z["b"]
    return h - 0.5j * (sa.conj().T @ sa + sb.conj().T @ sb + 2 * sb.conj().T @ sa)


def lindblad_rhs(rho: np.ndarray, h_eff: np.ndarray, jumps) -> np.ndarray:
    """-i(H_eff rho - rho H_eff^dag) + sum_j L_j rho L_j^dag."""
    out = -1j * (h_eff @ rho - rho @ h_eff.conj().T)
    for lj in jumps:
        out = out + lj @ rho @ lj.conj().T
    return out


ModelLike = Union[CascadeModel, Callable[[float], CascadeModel]]


def _generators(model: ModelLike, t: float, from_network: bool):
    m = model(t) if callable(model) else model
    if from_network:
        right, left = build_chiral_network(m)
        jumps = [sector(right.L), sector(left.L)]
        h = sector(right.H + left.H)
        h_eff = h - 0.5j * sum(j.conj().T @ j for j in jumps)
        return h_eff, jumps
    sa, sb = jump_operators(m, keep_delay_phase=False)
    return sector(effective_hamiltonian(m)), [sector(sa + sb)]


def master_equation_step(rho: np.ndarray, model: ModelLike, dt: float, t: float = 0.0, from_network: bool = False) -> np.ndarray:
    """One RK4 step of the cascaded master equation on the 3x3 sector."""
    def f(tt, r):
        h, js = _generators(model, tt, from_network)
        return lindblad_rhs(r, h, js)

    k1 = f(t, rho)
    k2 = f(t + dt / 2, rho + dt / 2 * k1)
    k3 = f(t + dt / 2, rho + dt / 2 * k2)
    k4 = f(t + dt, rho + dt * k3)
    return rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_me(rho0: np.ndarray, model: ModelLike, t_span, dt: float, from_network: bool = False,
                 tol: float = 1e-8):
    """Integrate from t_span[0] to t_span[1]; returns (times, rhos).

    ``model`` may be a callable t -> CascadeModel for time-dependent rates.
    With ``from_network`` the generators come from the SLH chain (both
    channels) instead of the chiral closed form.
    """
    rho = np.asarray(rho0, dtype=complex)
    if rho.shape != (3, 3):
        raise ValueError("density matrix must be 3x3 on {|eg>, |ge>, |gg>}")
    t0, t1 = t_span
    n = max(1, int(np.ceil((t1 - t0) / dt - 1e-9)))
    h = (t1 - t0) / n
    times = t0 + h * np.arange(n + 1)
    out = np.empty((n + 1, 3, 3), dtype=complex)
    out[0] = rho
    tr0 = np.trace(rho).real
    for i in range(n):
        rho = master_equation_step(rho, model, h, times[i], from_network)
        rho = 0.5 * (rho + rho.conj().T)
        out[i + 1] = rho
        if abs(np.trace(rho).real - tr0) > tol * max(1.0, i + 1):
            raise PositivityError(f"trace drift at t={times[i + 1]:.3e}; reduce dt")
        if np.linalg.eigvalsh(rho).min() < -tol:
            raise PositivityError(f"negative eigenvalue at t={times[i + 1]:.3e}; reduce dt")
    return times, out


def dark_state_odes(rate_a: Callable[[float], float], rate_b: Callable[[float], float], mu_a0: complex, mu_b0: complex,
                    t_span, t_eval=None, rtol: float = 1e-10, atol: float = 1e-12):
    """Integrate the cascaded amplitude equations.

    mu_a' = -(G_a/2) mu_a,  mu_b' = -(G_b/2) mu_b - sqrt(G_a G_b) mu_a.

    Returns (t, mu_a, mu_b, residual) with the dark-state residual
    |sqrt(G_a/2) mu_a + sqrt(G_b/2) mu_b|.
    """
    def f(t, y):
        ga, gb = max(rate_a(t), 0.0), max(rate_b(t), 0.0)
        return [-0.5 * ga * y[0], -0.5 * gb * y[1] - np.sqrt(ga * gb) * y[0]]

    sol = solve_ivp(f, t_span, np.array([mu_a0, mu_b0], dtype=complex), method="DOP853", t_eval=t_eval,
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(sol.message)
    ga = np.array([rate_a(t) for t in sol.t])
    gb = np.array([rate_b(t) for t in sol.t])
    resid = np.abs(np.sqrt(ga / 2) * sol.y[0] + np.sqrt(gb / 2) * sol.y[1])
    return sol.t, sol.y[0], sol.y[1], resid


def constant_rate_solution(rate: float, t):
    """Closed form for equal constant rates: mu_a = e^{-G t/2}, mu_b = -G t e^{-G t/2}."""
    t = np.asarray(t, dtype=float)
    e = np.exp(-0.5 * rate * t)
    return e, -rate * t * e
