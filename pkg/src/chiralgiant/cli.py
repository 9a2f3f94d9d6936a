"""Command-line entry point and the experiment pipelines behind it.

Configuration is an INI file (see README for the grammar).  External units
are GHz, MHz, microseconds and cells (lambda_m); everything is converted to
rad/s, seconds and metres on load.  Each run writes its artifacts plus a
``manifest.json`` listing every file with a SHA-256 hash.

Exit status: 0 success, 1 configuration or module error, 2 usage error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import os
import platform
import sys
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from . import __version__, defaults
from .cascade import CascadeModel, dark_state_odes, integrate_me
from .coupler import CouplerParams, DriveSignal, balance_dc_bias, coupling_gk, modulation_spectrum
from .device import Device, build_device
from .dynamics import (AtomSpec, Interaction, SingleExcitationState, assemble_interaction, directional_flux_and_beta,
                       evolve, fit_decay_rate, momentum_beta)
from .nonmarkov import (band_edge_model, find_poles, model_band_modes, reconstruct_amplitude, renormalize,
                        steady_state_population, weights_table)
from .pcw_band import PcwParams, build_band_structure, calibrate_period
from .transfer import TransferPlan, fidelity_sweep, run_transfer, sweep_csv, transfer_atoms

__all__ = ["RunConfig", "ConfigError", "parse_config", "parse_config_text", "serialize_config", "main",
           "run_emission", "band_edge_coupling", "nonmarkov_comparison", "cascade_comparison", "baseline_transfer"]


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists every violation found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


# ---------------------------------------------------------------- config

@dataclass
class WaveguideSection:
    capacitance_per_length: float = defaults.CAPACITANCE_PER_LENGTH
    inductance_per_length: float = defaults.INDUCTANCE_PER_LENGTH
    modulation_depth: float = defaults.MODULATION_DEPTH
    gap_ghz: Optional[float] = defaults.GAP_WIDTH_GHZ
    fourier_order: int = 15
    qubit_detuning_ghz: float = defaults.QUBIT_DETUNING_GHZ
    calibration_rate_mhz: float = defaults.CALIBRATION_RATE_MHZ
    calibration_drive_ghz: float = defaults.CALIBRATION_DRIVE_GHZ


@dataclass
class AtomSection:
    points: tuple = (0.0, 1.0)
    omega_d_ghz: float = defaults.EMISSION_DRIVE_GHZ
    phi_c: Optional[float] = None
    rate_mhz: Optional[float] = defaults.CALIBRATION_RATE_MHZ
    a1: Optional[float] = None
    direction: str = "right"


@dataclass
class NonmarkovSection:
    points: tuple = (0.2, 0.8)
    a1: float = defaults.A1_MAX
    delta0_ghz: tuple = (-0.1, 0.0, 0.1)
    sweep_ghz: tuple = (-0.3, 0.3, 61.0)
    t_max_us: float = 0.3
    model_modes: int = 2048


@dataclass
class CascadeSection:
    rate_a_mhz: float = defaults.CALIBRATION_RATE_MHZ
    rate_b_mhz: float = defaults.CALIBRATION_RATE_MHZ
    l_ab: float = 1.0
    omega_d_ghz: float = defaults.EMISSION_DRIVE_GHZ
    points: tuple = (0.0, 1.0)
    t_max_us: float = 0.6
    dt_us: float = 2e-4


@dataclass
class TransferSection:
    gamma_max_mhz: float = defaults.TRANSFER_RATE_MHZ
    t_f_us: float = defaults.TRANSFER_TF_US
    l_ab: float = 8.0
    omega_d_ghz: float = defaults.PHASE_POINT_DRIVE_GHZ
    points: tuple = (0.0, 1.0)
    delay_correction: bool = True
    start: str = "symmetric"
    lamb_compensation: bool = True
    a1_limit: float = 1.0


@dataclass
class NumericsSection:
    n_modes: int = 4096
    t_max_us: float = 0.4
    sample_us: float = 5e-4
    snapshot_us: float = 4e-3
    output_dir: str = "out"
    seed: int = 0


@dataclass
class SweepSection:
    l_ab_grid: tuple = (4.0, 8.0, 16.0, 32.0)
    delta0_grid_ghz: tuple = (-0.25,)
    corrections: str = "both"
    workers: int = 0


SECTIONS = {
    "waveguide": WaveguideSection,
    "atom": AtomSection,
    "nonmarkov": NonmarkovSection,
    "cascade": CascadeSection,
    "transfer": TransferSection,
    "numerics": NumericsSection,
    "sweep": SweepSection,
}

# keys that must be strictly positive / non-negative
_POSITIVE = {"capacitance_per_length", "inductance_per_length", "gap_ghz", "fourier_order", "calibration_rate_mhz",
             "calibration_drive_ghz", "rate_mhz", "a1", "t_max_us", "model_modes", "rate_a_mhz", "rate_b_mhz", "dt_us",
             "gamma_max_mhz", "t_f_us", "a1_limit", "n_modes", "sample_us", "snapshot_us"}
_NON_NEGATIVE = {"modulation_depth", "omega_d_ghz", "l_ab", "workers", "seed"}
_CHOICES = {"direction": ("right", "left"), "start": ("symmetric", "floor"), "corrections": ("both", "on", "off")}


@dataclass
class RunConfig:
    waveguide: WaveguideSection = field(default_factory=WaveguideSection)
    atom: AtomSection = field(default_factory=AtomSection)
    nonmarkov: NonmarkovSection = field(default_factory=NonmarkovSection)
    cascade: CascadeSection = field(default_factory=CascadeSection)
    transfer: TransferSection = field(default_factory=TransferSection)
    numerics: NumericsSection = field(default_factory=NumericsSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    def pcw_params(self) -> PcwParams:
        w = self.waveguide
        p = PcwParams(w.capacitance_per_length, w.inductance_per_length, w.modulation_depth,
                      fourier_order=w.fourier_order)
        if w.gap_ghz is not None:
            p = p.with_cell_length(calibrate_period(p, defaults.ghz(w.gap_ghz)))
        return p

    def device(self) -> Device:
        w = self.waveguide
        return build_device(self.pcw_params(), self.numerics.n_modes, defaults.ghz(w.qubit_detuning_ghz),
                            defaults.mhz(w.calibration_rate_mhz), defaults.ghz(w.calibration_drive_ghz))


def _convert(raw: str, default, name: str):
    s = raw.strip()
    if isinstance(default, bool):
        low = s.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(default, tuple):
        return tuple(float(v) for v in s.replace(";", ",").split(",") if v.strip())
    if isinstance(default, int):
        return int(s)
    if isinstance(default, float) or default is None:
        if s.lower() in ("auto", "none", ""):
            return None
        return float(s)
    return s


def _line_of(text: str, section: str, key: str) -> int:
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip().lower()
        elif current == section and stripped.split("=", 1)[0].strip().lower() == key:
            return n
    return 0


def _validate(cfg: RunConfig, where) -> list:
    problems = []
    for sname in SECTIONS:
        sec = getattr(cfg, sname)
        for f in fields(sec):
            v = getattr(sec, f.name)
            loc = where(sname, f.name)
            if f.name in _POSITIVE and v is not None and v <= 0:
                problems.append(f"{loc}: must be positive (got {v})")
            if f.name in _NON_NEGATIVE and v is not None and v < 0:
                problems.append(f"{loc}: must be non-negative (got {v})")
            if f.name in _CHOICES and v not in _CHOICES[f.name]:
                problems.append(f"{loc}: must be one of {', '.join(_CHOICES[f.name])} (got {v!r})")
    if cfg.waveguide.modulation_depth >= 1:
        problems.append(f"{where('waveguide', 'modulation_depth')}: must be below 1")
    for sname in ("atom", "nonmarkov", "cascade", "transfer"):
        pts = getattr(cfg, sname).points
        if len(pts) != 2 or pts[0] >= pts[1]:
            problems.append(f"{where(sname, 'points')}: need two increasing positions in lambda_m")
    if cfg.atom.rate_mhz is None and cfg.atom.a1 is None:
        problems.append(f"{where('atom', 'rate_mhz')}: set rate_mhz or a1")
    if len(cfg.nonmarkov.sweep_ghz) != 3 or cfg.nonmarkov.sweep_ghz[2] < 2:
        problems.append(f"{where('nonmarkov', 'sweep_ghz')}: expected 'min, max, count' with count >= 2")
    if cfg.numerics.n_modes % 2:
        problems.append(f"{where('numerics', 'n_modes')}: must be even")
    return problems


def parse_config_text(text: str) -> RunConfig:
    """Parse INI text; unknown sections/keys and bad values are all reported."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"parse error: {exc}"]) from None

    def where(section, key):
        n = _line_of(text, section, key)
        return f"line {n}: [{section}] {key}" if n else f"[{section}] {key}"

    problems = []
    sections = {}
    for sname in cp.sections():
        low = sname.lower()
        if low not in SECTIONS:
            problems.append(f"unknown section [{sname}]")
            continue
        cls = SECTIONS[low]
        known = {f.name: f for f in fields(cls)}
        values = {}
        for key, raw in cp.items(sname):
            if key not in known:
                problems.append(f"{where(low, key)}: unknown key")
                continue
            try:
                values[key] = _convert(raw, known[key].default, key)
            except ValueError as exc:
                problems.append(f"{where(low, key)}: {exc}")
        sections[low] = cls(**values)
    cfg = RunConfig(**sections)
    problems += _validate(cfg, where)
    if problems:
        raise ConfigError(problems)
    return cfg


def parse_config(path) -> RunConfig:
    """Load and validate a config file; an empty file yields all defaults."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError([f"config file not found: {path}"])
    return parse_config_text(p.read_text())


def _fmt(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(cfg: RunConfig) -> str:
    """Normalized INI text; parse(serialize(c)) reproduces c."""
    out = []
    for sname in SECTIONS:
        out.append(f"[{sname}]")
        sec = getattr(cfg, sname)
        for f in fields(sec):
            out.append(f"{f.name} = {_fmt(getattr(sec, f.name))}")
        out.append("")
    return "\n".join(out)


# ---------------------------------------------------------------- pipelines

def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _g(x) -> str:
    return f"{float(x):.10g}"


def run_emission(dev: Device, drive: float, points=(0.0, 1.0), rate: Optional[float] = None,
                 a1: Optional[float] = None, phi_c: Optional[float] = None, direction: int = +1,
                 t_max: float = 0.4e-6, stop_population: float = 0.01, sample_every: float = 0.5e-9) -> dict:
    """Single giant atom decaying from |e>; chiral factors and rate fit.

    ``rate`` (rad/s) fixes A_1 through the Markovian map; otherwise ``a1``
    is used as given.  The run stops once |c_e|^2 < ``stop_population``.
    """
    cm = dev.coupling(drive, points, phi_c=phi_c, direction=direction)
    if rate is not None:
        cm = cm.with_a1(dev.a1_for_rate(cm, drive, rate))
    elif a1 is not None:
        cm = cm.with_a1(a1)
    gp, gm = dev.rates(cm, drive)
    inter = assemble_interaction(dev.bs, [AtomSpec(cm, dev.qubit_frequency, drive)])
    st = SingleExcitationState.excited(1, dev.bs.n_modes)
    t0 = time.perf_counter()
    tr = evolve(inter, st, t_max, sample_every=sample_every, stop=lambda s: abs(s.atoms[0]) ** 2 < stop_population)
    wall = time.perf_counter() - t0
    w_eff = dev.omega_eff(drive)
    _, _, bp, bm = directional_flux_and_beta(dev.bs, tr.final, cm.x_d, w_eff)
    try:
        fitted = fit_decay_rate(tr.times, tr.populations[:, 0])
    except ValueError:
        fitted = float("nan")
    return {"a1": cm.a1, "phi_c": cm.phi_c, "gamma_plus": gp, "gamma_minus": gm, "gamma": gp + gm,
            "fitted_gamma": fitted, "beta_plus": bp, "beta_minus": bm, "beta_momentum": momentum_beta(dev.bs, tr.final),
            "norm_drift": tr.norm_drift, "steps": tr.steps, "t_end": tr.final.t, "wall_s": wall, "trajectory": tr}


def band_edge_coupling(dev: Device, points=(0.2, 0.8), a1: float = defaults.A1_MAX):
    """Coupling for band-edge studies: phi_c fixed at the chiral optimum of the
    phase operating point, independent of the detuning being scanned."""
    return dev.coupling(defaults.ghz(defaults.PHASE_POINT_DRIVE_GHZ), points, a1)


def nonmarkov_comparison(dev: Device, delta0: float, points=(0.2, 0.8), a1: float = defaults.A1_MAX,
                         t_max: float = 0.3e-6, band: str = "model", model_modes: int = 2048, q_max=None,
                         sample_every: float = 1e-9) -> dict:
    """Pole-plus-cut reconstruction against a direct simulation.

    ``band="model"`` simulates the quadratic continuum with the same
    (g', alpha_0, delta_0) as the analytic model; ``band="real"`` uses the
    full band-1 mode set of the device.
    """
    drive = dev.drive_for_delta0(delta0)
    w_eff = dev.omega_eff(drive)
    cm = band_edge_coupling(dev, points, a1)
    if band == "model":
        if q_max is None:
            q_max = 400.0
        # the truncated continuum has its own small off-resonant remainder
        bare = band_edge_model(dev.bs, cm, w_eff, renormalized=False)
        g, det = model_band_modes(bare, model_modes, q_max)
        model = renormalize(bare, np.abs(g) ** 2, det)
        inter = Interaction.from_couplings(g, det)
        n = model_modes
    else:
        model = band_edge_model(dev.bs, cm, w_eff)
        inter = assemble_interaction(dev.bs, [AtomSpec(cm, dev.qubit_frequency, drive)])
        n = dev.bs.n_modes
    tr = evolve(inter, SingleExcitationState.excited(1, n), t_max, sample_every=sample_every)
    pop_sim = tr.populations[:, 0]
    amp = reconstruct_amplitude(tr.times, model)
    pop_rec = np.abs(amp) ** 2
    res0, _ = steady_state_population(model)
    late = tr.times > 0.8 * t_max
    return {"delta0": delta0, "model": model, "poles": find_poles(model), "times": tr.times, "sim": pop_sim,
            "reconstruction": pop_rec, "max_deviation": float(np.max(np.abs(pop_sim - pop_rec))),
            "res0_sq": res0, "late_sim": float(pop_sim[late].mean()), "norm_drift": tr.norm_drift}


def cascade_comparison(dev: Device, rate_a: float, rate_b: float, separation_cells: float = 1.0,
                       drive: float = defaults.ghz(defaults.EMISSION_DRIVE_GHZ), points=(0.0, 1.0),
                       t_max: float = 0.6e-6, dt: float = 2e-10) -> dict:
    """Two-atom populations: full simulation versus cascaded master equation."""
    lam = dev.params.cell_length
    base = dev.coupling(drive, points)
    cms = []
    for cm, rate in ((base, rate_a), (base.shifted(base.x2 + separation_cells * lam - base.x1), rate_b)):
        cms.append(cm.with_a1(dev.a1_for_rate(cm, drive, rate)))
    inter = assemble_interaction(dev.bs, [AtomSpec(c, dev.qubit_frequency, drive) for c in cms])
    tr = evolve(inter, SingleExcitationState.excited(2, dev.bs.n_modes, 0), t_max, sample_every=2e-9)
    k_r = dev.resonant_k(drive)
    phi = k_r * (points[1] - points[0]) * lam
    model = CascadeModel.chiral(rate_a, rate_b, phi, phi, k_r * separation_cells * lam)
    rho0 = np.zeros((3, 3), dtype=complex)
    rho0[0, 0] = 1.0
    times, rhos = integrate_me(rho0, model, (0.0, t_max), dt)
    pa = np.interp(tr.times, times, rhos[:, 0, 0].real)
    pb = np.interp(tr.times, times, rhos[:, 1, 1].real)
    dev_a = np.max(np.abs(tr.populations[:, 0] - pa))
    dev_b = np.max(np.abs(tr.populations[:, 1] - pb))
    return {"times": tr.times, "sim": tr.populations, "me": np.column_stack([pa, pb]),
            "max_deviation": float(max(dev_a, dev_b)), "norm_drift": tr.norm_drift}


def baseline_transfer(dev: Device, section: TransferSection = TransferSection(), frame_every=4e-9, dt=None):
    """Transfer run for a [transfer] section; returns (plan, result)."""
    drive = defaults.ghz(section.omega_d_ghz)
    plan = TransferPlan(gamma_max=defaults.mhz(section.gamma_max_mhz), t_f=section.t_f_us * 1e-6,
                        separation=section.l_ab * dev.params.cell_length, group_velocity=dev.group_velocity(drive),
                        delay_correction=section.delay_correction, start=section.start,
                        lamb_compensation=section.lamb_compensation, a1_limit=section.a1_limit)
    atoms, _ = transfer_atoms(dev.bs, plan, dev.qubit_frequency, drive, section.points, dev.prefactor)
    return plan, run_transfer(plan, dev.bs, atoms, dt=dt, frame_every=frame_every)


# ---------------------------------------------------------------- subcommands

def cmd_bands(cfg: RunConfig, args) -> dict:
    if args.calibrate_gap is not None:
        cfg = replace(cfg, waveguide=replace(cfg.waveguide, gap_ghz=args.calibrate_gap))
    p = cfg.pcw_params()
    bs = build_band_structure(p, cfg.numerics.n_modes)
    rows = [[_g(k / p.k_m), _g(defaults.to_ghz(w1)), _g(defaults.to_ghz(w2))]
            for k, (w1, w2) in zip(bs.k_grid, bs.frequencies[:, :2])]
    lo, hi = bs.gap_edges
    summary = {"cell_length_m": p.cell_length, "gap_ghz": defaults.to_ghz(hi - lo),
               "band1_top_ghz": defaults.to_ghz(lo), "band2_bottom_ghz": defaults.to_ghz(hi), "n_modes": bs.n_modes}
    return {"dispersion.csv": _csv(["k_over_km", "band1_ghz", "band2_ghz"], rows), "bands.json": summary}


def cmd_coupler(cfg: RunConfig, args) -> dict:
    out = {}
    if args.spectrum:
        cp = CouplerParams()
        d = 0.4 * np.pi
        bias = balance_dc_bias(d, cp)
        spec = modulation_spectrum(DriveSignal(bias, d, defaults.ghz(cfg.atom.omega_d_ghz)), cp)
        out["spectrum.json"] = dict(spec.to_dict(), dc_bias=bias, drive_amplitude=d, beta=cp.beta)
    dev = cfg.device()
    drive = defaults.ghz(cfg.atom.omega_d_ghz)
    cm = dev.coupling(drive, cfg.atom.points, cfg.atom.a1 or defaults.A1_MAX, cfg.atom.phi_c)
    g = np.abs(coupling_gk(dev.bs, cm)) * np.sqrt(dev.bs.length / (2 * np.pi))
    rows = [[_g(k / dev.params.k_m), _g(x)] for k, x in zip(dev.bs.k_grid, g)]
    out["coupling.csv"] = _csv(["k_over_km", "abs_g_renormalized"], rows)
    out["coupler.json"] = {"phi_c": cm.phi_c, "phi_c_over_pi": cm.phi_c / np.pi, "prefactor": dev.prefactor}
    return out


def cmd_emit(cfg: RunConfig, args) -> dict:
    dev = cfg.device()
    a = cfg.atom
    drive = defaults.ghz(args.omega_d if args.omega_d is not None else a.omega_d_ghz)
    phi_c = args.phi_c if args.phi_c is not None else a.phi_c
    rate = defaults.mhz(a.rate_mhz) if a.a1 is None else None
    res = run_emission(dev, drive, a.points, rate, a.a1, phi_c, +1 if a.direction == "right" else -1,
                       cfg.numerics.t_max_us * 1e-6, sample_every=cfg.numerics.sample_us * 1e-6)
    tr = res.pop("trajectory")
    header, rows = tr.to_csv_rows()
    summary = {k: float(v) for k, v in res.items()}
    summary.update(gamma_mhz=defaults.to_mhz(res["gamma"]), fitted_gamma_mhz=defaults.to_mhz(res["fitted_gamma"]))
    return {"emission.csv": _csv(header, rows), "emission.json": summary}


def cmd_nonmarkov(cfg: RunConfig, args) -> dict:
    dev = cfg.device()
    nm = cfg.nonmarkov
    out = {}
    if args.delta0_sweep:
        lo, hi, n = nm.sweep_ghz
        grid = np.linspace(lo, hi, int(n))
        drive0 = dev.drive_for_delta0(0.0)
        cm = band_edge_coupling(dev, nm.points, nm.a1)
        model = band_edge_model(dev.bs, cm, dev.omega_eff(drive0), renormalized=False)
        rows = weights_table(model.coupling, model.curvature, defaults.ghz(grid))
        out["weights.csv"] = _csv(["delta0_ghz", "w_bound", "w_decay", "w_cut"],
                                  [[_g(defaults.to_ghz(r[0])), _g(r[1]), _g(r[2]), _g(r[3])] for r in rows])
    rows, poles = [], {}
    times = np.linspace(0.0, nm.t_max_us * 1e-6, 301)
    cols = []
    for d in nm.delta0_ghz:
        drive = dev.drive_for_delta0(defaults.ghz(d))
        cm = band_edge_coupling(dev, nm.points, nm.a1)
        model = band_edge_model(dev.bs, cm, dev.omega_eff(drive))
        poles[f"{d:g}"] = dict(find_poles(model).to_dict(), res0_sq=steady_state_population(model)[0])
        cols.append(np.abs(reconstruct_amplitude(times, model)) ** 2)
    for i, t in enumerate(times):
        rows.append([_g(t * 1e6)] + [_g(c[i]) for c in cols])
    out["reconstruction.csv"] = _csv(["t_us"] + [f"pop_delta0_{d:g}GHz" for d in nm.delta0_ghz], rows)
    out["poles.json"] = poles
    return out


def cmd_cascade(cfg: RunConfig, args) -> dict:
    c = cfg.cascade
    ra, rb = defaults.mhz(c.rate_a_mhz), defaults.mhz(c.rate_b_mhz)
    dev = cfg.device()
    lam = dev.params.cell_length
    k_r = dev.resonant_k(defaults.ghz(c.omega_d_ghz))
    phi = k_r * (c.points[1] - c.points[0]) * lam
    model = CascadeModel.chiral(ra, rb, phi, phi, k_r * c.l_ab * lam)
    rho0 = np.zeros((3, 3), dtype=complex)
    rho0[0, 0] = 1.0
    times, rhos = integrate_me(rho0, model, (0.0, c.t_max_us * 1e-6), c.dt_us * 1e-6)
    stride = max(1, len(times) // 600)
    ts = times[::stride]
    _, mu_a, mu_b, resid = dark_state_odes(lambda t: ra, lambda t: rb, 1.0, 0.0, (0.0, times[-1]), ts)
    rows = [[_g(t * 1e6), _g(r[0, 0].real), _g(r[1, 1].real), _g(x)] for t, r, x in zip(ts, rhos[::stride], resid)]
    return {"cascade.csv": _csv(["t_us", "rho_ee_a", "rho_ee_b", "dark_residual"], rows)}


def cmd_transfer(cfg: RunConfig, args) -> dict:
    dev = cfg.device()
    sec = cfg.transfer
    if args.delay_correction is not None:
        sec = replace(sec, delay_correction=args.delay_correction)
    out = {}
    if args.lab:
        grid = [float(x) for x in args.lab.split(",") if x.strip()]
        rows = []
        for L in grid:
            plan, res = baseline_transfer(dev, replace(sec, l_ab=L), frame_every=None)
            rows.append([_g(L), _g(defaults.to_ghz(dev.delta0(defaults.ghz(sec.omega_d_ghz)))), _g(res.fidelity),
                         int(sec.delay_correction)])
        out["transfer_grid.csv"] = _csv(["L_ab_over_lambda_m", "delta0_over_2pi_GHz", "fidelity", "corrected"], rows)
        return out
    plan, res = baseline_transfer(dev, sec, frame_every=cfg.numerics.snapshot_us * 1e-6)
    header, rows = res.trajectory.to_csv_rows()
    out["transfer.csv"] = _csv(header, rows)
    for i, (t, x, inten) in enumerate(res.frames):
        sel = slice(None, None, 4)
        out[f"frames/frame_{i:04d}.csv"] = _csv(["x_m", "intensity"], [[_g(a), _g(b)] for a, b in zip(x[sel], inten[sel])])
    out["transfer.json"] = {"fidelity": res.fidelity, "leakage": res.leakage, "field_energy": res.field_energy,
                            "tau_s": plan.tau, "t_i_s": plan.t_i, "a1_max": list(res.a1_max),
                            "lamb_mhz": [defaults.to_mhz(x) for x in res.lamb], "norm_drift": res.trajectory.norm_drift}
    return out


def cmd_sweep(cfg: RunConfig, args) -> dict:
    dev = cfg.device()
    sw, sec = cfg.sweep, cfg.transfer
    corr = {"both": (True, False), "on": (True,), "off": (False,)}[sw.corrections]
    workers = sw.workers or max(1, (os.cpu_count() or 2) - 1)
    plan = TransferPlan(gamma_max=defaults.mhz(sec.gamma_max_mhz), t_f=sec.t_f_us * 1e-6, start=sec.start,
                        lamb_compensation=sec.lamb_compensation, a1_limit=sec.a1_limit)
    rows = fidelity_sweep(dev.bs, sw.l_ab_grid, sw.delta0_grid_ghz, plan, dev.qubit_frequency, dev.prefactor,
                          sec.points, corr, workers)
    failed = [r for r in rows if r["error"]]
    return {"sweep.csv": sweep_csv(rows), "_partial": bool(failed)}


COMMANDS = {"bands": cmd_bands, "coupler": cmd_coupler, "emit": cmd_emit, "nonmarkov": cmd_nonmarkov,
            "cascade": cmd_cascade, "transfer": cmd_transfer, "sweep": cmd_sweep}


# ---------------------------------------------------------------- driver

def _write_artifacts(outdir: Path, artifacts: dict, meta: dict) -> Path:
    outdir.mkdir(parents=True, exist_ok=True)
    listing = []
    for name, content in artifacts.items():
        if name.startswith("_"):
            continue
        data = (json.dumps(content, indent=2, sort_keys=True, default=float) + "\n"
                if not isinstance(content, str) else content).encode()
        path = outdir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        listing.append({"file": name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})
    manifest = dict(meta, artifacts=listing, partial=bool(artifacts.get("_partial", False)))
    mpath = outdir / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return mpath


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file (defaults when omitted)")
    common.add_argument("--output", help="output directory (overrides [numerics] output_dir)")
    ap = argparse.ArgumentParser(prog="chiralgiant", description="Chiral giant-atom waveguide simulations.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, metavar="{" + ",".join(COMMANDS) + "}")
    p = sub.add_parser("bands", parents=[common], help="band structure and gap")
    p.add_argument("--calibrate-gap", type=float, metavar="GHZ", help="calibrate lambda_m to this gap width")
    p = sub.add_parser("coupler", parents=[common], help="modulation spectrum and |g_k|")
    p.add_argument("--spectrum", action="store_true", help="also emit the Fourier harmonics of the coupler")
    p = sub.add_parser("emit", parents=[common], help="single-atom chiral emission")
    p.add_argument("--omega-d", type=float, metavar="GHZ")
    p.add_argument("--phi-c", type=float, metavar="RAD")
    p = sub.add_parser("nonmarkov", parents=[common], help="band-edge pole and branch-cut analysis")
    p.add_argument("--delta0-sweep", action="store_true", help="emit the weight sweep CSV")
    sub.add_parser("cascade", parents=[common], help="cascaded master equation")
    p = sub.add_parser("transfer", parents=[common], help="pulse-shaped state transfer")
    p.add_argument("--delay-correction", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--lab", metavar="GRID", help="comma-separated L_ab values in lambda_m")
    sub.add_parser("sweep", parents=[common], help="fidelity sweep over L_ab and delta_0")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = parse_config(args.config) if args.config else RunConfig()
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return 1
    outdir = Path(args.output or cfg.numerics.output_dir)
    text = serialize_config(cfg)
    meta = {"command": args.command, "argv": list(argv if argv is not None else sys.argv[1:]),
            "config_sha256": hashlib.sha256(text.encode()).hexdigest(), "seed": cfg.numerics.seed,
            "versions": {"chiralgiant": __version__, "python": platform.python_version(), "numpy": np.__version__,
                         "scipy": scipy.__version__}}
    np.random.seed(cfg.numerics.seed)
    t0 = time.perf_counter()
    try:
        artifacts = COMMANDS[args.command](cfg, args)
    except Exception as exc:
        meta.update(status="error", error=f"{type(exc).__name__}: {exc}", wall_time_s=time.perf_counter() - t0)
        _write_artifacts(outdir, {"_partial": True}, meta)
        print(f"{args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    artifacts["config.ini"] = text
    meta.update(status="ok", wall_time_s=time.perf_counter() - t0)
    mpath = _write_artifacts(outdir, artifacts, meta)
    print(f"{args.command}: wrote {mpath}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
