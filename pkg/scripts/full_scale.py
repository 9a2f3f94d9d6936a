"""Opt-in full-scale runs at N = 10^4 modes (emission, band edge, transfer).

Slow: expect tens of minutes on one core.
"""
import argparse

from chiralgiant import defaults
from chiralgiant.cli import TransferSection, baseline_transfer, nonmarkov_comparison, run_emission
from chiralgiant.device import build_device


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--modes", type=int, default=10_000)
    a = ap.parse_args()

    dev = build_device(n_modes=a.modes)
    r = run_emission(dev, defaults.ghz(0.29), (0.0, 1.0), rate=defaults.mhz(3.0))
    print(f"emission: beta+={r['beta_plus']:.4f} fit/analytic={r['fitted_gamma'] / r['gamma']:.4f}")
    for d in (-0.1, 0.0, 0.1):
        r = nonmarkov_comparison(dev, defaults.ghz(d), band="real")
        print(f"band edge delta0={d:+.1f} GHz: max|dP|={r['max_deviation']:.4f} "
              f"|Res0|^2={r['res0_sq']:.4f} late={r['late_sim']:.4f}")
    for corr in (True, False):
        _, res = baseline_transfer(dev, TransferSection(delay_correction=corr), frame_every=None)
        print(f"transfer L=8 corrected={corr}: fidelity={res.fidelity:.4f} leakage={res.leakage:.4f}")


if __name__ == "__main__":
    main()
