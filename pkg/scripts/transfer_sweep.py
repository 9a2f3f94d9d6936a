"""Transfer fidelity over L_ab and delta_0, with and without the delay correction."""
import argparse
from pathlib import Path

from chiralgiant import defaults
from chiralgiant.device import build_device
from chiralgiant.transfer import TransferPlan, fidelity_sweep, sweep_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lab", type=float, nargs="+", default=[4, 8, 16, 32], help="L_ab in lambda_m")
    ap.add_argument("--delta0", type=float, nargs="+", default=[-0.25], help="GHz")
    ap.add_argument("--gamma-max", type=float, default=7.0, help="MHz")
    ap.add_argument("--t-f", type=float, default=0.08, help="microseconds")
    ap.add_argument("--modes", type=int, default=4096)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="out/transfer_sweep.csv")
    a = ap.parse_args()

    dev = build_device(n_modes=a.modes)
    plan = TransferPlan(gamma_max=defaults.mhz(a.gamma_max), t_f=a.t_f * 1e-6)
    rows = fidelity_sweep(dev.bs, a.lab, a.delta0, plan, dev.qubit_frequency, dev.prefactor, workers=a.workers)
    out = Path(a.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(sweep_csv(rows), newline="")
    for r in rows:
        print(f"L={r['L_ab_cells']:g} delta0={r['delta0_ghz']:+.2f} corrected={r['corrected']!s:5s} "
              f"fidelity={r['fidelity']:.4f} {r['error']}")


if __name__ == "__main__":
    main()
