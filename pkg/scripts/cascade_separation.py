"""Full simulation versus cascaded master equation as a function of L_ab."""
import argparse

from chiralgiant import defaults
from chiralgiant.cli import cascade_comparison
from chiralgiant.device import build_device


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cells", type=float, nargs="+", default=[1, 2, 3, 4, 6, 16])
    ap.add_argument("--rate", type=float, default=3.0, help="MHz, both atoms")
    ap.add_argument("--t-max", type=float, default=0.3, help="microseconds")
    a = ap.parse_args()

    dev = build_device()
    print("L_ab/lambda_m,max_abs_population_error")
    for L in a.cells:
        r = cascade_comparison(dev, defaults.mhz(a.rate), defaults.mhz(a.rate), separation_cells=L,
                               t_max=a.t_max * 1e-6)
        print(f"{L:g},{r['max_deviation']:.5f}")


if __name__ == "__main__":
    main()
