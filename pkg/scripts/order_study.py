"""Temporal convergence of the three implicit schemes over the damping families.

    python scripts/order_study.py --disc disc:3 --out out/orders
"""

import argparse
from pathlib import Path

from imexwave.harness import RunConfig, convergence_study, emit_csv, emit_metadata, emit_svg_loglog

FAMILIES = {"zero": None, "decay2": (1, 1, -2), "grow1": (1, 1, 1), "grow2": (1, 1, 2)}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--disc", default="disc:3")
    ap.add_argument("--reference", default="refined:16")
    ap.add_argument("--schemes", default="imex,rimex,cn")
    ap.add_argument("--out", default="out/orders")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    taus = [0.1 * 2.0**-k for k in range(5)]
    for name, gamma in FAMILIES.items():
        for scheme in args.schemes.split(","):
            cfg = RunConfig(disc=args.disc, scheme=scheme, gamma=gamma, reference=args.reference)
            report = convergence_study(cfg, taus)
            stem = out / f"{name}_{scheme}"
            emit_csv(report, stem.with_suffix(".csv"))
            emit_metadata(report, stem.with_suffix(".json"))
            emit_svg_loglog(report, stem.with_suffix(".svg"), title=f"{scheme}, gamma {name}")
            orders = " ".join("-" if o is None else f"{o:.2f}" for o in report.orders)
            print(f"{name:7s} {scheme:6s} orders {orders}")


if __name__ == "__main__":
    main()
