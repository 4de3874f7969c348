"""Cost of each scheme to reach a common error at T = 0.8 (ordering only; seconds are machine specific).

    python scripts/runtime_table.py --disc disc:2 --target 1e-3
"""

import argparse
from pathlib import Path

from imexwave.harness import RunConfig, emit_runtime_csv, runtime_compare


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--disc", default="disc:2")
    ap.add_argument("--target", type=float, default=1e-3)
    ap.add_argument("--gamma", default="1,1,-2")
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--out", default="out/runtime")
    args = ap.parse_args()
    gamma = tuple(float(x) for x in args.gamma.split(","))
    cfg = RunConfig(disc=args.disc, gamma=gamma, tau=0.1)
    table = runtime_compare(cfg, ["cn", "imex", "rimex", "rk4"], args.target, max_halvings=6, repeats=args.repeats)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_runtime_csv(table, out / "runtime.csv")
    for r in table:
        unstable = f" unstable at {r.unstable_taus}" if r.unstable_taus else ""
        print(f"{r.scheme:6s} tau={r.tau} err={r.error:.3e} wall={r.wall_time:.4f}s "
              f"solves/step={r.solves_per_step:.2f} {r.status}{unstable}")


if __name__ == "__main__":
    main()
