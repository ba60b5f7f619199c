#!/usr/bin/env python3
"""Single-field (P1) method comparison at desk scale.

Runs the seeds x ensemble-sizes x methods sweep against a long-chain pcn
reference and writes metrics.csv / summary.csv plus the reference archive.
Sizes default to a quick variant; pass --full for the 24x24, J in {100, 500},
10-seed configuration used by the acceptance suite (tens of minutes).
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from darcy_smc.config import parse_config_data
from darcy_smc.driver import run_experiment_sweep, summarize_sweep
from darcy_smc.reporting import save_reference, write_config, write_metrics

QUICK = {
    "model": "p1",
    "grid": {"nx": 16, "ny": 16},
    "observations": {"count": 16},
    "reference": {"chains": 2, "length": 20_000, "burnin": 4_000, "thinning": 40},
    "seeds": [0, 1, 2],
    "ensemble_sizes": [100],
}

FULL = {
    "model": "p1",
    "grid": {"nx": 24, "ny": 24},
    "observations": {"count": 36},
    "reference": {"chains": 4, "length": 100_000, "burnin": 10_000, "thinning": 100},
    "seeds": list(range(10)),
    "ensemble_sizes": [100, 500],
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--full", action="store_true", help="acceptance-scale configuration")
    parser.add_argument("--output", "-o", default="runs/p1_comparison")
    args = parser.parse_args()

    cfg = parse_config_data(FULL if args.full else QUICK)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    rows, reference, setup = run_experiment_sweep(cfg, progress=print)
    summary = summarize_sweep(rows)
    write_metrics(out, rows)
    write_metrics(out, summary, name="summary.csv")
    save_reference(out / "reference.npz", reference)
    write_config(out, setup.config)

    print(f"\ndone in {(time.perf_counter() - t0) / 60:.1f} min; outputs in {out}")
    for cell in summary:
        print(
            f"J={cell['particles']:>4} {cell['method']:>9}: "
            f"median error {cell['error_mean_median']:.4f} "
            f"[{cell['error_mean_q25']:.4f}, {cell['error_mean_q75']:.4f}] "
            f"({int(cell['iterations_median'])} tempering iterations)"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
