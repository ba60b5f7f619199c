"""Command-line interface.

Subcommands: make-truth, run-smc, run-reference, sweep, metrics. The default
output root comes from DARCY_SMC_OUTPUT (fallback ./runs); every run writes a
resolved configuration next to its outputs so results are reproducible.
"""

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from . import reporting
from .config import config_hash, parse_config, parse_config_data, resolved
from .driver import build_setup, run_experiment_sweep, run_reference, run_smc, summarize_sweep
from .metrics import HistogramSpec
from .permeability import N_GEOM, ModelKind
from .resampling import flatten


def _output_root(args) -> Path:
    if args.output:
        return Path(args.output)
    return Path(os.environ.get("DARCY_SMC_OUTPUT", "runs"))


def _load_config(args):
    cfg = parse_config(args.config) if args.config else parse_config_data({})
    overrides = {}
    if getattr(args, "model", None):
        overrides["model"] = args.model
    if getattr(args, "threads", None):
        overrides["threads"] = args.threads
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    if getattr(args, "particles", None):
        cfg = dataclasses.replace(cfg, smc=dataclasses.replace(cfg.smc, particles=args.particles))
    return cfg


def cmd_make_truth(args) -> int:
    cfg = _load_config(args)
    setup = build_setup(cfg)
    out = _output_root(args)
    out.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(
        out / "truth.npz",
        model=setup.config.model,
        flat=flatten(setup.truth),
        nx=setup.truth_grid.nx,
        ny=setup.truth_grid.ny,
    )
    obs = setup.problem.obs
    (out / "observations.json").write_text(
        json.dumps(
            {
                "locations": obs.locations.tolist(),
                "eps": obs.eps,
                "sigma": obs.sigma,
                "y": obs.y.tolist(),
            },
            indent=2,
        )
    )
    reporting.write_config(out, setup.config)
    print(f"truth and observations written to {out}")
    return 0


def cmd_run_smc(args) -> int:
    cfg = _load_config(args)
    setup = build_setup(cfg)
    rcfg = setup.config
    ensemble, record = run_smc(
        setup.problem, rcfg.smc, args.method, rcfg.seed, threads=rcfg.threads
    )
    record.config_hash = config_hash(rcfg)
    out = _output_root(args) / f"{rcfg.model}_{args.method}_J{rcfg.smc.particles}_seed{rcfg.seed}"
    reporting.export_results(out, record, ensemble.flat(), rcfg)
    phis = ", ".join(f"{p:.4f}" for p in record.phis())
    print(f"{len(record.iterations)} tempering iterations (phi: {phis})")
    print(f"outputs in {out}")
    return 0


def cmd_run_reference(args) -> int:
    cfg = _load_config(args)
    setup = build_setup(cfg)
    rcfg = setup.config
    archive = run_reference(setup.problem, rcfg.reference, rcfg.data_seed, threads=rcfg.threads)
    out = _output_root(args)
    out.mkdir(parents=True, exist_ok=True)
    reporting.save_reference(out / "reference.npz", archive)
    if ModelKind(rcfg.model) is ModelKind.P2:
        reporting.write_traces(out, archive)
    reporting.write_config(out, rcfg)
    print(f"{archive.samples.shape[0]} reference samples written to {out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    out = _output_root(args)
    out.mkdir(parents=True, exist_ok=True)
    reference = None
    if args.reference:
        reference = reporting.load_reference(args.reference)
    rows, reference, setup = run_experiment_sweep(cfg, reference=reference, progress=print)
    rcfg = setup.config
    reporting.write_metrics(out, rows)
    reporting.write_metrics(out, summarize_sweep(rows), name="summary.csv")
    reporting.save_reference(out / "reference.npz", reference)
    reporting.write_config(out, rcfg)
    if ModelKind(rcfg.model) is ModelKind.P2:
        intervals = setup.problem.prior.intervals
        bins = max(rcfg.smc.particles // 10, 2)
        for i in range(N_GEOM):
            spec = HistogramSpec(bins, intervals[i, 0], intervals[i, 1])
            counts, edges = np.histogram(reference.samples[:, i], bins=spec.edges())
            p_ref = (counts + 1e-10) / (counts + 1e-10).sum()
            reporting.write_marginal(out, f"d{i + 1}", edges, p_ref)
    print(f"{len(rows)} runs; outputs in {out}")
    return 0


def cmd_metrics(args) -> int:
    from types import SimpleNamespace

    cfg = _load_config(args)
    setup = build_setup(cfg)
    reference = reporting.load_reference(args.reference)
    flat = reporting.read_ensemble(Path(args.run_dir) / "ensemble_final.csv")
    ensemble = SimpleNamespace(
        size=flat.shape[0],
        weights=np.full(flat.shape[0], 1.0 / flat.shape[0]),
        flat=lambda: flat,
    )
    row = metrics_mod.run_metrics(setup, ensemble, reference)
    print(json.dumps(row, indent=2))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="darcy-smc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML/JSON configuration file")
        p.add_argument("--output", "-o", help="output directory (default: $DARCY_SMC_OUTPUT)")
        p.add_argument("--threads", type=int, default=None, help="bound on the worker pool")
        p.add_argument("--model", choices=["p1", "p2"], default=None)
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("make-truth", help="synthesize the truth parameter and noisy data")
    common(p)
    p.set_defaults(fn=cmd_make_truth)

    p = sub.add_parser("run-smc", help="one adaptive tempered run")
    common(p)
    p.add_argument("--method", choices=["monomial", "transport", "kalman"], required=True)
    p.add_argument("--particles", type=int, default=None)
    p.set_defaults(fn=cmd_run_smc)

    p = sub.add_parser("run-reference", help="long-chain MCMC reference posterior")
    common(p)
    p.set_defaults(fn=cmd_run_reference)

    p = sub.add_parser("sweep", help="seeds x ensemble sizes x methods with metrics")
    common(p)
    p.add_argument("--reference", help="reuse a saved reference archive (.npz)")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("metrics", help="metrics of a finished run against a reference")
    common(p)
    p.add_argument("--run-dir", required=True)
    p.add_argument("--reference", required=True)
    p.set_defaults(fn=cmd_metrics)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
