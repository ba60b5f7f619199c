"""Serialization of runs: per-iteration logs, final ensembles, metric tables,
marginal histograms, resolved configurations, and reference archives."""

import csv
import dataclasses
import json
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .config import RunConfig, to_json
from .driver import ReferenceArchive, RunRecord


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_run_log(directory: Path, record: RunRecord) -> Path:
    path = directory / "run.jsonl"
    with path.open("w") as fh:
        header = {
            "method": record.method,
            "model": record.model,
            "seed": record.seed,
            "particles": record.particles,
            "config_hash": record.config_hash,
            "total_seconds": record.total_seconds,
        }
        fh.write(json.dumps({"run": header}) + "\n")
        for it in record.iterations:
            fh.write(json.dumps(dataclasses.asdict(it)) + "\n")
    return path


def write_ensemble(directory: Path, ensemble_flat: np.ndarray) -> Path:
    path = directory / "ensemble_final.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{k}" for k in range(ensemble_flat.shape[1])])
        for row in ensemble_flat:
            writer.writerow([_fmt(v) for v in row])
    return path


def read_ensemble(path: Path) -> np.ndarray:
    with Path(path).open() as fh:
        reader = csv.reader(fh)
        next(reader)
        return np.array([[float(v) for v in row] for row in reader])


def write_metrics(directory: Path, rows: List[dict], name: str = "metrics.csv") -> Path:
    path = directory / name
    columns: List[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c, "")) for c in columns])
    return path


def read_metrics(path: Path) -> List[dict]:
    with Path(path).open() as fh:
        reader = csv.DictReader(fh)
        out = []
        for row in reader:
            parsed = {}
            for k, v in row.items():
                try:
                    parsed[k] = int(v)
                except ValueError:
                    try:
                        parsed[k] = float(v)
                    except ValueError:
                        parsed[k] = v
            out.append(parsed)
        return out


def write_marginal(
    directory: Path,
    name: str,
    edges: np.ndarray,
    p_ref: np.ndarray,
    p_run: Optional[np.ndarray] = None,
) -> Path:
    path = directory / f"marginal_{name}.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["bin_left", "bin_right", "p_ref"] + (["p_run"] if p_run is not None else [])
        writer.writerow(header)
        for b in range(len(p_ref)):
            row = [edges[b], edges[b + 1], p_ref[b]]
            if p_run is not None:
                row.append(p_run[b])
            writer.writerow([_fmt(v) for v in row])
    return path


def write_config(directory: Path, cfg: RunConfig) -> Path:
    path = directory / "config.resolved.json"
    path.write_text(to_json(cfg))
    return path


def export_results(
    directory,
    record: RunRecord,
    ensemble_flat: np.ndarray,
    cfg: RunConfig,
    metrics_rows: Optional[List[dict]] = None,
    marginals: Optional[Dict[str, tuple]] = None,
) -> Path:
    """Write the full set of run outputs into one directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_run_log(directory, record)
    write_ensemble(directory, ensemble_flat)
    write_config(directory, cfg)
    write_metrics(directory, metrics_rows if metrics_rows is not None else [])
    if marginals:
        for name, parts in marginals.items():
            write_marginal(directory, name, *parts)
    return directory


def save_reference(path, archive: ReferenceArchive) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = dict(
        model=archive.model,
        samples=archive.samples,
        chain_ids=archive.chain_ids,
        acceptance_keys=np.array(list(archive.acceptance.keys())),
        acceptance_values=np.array(list(archive.acceptance.values())),
    )
    if archive.mean_full is not None:
        payload["mean_full"] = archive.mean_full
    np.savez_compressed(path, **payload)
    return path


def load_reference(path) -> ReferenceArchive:
    data = np.load(path, allow_pickle=False)
    acceptance = {
        str(k): float(v) for k, v in zip(data["acceptance_keys"], data["acceptance_values"])
    }
    return ReferenceArchive(
        model=str(data["model"]),
        samples=data["samples"],
        chain_ids=data["chain_ids"],
        acceptance=acceptance,
        mean_full=data["mean_full"] if "mean_full" in data else None,
    )


def write_traces(directory: Path, archive: ReferenceArchive, n_geom: int = 5) -> List[Path]:
    """Per-parameter trace files of the archived geometric samples."""
    paths = []
    for i in range(n_geom):
        path = Path(directory) / f"trace_d{i + 1}.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample_index", "chain", f"d{i + 1}"])
            for s in range(archive.samples.shape[0]):
                writer.writerow(
                    [s, int(archive.chain_ids[s]), _fmt(float(archive.samples[s, i]))]
                )
        paths.append(path)
    return paths
