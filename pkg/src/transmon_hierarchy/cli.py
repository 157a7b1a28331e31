"""Command-line entry point: ``transmon-hierarchy <experiment> [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from . import bench, experiments, landscape, spectra
from .config import EXPERIMENTS, RunConfig, default_out_dir, load_config
from .errors import TransmonError
from .models import ModelSpec, Variant
from .propagator import convergence_dimension

log = logging.getLogger("transmon_hierarchy")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def write_provenance(csv_path: Path, cfg: RunConfig, extra: dict | None = None) -> Path:
    """JSON sidecar next to ``csv_path`` with everything needed to re-run."""
    record = {
        **cfg.as_dict(),
        "code_version": _version(),
        "numpy": np.__version__,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "output": csv_path.name,
    }
    if extra:
        record["results"] = extra
    side = csv_path.with_suffix(".json")
    side.write_text(json.dumps(record, indent=2, sort_keys=True, default=str))
    return side


def _write_rows(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{x:.17g}" if isinstance(x, float) else x for x in row])
    return path


def _spectra_sweep(cfg: RunConfig, out: Path):
    o = cfg.options
    rows = spectra.ejc_sweep(o["mode"], [float(x) for x in o["n_exp"]], cfg.params, cfg.models,
                             int(o["resonator_levels"]), cfg.threads)
    return spectra.write_sweep_csv(rows, out / "spectra_sweep.csv"), None


def _rabi_sweep(cfg: RunConfig, out: Path):
    o = cfg.options
    res = experiments.rabi_amplitude_sweep(cfg.models, cfg.params, o["duration"], (o["amp_min"], o["amp_max"]),
                                           o["n_points"], cfg.solver, cfg.threads)
    return res.to_csv(out / "rabi_sweep.csv"), None


def _pi2_optimize(cfg: RunConfig, out: Path):
    d = cfg.options["duration"]
    rows = [(m, experiments.optimize_pi2_amplitude(m, cfg.params, d, cfg=cfg.solver)) for m in cfg.models]
    return _write_rows(out / "pi2_amplitudes.csv", ["model", "amplitude_ghz"], rows), None


def _calibrate(cfg: RunConfig, out: Path):
    o = cfg.options
    a, b = ModelSpec(o["model_a"]), ModelSpec(o["model_b"])
    sys_a = experiments.prepare(a, cfg.params)
    cal = experiments.calibrate_pair(a, cfg.params, b, cfg.params, o["amplitude"], o["duration"], cfg.solver)
    rows = [("amplitude_scale", "", cal.amplitude_scale)]
    rows += [("stark_freq_ghz", m, f) for m, f in cal.stark_shifted_freq.items()]
    rows += [("dressed_omega01_ghz", o["model_a"], sys_a.frequency())]
    return _write_rows(out / "calibration.csv", ["quantity", "model", "value"], rows), None


def _detuning_map(cfg: RunConfig, out: Path):
    o = cfg.options
    res = experiments.detuning_infidelity_map(np.linspace(o["ratio_min"], o["ratio_max"], o["n_ratios"]),
                                              np.linspace(o["det_min"], o["det_max"], o["n_det"]), o["duration"],
                                              o["amplitude"], cfg.params, o["n_samples"], cfg.solver, cfg.threads)
    return res.to_csv(out / "detuning_map.csv"), res.meta


def _gr3_compare(cfg: RunConfig, out: Path):
    o = cfg.options
    res = experiments.gr3_delta_curves(cfg.params, o["duration"], (o["amp_min"], o["amp_max"]), o["n_points"],
                                       cfg.solver, cfg.threads)
    return res.to_csv(out / "gr3_delta.csv"), None


def _landscape(cfg: RunConfig, out: Path):
    o = cfg.options
    amps = np.linspace(o["amp_min"], o["amp_max"], o["n_amp"])
    times = np.linspace(o["t_min"], o["t_max"], o["n_t"])
    grids = [landscape.landscape_grid(m, cfg.params, amps, times, cfg.solver, cfg.threads) for m in cfg.models]
    for g in grids:
        g.to_csv(out / f"landscape_{g.model}.csv")
    extra = None
    if len(grids) == 2:
        diff = landscape.landscape_diff(grids[0], grids[1])
        extra = {"max_abs_diff": float(diff.max())}
        path = landscape.LandscapeGrid(amps, times, diff, f"{grids[0].model}-{grids[1].model}").to_csv(
            out / "landscape_diff.csv")
        return path, extra
    return out / f"landscape_{grids[-1].model}.csv", extra


def _goat_ensemble(cfg: RunConfig, out: Path):
    o = cfg.options
    rows, summaries = [], {}
    for m in cfg.models:
        res = landscape.trajectory_ensemble(m, cfg.params, n=o["n"], seed=cfg.seed, duration=o["duration"],
                                            cfg=cfg.solver)
        res.write(out)
        summaries[m] = res.summary()
        rows.append((m, res.mean, res.std, int(res.included.sum()), len(res.trajectories)))
    path = _write_rows(out / "r_gamma.csv", ["model", "mean_r", "std_r", "n_included", "n"], rows)
    return path, summaries


def _converge_dims(cfg: RunConfig, out: Path):
    o = cfg.options
    rows = []
    for m in cfg.models:
        n = convergence_dimension(ModelSpec(m), cfg.params, tol=o["tol"], max_levels=o["max_levels"], cfg=cfg.solver)
        rows.append((m, n))
    return _write_rows(out / "convergence_dims.csv", ["model", "transmon_levels"], rows), None


def _bench(cfg: RunConfig, out: Path):
    o = cfg.options
    rep = bench.runtime_bench(cfg.models, cfg.params, np.linspace(o["t_min"], o["t_max"], o["n_durations"]),
                              o["amplitude"], o["repeats"], cfg.solver)
    rows = []
    for m, t in rep.timings.items():
        rows += [(m, float(d), float(w)) for d, w in zip(t.durations, t.times)]
    path = _write_rows(out / "bench.csv", ["model", "duration_ns", "wall_s"], rows)
    return path, rep.as_dict()


HANDLERS = {
    "spectra-sweep": _spectra_sweep,
    "rabi-sweep": _rabi_sweep,
    "pi2-optimize": _pi2_optimize,
    "calibrate": _calibrate,
    "detuning-map": _detuning_map,
    "gr3-compare": _gr3_compare,
    "landscape": _landscape,
    "goat-ensemble": _goat_ensemble,
    "converge-dims": _converge_dims,
    "bench": _bench,
}


def run_experiment(cfg: RunConfig) -> int:
    """Run the configured experiment, writing CSV plus a JSON sidecar. Returns an exit status."""
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        path, extra = HANDLERS[cfg.experiment](cfg, out)
        write_provenance(Path(path), cfg, extra)
    except (TransmonError, ValueError, OSError) as exc:
        log.error("%s failed: %s", cfg.experiment, exc)
        return 1
    log.info("wrote %s", path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="transmon-hierarchy",
                                     description="Driven transmon simulations across a hierarchy of models.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", type=Path, help="INI file with [params], [solver], [run] and experiment sections")
    parser.add_argument("--out", type=Path, help="output directory (default: $TRANSMON_OUT or ./results)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--model", action="append", choices=[v.value.lower() for v in Variant],
                        help="restrict to this model; repeatable")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.experiment) if args.config else RunConfig(args.experiment,
                                                                                        out_dir=default_out_dir())
    except TransmonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out is not None:
        cfg.out_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = max(1, args.threads)
    if args.model:
        cfg.models = [Variant.parse(m).value for m in args.model]
    return run_experiment(cfg)


if __name__ == "__main__":
    sys.exit(main())
