"""Wall-time scaling of lab-frame propagation per model."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import TimerResolutionError
from .models import REFERENCE_PARAMS, EnergyParams, ModelSpec, Variant, cpb_eigensystem
from .propagator import SolverConfig, evolve, prepare
from .pulse import gaussian

BENCH_MODELS = (Variant.CPB, Variant.DO3, Variant.GR, Variant.R)
# Recorded output spacing; fixed so that work grows linearly with duration.
OUTPUT_SPACING = 0.1
MIN_TICKS = 10
MIN_SAMPLES = 5


@dataclass
class ModelTiming:
    durations: np.ndarray
    times: np.ndarray
    slope: float
    intercept: float
    r_squared: float


@dataclass
class BenchReport:
    timings: dict
    speedups: dict
    normalized: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "models": {
                m: {"durations_ns": t.durations.tolist(), "wall_s": t.times.tolist(), "slope_s_per_ns": t.slope,
                    "intercept_s": t.intercept, "r_squared": t.r_squared}
                for m, t in self.timings.items()
            },
            "speedup_vs_CPB": self.speedups,
            "normalized_to_CPB_max": {m: v.tolist() for m, v in self.normalized.items()},
            **self.meta,
        }

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.as_dict(), indent=2))
        return path


def _fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def time_evolution(spec: ModelSpec, params: EnergyParams, duration: float, amp: float, cfg: SolverConfig) -> float:
    """Wall time of one evolution, Hamiltonian construction included."""
    resolution = time.get_clock_info("perf_counter").resolution
    prepare.cache_clear()
    cpb_eigensystem.cache_clear()
    t0 = time.perf_counter()
    system = prepare(spec, params)
    evolve(system.h0, system.h_drive, [gaussian(amp, duration, system.frequency())], system.dressed_state((0, 0)),
           duration, cfg, system=system)
    elapsed = time.perf_counter() - t0
    if elapsed < MIN_TICKS * resolution:
        raise TimerResolutionError(f"run took {elapsed:.3g} s, under {MIN_TICKS} timer ticks")
    return elapsed


def runtime_bench(models=BENCH_MODELS, params: EnergyParams | None = None, durations=None, amp: float = 0.075,
                  repeats: int = 3, base_cfg: SolverConfig = SolverConfig()) -> BenchReport:
    """Median-of-repeats wall time against pulse duration, with linear fits.

    Speedups are CPB's slope divided by each model's slope. Runs are serial.
    """
    params = params or REFERENCE_PARAMS
    durations = np.linspace(10.0, 150.0, 8) if durations is None else np.asarray(durations, dtype=float)
    if durations.size < MIN_SAMPLES or np.any(durations <= 0):
        raise ValueError(f"need at least {MIN_SAMPLES} positive durations")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    specs = [m if isinstance(m, ModelSpec) else ModelSpec(Variant.parse(m)) for m in models]
    # compile and warm caches outside the timed region
    for spec in specs:
        time_evolution(spec, params, float(durations[0]), amp, base_cfg)
    timings = {}
    for spec in specs:
        med = []
        for d in durations:
            cfg = SolverConfig(base_cfg.rel_tol, base_cfg.abs_tol, int(round(d / OUTPUT_SPACING)) + 1, base_cfg.max_steps)
            med.append(float(np.median([time_evolution(spec, params, float(d), amp, cfg) for _ in range(repeats)])))
        med = np.array(med)
        timings[spec.variant.value] = ModelTiming(durations, med, *_fit(durations, med))
    ref = timings.get("CPB")
    speedups, normalized = {}, {}
    if ref is not None:
        speedups = {m: ref.slope / t.slope for m, t in timings.items()}
        normalized = {m: t.times / ref.times[-1] for m, t in timings.items()}
    meta = {"amp_ghz": amp, "repeats": repeats, "output_spacing_ns": OUTPUT_SPACING,
            "dims": {s.variant.value: s.dim for s in specs}}
    return BenchReport(timings, speedups, normalized, meta)
