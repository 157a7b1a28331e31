"""Comparative driven-dynamics experiments across the model hierarchy."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize

from .errors import AmbiguousLabel, NoConvergence, NoCrossing, WindowTooNarrow
from .models import REFERENCE_PARAMS, EnergyParams, ModelSpec, Variant
from .propagator import SolverConfig, evolve, final_population, prepare, state_fidelity
from .pulse import DriveComponent, envelope_value, gaussian, square
from .spectra import params_for_ratio, spectral_features

RABI_DURATION = 142.2
RABI_AMP_RANGE = (0.0, 0.075)


def _spec(model) -> ModelSpec:
    return model if isinstance(model, ModelSpec) else ModelSpec(Variant.parse(model))


def _label(spec: ModelSpec) -> str:
    return spec.variant.value


@dataclass
class SweepResult:
    """Per-model values on a strictly increasing axis.

    For 2-D results ``rows`` holds the second axis and every value array has
    shape (len(rows), len(axis)); masked cells are NaN.
    """

    axis_name: str
    axis: np.ndarray
    values: dict
    rows_name: str | None = None
    rows: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float)
        if self.axis.size > 1 and np.any(np.diff(self.axis) <= 0):
            raise ValueError("sweep axis must be strictly increasing")
        if self.rows is not None:
            self.rows = np.asarray(self.rows, dtype=float)
            if self.rows.size > 1 and np.any(np.diff(self.rows) <= 0):
                raise ValueError("row axis must be strictly increasing")

    def to_csv(self, path) -> Path:
        path = Path(path)
        names = list(self.values)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            if self.rows is None:
                w.writerow([self.axis_name] + names)
                for i, x in enumerate(self.axis):
                    w.writerow([f"{x:.17g}"] + [f"{self.values[n][i]:.17g}" for n in names])
            else:
                w.writerow([self.rows_name, self.axis_name] + names)
                for r, y in enumerate(self.rows):
                    for i, x in enumerate(self.axis):
                        w.writerow([f"{y:.17g}", f"{x:.17g}"] + [f"{self.values[n][r, i]:.17g}" for n in names])
        return path

    def sidecar(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.meta, indent=2, sort_keys=True, default=str))
        return path


def _rabi_point(args):
    spec, params, duration, amp, cfg = args
    if amp == 0.0:
        return 0.0
    system = prepare(spec, params)
    return final_population(system, [gaussian(amp, duration, system.frequency())], duration, cfg=cfg)


def _run(tasks, fn, workers: int):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def rabi_amplitude_sweep(models, params: EnergyParams, duration: float = RABI_DURATION,
                         amp_range=RABI_AMP_RANGE, n_points: int = 76, cfg: SolverConfig = SolverConfig(),
                         workers: int = 1) -> SweepResult:
    """Final-time P1 against peak amplitude of a Gaussian at each model's own dressed w01."""
    if n_points < 2 or amp_range[1] <= amp_range[0] or amp_range[0] < 0:
        raise ValueError("need n_points >= 2 and 0 <= amp_min < amp_max")
    specs = [_spec(m) for m in models]
    amps = np.linspace(amp_range[0], amp_range[1], n_points)
    tasks = [(s, params, duration, float(a), cfg) for s in specs for a in amps]
    out = np.array(_run(tasks, _rabi_point, workers)).reshape(len(specs), n_points)
    values = {_label(s): out[i] for i, s in enumerate(specs)}
    meta = {"duration_ns": duration, "params": params.as_dict(), "shape": "gaussian"}
    return SweepResult("amplitude_ghz", amps, values, meta=meta)


def weak_drive_pi2_estimate(spec: ModelSpec, params: EnergyParams, duration: float) -> float:
    """Rotating-wave pulse-area estimate of the pi/2 peak amplitude (GHz)."""
    system = prepare(spec, params)
    n01 = abs(system.drive_dressed[system.dressed_index((0, 0)), system.dressed_index((1, 0))])
    t = np.linspace(0.0, duration, 4001)
    area = np.trapezoid(envelope_value(gaussian(1.0, duration, 0.0).envelope, t), t)
    return 0.25 / (n01 * area)


def optimize_pi2_amplitude(model, params: EnergyParams, duration: float = RABI_DURATION, amp_grid=None,
                           cfg: SolverConfig = SolverConfig()) -> float:
    """Amplitude minimising |P1(T) - 0.5| on the first rise of P1 against amplitude.

    Without ``amp_grid`` a coarse scan up to 1.5x the pulse-area estimate
    brackets the first crossing, which is then resolved on a 0.01 MHz grid.
    """
    spec = _spec(model)
    system = prepare(spec, params)
    w01 = system.frequency()

    def p1(a):
        return 0.0 if a == 0 else final_population(system, [gaussian(a, duration, w01)], duration, cfg=cfg)

    if amp_grid is not None:
        grid = np.asarray(amp_grid, dtype=float)
        if grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("amp_grid must be strictly increasing")
        return float(_first_rise_argmin(grid, np.array([p1(a) for a in grid])))
    a0 = weak_drive_pi2_estimate(spec, params, duration)
    coarse = np.linspace(0.0, 1.5 * a0, 16)
    pc = np.array([p1(a) for a in coarse])
    k = _first_crossing(pc)
    fine = np.union1d(np.arange(coarse[k - 1], coarse[k], 1e-5), coarse[k])
    return float(_first_rise_argmin(fine, np.array([p1(a) for a in fine]), require_start=False))


def _first_crossing(p: np.ndarray) -> int:
    """Index of the first sample reaching 0.5 while P1 is still rising."""
    for k in range(1, p.size):
        if p[k] < p[k - 1]:
            break
        if p[k] >= 0.5:
            return k
    raise NoCrossing("P1 does not reach 0.5 on the first rise of the grid")


def _first_rise_argmin(grid: np.ndarray, p: np.ndarray, require_start: bool = True) -> float:
    if require_start:
        k = _first_crossing(p)
        seg = slice(0, min(k + 2, p.size))
        if k + 1 < p.size and p[k + 1] < p[k]:
            seg = slice(0, k + 1)
    else:
        if (p.max() - 0.5) * (p.min() - 0.5) > 0:
            raise NoCrossing("fine grid does not straddle P1 = 0.5")
        seg = slice(0, p.size)
    i = int(np.argmin(np.abs(p[seg] - 0.5)))
    return grid[seg][i]


@dataclass
class CalibrationResult:
    amplitude_scale: float
    stark_shifted_freq: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.amplitude_scale > 0:
            raise ValueError("amplitude_scale must be positive")


def _with_carrier(drive: DriveComponent, carrier: float, scale: float = 1.0) -> DriveComponent:
    return DriveComponent(drive.envelope.scaled(scale), carrier, drive.phase)


def _p1_series(system, drive: DriveComponent, n_samples: int, cfg: SolverConfig) -> np.ndarray:
    duration = drive.envelope.duration
    times = np.linspace(0.0, duration, n_samples)
    Y, _ = system.propagate([drive], system.dressed_state((0, 0)), times, cfg)
    return np.abs(Y[:, system.dressed_index((1, 0))]) ** 2


AMPLITUDE_SCALE_TOL = 1e-4


def calibrate_amplitude_scale(model_a, model_b, params, drive: DriveComponent, n_samples: int = 100,
                              bracket=(0.9, 1.1), cfg: SolverConfig = SolverConfig()) -> float:
    """Scale s on model_b's drive amplitude that best reproduces model_a's P1(t).

    ``params`` is one EnergyParams or a pair (params_a, params_b). model_b is
    driven at the same detuning from its own dressed w01 as ``drive`` is from
    model_a's. The least-squares mismatch is minimised by golden-section search.
    """
    pa, pb = params if isinstance(params, tuple) else (params, params)
    sys_a = prepare(_spec(model_a), pa)
    sys_b = prepare(_spec(model_b), pb)
    carrier_b = drive.carrier_freq + sys_b.frequency() - sys_a.frequency()
    target = _p1_series(sys_a, drive, n_samples, cfg)

    def mismatch(s):
        if s <= 0:
            return np.inf
        return float(np.mean((_p1_series(sys_b, _with_carrier(drive, carrier_b, s), n_samples, cfg) - target) ** 2))

    res = optimize.minimize_scalar(mismatch, bracket=bracket, method="golden", tol=AMPLITUDE_SCALE_TOL / 2)
    if not res.success:
        raise NoConvergence(f"amplitude-scale search failed: {res.message}")
    return float(res.x)


def rabi_period(system, amplitude: float) -> float:
    """Resonant rotating-wave Rabi period (ns) for a square drive of ``amplitude``."""
    n01 = abs(system.drive_dressed[system.dressed_index((0, 0)), system.dressed_index((1, 0))])
    return 1.0 / (amplitude * n01)


def _peak(values: np.ndarray) -> float:
    """Maximum of uniformly sampled data, refined by a parabola through the top three samples."""
    k = int(np.argmax(values))
    if k == 0 or k == values.size - 1:
        return float(values[k])
    y0, y1, y2 = values[k - 1: k + 2]
    denom = y0 - 2 * y1 + y2
    if denom >= 0:
        return float(y1)
    return float(y1 - 0.125 * (y0 - y2) ** 2 / denom)


STARK_XTOL = 1e-5


def calibrate_stark_frequency(model, params: EnergyParams, amplitude: float, freq_window, n_scan: int = 41,
                              n_samples: int = 201, cfg: SolverConfig = SolverConfig()) -> float:
    """Drive frequency maximising the peak P1 reached within one Rabi cycle.

    A square pulse lasting one resonant Rabi period is scanned over
    ``freq_window``; around the best scan point the maximum is refined by
    bounded successive parabolic interpolation to 10 kHz.
    """
    system = prepare(_spec(model), params)
    lo, hi = map(float, freq_window)
    w01 = system.frequency()
    if not lo < w01 < hi:
        raise ValueError(f"window [{lo}, {hi}] does not bracket the dressed qubit frequency {w01}")
    if amplitude <= 0:
        raise ValueError("amplitude must be positive")
    period = rabi_period(system, amplitude)
    times = np.linspace(0.0, period, n_samples)
    i1 = system.dressed_index((1, 0))
    psi0 = system.dressed_state((0, 0))

    def contrast(f):
        Y, _ = system.propagate([square(amplitude, period, f)], psi0, times, cfg)
        return _peak(np.abs(Y[:, i1]) ** 2)

    freqs = np.linspace(lo, hi, n_scan)
    peak = np.array([contrast(f) for f in freqs])
    k = int(np.argmax(peak))
    if k == 0 or k == n_scan - 1:
        raise WindowTooNarrow(f"contrast maximum at window edge {freqs[k]:.6f} GHz")
    res = optimize.minimize_scalar(lambda f: -contrast(f), bounds=(freqs[k - 1], freqs[k + 1]), method="bounded",
                                   options={"xatol": STARK_XTOL})
    return float(res.x)


def match_features(target_omega01: float, target_alpha: float, spec: ModelSpec, seed: EnergyParams,
                   tol: float = 1e-6) -> EnergyParams:
    """(E_C, E_J) for ``spec`` reproducing dressed w01 and anharmonicity to ``tol`` GHz."""

    def residual(x):
        p = seed.replace(ec=float(x[0]), ej=float(x[1]))
        f = spectral_features(spec, p)
        return [f.omega01 - target_omega01, f.anharmonicity - target_alpha]

    ec0 = -target_alpha
    x0 = [ec0, (target_omega01 + ec0) ** 2 / (8 * ec0)]
    sol = optimize.root(residual, x0, method="hybr", options={"xtol": 1e-13})
    if not np.all(np.isfinite(sol.x)) or np.max(np.abs(residual(sol.x))) > tol:
        raise NoConvergence(f"feature match failed for {spec.variant.value}: {sol.message}")
    return seed.replace(ec=float(sol.x[0]), ej=float(sol.x[1]))


# Detuning-map defaults.
MAP_DURATION = 5.0
MAP_AMPLITUDE = 0.19
MAP_SAMPLES = 50
MAP_DETUNINGS = (-1.5, 0.5, 120)
MAP_RATIOS = (20.0, 130.0, 40)


@dataclass
class DetuningRow:
    ratio: float
    infidelity: np.ndarray
    reference_params: EnergyParams | None = None
    approx_params: EnergyParams | None = None
    calibration: CalibrationResult | None = None
    masked: str | None = None


def detuned_pair(ratio: float, base: EnergyParams, reference=Variant.DO3, approx=Variant.GR):
    """Reference-model params at E_J/E_C = ratio (E_C held at the base value) and
    approximate-model params matching its dressed w01 and anharmonicity."""
    ref_spec, app_spec = _spec(reference), _spec(approx)
    p_ref = params_for_ratio("constant_anharm", ratio / base.ratio, base)
    feats = spectral_features(ref_spec, p_ref)
    p_app = match_features(feats.omega01, feats.anharmonicity, app_spec, p_ref)
    return ref_spec, p_ref, app_spec, p_app


def calibrate_pair(ref_spec, p_ref, app_spec, p_app, amplitude: float, duration: float,
                   cfg: SolverConfig = SolverConfig()) -> CalibrationResult:
    """Amplitude scale for the approximate model, then each model's Stark-shifted frequency."""
    sys_ref = prepare(ref_spec, p_ref)
    w_ref = sys_ref.frequency()
    scale = calibrate_amplitude_scale(ref_spec, app_spec, (p_ref, p_app), square(amplitude, duration, w_ref), cfg=cfg)
    freqs = {}
    for spec, p, amp in ((ref_spec, p_ref, amplitude), (app_spec, p_app, scale * amplitude)):
        system = prepare(spec, p)
        half = amp * abs(system.drive_dressed[system.dressed_index((0, 0)), system.dressed_index((1, 0))])
        w = system.frequency()
        freqs[_label(spec)] = calibrate_stark_frequency(spec, p, amp, (w - half, w + half), cfg=cfg)
    return CalibrationResult(scale, freqs)


def detuning_row(ratio: float, detunings, base: EnergyParams, duration: float = MAP_DURATION,
                 amplitude: float = MAP_AMPLITUDE, n_samples: int = MAP_SAMPLES, reference=Variant.DO3,
                 approx=Variant.GR, cfg: SolverConfig = SolverConfig()) -> DetuningRow:
    """Max-over-time infidelity between calibrated models for one E_J/E_C value."""
    detunings = np.asarray(detunings, dtype=float)
    try:
        ref_spec, p_ref, app_spec, p_app = detuned_pair(ratio, base, reference, approx)
        cal = calibrate_pair(ref_spec, p_ref, app_spec, p_app, amplitude, duration, cfg)
        systems = (prepare(ref_spec, p_ref), prepare(app_spec, p_app))
        amps = (amplitude, cal.amplitude_scale * amplitude)
        carriers = (cal.stark_shifted_freq[_label(ref_spec)], cal.stark_shifted_freq[_label(app_spec)])
        psi0 = [s.superposition({(0, 0): 1.0, (1, 0): 1.0}) for s in systems]
    except (AmbiguousLabel, NoConvergence, WindowTooNarrow) as exc:
        return DetuningRow(ratio, np.full(detunings.size, np.nan), masked=f"{type(exc).__name__}: {exc}")
    samples = SolverConfig(cfg.rel_tol, cfg.abs_tol, n_samples, cfg.max_steps)
    out = np.empty(detunings.size)
    for i, d in enumerate(detunings):
        recs = [evolve(s.h0, s.h_drive, [square(a, duration, f + d)], p, duration, samples, system=s)
                for s, a, f, p in zip(systems, amps, carriers, psi0)]
        out[i] = max(1.0 - state_fidelity(recs[0].labelled_state(j), recs[1].labelled_state(j))
                     for j in range(n_samples))
    return DetuningRow(ratio, out, p_ref, p_app, cal)


def _row_task(args):
    return detuning_row(*args)


def detuning_infidelity_map(ratios=None, detunings=None, duration: float = MAP_DURATION,
                            base_amp: float = MAP_AMPLITUDE, base: EnergyParams | None = None,
                            n_samples: int = MAP_SAMPLES, cfg: SolverConfig = SolverConfig(),
                            workers: int = 1) -> SweepResult:
    """DO3-vs-GR infidelity over (E_J/E_C, detuning) for calibrated square pulses.

    Rows whose labelling or calibration fails (qubit near the resonator) are
    NaN and listed in ``meta['masked']``.
    """
    base = base or REFERENCE_PARAMS
    ratios = np.linspace(*MAP_RATIOS) if ratios is None else np.asarray(ratios, dtype=float)
    detunings = np.linspace(*MAP_DETUNINGS) if detunings is None else np.asarray(detunings, dtype=float)
    tasks = [(float(r), detunings, base, duration, base_amp, n_samples, Variant.DO3, Variant.GR, cfg) for r in ratios]
    rows = _run(tasks, _row_task, workers)
    grid = np.vstack([r.infidelity for r in rows])
    meta = {
        "duration_ns": duration,
        "base_amp_ghz": base_amp,
        "n_samples": n_samples,
        "base_params": base.as_dict(),
        "masked": {f"{r.ratio:.6g}": r.masked for r in rows if r.masked},
        "calibration": {
            f"{r.ratio:.6g}": {"amplitude_scale": r.calibration.amplitude_scale, **r.calibration.stark_shifted_freq}
            for r in rows if r.calibration
        },
    }
    return SweepResult("detuning_ghz", detunings, {"infidelity": grid}, rows_name="ej_over_ec", rows=ratios, meta=meta)


def gr3_delta_curves(params: EnergyParams, duration: float = RABI_DURATION, amp_range=RABI_AMP_RANGE,
                     n_points: int = 76, cfg: SolverConfig = SolverConfig(), workers: int = 1) -> SweepResult:
    """P1 differences GR3 - DO3 and GR3 - GR over a Gaussian amplitude sweep."""
    sweep = rabi_amplitude_sweep([Variant.GR3, Variant.DO3, Variant.GR], params, duration, amp_range, n_points,
                                 cfg, workers)
    v = sweep.values
    values = {"delta_GR3_DO3": v["GR3"] - v["DO3"], "delta_GR3_GR": v["GR3"] - v["GR"]}
    return SweepResult(sweep.axis_name, sweep.axis, values, meta=sweep.meta)


def delta(p_m1: np.ndarray, p_m2: np.ndarray) -> np.ndarray:
    """Population difference P_M1 - P_M2."""
    return np.asarray(p_m1) - np.asarray(p_m2)
