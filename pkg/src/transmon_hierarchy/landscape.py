"""Control landscapes, gradient (GOAT-style) optimisation over DRAG
parameters, and trajectory statistics.

Control points live in a nondimensional plane: amplitude in units of
``AMP_UNIT`` (1 MHz) and DRAG coefficient in units of ``BETA_UNIT`` (1 ns).
Path lengths, step sizes and proximity tests are all measured there.
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize

from .errors import DegenerateTrajectory, InsufficientEndpoints
from .experiments import _run, _spec
from .models import EnergyParams
from .propagator import SolverConfig, final_population, prepare
from .pulse import drag, envelope_value, gaussian

AMP_UNIT = 1e-3
BETA_UNIT = 1.0
DRAG_DURATION = 20.0
TARGET_INFIDELITY = 5e-5
MAX_STEPS = 100
INITIAL_STEP = 0.1
ARMIJO_C = 1e-4
MAX_BACKTRACKS = 30
# AdoptedPath radius: 1% of the unit of the nondimensional coordinates.
ADOPT_RADIUS = 0.01
START_SPREAD = 0.10


@dataclass
class LandscapeGrid:
    amp_axis: np.ndarray
    time_axis: np.ndarray
    p1: np.ndarray
    model: str = ""

    def __post_init__(self):
        self.amp_axis = np.asarray(self.amp_axis, dtype=float)
        self.time_axis = np.asarray(self.time_axis, dtype=float)
        self.p1 = np.asarray(self.p1, dtype=float)
        if self.p1.shape != (self.amp_axis.size, self.time_axis.size):
            raise ValueError("p1 shape does not match (amp_axis, time_axis)")
        if np.any(self.p1 < -1e-9) or np.any(self.p1 > 1 + 1e-9):
            raise ValueError("populations outside [0, 1]")

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["amplitude_ghz", "duration_ns", "p1"])
            for i, a in enumerate(self.amp_axis):
                for j, t in enumerate(self.time_axis):
                    w.writerow([f"{a:.17g}", f"{t:.17g}", f"{self.p1[i, j]:.17g}"])
        return path


def _landscape_cell(args):
    spec, params, amp, duration, cfg = args
    if amp == 0.0:
        return 0.0
    system = prepare(spec, params)
    return final_population(system, [gaussian(amp, duration, system.frequency())], duration, cfg=cfg)


def landscape_grid(model, params: EnergyParams, amp_axis, time_axis, cfg: SolverConfig = SolverConfig(),
                   workers: int = 1) -> LandscapeGrid:
    """Final dressed |1,0> population for Gaussian pulses over (amplitude, duration)."""
    amp_axis = np.asarray(amp_axis, dtype=float)
    time_axis = np.asarray(time_axis, dtype=float)
    if amp_axis.size == 0 or time_axis.size == 0:
        raise ValueError("axes must be non-empty")
    if np.any(amp_axis < 0) or np.any(time_axis <= 0):
        raise ValueError("amplitudes must be non-negative and durations positive")
    spec = _spec(model)
    tasks = [(spec, params, float(a), float(t), cfg) for a in amp_axis for t in time_axis]
    p1 = np.array(_run(tasks, _landscape_cell, workers)).reshape(amp_axis.size, time_axis.size)
    return LandscapeGrid(amp_axis, time_axis, p1, spec.variant.value)


def landscape_diff(a: LandscapeGrid, b: LandscapeGrid) -> np.ndarray:
    if not (np.array_equal(a.amp_axis, b.amp_axis) and np.array_equal(a.time_axis, b.time_axis)):
        raise ValueError("landscapes are on different axes")
    return np.abs(a.p1 - b.p1)


@dataclass(frozen=True)
class ControlPoint:
    amplitude: float
    beta: float

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError("amplitude must be positive")

    def coords(self) -> np.ndarray:
        return np.array([self.amplitude / AMP_UNIT, self.beta / BETA_UNIT])

    @classmethod
    def from_coords(cls, x) -> "ControlPoint":
        return cls(float(x[0]) * AMP_UNIT, float(x[1]) * BETA_UNIT)


class Termination(str, enum.Enum):
    CONVERGED = "Converged"
    STEP_LIMIT = "StepLimit"
    ADOPTED_PATH = "AdoptedPath"


@dataclass
class Trajectory:
    points: list
    objectives: list
    termination: Termination
    started_converged: bool = False

    def __post_init__(self):
        if len(self.points) != len(self.objectives):
            raise ValueError("points and objectives differ in length")

    @property
    def start(self) -> ControlPoint:
        return self.points[0]

    @property
    def end(self) -> ControlPoint:
        return self.points[-1]

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "amplitude_ghz", "beta_ns", "p1"])
            for k, (p, f) in enumerate(zip(self.points, self.objectives)):
                w.writerow([k, f"{p.amplitude:.17g}", f"{p.beta:.17g}", f"{f:.17g}"])
        return path


@dataclass
class DragProblem:
    """P1 after a DRAG pulse at the dressed qubit frequency, from the dressed ground state."""

    model: object
    params: EnergyParams
    duration: float = DRAG_DURATION
    cfg: SolverConfig = SolverConfig()

    def __post_init__(self):
        self.spec = _spec(self.model)
        self.system = prepare(self.spec, self.params)
        self.carrier = self.system.frequency()
        self._i1 = self.system.dressed_index((1, 0))
        self._psi0 = self.system.dressed_state((0, 0))
        self._times = np.array([0.0, self.duration])

    def objective(self, point: ControlPoint) -> float:
        return final_population(self.system, [self._pulse(point)], self.duration, cfg=self.cfg)

    def _pulse(self, point: ControlPoint):
        return drag(point.amplitude, point.beta, self.duration, self.carrier)

    def value_and_gradient(self, point: ControlPoint) -> tuple[float, float, float]:
        """(P1, dP1/dOmega [1/GHz], dP1/dbeta [1/ns]) by forward sensitivities."""
        Y, _ = self.system.propagate([self._pulse(point)], self._psi0, self._times, self.cfg,
                                     sensitivities=[(0, 0), (1, 0)])
        m = self.system.h0.dim
        c = Y[-1, self._i1]
        d_amp = Y[-1, m + self._i1]
        d_beta = Y[-1, 2 * m + self._i1]
        return (float(abs(c) ** 2), float(2 * np.real(np.conj(c) * d_amp)), float(2 * np.real(np.conj(c) * d_beta)))

    def coords_value_and_gradient(self, x) -> tuple[float, np.ndarray]:
        p, da, db = self.value_and_gradient(ControlPoint.from_coords(x))
        return p, np.array([da * AMP_UNIT, db * BETA_UNIT])


def objective_and_gradient(model, params: EnergyParams, point: ControlPoint, duration: float = DRAG_DURATION,
                           cfg: SolverConfig = SolverConfig()) -> tuple[float, float, float]:
    return DragProblem(model, params, duration, cfg).value_and_gradient(point)


@dataclass(frozen=True)
class GoatSettings:
    target: float = 1.0 - TARGET_INFIDELITY
    max_steps: int = MAX_STEPS
    initial_step: float = INITIAL_STEP
    armijo_c: float = ARMIJO_C
    adopt_radius: float = 0.0
    policy: str = "gradient"

    def __post_init__(self):
        if self.policy not in ("gradient", "length"):
            raise ValueError(f"unknown step policy {self.policy!r}")


def goat_optimize(model, params: EnergyParams, start: ControlPoint, duration: float = DRAG_DURATION,
                  settings: GoatSettings = GoatSettings(), converged_endpoints=(), problem: DragProblem | None = None,
                  cfg: SolverConfig = SolverConfig()) -> Trajectory:
    """Steepest ascent on P1 with Armijo backtracking.

    With the default ``gradient`` policy the trial step is alpha * grad,
    alpha starting at ``initial_step`` and, after each accepted step, at twice
    the last accepted value; it is halved until the Armijo condition holds.
    The ``length`` policy instead tries a fixed step length ``initial_step``
    along the unit gradient. Terminates when P1 exceeds ``target``
    (Converged), when the current point comes within ``adopt_radius`` of any
    of ``converged_endpoints`` (AdoptedPath), or after ``max_steps`` steps
    (StepLimit).
    """
    problem = problem or DragProblem(model, params, duration, cfg)
    ends = np.array([e.coords() for e in converged_endpoints]).reshape(-1, 2)
    x = start.coords()
    f, g = problem.coords_value_and_gradient(x)
    points, objectives = [start], [f]
    started = f > settings.target
    alpha = settings.initial_step

    def adopted(x):
        return settings.adopt_radius > 0 and ends.size and np.min(np.linalg.norm(ends - x, axis=1)) < settings.adopt_radius

    def finish(kind):
        return Trajectory(points, objectives, kind, started)

    while True:
        if f > settings.target:
            return finish(Termination.CONVERGED)
        if len(points) > 1 and adopted(x):
            return finish(Termination.ADOPTED_PATH)
        if len(points) > settings.max_steps:
            return finish(Termination.STEP_LIMIT)
        gnorm = float(np.linalg.norm(g))
        if gnorm == 0.0:
            return finish(Termination.STEP_LIMIT)
        if settings.policy == "length":
            direction, t = g / gnorm, settings.initial_step
            gain = gnorm
        else:
            direction, t = g, alpha
            gain = gnorm ** 2
        for _ in range(MAX_BACKTRACKS):
            x_new = x + t * direction
            if x_new[0] > 0:
                f_new, g_new = problem.coords_value_and_gradient(x_new)
                if f_new >= f + settings.armijo_c * t * gain:
                    break
            t *= 0.5
        else:
            return finish(Termination.STEP_LIMIT)
        alpha = 2.0 * t
        x, f, g = x_new, f_new, g_new
        points.append(ControlPoint.from_coords(x))
        objectives.append(f)


def r_metric(traj: Trajectory) -> float:
    """Path length over start-to-end distance in nondimensional coordinates.

    A trajectory that never moved (a single point) is straight by convention
    and returns 1.
    """
    pts = np.array([p.coords() for p in traj.points])
    if len(pts) == 1:
        return 1.0
    path = float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
    chord = float(np.linalg.norm(pts[-1] - pts[0]))
    if chord == 0.0:
        raise DegenerateTrajectory("trajectory ends where it started")
    return path / chord


def locate_optimum(model, params: EnergyParams, duration: float = DRAG_DURATION,
                   cfg: SolverConfig = SolverConfig()) -> ControlPoint:
    """DRAG optimum: amplitude scan at beta = 0, then gradient-based refinement."""
    problem = DragProblem(model, params, duration, cfg)
    n01 = abs(problem.system.drive_dressed[problem.system.dressed_index((0, 0)), problem._i1])
    t = np.linspace(0.0, duration, 2001)
    area = np.trapezoid(envelope_value(gaussian(1.0, duration, 0.0).envelope, t), t)
    a_pi = 0.5 / (n01 * area)
    amps = np.linspace(0.5 * a_pi, 1.5 * a_pi, 41)
    best = amps[int(np.argmax([problem.objective(ControlPoint(a, 0.0)) for a in amps]))]

    def neg(x):
        f, g = problem.coords_value_and_gradient(x)
        return -f, -g

    res = optimize.minimize(neg, [best / AMP_UNIT, 0.0], jac=True, method="BFGS", options={"gtol": 1e-10})
    return ControlPoint.from_coords(res.x)


def sample_starts(optimum: ControlPoint, n: int, seed: int, spread: float = START_SPREAD) -> list:
    """Gaussian starts around ``optimum`` with per-coordinate sigma = spread * |coordinate|.

    Member i draws from its own stream seeded by (seed, i), so any subset of
    the ensemble is reproducible independently.
    """
    centre = optimum.coords()
    sigma = spread * np.abs(centre)
    out = []
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        x = rng.normal(centre, sigma)
        x[0] = max(x[0], 1e-6)
        out.append(ControlPoint.from_coords(x))
    return out


@dataclass
class EnsembleResult:
    model: str
    optimum: ControlPoint
    trajectories: list
    r_values: np.ndarray
    included: np.ndarray
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(np.mean(self.r_values[self.included]))

    @property
    def std(self) -> float:
        return float(np.std(self.r_values[self.included]))

    def counts(self) -> dict:
        out = {t.value: 0 for t in Termination}
        for tr in self.trajectories:
            out[tr.termination.value] += 1
        out["started_converged"] = sum(tr.started_converged for tr in self.trajectories)
        return out

    def summary(self) -> dict:
        return {
            "model": self.model,
            "seed": self.seed,
            "n": len(self.trajectories),
            "n_included": int(self.included.sum()),
            "mean_r": self.mean,
            "std_r": self.std,
            "optimum": {"amplitude_ghz": self.optimum.amplitude, "beta_ns": self.optimum.beta},
            "terminations": self.counts(),
            **self.meta,
        }

    def write(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / f"trajectories_{self.model}.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trajectory", "step", "amplitude_ghz", "beta_ns", "p1", "termination"])
            for i, tr in enumerate(self.trajectories):
                for k, (p, f) in enumerate(zip(tr.points, tr.objectives)):
                    w.writerow([i, k, f"{p.amplitude:.17g}", f"{p.beta:.17g}", f"{f:.17g}", tr.termination.value])
        path = out_dir / f"ensemble_{self.model}.json"
        path.write_text(json.dumps(self.summary(), indent=2))
        return path


def trajectory_ensemble(model, params: EnergyParams, optimum: ControlPoint | None = None, n: int = 1000,
                        seed: int = 0, duration: float = DRAG_DURATION, settings: GoatSettings | None = None,
                        cfg: SolverConfig = SolverConfig()) -> EnsembleResult:
    """Optimise ``n`` seeded starts around ``optimum`` and collect R_gamma.

    Members run in index order; each may adopt the endpoints of earlier
    Converged members. R_gamma statistics exclude members that started inside
    the termination region and StepLimit members that end far from every
    converged endpoint.
    """
    spec = _spec(model)
    problem = DragProblem(spec, params, duration, cfg)
    optimum = optimum or locate_optimum(spec, params, duration, cfg)
    if settings is None:
        settings = GoatSettings(adopt_radius=ADOPT_RADIUS)
    trajs = []
    converged = []
    for start in sample_starts(optimum, n, seed):
        tr = goat_optimize(spec, params, start, duration, settings, converged, problem)
        trajs.append(tr)
        if tr.termination is Termination.CONVERGED and not tr.started_converged:
            converged.append(tr.end)
    ends = np.array([e.coords() for e in converged]).reshape(-1, 2)
    r_values = np.empty(n)
    included = np.zeros(n, dtype=bool)
    for i, tr in enumerate(trajs):
        r_values[i] = r_metric(tr) if len(tr.points) > 1 else 1.0
        if tr.started_converged:
            continue
        if tr.termination is Termination.STEP_LIMIT:
            near = ends.size and np.min(np.linalg.norm(ends - tr.end.coords(), axis=1)) < settings.adopt_radius
            if not near:
                continue
        included[i] = True
    meta = {"duration_ns": duration, "adopt_radius": settings.adopt_radius, "spread": START_SPREAD}
    return EnsembleResult(spec.variant.value, optimum, trajs, r_values, included, seed, meta)


@dataclass
class EndpointStats:
    centroid: ControlPoint
    axes: np.ndarray
    extents: np.ndarray
    amp_extent: float
    beta_extent: float
    n: int


MIN_ENDPOINTS = 10


def endpoint_stats(trajs, scale=None) -> EndpointStats:
    """Centroid and principal-component extents of Converged endpoints.

    Extents are standard deviations along each principal axis, in
    nondimensional coordinates divided by ``scale`` (default 1 per axis).
    ``amp_extent`` and ``beta_extent`` are the standard deviations along
    each coordinate axis in the same units.
    """
    pts = np.array([t.end.coords() for t in trajs if t.termination is Termination.CONVERGED])
    if len(pts) < MIN_ENDPOINTS:
        raise InsufficientEndpoints(f"need at least {MIN_ENDPOINTS} converged endpoints, got {len(pts)}")
    scale = np.ones(2) if scale is None else np.asarray(scale, dtype=float)
    centre = pts.mean(axis=0)
    z = (pts - centre) / scale
    cov = np.cov(z.T, bias=True)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    extents = np.sqrt(np.clip(vals[order], 0.0, None))
    sd = z.std(axis=0)
    return EndpointStats(ControlPoint.from_coords(centre), vecs[:, order].T, extents, float(sd[0]), float(sd[1]),
                         len(pts))
