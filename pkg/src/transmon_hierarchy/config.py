"""Run configuration: INI files with one section per experiment.

Example::

    [params]
    ec = 0.348
    ej = 10.158
    g = 0.02
    omega_r = 6.99

    [solver]
    rel_tol = 1e-6

    [rabi-sweep]
    n_points = 76
"""

from __future__ import annotations

import configparser
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .models import REFERENCE_PARAMS, EnergyParams, Variant
from .propagator import SolverConfig

EXPERIMENTS = (
    "spectra-sweep",
    "rabi-sweep",
    "pi2-optimize",
    "calibrate",
    "detuning-map",
    "gr3-compare",
    "landscape",
    "goat-ensemble",
    "converge-dims",
    "bench",
)

OUT_ENV = "TRANSMON_OUT"

# key -> (type, default); durations and counts are checked for positivity
OPTIONS = {
    "spectra-sweep": {"mode": (str, "constant_freq"), "n_exp": (list, [1, 2, 4, 8, 16, 32, 64]),
                      "resonator_levels": (int, 3)},
    "rabi-sweep": {"duration": (float, 142.2), "amp_min": (float, 0.0), "amp_max": (float, 0.075),
                   "n_points": (int, 76)},
    "pi2-optimize": {"duration": (float, 142.2)},
    "calibrate": {"model_a": (str, "DO3"), "model_b": (str, "GR"), "amplitude": (float, 0.19),
                  "duration": (float, 5.0)},
    "detuning-map": {"ratio_min": (float, 20.0), "ratio_max": (float, 130.0), "n_ratios": (int, 40),
                     "det_min": (float, -1.5), "det_max": (float, 0.5), "n_det": (int, 120),
                     "duration": (float, 5.0), "amplitude": (float, 0.19), "n_samples": (int, 50)},
    "gr3-compare": {"duration": (float, 142.2), "amp_min": (float, 0.0), "amp_max": (float, 0.075),
                    "n_points": (int, 76)},
    "landscape": {"amp_min": (float, 0.0), "amp_max": (float, 0.075), "n_amp": (int, 100),
                  "t_min": (float, 5.0), "t_max": (float, 150.0), "n_t": (int, 100)},
    "goat-ensemble": {"n": (int, 1000), "duration": (float, 20.0)},
    "converge-dims": {"tol": (float, 1e-5), "max_levels": (int, 20)},
    "bench": {"t_min": (float, 10.0), "t_max": (float, 150.0), "n_durations": (int, 8), "amplitude": (float, 0.075),
              "repeats": (int, 3)},
}
PARAM_KEYS = ("ec", "ej", "g", "omega_r", "ng")
SOLVER_KEYS = {"rel_tol": float, "abs_tol": float, "output_points": int}
RUN_KEYS = {"models": list, "seed": int, "threads": int, "out": str}
POSITIVE = re.compile(r"^(duration|n_.*|n|repeats|max_levels|tol|t_min|t_max|resonator_levels|amplitude)$")

DEFAULT_MODELS = {
    "spectra-sweep": ["CPB", "DO3", "GR", "R"],
    "rabi-sweep": ["CPB", "DO3", "GR", "R"],
    "pi2-optimize": ["CPB", "DO3", "GR", "R"],
    "landscape": ["DO3", "GR"],
    "goat-ensemble": ["CPB", "DO3", "GR", "R"],
    "converge-dims": ["CPB", "DO3", "GR", "R"],
    "bench": ["CPB", "DO3", "GR", "R"],
}


@dataclass
class RunConfig:
    experiment: str
    params: EnergyParams = REFERENCE_PARAMS
    models: list = field(default_factory=list)
    options: dict = field(default_factory=dict)
    solver: SolverConfig = SolverConfig()
    out_dir: Path = Path("results")
    seed: int = 0
    threads: int = 1
    source: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        defaults = {k: d for k, (_, d) in OPTIONS[self.experiment].items()}
        self.options = {**defaults, **self.options}
        if not self.models:
            self.models = list(DEFAULT_MODELS.get(self.experiment, []))
        self.models = [Variant.parse(m).value for m in self.models]

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": self.params.as_dict(),
            "models": self.models,
            "options": self.options,
            "solver": {"rel_tol": self.solver.rel_tol, "abs_tol": self.solver.abs_tol,
                       "output_points": self.solver.output_points},
            "seed": self.seed,
            "threads": self.threads,
            "config_file": self.source,
        }


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "results"))


def _key_lines(text: str) -> dict:
    """(section, key) -> 1-based line number, for error messages."""
    out, section = {}, None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
        elif s and not s.startswith(("#", ";")) and ("=" in s or ":" in s):
            key = re.split(r"[=:]", s, 1)[0].strip().lower()
            out.setdefault((section, key), n)
    return out


def _convert(raw: str, kind, where: str):
    try:
        if kind is list:
            return [x.strip() for x in raw.split(",") if x.strip()]
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {kind.__name__}") from None


def load_config(path, experiment: str | None = None) -> RunConfig:
    """Parse and validate an INI run configuration.

    ``experiment`` selects the section whose options apply; otherwise the
    ``experiment`` key of ``[run]`` is used.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    text = path.read_text()
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        loc = f"{path}:{line}" if line else str(path)
        raise ConfigError(f"{loc}: {exc.message if hasattr(exc, 'message') else exc}") from None
    lines = _key_lines(text)

    def where(section, key):
        n = lines.get((section, key))
        return f"{path}:{n} [{section}] {key}" if n else f"{path} [{section}] {key}"

    known = {"params": set(PARAM_KEYS), "solver": set(SOLVER_KEYS), "run": set(RUN_KEYS) | {"experiment"}}
    known.update({name: set(opts) for name, opts in OPTIONS.items()})
    for section in parser.sections():
        if section not in known:
            n = next((i for i, ln in enumerate(text.splitlines(), 1) if ln.strip() == f"[{section}]"), None)
            raise ConfigError(f"{path}:{n}: unknown section [{section}]")
        for key in parser[section]:
            if key not in known[section]:
                raise ConfigError(f"{where(section, key)}: unknown key")

    run = parser["run"] if parser.has_section("run") else {}
    experiment = experiment or run.get("experiment")
    if experiment is None:
        raise ConfigError(f"{path}: no experiment selected")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"{path}: unknown experiment {experiment!r}")

    params = REFERENCE_PARAMS
    if parser.has_section("params"):
        sec = parser["params"]
        values = {}
        for key in ("ec", "ej", "g", "omega_r"):
            if key not in sec:
                raise ConfigError(f"{path} [params]: missing required key '{key}'")
            values[key] = _convert(sec[key], float, where("params", key))
        values["ng"] = _convert(sec.get("ng", "0"), float, where("params", "ng"))
        try:
            params = EnergyParams(**values)
        except ValueError as exc:
            raise ConfigError(f"{path} [params]: {exc}") from None

    solver = SolverConfig()
    if parser.has_section("solver"):
        kw = {k: _convert(v, SOLVER_KEYS[k], where("solver", k)) for k, v in parser["solver"].items()}
        try:
            solver = SolverConfig(**kw)
        except ValueError as exc:
            raise ConfigError(f"{path} [solver]: {exc}") from None

    options = {}
    if parser.has_section(experiment):
        for key, raw in parser[experiment].items():
            kind = OPTIONS[experiment][key][0]
            value = _convert(raw, kind, where(experiment, key))
            if POSITIVE.match(key) and not (isinstance(value, list) or value > 0):
                raise ConfigError(f"{where(experiment, key)}: must be positive, got {value}")
            options[key] = value

    out = run.get("out")
    return RunConfig(
        experiment=experiment,
        params=params,
        models=_convert(run["models"], list, where("run", "models")) if "models" in run else [],
        options=options,
        solver=solver,
        out_dir=Path(out) if out else default_out_dir(),
        seed=_convert(run.get("seed", "0"), int, where("run", "seed")),
        threads=_convert(run.get("threads", "1"), int, where("run", "threads")),
        source=str(path),
    )
