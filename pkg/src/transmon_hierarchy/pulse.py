"""Pulse envelopes and drive-signal synthesis.

Amplitudes are peak envelope values in GHz (Omega/2pi), times in ns, the
DRAG coefficient in ns. The drive signal is

    V(t) = sum_i Omega_i(t) cos(2 pi f_i t + phase_i)
                 - beta_i dOmega_i/dt sin(2 pi f_i t + phase_i)

with the derivative term present only for DRAG components.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass

import numpy as np

# Gaussian width as a fraction of the pulse duration.
DEFAULT_SIGMA_FRAC = 0.27

SHAPE_CODES = {"square": 0, "gaussian": 1, "drag": 2}


class Shape(str, enum.Enum):
    SQUARE = "square"
    GAUSSIAN = "gaussian"
    DRAG = "drag"


@dataclass(frozen=True)
class Envelope:
    shape: Shape
    peak_amp: float
    duration: float
    beta: float = 0.0
    sigma_frac: float = DEFAULT_SIGMA_FRAC

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(str(getattr(self.shape, "value", self.shape)).lower()))
        if not self.duration > 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if not self.sigma_frac > 0:
            raise ValueError("sigma_frac must be positive")
        if self.beta and self.shape is not Shape.DRAG:
            raise ValueError("beta is only meaningful for DRAG envelopes")

    @property
    def sigma(self) -> float:
        return self.sigma_frac * self.duration

    def scaled(self, factor: float) -> "Envelope":
        return dataclasses.replace(self, peak_amp=self.peak_amp * factor)


@dataclass(frozen=True)
class DriveComponent:
    envelope: Envelope
    carrier_freq: float
    phase: float = 0.0

    def __post_init__(self):
        if self.carrier_freq < 0:
            raise ValueError("carrier frequency must be non-negative")

    def as_dict(self) -> dict:
        env = self.envelope
        return {
            "shape": env.shape.value,
            "peak_amp": env.peak_amp,
            "duration": env.duration,
            "beta": env.beta,
            "sigma_frac": env.sigma_frac,
            "carrier_freq": self.carrier_freq,
            "phase": self.phase,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DriveComponent":
        env = Envelope(d["shape"], float(d["peak_amp"]), float(d["duration"]), float(d.get("beta", 0.0)),
                       float(d.get("sigma_frac", DEFAULT_SIGMA_FRAC)))
        return cls(env, float(d["carrier_freq"]), float(d.get("phase", 0.0)))


def gaussian(peak_amp, duration, carrier_freq, phase=0.0, sigma_frac=DEFAULT_SIGMA_FRAC) -> DriveComponent:
    return DriveComponent(Envelope(Shape.GAUSSIAN, peak_amp, duration, 0.0, sigma_frac), carrier_freq, phase)


def square(peak_amp, duration, carrier_freq, phase=0.0) -> DriveComponent:
    return DriveComponent(Envelope(Shape.SQUARE, peak_amp, duration), carrier_freq, phase)


def drag(peak_amp, beta, duration, carrier_freq, phase=0.0, sigma_frac=DEFAULT_SIGMA_FRAC) -> DriveComponent:
    return DriveComponent(Envelope(Shape.DRAG, peak_amp, duration, beta, sigma_frac), carrier_freq, phase)


def _check_time(env: Envelope, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > env.duration):
        raise ValueError(f"t outside [0, {env.duration}] ns")
    return t


def _lifted_gaussian(env: Envelope, t):
    half = 0.5 * env.duration
    s2 = 2.0 * env.sigma ** 2
    g = np.exp(-((t - half) ** 2) / s2)
    g0 = np.exp(-(half ** 2) / s2)
    return g, g0


def envelope_value(env: Envelope, t):
    """Envelope at ``t``; Gaussian shapes are lifted to vanish at 0 and T."""
    t = _check_time(env, t)
    if env.shape is Shape.SQUARE:
        return env.peak_amp * np.ones_like(t) if t.ndim else float(env.peak_amp)
    g, g0 = _lifted_gaussian(env, t)
    val = env.peak_amp * (g - g0) / (1.0 - g0)
    return val if t.ndim else float(val)


def envelope_derivative(env: Envelope, t):
    t = _check_time(env, t)
    if env.shape is Shape.SQUARE:
        return np.zeros_like(t) if t.ndim else 0.0
    g, g0 = _lifted_gaussian(env, t)
    val = -env.peak_amp * g * (t - 0.5 * env.duration) / env.sigma ** 2 / (1.0 - g0)
    return val if t.ndim else float(val)


def component_signal(comp: DriveComponent, t):
    env = comp.envelope
    arg = 2 * np.pi * comp.carrier_freq * np.asarray(t, dtype=float) + comp.phase
    out = envelope_value(env, t) * np.cos(arg)
    if env.shape is Shape.DRAG and env.beta:
        out = out - env.beta * envelope_derivative(env, t) * np.sin(arg)
    return out


def drive_signal(components, t):
    """Total real drive signal in GHz."""
    t_arr = np.asarray(t, dtype=float)
    total = np.zeros_like(t_arr)
    for comp in components:
        total = total + component_signal(comp, t_arr)
    return total if t_arr.ndim else float(total)


def pack(components) -> np.ndarray:
    """Row-per-component float array consumed by the compiled integrator.

    Columns: shape code, peak amplitude, duration, sigma, beta, carrier, phase.
    """
    rows = []
    for c in components:
        e = c.envelope
        rows.append([SHAPE_CODES[e.shape.value], e.peak_amp, e.duration, e.sigma, e.beta, c.carrier_freq, c.phase])
    return np.array(rows, dtype=float).reshape(-1, 7)
