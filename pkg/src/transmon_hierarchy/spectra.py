"""Eigensystems, dressed-state labels, spectral features and parameter inversion."""

from __future__ import annotations

import csv
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize

from .errors import AmbiguousLabel, NegativeDiscriminant, NoConvergence
from .models import (
    EnergyParams,
    HermitianOperator,
    ModelSpec,
    Variant,
    build_hamiltonian,
    hermitian_residual,
)

# Experimental E_J/E_C that n_exp multiplies (10.158/0.348 = 29.19).
REFERENCE_RATIO = 10.158 / 0.348
DEFAULT_N_EXP = (1, 2, 4, 8, 16, 32, 64)
SWEEP_MODELS = (Variant.CPB, Variant.DO3, Variant.GR, Variant.R)
COMPUTATIONAL = ((0, 0), (1, 0))


def eigensystem(h) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors (as columns)."""
    mat = h.matrix if isinstance(h, HermitianOperator) else np.asarray(h)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("expected a square matrix")
    if hermitian_residual(mat) > 1e-12:
        raise ValueError("matrix is not Hermitian")
    vals, vecs = np.linalg.eigh(mat)
    return vals, vecs


@dataclass
class DressedLabelMap:
    """Bare (transmon, resonator) label -> eigenvector index, with overlaps."""

    index: dict = field(default_factory=dict)
    overlap: dict = field(default_factory=dict)

    def __getitem__(self, label) -> int:
        try:
            return self.index[tuple(label)]
        except KeyError:
            raise KeyError(f"label {label} is not in the dressed-label map") from None

    def __contains__(self, label) -> bool:
        return tuple(label) in self.index

    def labels(self) -> list:
        return sorted(self.index)


def dressed_labels(eigenvectors: np.ndarray, n_t: int, n_r: int, require=COMPUTATIONAL,
                   min_overlap: float = 0.5) -> DressedLabelMap:
    """Greedy assignment of bare product states to eigenvectors.

    Pairs are taken in order of descending |<j,k|psi_e>|^2; a pair is used
    only if neither side has been assigned. Labels whose assigned overlap
    falls below ``min_overlap`` are left out of the map, and if any of them
    is in ``require`` :class:`AmbiguousLabel` is raised.
    """
    vecs = np.asarray(eigenvectors)
    dim = n_t * n_r
    if vecs.shape[0] != dim:
        raise ValueError(f"eigenvector dimension {vecs.shape[0]} != n_t * n_r = {dim}")
    weights = np.abs(vecs) ** 2
    order = np.argsort(-weights, axis=None, kind="stable")
    bare_used = np.zeros(dim, bool)
    eig_used = np.zeros(vecs.shape[1], bool)
    result = DressedLabelMap()
    weak = {}
    remaining = min(dim, vecs.shape[1])
    for flat in order:
        b, e = divmod(int(flat), vecs.shape[1])
        if bare_used[b] or eig_used[e]:
            continue
        bare_used[b] = eig_used[e] = True
        label = divmod(b, n_r)
        w = float(weights[b, e])
        if w >= min_overlap:
            result.index[label] = e
            result.overlap[label] = w
        else:
            weak[label] = w
        remaining -= 1
        if remaining == 0:
            break
    for label in require or ():
        label = tuple(label)
        if label not in result.index:
            best = weak.get(label, 0.0)
            raise AmbiguousLabel(f"bare state {label} has best overlap {best:.3f} < {min_overlap}")
    return result


@dataclass(frozen=True)
class SpectralFeatures:
    omega01: float
    anharmonicity: float | None
    chi: float | None


@dataclass
class DressedSpectrum:
    """Diagonalised coupled Hamiltonian with its label map."""

    spec: ModelSpec
    energies: np.ndarray
    vectors: np.ndarray
    labels: DressedLabelMap

    def energy(self, j: int, k: int = 0) -> float:
        return float(self.energies[self.labels[(j, k)]])

    def state(self, j: int, k: int = 0) -> np.ndarray:
        return self.vectors[:, self.labels[(j, k)]]


def dressed_spectrum(spec: ModelSpec, params: EnergyParams, require=COMPUTATIONAL) -> DressedSpectrum:
    h = build_hamiltonian(spec, params)
    vals, vecs = eigensystem(h)
    labels = dressed_labels(vecs, spec.transmon_levels, spec.resonator_levels, require=require)
    return DressedSpectrum(spec, vals, vecs, labels)


def spectral_features(spec: ModelSpec, params: EnergyParams) -> SpectralFeatures:
    """Dressed qubit frequency, anharmonicity and dispersive shift.

    Anharmonicity is ``None`` for two-level models and ``chi`` is ``None``
    when the resonator is truncated to a single level.
    """
    require = [(0, 0), (1, 0)]
    has_alpha = spec.transmon_levels >= 3
    has_chi = spec.resonator_levels >= 2
    if has_alpha:
        require.append((2, 0))
    if has_chi:
        require += [(0, 1), (1, 1)]
    sp = dressed_spectrum(spec, params, require=require)
    e00, e10 = sp.energy(0), sp.energy(1)
    alpha = sp.energy(2) - 2 * e10 + e00 if has_alpha else None
    chi = 0.5 * (sp.energy(1, 1) - e10 - sp.energy(0, 1) + e00) if has_chi else None
    return SpectralFeatures(e10 - e00, alpha, chi)


@dataclass(frozen=True)
class Transition:
    lower: int
    upper: int
    photons: int
    frequency: float

    @property
    def name(self) -> str:
        tag = "" if self.photons == 1 else f" ({self.photons}-photon)"
        return f"|{self.lower}>->|{self.upper}>{tag}"


def transition_frequencies(spec: ModelSpec, params: EnergyParams, max_level: int) -> list[Transition]:
    """Single-photon w_jk and two-photon w_jk/2 for every j < k <= max_level."""
    if max_level >= spec.transmon_levels:
        raise ValueError("max_level must be below the number of transmon levels")
    sp = dressed_spectrum(spec, params, require=[(j, 0) for j in range(max_level + 1)])
    out = []
    for j, k in itertools.combinations(range(max_level + 1), 2):
        w = sp.energy(k) - sp.energy(j)
        out.append(Transition(j, k, 1, w))
        out.append(Transition(j, k, 2, w / 2))
    return out


def params_for_ratio(mode: str, n_exp: float, base: EnergyParams = None) -> EnergyParams:
    """E_C, E_J at ratio ``REFERENCE_RATIO * n_exp`` holding a GR feature fixed.

    ``constant_freq`` keeps sqrt(8 E_C E_J) - E_C at its base value;
    ``constant_anharm`` keeps E_C fixed.
    """
    base = base or EnergyParams(ec=0.348, ej=10.158, g=0.02, omega_r=6.99)
    if n_exp <= 0:
        raise ValueError("n_exp must be positive")
    r = base.ratio * n_exp
    if r <= 0.125:
        raise ValueError("E_J/E_C <= 1/8 makes the frequency inversion degenerate")
    if mode == "constant_freq":
        target = base.plasma - base.ec
        ec = target / (np.sqrt(8 * r) - 1)
    elif mode == "constant_anharm":
        ec = base.ec
    else:
        raise ValueError(f"unknown sweep mode {mode!r}")
    return base.replace(ec=float(ec), ej=float(r * ec))


@dataclass(frozen=True)
class SweepRow:
    model: str
    n_exp: float
    ec: float
    ej: float
    omega01: float
    anharmonicity: float | None
    chi: float | None


def _sweep_point(args):
    mode, n_exp, base, models, n_r = args
    params = params_for_ratio(mode, n_exp, base)
    rows = []
    for v in models:
        f = spectral_features(ModelSpec(v, resonator_levels=n_r), params)
        rows.append(SweepRow(Variant.parse(v).value, n_exp, params.ec, params.ej, f.omega01, f.anharmonicity, f.chi))
    return rows


def ejc_sweep(mode: str, n_exp_values=DEFAULT_N_EXP, base: EnergyParams = None, models=SWEEP_MODELS,
              resonator_levels: int = 3, workers: int = 1) -> list[SweepRow]:
    """Spectral features of each model along an E_J/E_C sweep.

    Rows are ordered by n_exp, then by model, regardless of ``workers``.
    """
    base = base or EnergyParams(ec=0.348, ej=10.158, g=0.02, omega_r=6.99)
    for n in n_exp_values:
        params_for_ratio(mode, n, base)
    tasks = [(mode, n, base, tuple(models), resonator_levels) for n in n_exp_values]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_sweep_point, tasks))
    else:
        chunks = [_sweep_point(t) for t in tasks]
    return [row for chunk in chunks for row in chunk]


SWEEP_COLUMNS = ("model", "n_exp", "ec", "ej", "omega01", "anharmonicity", "chi")


def write_sweep_csv(rows, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([r.model, repr(float(r.n_exp))] + [_fmt(getattr(r, c)) for c in SWEEP_COLUMNS[2:]])
    return path


def _fmt(x) -> str:
    return "" if x is None else f"{x:.17g}"


def closed_form_parameters(omega01: float, omega12: float, chi: float, omega_r: float) -> EnergyParams:
    """Invert the Rabi-family relations w01 = sqrt(8EcEj) - Ec, w12 - w01 = -Ec and
    chi = -g^2 Ec / (D (D - Ec)) with D = w01 - w_r."""
    ec = omega01 - omega12
    if ec <= 0:
        raise ValueError("expected w12 < w01 (negative anharmonicity)")
    ej = (omega01 + ec) ** 2 / (8 * ec)
    delta = omega01 - omega_r
    disc = -chi * delta * (delta - ec) / ec
    if disc < 0:
        raise NegativeDiscriminant(f"chi = {chi:.3e} GHz has the wrong sign for detuning {delta:.3f} GHz")
    return EnergyParams(ec=ec, ej=ej, g=float(np.sqrt(disc)), omega_r=omega_r)


def invert_parameters(omega01: float, omega12: float, chi: float, omega_r: float, target: ModelSpec,
                      method: str | None = None, max_iter: int = 200, tol: float = 1e-6) -> EnergyParams:
    """Energy parameters that reproduce measured w01, w12 and chi in ``target``.

    ``method="closed"`` (default for GR and R) applies the Rabi relations;
    ``"numeric"`` (default otherwise) root-finds (E_J, E_C, g) against the
    dressed spectrum, seeded by the closed form. For two-level targets E_C is
    taken from the closed form since they carry no anharmonicity.
    """
    target = target if isinstance(target, ModelSpec) else ModelSpec(target)
    seed = closed_form_parameters(omega01, omega12, chi, omega_r)
    if method is None:
        method = "closed" if target.variant in (Variant.GR, Variant.R) else "numeric"
    if method == "closed":
        return seed
    if method != "numeric":
        raise ValueError(f"unknown method {method!r}")

    alpha_meas = omega12 - omega01
    two_level = target.transmon_levels < 3

    def unpack(x):
        if two_level:
            return seed.replace(ej=x[0], g=abs(x[1]))
        return seed.replace(ej=x[0], ec=x[1], g=abs(x[2]))

    def residual(x):
        try:
            f = spectral_features(target, unpack(x))
        except ValueError:
            return np.full(len(x), 1e3)
        r = [f.omega01 - omega01, (f.chi - chi) / abs(chi)]
        if not two_level:
            r.insert(1, f.anharmonicity - alpha_meas)
        return np.array(r)

    x0 = np.array([seed.ej, seed.g]) if two_level else np.array([seed.ej, seed.ec, seed.g])
    sol = optimize.root(residual, x0, method="hybr", options={"maxfev": max_iter, "xtol": 1e-13})
    res = residual(sol.x)
    if np.max(np.abs(res)) > tol:
        raise NoConvergence(f"parameter inversion residual {np.max(np.abs(res)):.2e} after {sol.nfev} evaluations")
    return unpack(sol.x)
