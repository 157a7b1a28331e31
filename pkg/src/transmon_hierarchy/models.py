"""Hamiltonians for the transmon-resonator model hierarchy.

All energies are stored as frequencies in GHz (E/2pi). The factor 2pi is
applied only inside the propagator.

Variants, from most to least faithful:

CPB   Cooper-pair box in the charge basis, truncated to its lowest
      eigenstates for coupling and driving.
DO3   Sextic Duffing oscillator (cosine expanded to phi^6).
DO2   Quartic Duffing oscillator.
GR3   Diagonal oscillator with first-order quartic and sextic corrections.
GR    Diagonal oscillator with first-order quartic corrections.
R     Two-level qubit.
"""

from __future__ import annotations

import dataclasses
import enum
import functools
import warnings
from dataclasses import dataclass

import numpy as np

HERMITIAN_RTOL = 1e-12


class Variant(str, enum.Enum):
    CPB = "CPB"
    DO2 = "DO2"
    DO3 = "DO3"
    GR = "GR"
    GR3 = "GR3"
    R = "R"

    @classmethod
    def parse(cls, value: "Variant | str") -> "Variant":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown model variant {value!r}") from None


OSCILLATOR_VARIANTS = (Variant.DO2, Variant.DO3, Variant.GR, Variant.GR3)

# Transmon dimensions that converge dynamics at the reference parameters.
DEFAULT_TRANSMON_LEVELS = {
    Variant.CPB: 13,
    Variant.DO2: 12,
    Variant.DO3: 12,
    Variant.GR: 6,
    Variant.GR3: 6,
    Variant.R: 2,
}


@dataclass(frozen=True)
class EnergyParams:
    """Device constants, all as frequency/2pi in GHz (``ng`` is dimensionless)."""

    ec: float
    ej: float
    g: float
    omega_r: float
    ng: float = 0.0

    def __post_init__(self):
        for name in ("ec", "ej", "omega_r"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be positive, got {value!r}")
        if not np.isfinite(self.g) or self.g < 0:
            raise ValueError(f"g must be non-negative, got {self.g!r}")
        if not np.isfinite(self.ng):
            raise ValueError("ng must be finite")

    @property
    def eta(self) -> float:
        """sqrt(2 E_C / E_J), the oscillator length scale of the phase."""
        return float(np.sqrt(2.0 * self.ec / self.ej))

    @property
    def plasma(self) -> float:
        """sqrt(8 E_C E_J)."""
        return float(np.sqrt(8.0 * self.ec * self.ej))

    @property
    def ratio(self) -> float:
        return self.ej / self.ec

    def replace(self, **changes) -> "EnergyParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


REFERENCE_PARAMS = EnergyParams(ec=0.348, ej=10.158, g=0.02, omega_r=6.99)


@dataclass(frozen=True)
class ModelSpec:
    """Which Hamiltonian variant to build and how to truncate it.

    ``transmon_levels`` defaults per variant (13/12/6/2); it is forced to 2
    for the two-level model. ``charge_cutoff`` only matters for CPB.
    """

    variant: Variant
    transmon_levels: int | None = None
    resonator_levels: int = 3
    charge_cutoff: int = 30

    def __post_init__(self):
        variant = Variant.parse(self.variant)
        object.__setattr__(self, "variant", variant)
        levels = self.transmon_levels
        if variant is Variant.R:
            levels = 2
        elif levels is None:
            levels = DEFAULT_TRANSMON_LEVELS[variant]
        object.__setattr__(self, "transmon_levels", int(levels))
        if self.transmon_levels < 1 or self.resonator_levels < 1:
            raise ValueError("all dimensions must be >= 1")
        if variant is Variant.CPB:
            if self.charge_cutoff < 10:
                raise ValueError("charge_cutoff must be >= 10 for CPB")
            if self.transmon_levels > 2 * self.charge_cutoff + 1:
                raise ValueError("transmon_levels exceeds the charge-basis dimension")

    @property
    def dim(self) -> int:
        return self.transmon_levels * self.resonator_levels

    def with_levels(self, transmon_levels: int | None = None, resonator_levels: int | None = None) -> "ModelSpec":
        return dataclasses.replace(
            self,
            transmon_levels=self.transmon_levels if transmon_levels is None else transmon_levels,
            resonator_levels=self.resonator_levels if resonator_levels is None else resonator_levels,
        )


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """A Hermitian matrix together with the subsystem dimensions it acts on."""

    matrix: np.ndarray
    dims: tuple

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("operator must be a square matrix")
        if int(np.prod(self.dims)) != mat.shape[0]:
            raise ValueError(f"dims {self.dims} do not match matrix size {mat.shape[0]}")
        if hermitian_residual(mat) > HERMITIAN_RTOL:
            raise ValueError("matrix is not Hermitian")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


def hermitian_residual(mat: np.ndarray) -> float:
    """Relative max-abs size of the anti-Hermitian part."""
    mat = np.asarray(mat)
    scale = np.max(np.abs(mat)) if mat.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(mat - mat.conj().T)) / scale)


def lowering(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1)


def charge_hamiltonian(ec: float, ej: float, ng: float, n_c: int) -> np.ndarray:
    """Raw charge-basis matrix of 4E_C(n - n_g)^2 - E_J cos(phi), n in [-n_c, n_c].

    No validation; use :func:`build_transmon_charge` for checked construction.
    """
    n = np.arange(-n_c, n_c + 1, dtype=float)
    h = np.diag(4.0 * ec * (n - ng) ** 2)
    off = -0.5 * ej * np.ones(2 * n_c)
    return h + np.diag(off, 1) + np.diag(off, -1)


def build_transmon_charge(params: EnergyParams, n_c: int = 30, check: bool = True) -> HermitianOperator:
    """Isolated CPB Hamiltonian in the charge basis, dimension 2*n_c + 1.

    With ``check`` the lowest ten eigenvalues are compared against a cutoff
    ten charge states larger, warning if they drift by more than 1e-8 GHz.
    """
    if n_c < 10:
        raise ValueError(f"charge cutoff {n_c} < 10 is unsafe")
    h = charge_hamiltonian(params.ec, params.ej, params.ng, n_c)
    if check:
        k = min(10, 2 * n_c + 1)
        low = np.linalg.eigvalsh(h)[:k]
        ref = np.linalg.eigvalsh(charge_hamiltonian(params.ec, params.ej, params.ng, n_c + 10))[:k]
        drift = float(np.max(np.abs(low - ref)))
        if drift > 1e-8:
            warnings.warn(f"charge cutoff {n_c} not converged: eigenvalue drift {drift:.2e} GHz", RuntimeWarning)
    return HermitianOperator(h, (2 * n_c + 1,))


def build_duffing(params: EnergyParams, order_k: int, n_t: int) -> HermitianOperator:
    """Duffing oscillator with the cosine expanded to order 2K (K = 2 or 3).

    Ladder operators are truncated to ``n_t`` levels before powers are taken.
    """
    if order_k not in (2, 3):
        raise ValueError(f"order_k must be 2 or 3, got {order_k}")
    if n_t < 3:
        raise ValueError("Duffing models need at least 3 levels")
    b = lowering(n_t)
    x = b + b.T
    x2 = x @ x
    x4 = x2 @ x2
    h = params.plasma * (b.T @ b + 0.5 * np.eye(n_t)) - params.ej * np.eye(n_t) - params.ec / 12.0 * x4
    if order_k == 3:
        h = h + params.ej / 720.0 * params.eta ** 3 * (x4 @ x2)
    return HermitianOperator(h, (n_t,))


def gr_level_energies(params: EnergyParams, n_t: int, sextic: bool = False) -> np.ndarray:
    """Harmonic ladder plus first-order anharmonic corrections, level by level."""
    m = np.arange(n_t, dtype=float)
    energies = params.plasma * (m + 0.5) - params.ej - params.ec / 12.0 * (6 * m**2 + 6 * m + 3)
    if sextic:
        energies = energies + params.ej / 720.0 * params.eta ** 3 * (20 * m**3 + 30 * m**2 + 40 * m + 15)
    return energies


def build_gr(params: EnergyParams, variant: Variant | str = Variant.GR, n_t: int = 6) -> HermitianOperator:
    variant = Variant.parse(variant)
    if variant not in (Variant.GR, Variant.GR3):
        raise ValueError("build_gr handles GR and GR3 only")
    if n_t < 3:
        raise ValueError("GR models need at least 3 levels")
    return HermitianOperator(np.diag(gr_level_energies(params, n_t, sextic=variant is Variant.GR3)), (n_t,))


def build_r(params: EnergyParams) -> HermitianOperator:
    """(sqrt(8 E_C E_J) - E_C) sigma_z / 2, ordered (|0>, |1>)."""
    w01 = params.plasma - params.ec
    return HermitianOperator(np.diag([-0.5 * w01, 0.5 * w01]), (2,))


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    lead = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(lead) / lead)


@functools.lru_cache(maxsize=256)
def cpb_eigensystem(params: EnergyParams, n_c: int, n_t: int) -> tuple[np.ndarray, np.ndarray]:
    """Lowest ``n_t`` CPB energies and the charge operator in that eigenbasis."""
    h = build_transmon_charge(params, n_c).matrix.real
    energies, vecs = np.linalg.eigh(h)
    vecs = _fix_phases(vecs[:, :n_t])
    n_op = vecs.T @ np.diag(np.arange(-n_c, n_c + 1, dtype=float)) @ vecs
    energies = energies[:n_t].copy()
    energies.setflags(write=False)
    n_op.setflags(write=False)
    return energies, n_op


def cpb_window_eigensystem(params: EnergyParams, n_states: int) -> tuple[np.ndarray, np.ndarray]:
    """CPB restricted to ``n_states`` charge states centred on zero, fully diagonalised.

    Returns all eigenvalues and the charge operator in that eigenbasis. Used to
    measure how many charge states the dynamics need; no cutoff check applies.
    """
    if n_states < 2:
        raise ValueError("need at least 2 charge states")
    lo = -((n_states - 1) // 2)
    n = np.arange(lo, lo + n_states, dtype=float)
    h = np.diag(4.0 * params.ec * (n - params.ng) ** 2) - 0.5 * params.ej * (np.eye(n_states, k=1) + np.eye(n_states, k=-1))
    energies, vecs = np.linalg.eigh(h)
    vecs = _fix_phases(vecs)
    return energies, vecs.T @ np.diag(n) @ vecs


def transmon_hamiltonian(spec: ModelSpec, params: EnergyParams) -> HermitianOperator:
    """Uncoupled transmon Hamiltonian in the working basis of ``spec``."""
    n_t = spec.transmon_levels
    v = spec.variant
    if v is Variant.CPB:
        energies, _ = cpb_eigensystem(params, spec.charge_cutoff, n_t)
        return HermitianOperator(np.diag(energies), (n_t,))
    if v is Variant.DO2:
        return build_duffing(params, 2, n_t)
    if v is Variant.DO3:
        return build_duffing(params, 3, n_t)
    if v in (Variant.GR, Variant.GR3):
        return build_gr(params, v, n_t)
    return build_r(params)


def charge_operator(spec: ModelSpec, params: EnergyParams) -> np.ndarray:
    """Cooper-pair number operator in the transmon working basis."""
    if spec.variant is Variant.CPB:
        return cpb_eigensystem(params, spec.charge_cutoff, spec.transmon_levels)[1].astype(complex)
    b = lowering(spec.transmon_levels)
    return 1j / (2.0 * np.sqrt(params.eta)) * (b.T - b)


def coupling_operator(spec: ModelSpec, params: EnergyParams) -> np.ndarray:
    """Transmon factor of the resonator coupling term (g excluded)."""
    v = spec.variant
    if v is Variant.CPB:
        return charge_operator(spec, params)
    if v is Variant.R:
        return np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    b = lowering(spec.transmon_levels)
    if v is Variant.GR:
        return (b + b.T).astype(complex)
    return 1j * (b.T - b)


def couple_with_resonator(transmon_h: HermitianOperator, spec: ModelSpec, params: EnergyParams) -> HermitianOperator:
    """H_t (x) 1 + 1 (x) w_r a^dag a + g C (x) (a + a^dag).

    For CPB a full charge-basis ``transmon_h`` (dimension 2*n_c+1) is also
    accepted, in which case the charge operator is diagonal.
    """
    n_r = spec.resonator_levels
    if n_r < 1:
        raise ValueError("resonator_levels must be >= 1")
    h_t = np.asarray(transmon_h.matrix)
    n_t = h_t.shape[0]
    if spec.variant is Variant.CPB and n_t == 2 * spec.charge_cutoff + 1 and n_t != spec.transmon_levels:
        c = np.diag(np.arange(-spec.charge_cutoff, spec.charge_cutoff + 1)).astype(complex)
    elif n_t == spec.transmon_levels:
        c = coupling_operator(spec, params)
    else:
        raise ValueError(f"transmon operator has dimension {n_t}, spec expects {spec.transmon_levels}")
    a = lowering(n_r)
    h = (
        np.kron(h_t, np.eye(n_r))
        + np.kron(np.eye(n_t), params.omega_r * (a.T @ a))
        + params.g * np.kron(c, a + a.T)
    )
    return HermitianOperator(h, (n_t, n_r))


def build_drive_operator(spec: ModelSpec, params: EnergyParams) -> HermitianOperator:
    """Charge operator tensored with the resonator identity."""
    n_r = spec.resonator_levels
    return HermitianOperator(np.kron(charge_operator(spec, params), np.eye(n_r)), (spec.transmon_levels, n_r))


def build_hamiltonian(spec: ModelSpec, params: EnergyParams) -> HermitianOperator:
    """Coupled transmon-resonator Hamiltonian for ``spec``."""
    return couple_with_resonator(transmon_hamiltonian(spec, params), spec, params)
