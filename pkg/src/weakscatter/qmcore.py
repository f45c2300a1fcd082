"""Core quantum-state representations.

Finite-dimensional system states and operators, complex wavefunctions
sampled on uniform 1-D momentum grids, and the quadrature / shift / moment
machinery the other modules are built on.

Conventions
-----------
* hbar = 1 everywhere, so momenta carry wavevector units (hbar Å^-1 in
  scattering contexts, arbitrary momentum units in interferometer
  contexts).
* Wavefunctions are stored unnormalized; physics enters only through
  ratios, with explicit ``norm2`` accessors for callers that want unit
  norm.
* Quadrature is the trapezoid rule on the uniform grid.  It is exactly
  conjugate-symmetric and, for smooth states with >= 6 sigma of grid
  margin, converges far below every tolerance used by the toolkit.
* The position observable conjugate to the momentum grid is defined
  through the e^{+ipq} transform kernel, i.e. ``q = -i d/dp`` acting on
  momentum-space values.  With this choice a phase ramp e^{i theta p}
  advances the mean position by +theta.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConditioningError, DataFormatError, DomainError, GridMismatchError

#: Relative scale below which a denominator counts as orthogonal.
ORTHOGONALITY_EPS = 1e-12

#: Default grid size; keeps quadrature error far below stated tolerances.
DEFAULT_GRID_N = 4096

#: Default half-range of auto-built grids, in units of the largest sigma.
DEFAULT_GRID_SPAN = 10.0


def trapezoid(values: np.ndarray, dx: float) -> complex:
    """Trapezoid rule on a uniform grid: dx * (sum - half the endpoints)."""
    return dx * (values.sum() - 0.5 * (values[0] + values[-1]))


# ---------------------------------------------------------------------------
# finite-dimensional states and operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteState:
    """Finite-dimensional state: ordered basis labels plus complex amplitudes.

    Labels are bookkeeping only; operations require matching dimensions.
    A state constructed with ``normalized=True`` must satisfy
    sum |a_i|^2 = 1 within 1e-12.
    """

    labels: tuple[str, ...]
    amplitudes: np.ndarray = field(repr=False)
    normalized: bool = False

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if len(self.labels) < 1:
            raise DomainError("state needs at least one basis label")
        if len(self.labels) != amps.size:
            raise DomainError(
                f"{len(self.labels)} labels but {amps.size} amplitudes"
            )
        amps.flags.writeable = False
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))
        object.__setattr__(self, "amplitudes", amps)
        if self.normalized and abs(self.norm2() - 1.0) > 1e-12:
            raise DomainError(f"state flagged normalized has |a|^2 = {self.norm2()!r}")

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def normalize(self) -> "DiscreteState":
        n2 = self.norm2()
        if n2 <= 0.0:
            raise ConditioningError("cannot normalize a zero state")
        return DiscreteState(self.labels, self.amplitudes / np.sqrt(n2), normalized=True)

    def inner(self, other: "DiscreteState") -> complex:
        """<self|other> with self on the bra side."""
        if self.dim != other.dim:
            raise DomainError("dimension mismatch in inner product")
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Square complex matrix acting on :class:`DiscreteState` amplitudes.

    When flagged ``projector``, the entries must be Hermitian and
    idempotent elementwise within 1e-12.
    """

    entries: np.ndarray = field(repr=False)
    projector: bool = False

    def __post_init__(self):
        mat = np.asarray(self.entries, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 1:
            raise DomainError(f"operator entries must be a square matrix, got {mat.shape}")
        mat.flags.writeable = False
        object.__setattr__(self, "entries", mat)
        if self.projector:
            if not self.is_hermitian(1e-12):
                raise DomainError("projector entries are not Hermitian")
            if np.max(np.abs(mat @ mat - mat)) > 1e-12:
                raise DomainError("projector entries are not idempotent")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "DiscreteOperator":
        return cls(np.eye(dim, dtype=np.complex128), projector=True)

    @classmethod
    def diagonal(cls, values) -> "DiscreteOperator":
        return cls(np.diag(np.asarray(values, dtype=np.complex128)))

    @classmethod
    def projector_onto(cls, state: DiscreteState) -> "DiscreteOperator":
        """|s><s| for the unit-normalized version of ``state``."""
        a = state.normalize().amplitudes
        return cls(np.outer(a, np.conj(a)), projector=True)

    def apply(self, state: DiscreteState) -> DiscreteState:
        if self.dim != state.dim:
            raise DomainError("operator/state dimension mismatch")
        return DiscreteState(state.labels, self.entries @ state.amplitudes)

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.entries - self.entries.conj().T)) <= atol)

    def is_unitary(self, atol: float = 1e-10) -> bool:
        probe = self.entries.conj().T @ self.entries
        return bool(np.max(np.abs(probe - np.eye(self.dim))) <= atol)

    def eigensystem(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues and eigenvector columns of a Hermitian operator."""
        if not self.is_hermitian(1e-10):
            raise DomainError("eigensystem requires a Hermitian operator")
        return np.linalg.eigh(self.entries)


def matrix_element(post: DiscreteState, op: DiscreteOperator, pre: DiscreteState) -> complex:
    """<post| op |pre>."""
    if not (post.dim == op.dim == pre.dim):
        raise DomainError("dimension mismatch in matrix element")
    return complex(np.vdot(post.amplitudes, op.entries @ pre.amplitudes))


# ---------------------------------------------------------------------------
# grid wavefunctions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianSpec:
    """Gaussian envelope exp(-(p-center)^2 / (2 sigma^2)), up to normalization."""

    center: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True, eq=False)
class PointerWavefunction:
    """Complex wavefunction sampled on the uniform momentum grid
    linspace(p_min, p_max, n) with n = len(values) >= 16."""

    p_min: float
    p_max: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128).reshape(-1)
        if vals.size < 16:
            raise DomainError(f"grid needs at least 16 points, got {vals.size}")
        if not self.p_max > self.p_min:
            raise DomainError("p_max must exceed p_min")
        if not np.all(np.isfinite(vals.view(np.float64))):
            raise DomainError("wavefunction values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / (self.n - 1)

    @cached_property
    def grid(self) -> np.ndarray:
        p = np.linspace(self.p_min, self.p_max, self.n)
        p.flags.writeable = False
        return p

    def norm2(self) -> float:
        return float(trapezoid(np.abs(self.values) ** 2, self.dp).real)

    def normalized(self) -> "PointerWavefunction":
        n2 = self.norm2()
        if n2 <= 0.0:
            raise ConditioningError("cannot normalize a zero-norm wavefunction")
        return self.with_values(self.values / np.sqrt(n2))

    def with_values(self, values: np.ndarray) -> "PointerWavefunction":
        return PointerWavefunction(self.p_min, self.p_max, values)

    def same_grid(self, other: "PointerWavefunction") -> bool:
        return (
            self.n == other.n
            and self.p_min == other.p_min
            and self.p_max == other.p_max
        )


def _require_same_grid(bra: PointerWavefunction, ket: PointerWavefunction) -> None:
    if not bra.same_grid(ket):
        raise GridMismatchError(
            f"grids differ: [{bra.p_min}, {bra.p_max}] n={bra.n} vs "
            f"[{ket.p_min}, {ket.p_max}] n={ket.n}"
        )


def default_grid(specs: list[GaussianSpec] | tuple[GaussianSpec, ...],
                 n: int = DEFAULT_GRID_N,
                 span: float = DEFAULT_GRID_SPAN) -> tuple[float, float, int]:
    """Grid bounds covering every spec's center +- span*sigma_max."""
    centers = [s.center for s in specs]
    sigma = max(s.sigma for s in specs)
    return min(centers) - span * sigma, max(centers) + span * sigma, n


def make_gaussian(spec: GaussianSpec, p_min: float, p_max: float,
                  n: int = DEFAULT_GRID_N) -> PointerWavefunction:
    """Sample the Gaussian envelope on the grid (unnormalized).

    The grid must span at least center +- 6 sigma so tails are negligible
    for quadrature.
    """
    if p_min > spec.center - 6.0 * spec.sigma or p_max < spec.center + 6.0 * spec.sigma:
        raise DomainError(
            f"grid [{p_min}, {p_max}] does not cover "
            f"{spec.center} +- 6*{spec.sigma}"
        )
    p = np.linspace(p_min, p_max, n)
    values = np.exp(-((p - spec.center) ** 2) / (2.0 * spec.sigma**2))
    return PointerWavefunction(p_min, p_max, values.astype(np.complex128))


def inner_product(bra: PointerWavefunction, ket: PointerWavefunction) -> complex:
    """Trapezoid approximation of integral conj(bra) * ket dp.

    Exactly conjugate-symmetric: inner_product(a, b) == conj(inner_product(b, a)).
    Real and imaginary parts are accumulated separately so the symmetry is
    bitwise (complex multiplication may otherwise contract with FMA).
    """
    _require_same_grid(bra, ket)
    ar, ai = bra.values.real, bra.values.imag
    br, bi = ket.values.real, ket.values.imag
    re = trapezoid(ar * br + ai * bi, bra.dp)
    im = trapezoid(ar * bi - ai * br, bra.dp)
    return complex(re, im)


def is_near_orthogonal(bra: PointerWavefunction, ket: PointerWavefunction) -> bool:
    """True when the overlap is below the orthogonality guard scale."""
    overlap = abs(inner_product(bra, ket))
    scale = np.sqrt(bra.norm2() * ket.norm2())
    return overlap < ORTHOGONALITY_EPS * scale


def momentum_shift(state: PointerWavefunction, shift: float) -> PointerWavefunction:
    """Translate the wavefunction: new(p) = old(p - shift).

    Resamples with a cubic spline, zero-filled outside the original grid.
    Raises when more than 1e-12 of the norm^2 would be pushed off-grid.
    """
    if shift == 0.0:
        return state
    p = state.grid
    dens = np.abs(state.values) ** 2
    if shift > 0.0:
        clipped_mask = p > state.p_max - shift
    else:
        clipped_mask = p < state.p_min - shift
    clipped = float(np.sum(dens[clipped_mask]) * state.dp)
    n2 = state.norm2()
    if n2 > 0.0 and clipped > 1e-12 * n2:
        raise DomainError(
            f"shift {shift} pushes {clipped / n2:.3e} of the state off-grid"
        )
    source = p - shift
    spline_re = CubicSpline(p, state.values.real, extrapolate=False)
    spline_im = CubicSpline(p, state.values.imag, extrapolate=False)
    values = np.nan_to_num(spline_re(source)) + 1j * np.nan_to_num(spline_im(source))
    return state.with_values(values)


def spectral_shift(state: PointerWavefunction, shift: float) -> PointerWavefunction:
    """Band-limited translation via the discrete Fourier phase ramp.

    Machine-exact for smooth states that decay to ~0 well inside the grid;
    used by the measurement-simulation oracle where cubic interpolation
    error would mask the effect under test.
    """
    if shift == 0.0:
        return state
    k = 2.0 * np.pi * np.fft.fftfreq(state.n, d=state.dp)
    values = np.fft.ifft(np.fft.fft(state.values) * np.exp(-1j * k * shift))
    return state.with_values(values)


def first_moment(state: PointerWavefunction) -> float:
    """Mean momentum integral p |psi|^2 dp / integral |psi|^2 dp."""
    n2 = state.norm2()
    if n2 <= 1e-300:
        raise ConditioningError("degenerate state: norm^2 is numerically zero")
    num = trapezoid(state.grid * np.abs(state.values) ** 2, state.dp).real
    return float(num / n2)


def spread(state: PointerWavefunction) -> float:
    """Root-mean-square momentum width around the first moment."""
    n2 = state.norm2()
    if n2 <= 1e-300:
        raise ConditioningError("degenerate state: norm^2 is numerically zero")
    mean = first_moment(state)
    var = trapezoid((state.grid - mean) ** 2 * np.abs(state.values) ** 2, state.dp).real / n2
    return float(np.sqrt(max(var, 0.0)))


def position_first_moment(state: PointerWavefunction) -> float:
    """Mean of the position observable conjugate to the momentum grid.

    Computed in momentum space as Im[ integral conj(psi) dpsi/dp ] / norm^2
    with a spectral derivative (q = -i d/dp under the e^{+ipq} kernel).
    """
    n2 = state.norm2()
    if n2 <= 1e-300:
        raise ConditioningError("degenerate state: norm^2 is numerically zero")
    k = 2.0 * np.pi * np.fft.fftfreq(state.n, d=state.dp)
    dvalues = np.fft.ifft(1j * k * np.fft.fft(state.values))
    num = trapezoid(np.conj(state.values) * dvalues, state.dp)
    return float(num.imag / n2)


# ---------------------------------------------------------------------------
# joint system (x) pointer states
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class JointState:
    """System (x) pointer state: one pointer wavefunction per basis label.

    ``amplitudes`` has shape (d, n); every row lives on the shared grid
    linspace(p_min, p_max, n).
    """

    labels: tuple[str, ...]
    p_min: float
    p_max: float
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 2 or amps.shape[0] != len(self.labels):
            raise DomainError(
                f"amplitudes shape {amps.shape} does not match {len(self.labels)} labels"
            )
        if amps.shape[1] < 16:
            raise DomainError("joint state grid needs at least 16 points")
        amps.flags.writeable = False
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))
        object.__setattr__(self, "amplitudes", amps)
        if not self.norm2() > 0.0:
            raise DomainError("joint state has zero total norm")

    @property
    def dim(self) -> int:
        return len(self.labels)

    @property
    def n(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / (self.n - 1)

    @classmethod
    def from_product(cls, system: DiscreteState, pointer: PointerWavefunction) -> "JointState":
        amps = np.outer(system.amplitudes, pointer.values)
        return cls(system.labels, pointer.p_min, pointer.p_max, amps)

    def row(self, index: int) -> PointerWavefunction:
        return PointerWavefunction(self.p_min, self.p_max, self.amplitudes[index])

    def norm2(self) -> float:
        dens = np.abs(self.amplitudes) ** 2
        return float(sum(trapezoid(dens[i], self.dp).real for i in range(dens.shape[0])))

    def post_select(self, outcome: DiscreteState) -> PointerWavefunction:
        """Project the system part onto <outcome| (unnormalized result)."""
        if outcome.dim != self.dim:
            raise DomainError("post-selection state has the wrong dimension")
        values = np.conj(outcome.amplitudes) @ self.amplitudes
        return PointerWavefunction(self.p_min, self.p_max, values)


# ---------------------------------------------------------------------------
# CSV serialization (header: p,re,im)
# ---------------------------------------------------------------------------


def save_wavefunction(state: PointerWavefunction, path) -> None:
    """Write the sampled wavefunction as CSV rows p,re,im."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["p", "re", "im"])
        for p, v in zip(state.grid, state.values):
            writer.writerow([f"{p:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])


def load_wavefunction(path) -> PointerWavefunction:
    """Read a p,re,im CSV back into a :class:`PointerWavefunction`."""
    ps: list[float] = []
    vals: list[complex] = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1:
                if [c.strip() for c in row] != ["p", "re", "im"]:
                    raise DataFormatError(
                        "expected header 'p,re,im'", line=lineno, path=str(path)
                    )
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise DataFormatError(
                    f"expected 3 columns, got {len(row)}", line=lineno, path=str(path)
                )
            try:
                p, re, im = (float(c) for c in row)
            except ValueError as exc:
                raise DataFormatError(str(exc), line=lineno, path=str(path)) from exc
            ps.append(p)
            vals.append(complex(re, im))
    if len(ps) < 16:
        raise DataFormatError(f"need at least 16 grid rows, got {len(ps)}", path=str(path))
    grid = np.asarray(ps)
    steps = np.diff(grid)
    if np.any(steps <= 0.0):
        raise DataFormatError("grid must be strictly ascending", path=str(path))
    if np.max(np.abs(steps - steps[0])) > 1e-9 * abs(steps[0]):
        raise DataFormatError("grid must be uniform", path=str(path))
    return PointerWavefunction(float(grid[0]), float(grid[-1]), np.asarray(vals))
