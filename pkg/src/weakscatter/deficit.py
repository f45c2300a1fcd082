"""Momentum-transfer deficit from pre/post-selected atomic states.

The struck atom starts at rest in a confined state (momentum wavefunction
Xi_i centered at zero) and is post-selected in a final state Xi_f shifted
by the transferred momentum hbar_k.  The weak value of the atomic momentum
operator between those states,

    P_w = integral Xi_f* P Xi_i dP / integral Xi_f* Xi_i dP,

drives a correction to the probe's pointer reading.  For equal-width real
Gaussians P_w = hbar_k / 2 independent of the width; for a plane-wave
(delta) final state P_w = hbar_k and the correction vanishes, recovering
the conventional transfer.  The weak coupling enters through a smallness
factor ``lam`` multiplying the operator (P - hbar_k I), whose weak value
is P_w - hbar_k; the flipped Hamiltonian sign makes the pointer correction
-lam * (P_w - hbar_k), reducing the magnitude of the total transfer.

``mass_mapping`` converts a momentum-scale factor f (measured K appearing
scaled by f at fixed measured E) into the apparent mass ratio f^2, linking
the deficit to the anomalously light effective masses extracted from
recoil-spectrum fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConditioningError, DomainError, GridMismatchError
from .kinematics import MassValue, _mass_amu
from .qmcore import (
    DEFAULT_GRID_N,
    DEFAULT_GRID_SPAN,
    GaussianSpec,
    ORTHOGONALITY_EPS,
    PointerWavefunction,
    default_grid,
    first_moment,
    inner_product,
    make_gaussian,
    spread,
    trapezoid,
)


@dataclass(frozen=True)
class DeltaSpec:
    """Plane-wave final state: a momentum-space delta at ``center``."""

    center: float


@dataclass(frozen=True, eq=False)
class AtomicStatePair:
    """Pre/post-selected atomic momentum states and the transfer hbar_k.

    ``initial`` must be centered at zero momentum (the atom is at rest
    before the collision): a GaussianSpec with center 0, or a grid state
    whose first moment is below 1e-9 of its spread.  ``final`` may be a
    GaussianSpec (normally centered at hbar_k), a DeltaSpec, or a raw grid
    state.
    """

    initial: PointerWavefunction | GaussianSpec
    final: PointerWavefunction | GaussianSpec | DeltaSpec
    hbar_k: float

    def __post_init__(self):
        if not self.hbar_k > 0.0:
            raise DomainError(f"hbar_k must be positive, got {self.hbar_k}")
        if isinstance(self.initial, DeltaSpec):
            raise DomainError("the initial state cannot be a delta spec")
        if isinstance(self.initial, GaussianSpec):
            if abs(self.initial.center) > 1e-9 * self.initial.sigma:
                raise DomainError(
                    f"initial state must be centered at rest, got center "
                    f"{self.initial.center}"
                )
        else:
            width = spread(self.initial)
            if abs(first_moment(self.initial)) > 1e-9 * width:
                raise DomainError(
                    "initial grid state must have zero first moment "
                    "(atom at rest before the collision)"
                )


@dataclass(frozen=True)
class DeficitPrediction:
    """Prediction bundle for one post-selected collision.

    total_transfer = -hbar_k + correction always holds exactly, and
    |total_transfer| <= hbar_k whenever 0 <= lam <= 2.  ``weak_regime``
    flags couplings inside the 0 <= lam < 1 smallness regime the
    derivation assumes; larger lam values are computed but flagged.
    """

    p_w: float
    coupling_wv: float
    lam: float
    correction: float
    total_transfer: float
    deficit_fraction: float
    implied_mass_ratio: float
    weak_regime: bool

    def as_dict(self) -> dict:
        return {
            "p_w": self.p_w,
            "coupling_wv": self.coupling_wv,
            "lambda": self.lam,
            "correction": self.correction,
            "total_transfer": self.total_transfer,
            "deficit_fraction": self.deficit_fraction,
            "implied_mass_ratio": self.implied_mass_ratio,
            "weak_regime": self.weak_regime,
        }


def sample_pair(pair: AtomicStatePair, *, n: int = DEFAULT_GRID_N,
                span: float = DEFAULT_GRID_SPAN) -> tuple[PointerWavefunction, PointerWavefunction | None]:
    """Put both states of the pair on one shared grid.

    A DeltaSpec final has no grid representation and comes back as None.
    """
    initial, final = pair.initial, pair.final
    if isinstance(final, DeltaSpec):
        if isinstance(initial, PointerWavefunction):
            return initial, None
        p_min, p_max, n = default_grid([initial], n=n, span=span)
        return make_gaussian(initial, p_min, p_max, n), None
    if isinstance(initial, PointerWavefunction) and isinstance(final, PointerWavefunction):
        if not initial.same_grid(final):
            raise GridMismatchError("initial and final grid states must share one grid")
        return initial, final
    if isinstance(initial, PointerWavefunction):
        host = initial
        return initial, make_gaussian(final, host.p_min, host.p_max, host.n)
    if isinstance(final, PointerWavefunction):
        host = final
        return make_gaussian(initial, host.p_min, host.p_max, host.n), final
    p_min, p_max, n = default_grid([initial, final], n=n, span=span)
    return (
        make_gaussian(initial, p_min, p_max, n),
        make_gaussian(final, p_min, p_max, n),
    )


def _delta_weak_value(pair: AtomicStatePair) -> complex:
    """Plane-wave final state: P_w equals the delta's center pointwise."""
    center = pair.final.center
    initial = pair.initial
    if isinstance(initial, GaussianSpec):
        amp = math.exp(-(center - initial.center) ** 2 / (2.0 * initial.sigma**2))
        peak = 1.0
    else:
        values = initial.values
        spline_re = CubicSpline(initial.grid, values.real, extrapolate=False)
        spline_im = CubicSpline(initial.grid, values.imag, extrapolate=False)
        amp = complex(np.nan_to_num(spline_re(center)), np.nan_to_num(spline_im(center)))
        peak = float(np.max(np.abs(values)))
    if abs(amp) < ORTHOGONALITY_EPS * peak:
        raise ConditioningError(
            "plane-wave post-selection sits in the tail of the initial "
            f"state: |Xi_i({center})| = {abs(amp):.3e}"
        )
    return complex(center)


def atomic_momentum_weak_value(pair: AtomicStatePair, *, n: int = DEFAULT_GRID_N,
                               span: float = DEFAULT_GRID_SPAN) -> complex:
    """Weak value of the atomic momentum operator for the state pair.

    Gaussian/Gaussian pairs use the analytic product-Gaussian mean
    c_f * sigma_i^2 / (sigma_i^2 + sigma_f^2), which is exact for every
    width (two Gaussians are never truly orthogonal).  A DeltaSpec final
    state evaluates pointwise.  Grid states integrate by trapezoid
    quadrature, guarded against near-orthogonal pairs.

    Real for the real states of the standard setup; complex grid states
    give a complex weak value whose real part feeds the pointer laws.
    """
    if isinstance(pair.final, DeltaSpec):
        return _delta_weak_value(pair)
    if isinstance(pair.initial, GaussianSpec) and isinstance(pair.final, GaussianSpec):
        si2 = pair.initial.sigma**2
        sf2 = pair.final.sigma**2
        center = (pair.final.center * si2 + pair.initial.center * sf2) / (si2 + sf2)
        return complex(center)
    initial, final = sample_pair(pair, n=n, span=span)
    den = inner_product(final, initial)
    scale = np.sqrt(final.norm2() * initial.norm2())
    if abs(den) < ORTHOGONALITY_EPS * scale:
        raise ConditioningError(
            f"initial and final states are near-orthogonal: |overlap| = "
            f"{abs(den):.3e} vs state scale {scale:.3e}"
        )
    num = trapezoid(np.conj(final.values) * initial.grid * initial.values, initial.dp)
    return num / den


def coupling_weak_value(p_w: complex | float, hbar_k: float) -> complex | float:
    """Weak value of the coupling operator (P - hbar_k I): P_w - hbar_k."""
    return p_w - hbar_k


def pointer_correction(lam: float, coupling_wv: complex | float) -> float:
    """Pointer-shift correction -lam * Re[(P - hbar_k I)_w].

    lam = 0 is the conventional limit; lam >= 1 is permitted but lies
    outside the smallness regime (see DeficitPrediction.weak_regime).
    """
    if lam < 0.0:
        raise DomainError(f"smallness factor must be non-negative, got {lam}")
    return -lam * complex(coupling_wv).real


def total_momentum_transfer(hbar_k: float, lam: float, pair: AtomicStatePair,
                            *, n: int = DEFAULT_GRID_N,
                            span: float = DEFAULT_GRID_SPAN) -> DeficitPrediction:
    """Assemble the total pointer transfer -hbar_k + correction.

    ``hbar_k`` is the conventional transfer in the coupling operator; by
    momentum conservation it is the same quantity as ``pair.hbar_k``.
    """
    if not hbar_k > 0.0:
        raise DomainError(f"hbar_k must be positive, got {hbar_k}")
    p_w = atomic_momentum_weak_value(pair, n=n, span=span)
    cwv = coupling_weak_value(p_w, hbar_k)
    correction = pointer_correction(lam, cwv)
    total = -hbar_k + correction
    fraction = correction / hbar_k
    return DeficitPrediction(
        p_w=complex(p_w).real,
        coupling_wv=complex(cwv).real,
        lam=lam,
        correction=correction,
        total_transfer=total,
        deficit_fraction=fraction,
        implied_mass_ratio=(1.0 - fraction) ** 2,
        weak_regime=lam < 1.0,
    )


def mass_mapping(deficit_factor: float) -> float:
    """Apparent mass ratio M_eff / M for a momentum-scale factor f.

    At fixed measured energy, the apparent K scales by f, so the mass
    inferred from the free-recoil relation scales by f^2.
    """
    if not 0.0 < deficit_factor <= 1.0:
        raise DomainError(
            f"momentum-scale factor must lie in (0, 1], got {deficit_factor}"
        )
    return deficit_factor**2


def deficit_from_masses(m_eff: MassValue | float, m: MassValue | float) -> float:
    """Momentum-scale factor f = sqrt(M_eff / M) implied by a mass pair."""
    return math.sqrt(_mass_amu(m_eff) / _mass_amu(m))
