"""Weak-value engine for pre/post-selected measurements.

Computes A_w = <post|A|pre> / <post|pre> (optionally with intermediate
unitary evolutions), applies the first-order pointer-shift laws, and
provides an exact impulsive-coupling simulation that serves as the
independent oracle for those laws.

The pointer coupling is H = -g q (x) A integrated over a short interaction
(``sign=+1``); ``sign=-1`` selects the opposite Hamiltonian sign, which
flips both first-order pointer shifts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError, DomainError
from .qmcore import (
    DiscreteOperator,
    DiscreteState,
    JointState,
    ORTHOGONALITY_EPS,
    PointerWavefunction,
    first_moment,
    matrix_element,
    position_first_moment,
    spectral_shift,
)


@dataclass(frozen=True)
class WeakValueResult:
    """A weak value together with the post-selection overlap.

    ``conditioning`` is the |numerator| / |denominator| scale diagnostic;
    large values signal weak-value amplification (results far outside the
    operator's spectrum).  Values are surfaced, never clamped.
    """

    value: complex
    overlap: complex
    conditioning: float

    def __post_init__(self):
        if self.overlap == 0:
            raise ConditioningError("weak value with exactly zero overlap")
        if not self.conditioning >= 0.0:
            raise DomainError("conditioning diagnostic must be non-negative")


@dataclass(frozen=True)
class CouplingSpec:
    """Pointer-coupling parameters for the first-order shift laws.

    g      -- integrated coupling strength
    v      -- initial pointer position variance (> 0)
    sign   -- +1 for H = -g q A, -1 for the flipped Hamiltonian sign
    """

    g: float
    v: float
    sign: int = +1

    def __post_init__(self):
        if not self.v > 0.0:
            raise DomainError(f"pointer position variance must be positive, got {self.v}")
        if self.sign not in (+1, -1):
            raise DomainError(f"sign must be +1 or -1, got {self.sign}")


def _guarded_ratio(num: complex, den: complex, scale: float, what: str) -> WeakValueResult:
    if abs(den) <= ORTHOGONALITY_EPS * scale:
        raise ConditioningError(
            f"singular post-selection: |{what}| = {abs(den):.3e} "
            f"below {ORTHOGONALITY_EPS:g} of the state scale {scale:.3e}"
        )
    value = num / den
    return WeakValueResult(value=value, overlap=den, conditioning=abs(value))


def weak_value(A: DiscreteOperator, pre: DiscreteState, post: DiscreteState) -> WeakValueResult:
    """A_w = <post|A|pre> / <post|pre>.  May be complex and may lie far
    outside the spectrum of A."""
    num = matrix_element(post, A, pre)
    den = post.inner(pre)
    scale = np.sqrt(post.norm2() * pre.norm2())
    return _guarded_ratio(num, den, scale, "<post|pre>")


def weak_value_evolved(
    A: DiscreteOperator,
    pre: DiscreteState,
    post: DiscreteState,
    U: DiscreteOperator,
    V: DiscreteOperator,
) -> WeakValueResult:
    """Weak value with evolution U before the coupling and V after it:
    <post|V A U|pre> / <post|V U|pre>."""
    for name, op in (("U", U), ("V", V)):
        if op.dim != A.dim:
            raise DomainError(f"evolution {name} has the wrong dimension")
        if not op.is_unitary(1e-10):
            raise DomainError(f"evolution {name} is not unitary within 1e-10")
    evolved_pre = U.apply(pre)
    num = matrix_element(post, V, A.apply(evolved_pre))
    den = matrix_element(post, V, evolved_pre)
    scale = np.sqrt(post.norm2() * pre.norm2())
    return _guarded_ratio(num, den, scale, "<post|V U|pre>")


def pointer_momentum_shift(coupling: CouplingSpec, wv: WeakValueResult) -> float:
    """First-order mean pointer-momentum shift: sign * g * Re[A_w]."""
    return coupling.sign * coupling.g * wv.value.real


def pointer_position_shift(coupling: CouplingSpec, wv: WeakValueResult) -> float:
    """First-order mean pointer-position shift: sign * 2 g v * Im[A_w].

    Valid for a real initial pointer momentum wavefunction centered at
    <p> = 0; the sign factor keeps the position law consistent with the
    momentum law under the flipped Hamiltonian convention.
    """
    return coupling.sign * 2.0 * coupling.g * coupling.v * wv.value.imag


def simulate_von_neumann(
    A: DiscreteOperator,
    pre: DiscreteState,
    post: DiscreteState,
    pointer: PointerWavefunction,
    g: float,
) -> tuple[float, float]:
    """Exact impulsive-coupling simulation; oracle for the first-order laws.

    Builds the joint state sum_a <a|pre> |a> (x) psi(p - g a) over the
    eigenpairs of Hermitian A, projects onto ``post``, and returns the
    exact post-selected (mean_p_shift, mean_q_shift) relative to the
    initial pointer moments.  Inputs are normalized internally.

    Pointer translations use the band-limited spectral shift, so the
    result is free of interpolation error for smooth, well-contained
    pointer states.
    """
    if not A.is_hermitian(1e-10):
        raise DomainError("measured operator must be Hermitian")
    eigvals, eigvecs = A.eigensystem()
    pre_n = pre.normalize()
    post_n = post.normalize()
    pointer_n = pointer.normalized()

    labels = tuple(f"a{k}" for k in range(A.dim))
    pre_coeffs = eigvecs.conj().T @ pre_n.amplitudes      # <a_k|pre>
    post_in_basis = eigvecs.conj().T @ post_n.amplitudes  # <a_k|post>

    rows = np.empty((A.dim, pointer_n.n), dtype=np.complex128)
    for k in range(A.dim):
        shifted = spectral_shift(pointer_n, g * float(eigvals[k]))
        rows[k] = pre_coeffs[k] * shifted.values
    joint = JointState(labels, pointer_n.p_min, pointer_n.p_max, rows)

    selected = joint.post_select(DiscreteState(labels, post_in_basis))
    if selected.norm2() < 1e-14:
        raise ConditioningError(
            f"post-selected norm^2 = {selected.norm2():.3e} is numerically zero"
        )
    mean_p_shift = first_moment(selected) - first_moment(pointer_n)
    mean_q_shift = position_first_moment(selected) - position_first_moment(pointer_n)
    return mean_p_shift, mean_q_shift
