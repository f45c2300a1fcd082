"""Mach-Zehnder interferometer with a quantum mirror in one arm.

A photon entering at the first beam splitter (reflectivity^2 = r2,
transmissivity^2 = t2 = 1 - r2) produces the arm state
|Psi> = i r |A> + t |B>.  Reflection off the light mirror in arm B kicks
the mirror momentum by ``delta``; the mirror's Gaussian momentum spread is
``Delta``.  Post-selecting on the output port fixes the photon's final
state |Phi1> = t|A> - i r|B> (detector D1) or |Phi2> = -i r|A> + t|B>
(detector D2, the dark port).

In the weak regime (delta << Delta) the post-selected mirror kick equals
the weak value of the arm-B projector times delta, which is negative at
the dark port for r > t even though every collision pushes the mirror the
same way.  ``simulate_exact`` builds the full joint state with no
first-order truncation and checks that prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import weakvalue
from .errors import ConditioningError, DomainError
from .qmcore import (
    DiscreteOperator,
    DiscreteState,
    GaussianSpec,
    JointState,
    first_moment,
    make_gaussian,
)

ARM_LABELS = ("A", "B")


@dataclass(frozen=True)
class MziConfig:
    """Interferometer parameters.

    r2        -- beam-splitter reflectivity squared, 0 < r2 < 1
    delta     -- per-photon momentum kick on the mirror
    Delta     -- mirror momentum spread (Gaussian sigma)
    alpha     -- mirror incidence angle, radians (classical formula only)
    nbar      -- mean photon number of the beam
    intensity -- classical beam intensity
    """

    r2: float
    delta: float
    Delta: float
    alpha: float = 0.0
    nbar: float = 0.0
    intensity: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.r2 < 1.0:
            raise DomainError(f"r2 must lie in (0, 1), got {self.r2}")
        if not self.Delta > 0.0:
            raise DomainError(f"Delta must be positive, got {self.Delta}")
        if self.delta < 0.0:
            raise DomainError(f"delta must be non-negative, got {self.delta}")
        if self.delta > 0.1 * self.Delta:
            raise DomainError(
                f"weak-regime bound violated: delta/Delta = "
                f"{self.delta / self.Delta:.3g} > 0.1"
            )
        if not 0.0 <= self.alpha <= math.pi / 2.0:
            raise DomainError(f"alpha must lie in [0, pi/2], got {self.alpha}")
        if self.nbar < 0.0:
            raise DomainError(f"nbar must be non-negative, got {self.nbar}")
        if self.intensity < 0.0:
            raise DomainError(f"intensity must be non-negative, got {self.intensity}")

    @property
    def t2(self) -> float:
        return 1.0 - self.r2


@dataclass(frozen=True)
class MziReport:
    """Per-run results; probabilities are the exact post-selected norms."""

    p_d1: float
    p_d2: float
    wv_d1: float
    wv_d2: float
    kick_d2_predicted: float
    kick_d2_exact: float
    total_beam_kick: float
    classical_kick: float

    def __post_init__(self):
        if abs(self.p_d1 + self.p_d2 - 1.0) > 1e-12:
            raise DomainError(
                f"detector probabilities must sum to 1, got {self.p_d1 + self.p_d2!r}"
            )

    def as_dict(self) -> dict:
        return {
            "p_d1": self.p_d1,
            "p_d2": self.p_d2,
            "wv_d1": self.wv_d1,
            "wv_d2": self.wv_d2,
            "kick_d2_predicted": self.kick_d2_predicted,
            "kick_d2_exact": self.kick_d2_exact,
            "total_beam_kick": self.total_beam_kick,
            "classical_kick": self.classical_kick,
        }


def _rt(config: MziConfig) -> tuple[float, float]:
    return math.sqrt(config.r2), math.sqrt(config.t2)


def input_state(config: MziConfig) -> DiscreteState:
    """|Psi> = i r |A> + t |B> just after the first beam splitter."""
    r, t = _rt(config)
    return DiscreteState(ARM_LABELS, np.array([1j * r, t]), normalized=True)


def bright_port_state(config: MziConfig) -> DiscreteState:
    """|Phi1> = t |A> - i r |B>, the state emerging toward D1."""
    r, t = _rt(config)
    return DiscreteState(ARM_LABELS, np.array([t, -1j * r]), normalized=True)


def dark_port_state(config: MziConfig) -> DiscreteState:
    """|Phi2> = -i r |A> + t |B>, the state emerging toward D2."""
    r, t = _rt(config)
    return DiscreteState(ARM_LABELS, np.array([-1j * r, t]), normalized=True)


def projector_b() -> DiscreteOperator:
    """Projector |B><B| onto the mirror arm."""
    return DiscreteOperator(np.diag([0.0, 1.0]).astype(complex), projector=True)


def detector_probabilities(config: MziConfig) -> tuple[float, float]:
    """Closed-form port probabilities (p_d1, p_d2) = (4 r2 t2, (r2-t2)^2)."""
    r2, t2 = config.r2, config.t2
    return 4.0 * r2 * t2, (r2 - t2) ** 2


def _require_unbalanced(config: MziConfig) -> None:
    if abs(config.r2 - config.t2) < 1e-12:
        raise ConditioningError(
            "dark port of a balanced interferometer: post-selection "
            "probability vanishes, weak value is singular"
        )


def weak_value_dark_port(config: MziConfig) -> float:
    """Weak value of the arm-B projector at the dark port: -t2/(r2 - t2).

    Closed form in r2 and t2, so exact-input reflectivities give exact
    weak values; the generic engine route
    ``weakvalue.weak_value(projector_b(), input_state(c), dark_port_state(c))``
    agrees to within one floating-point ulp (its amplitudes go through a
    square root).
    """
    _require_unbalanced(config)
    return -config.t2 / (config.r2 - config.t2)


def weak_value_bright_port(config: MziConfig) -> float:
    """Weak value of the arm-B projector at D1; equals +1/2 for any r."""
    wv = weakvalue.weak_value(projector_b(), input_state(config), bright_port_state(config))
    return wv.value.real


def classical_mirror_momentum(config: MziConfig) -> float:
    """Classical-beam momentum on the mirror: 2 t2 I cos(alpha), outward (>= 0)."""
    return 2.0 * config.t2 * config.intensity * math.cos(config.alpha)


def beam_total_kick(config: MziConfig) -> float:
    """Total mirror momentum from all photons reaching D2:
    -t2 * nbar * (r2 - t2) * delta (negative pull-in for r > t)."""
    return -config.t2 * config.nbar * (config.r2 - config.t2) * config.delta


def simulate_exact(config: MziConfig, n: int = 8192, span: float = 10.0) -> MziReport:
    """Full joint-state simulation with no first-order truncation.

    The mirror starts in a unit-norm Gaussian of spread Delta; reflection
    in arm B translates it by delta (built analytically, so there is no
    resampling error).  Projecting the joint state on each output port
    gives the exact post-selected mirror momenta; the dark-port kick must
    match the weak-value prediction to O((delta/Delta)^2).
    """
    _require_unbalanced(config)
    r, t = _rt(config)
    p_min = -span * config.Delta
    p_max = span * config.Delta + config.delta
    phi = make_gaussian(GaussianSpec(0.0, config.Delta), p_min, p_max, n).normalized()
    phi_kicked = make_gaussian(
        GaussianSpec(config.delta, config.Delta), p_min, p_max, n
    ).normalized()

    amplitudes = np.vstack([1j * r * phi.values, t * phi_kicked.values])
    joint = JointState(ARM_LABELS, p_min, p_max, amplitudes)

    mirror_d1 = joint.post_select(bright_port_state(config))
    mirror_d2 = joint.post_select(dark_port_state(config))
    p_d1 = mirror_d1.norm2()
    p_d2 = mirror_d2.norm2()
    if p_d2 < 1e-14:
        raise ConditioningError("dark-port norm is numerically zero")

    wv_d2 = weak_value_dark_port(config)
    kick_exact = first_moment(mirror_d2) if config.delta > 0.0 else 0.0
    return MziReport(
        p_d1=p_d1,
        p_d2=p_d2,
        wv_d1=weak_value_bright_port(config),
        wv_d2=wv_d2,
        kick_d2_predicted=wv_d2 * config.delta,
        kick_d2_exact=kick_exact,
        total_beam_kick=beam_total_kick(config),
        classical_kick=classical_mirror_momentum(config),
    )


def coherence_ratio(config: MziConfig) -> float:
    """Diagnostic Delta / (sqrt(nbar) * delta) for beam-coherence checks.

    A beam of nbar photons stays coherent when the mirror spread is of
    order sqrt(nbar) individual kicks; values near 1 mark that regime.
    Returns inf when nbar or delta is zero.  Informational only, never
    enforced.
    """
    denom = math.sqrt(config.nbar) * config.delta
    if denom == 0.0:
        return math.inf
    return config.Delta / denom


SWEEP_HEADER = ("r2", "delta_over_Delta", "p_d2", "wv_d2", "kick_exact", "kick_predicted")


def sweep(r2_values, delta_ratios, Delta: float = 1.0, *, n: int = 8192,
          span: float = 10.0) -> list[tuple[float, float, float, float, float, float]]:
    """Exact-simulation sweep over reflectivities and kick ratios.

    Returns one row per (r2, delta/Delta) pair, in input order, matching
    the CSV columns in ``SWEEP_HEADER``.
    """
    rows = []
    for r2 in r2_values:
        for ratio in delta_ratios:
            config = MziConfig(r2=r2, delta=ratio * Delta, Delta=Delta)
            report = simulate_exact(config, n=n, span=span)
            rows.append(
                (r2, ratio, report.p_d2, report.wv_d2,
                 report.kick_d2_exact, report.kick_d2_predicted)
            )
    return rows
