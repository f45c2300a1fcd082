"""weakscatter: pre/post-selected measurement toolkit.

Simulates weak-measurement pointer shifts in a Mach-Zehnder interferometer
with a quantum mirror, computes the post-selected momentum-transfer
deficit for two-body collisions, and provides the conventional
time-of-flight kinematics plus roto-recoil spectrum synthesis/fitting used
to express that deficit as an apparent effective-mass reduction.
"""

from . import deficit, kinematics, mzi, qmcore, spectra, weakvalue
from .errors import (
    ConditioningError,
    DataFormatError,
    DomainError,
    FitRejectedError,
    GridMismatchError,
    UsageError,
    WeakScatterError,
)
from .qmcore import (
    DiscreteOperator,
    DiscreteState,
    GaussianSpec,
    JointState,
    PointerWavefunction,
    first_moment,
    inner_product,
    make_gaussian,
    momentum_shift,
)
from .weakvalue import CouplingSpec, WeakValueResult, weak_value, weak_value_evolved

__version__ = "0.1.0"

__all__ = [
    "ConditioningError",
    "CouplingSpec",
    "DataFormatError",
    "DiscreteOperator",
    "DiscreteState",
    "DomainError",
    "FitRejectedError",
    "GaussianSpec",
    "GridMismatchError",
    "JointState",
    "PointerWavefunction",
    "UsageError",
    "WeakScatterError",
    "WeakValueResult",
    "deficit",
    "first_moment",
    "inner_product",
    "kinematics",
    "make_gaussian",
    "momentum_shift",
    "mzi",
    "qmcore",
    "spectra",
    "weak_value",
    "weak_value_evolved",
    "weakvalue",
]
