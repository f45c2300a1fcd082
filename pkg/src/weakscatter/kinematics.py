"""Conventional two-body neutron-scattering kinematics.

Time-of-flight reduction to momentum/energy transfer, recoil and Doppler
formulas, and the effective-mass and interaction-energy relations that
form the baseline the anomalous-transfer analysis perturbs.

Units are frozen globally: wavevectors in Å^-1, energies in meV, masses in
a.m.u., flight paths in metres, times in seconds.  Energy transfer follows
the neutron-loss convention E = E_i - E_f; E < 0 (neutron energy gain) is
legal output, not an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import DataFormatError, DomainError


@dataclass(frozen=True)
class PhysicalConstants:
    """Unit-conversion constants (CODATA-derived, frozen at build).

    e_from_k         -- hbar^2 / 2 m_neutron in meV Å^2
    e_from_k_per_amu -- hbar^2 / 2 u in meV Å^2
    neutron_mass     -- neutron mass in a.m.u.
    """

    e_from_k: float = 2.0723
    e_from_k_per_amu: float = 2.0902
    neutron_mass: float = 1.00866


CONSTANTS = PhysicalConstants()

_J_PER_MEV = 1.602176634e-22
_NEUTRON_KG = 1.67492749804e-27


@dataclass(frozen=True)
class MassValue:
    """A strictly positive mass in a.m.u."""

    m: float

    def __post_init__(self):
        if not self.m > 0.0:
            raise DomainError(f"mass must be positive, got {self.m}")

    def __float__(self) -> float:
        return self.m


def _mass_amu(mass: MassValue | float) -> float:
    m = float(mass)
    if not m > 0.0:
        raise DomainError(f"mass must be positive, got {m}")
    return m


@dataclass(frozen=True)
class TransferPoint:
    """A momentum/energy-transfer pair (K in Å^-1, E in meV)."""

    K: float
    E: float

    def __post_init__(self):
        if self.K < 0.0:
            raise DomainError(f"K must be non-negative, got {self.K}")


@dataclass(frozen=True)
class TofGeometry:
    """One detector's flight geometry.

    l1 / l2     -- source->sample and sample->detector paths (m, > 0)
    theta       -- scattering angle (rad, in (0, pi])
    e_i or e_f  -- fixed incident (direct mode) or final (inverse mode)
                   neutron energy in meV
    t_offset    -- additive TOF calibration offset (s), subtracted from
                   measured times
    path_scale  -- multiplicative flight-path calibration correction
    """

    l1: float
    l2: float
    theta: float
    e_i: float | None = None
    e_f: float | None = None
    mode: str = "direct"
    t_offset: float = 0.0
    path_scale: float = 1.0

    def __post_init__(self):
        if not (self.l1 > 0.0 and self.l2 > 0.0):
            raise DomainError("flight paths must be positive")
        if not 0.0 < self.theta <= math.pi:
            raise DomainError(f"theta must lie in (0, pi], got {self.theta}")
        if self.mode not in ("direct", "inverse"):
            raise DomainError(f"mode must be 'direct' or 'inverse', got {self.mode!r}")
        if self.mode == "direct":
            if self.e_i is None or not self.e_i > 0.0:
                raise DomainError("direct geometry requires e_i > 0")
        else:
            if self.e_f is None or not self.e_f > 0.0:
                raise DomainError("inverse geometry requires e_f > 0")
        if not self.path_scale > 0.0:
            raise DomainError("path_scale must be positive")


# ---------------------------------------------------------------------------
# closed-form relations
# ---------------------------------------------------------------------------


def energy_from_k(k: float) -> float:
    """Free-neutron dispersion E = e_from_k * k^2 (meV from Å^-1)."""
    if k < 0.0:
        raise DomainError(f"wavevector must be non-negative, got {k}")
    return CONSTANTS.e_from_k * k * k


def k_from_energy(e: float) -> float:
    """Inverse free-neutron dispersion k = sqrt(E / e_from_k)."""
    if e < 0.0:
        raise DomainError(f"energy must be non-negative, got {e}")
    return math.sqrt(e / CONSTANTS.e_from_k)


def momentum_transfer(k_i: float, k_f: float, theta: float) -> float:
    """K = sqrt(k_i^2 + k_f^2 - 2 k_i k_f cos(theta))."""
    if k_i < 0.0 or k_f < 0.0:
        raise DomainError("wavevectors must be non-negative")
    arg = k_i * k_i + k_f * k_f - 2.0 * k_i * k_f * math.cos(theta)
    return math.sqrt(max(arg, 0.0))


def recoil_energy(K: float, mass: MassValue | float) -> float:
    """Recoil energy (hbar K)^2 / 2M of an initially resting mass."""
    if K < 0.0:
        raise DomainError(f"K must be non-negative, got {K}")
    return CONSTANTS.e_from_k_per_amu * K * K / _mass_amu(mass)


def doppler_energy(K: float, p_par: float, mass: MassValue | float) -> float:
    """Doppler term hbar^2 K P_par / M (meV), linear in the atomic momentum
    component P_par (hbar Å^-1) along the transfer direction."""
    return 2.0 * CONSTANTS.e_from_k_per_amu * K * p_par / _mass_amu(mass)


def effective_mass_from_peak(point: TransferPoint) -> MassValue:
    """Mass that puts the peak (K, E) on the free-recoil relation:
    M_eff = e_from_k_per_amu * K^2 / E.  Requires E > 0."""
    if not point.E > 0.0:
        raise DomainError(f"effective mass needs E > 0, got {point.E}")
    return MassValue(CONSTANTS.e_from_k_per_amu * point.K**2 / point.E)


def interaction_energy(point: TransferPoint, mass: MassValue | float) -> float:
    """Peak energy minus the free recoil energy for the given mass.

    Negative when the peak sits below the free recoil parabola, i.e. the
    effectively heavier scatterer of conventional binding; positive when
    the peak sits above it, which reads as an anomalously light effective
    mass (E_int > 0 is equivalent to effective_mass_from_peak < mass).
    """
    return point.E - recoil_energy(point.K, mass)


def cross_section_scale(k_i: float, k_f: float, b: float, s_value: float) -> float:
    """Partial differential cross-section scaling (k_f/k_i) * b^2 * S."""
    if not k_i > 0.0:
        raise DomainError(f"k_i must be positive, got {k_i}")
    if k_f < 0.0:
        raise DomainError(f"k_f must be non-negative, got {k_f}")
    return (k_f / k_i) * b * b * s_value


# ---------------------------------------------------------------------------
# time-of-flight reduction
# ---------------------------------------------------------------------------


def neutron_speed(e_mev: float) -> float:
    """Neutron speed in m/s for kinetic energy in meV."""
    if not e_mev > 0.0:
        raise DomainError(f"kinetic energy must be positive, got {e_mev}")
    return math.sqrt(2.0 * e_mev * _J_PER_MEV / _NEUTRON_KG)


def energy_from_speed(v: float) -> float:
    """Neutron kinetic energy in meV for speed in m/s."""
    if not v > 0.0:
        raise DomainError(f"speed must be positive, got {v}")
    return v * v * _NEUTRON_KG / (2.0 * _J_PER_MEV)


def tof_to_transfers(geom: TofGeometry, t_total: float) -> TransferPoint:
    """Reduce one measured time-of-flight to its unique (K, E) point.

    Direct mode solves the final energy from the sample->detector leg;
    inverse mode solves the incident energy from the source->sample leg.
    Each admissible (geometry, time) pair maps to exactly one point on the
    detector's trajectory in the K-E plane.
    """
    t = t_total - geom.t_offset
    l1 = geom.l1 * geom.path_scale
    l2 = geom.l2 * geom.path_scale
    if geom.mode == "direct":
        e_i = geom.e_i
        t2 = t - l1 / neutron_speed(e_i)
        if t2 <= 0.0:
            raise DomainError(
                f"unphysical event: t_total = {t_total!r} leaves no time "
                "for the scattered flight path"
            )
        e_f = energy_from_speed(l2 / t2)
    else:
        e_f = geom.e_f
        t1 = t - l2 / neutron_speed(e_f)
        if t1 <= 0.0:
            raise DomainError(
                f"unphysical event: t_total = {t_total!r} leaves no time "
                "for the incident flight path"
            )
        e_i = energy_from_speed(l1 / t1)
    k_i = k_from_energy(e_i)
    k_f = k_from_energy(e_f)
    return TransferPoint(momentum_transfer(k_i, k_f, geom.theta), e_i - e_f)


def transfers_to_tof(geom: TofGeometry, point: TransferPoint) -> float:
    """Inverse of :func:`tof_to_transfers` for points on the detector's
    trajectory; rejects (K, E) pairs the geometry cannot produce."""
    if geom.mode == "direct":
        e_i = geom.e_i
        e_f = e_i - point.E
        if e_f <= 0.0:
            raise DomainError(f"energy transfer {point.E} exceeds incident energy")
    else:
        e_f = geom.e_f
        e_i = e_f + point.E
        if e_i <= 0.0:
            raise DomainError(f"energy gain {point.E} exceeds final energy")
    k_expected = momentum_transfer(k_from_energy(e_i), k_from_energy(e_f), geom.theta)
    if abs(k_expected - point.K) > 1e-9 * max(1.0, point.K):
        raise DomainError(
            f"(K={point.K}, E={point.E}) is not on this detector's "
            f"trajectory (expected K = {k_expected!r})"
        )
    t = geom.l1 * geom.path_scale / neutron_speed(e_i)
    t += geom.l2 * geom.path_scale / neutron_speed(e_f)
    return t + geom.t_offset


# ---------------------------------------------------------------------------
# geometry config and event files
# ---------------------------------------------------------------------------

_CONFIG_FLOAT_KEYS = {"l1_m", "l2_m", "e_i_meV", "e_f_meV", "t_offset_s", "path_scale"}
_CONFIG_ENERGY_KEYS = {"e_i_meV", "e_f_meV"}
_CONFIG_KEYS = _CONFIG_FLOAT_KEYS | {"mode"}


def _parse_energy_mev(text: str) -> float:
    """Energy value with an optional eV/meV suffix; bare numbers are meV."""
    s = text.strip()
    if s.endswith("meV"):
        return float(s[:-3])
    if s.endswith("eV"):
        return float(s[:-2]) * 1000.0
    return float(s)


def load_geometry_config(path) -> dict:
    """Parse a key=value geometry file.

    Recognized keys: l1_m, l2_m, e_i_meV or e_f_meV, mode=direct|inverse,
    t_offset_s, path_scale.  Energy values may carry an ``eV`` or ``meV``
    suffix and are converted to the canonical meV.  Blank lines and '#'
    comments are skipped.
    """
    raw: dict[str, str] = {}
    with open(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise DataFormatError("expected key=value", line=lineno, path=str(path))
            key, value = (part.strip() for part in text.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise DataFormatError(f"unknown key {key!r}", line=lineno, path=str(path))
            if key in raw:
                raise DataFormatError(f"duplicate key {key!r}", line=lineno, path=str(path))
            if key in _CONFIG_FLOAT_KEYS:
                try:
                    _parse_energy_mev(value) if key in _CONFIG_ENERGY_KEYS else float(value)
                except ValueError as exc:
                    raise DataFormatError(
                        f"{key} is not a number: {value!r}", line=lineno, path=str(path)
                    ) from exc
            raw[key] = value

    config: dict = {
        key: (_parse_energy_mev(val) if key in _CONFIG_ENERGY_KEYS else float(val))
        for key, val in raw.items()
        if key in _CONFIG_FLOAT_KEYS
    }
    if "mode" in raw:
        config["mode"] = raw["mode"]
    elif "e_f_meV" in config and "e_i_meV" not in config:
        config["mode"] = "inverse"
    else:
        config["mode"] = "direct"
    if config["mode"] not in ("direct", "inverse"):
        raise DataFormatError(f"mode must be direct or inverse, got {config['mode']!r}",
                              path=str(path))
    for required in ("l1_m", "l2_m"):
        if required not in config:
            raise DataFormatError(f"missing required key {required}", path=str(path))
    energy_key = "e_i_meV" if config["mode"] == "direct" else "e_f_meV"
    if energy_key not in config:
        raise DataFormatError(
            f"{config['mode']} geometry requires {energy_key}", path=str(path)
        )
    return config


def geometry_from_config(config: dict, theta: float) -> TofGeometry:
    """Build a per-detector :class:`TofGeometry` from a parsed config."""
    return TofGeometry(
        l1=config["l1_m"],
        l2=config["l2_m"],
        theta=theta,
        e_i=config.get("e_i_meV"),
        e_f=config.get("e_f_meV"),
        mode=config["mode"],
        t_offset=config.get("t_offset_s", 0.0),
        path_scale=config.get("path_scale", 1.0),
    )


def load_tof_events(source) -> list[tuple[int, float, float]]:
    """Read event rows 't_total_s,theta_rad' from a path or text stream.

    Returns (line_number, t_total, theta) tuples so downstream errors can
    name the offending row.
    """
    close = False
    if hasattr(source, "read"):
        handle = source
        name = getattr(source, "name", "<stream>")
    else:
        handle = open(source)
        name = str(source)
        close = True
    try:
        events: list[tuple[int, float, float]] = []
        for lineno, line in enumerate(handle, start=1):
            text = line.strip()
            if lineno == 1:
                if [c.strip() for c in text.split(",")] != ["t_total_s", "theta_rad"]:
                    raise DataFormatError(
                        "expected header 't_total_s,theta_rad'", line=lineno, path=name
                    )
                continue
            if not text:
                continue
            parts = text.split(",")
            if len(parts) != 2:
                raise DataFormatError(
                    f"expected 2 columns, got {len(parts)}", line=lineno, path=name
                )
            try:
                t_total, theta = float(parts[0]), float(parts[1])
            except ValueError as exc:
                raise DataFormatError(str(exc), line=lineno, path=name) from exc
            events.append((lineno, t_total, theta))
        if not events:
            raise DataFormatError("no event rows found", path=name)
        return events
    finally:
        if close:
            handle.close()


def reduce_events(config: dict, events: list[tuple[int, float, float]]) -> list[TransferPoint]:
    """Reduce (line, t_total, theta) event rows to transfer points.

    The result order matches the input order; a physically impossible row
    raises a line-numbered :class:`DataFormatError`.
    """
    base = geometry_from_config(config, theta=math.pi / 2.0)
    points = []
    for lineno, t_total, theta in events:
        try:
            geom = replace(base, theta=theta)
            points.append(tof_to_transfers(geom, t_total))
        except DomainError as exc:
            raise DataFormatError(str(exc), line=lineno) from exc
    return points


def save_transfers(points: list[TransferPoint], handle) -> None:
    """Write reduced transfers as CSV 'K_invA,E_meV' to a text stream."""
    handle.write("K_invA,E_meV\n")
    for point in points:
        handle.write(f"{point.K:.17g},{point.E:.17g}\n")
