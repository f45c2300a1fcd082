"""Synthetic roto-recoil intensity maps and effective-mass fitting.

A roto-recoil map is a 2-D intensity S(K, E): a recoil ridge following
E = e_rot + recoil_energy(K, m_eff) with a Doppler-broadened Gaussian
profile in E, plus an optional K-localized rotational line.  The analysis
pipeline extracts per-K peak centroids and fits the recoil parabola
E = E0 + c K^2, reporting the effective mass e_from_k_per_amu / c.

Column-wise centroid extraction is order-independent: results are reduced
by K index, so the serial loop here could be parallelized without
changing any output.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import curve_fit

from .errors import ConditioningError, DataFormatError, DomainError, FitRejectedError
from .kinematics import CONSTANTS, MassValue, recoil_energy

#: Floor for centroid uncertainties (meV) so noiseless fits stay weightable.
SIGMA_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class IntensityMap:
    """Non-negative intensities on strictly ascending (K, E) grids.

    ``intensity`` has shape (n_k, n_e) with n_k >= 4 and n_e >= 16.
    """

    k_grid: np.ndarray = field(repr=False)
    e_grid: np.ndarray = field(repr=False)
    intensity: np.ndarray = field(repr=False)

    def __post_init__(self):
        k = np.asarray(self.k_grid, dtype=float).reshape(-1)
        e = np.asarray(self.e_grid, dtype=float).reshape(-1)
        z = np.asarray(self.intensity, dtype=float)
        if k.size < 4:
            raise DomainError(f"K grid needs at least 4 points, got {k.size}")
        if e.size < 16:
            raise DomainError(f"E grid needs at least 16 points, got {e.size}")
        if np.any(np.diff(k) <= 0.0) or np.any(np.diff(e) <= 0.0):
            raise DomainError("grids must be strictly ascending")
        if z.shape != (k.size, e.size):
            raise DomainError(
                f"intensity shape {z.shape} does not match grids ({k.size}, {e.size})"
            )
        if np.any(z < 0.0) or not np.all(np.isfinite(z)):
            raise DomainError("intensities must be finite and non-negative")
        if not np.any(z.max(axis=1) > 0.0):
            raise DomainError("map needs at least one strictly positive column")
        for arr in (k, e, z):
            arr.flags.writeable = False
        object.__setattr__(self, "k_grid", k)
        object.__setattr__(self, "e_grid", e)
        object.__setattr__(self, "intensity", z)

    @property
    def e_step(self) -> float:
        return float(self.e_grid[1] - self.e_grid[0])


@dataclass(frozen=True)
class RotoRecoilParams:
    """Synthesis parameters.

    m_eff           -- recoil-ridge mass (a.m.u.)
    e_rot / k_rot   -- rotational line position (meV, Å^-1)
    doppler_sigma_p -- atomic momentum spread (hbar Å^-1); sets the ridge
                       width through the Doppler relation
    line_width      -- rotational line width in E (meV)
    line_width_k    -- rotational line width in K (Å^-1)
    a_ridge/a_line  -- intensity scales of ridge and line
    noise_sigma     -- relative multiplicative noise level (0 = noiseless)
    """

    m_eff: float
    e_rot: float = 14.7
    k_rot: float = 2.7
    doppler_sigma_p: float = 0.5
    line_width: float = 0.8
    line_width_k: float = 0.25
    a_ridge: float = 1.0
    a_line: float = 0.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if not self.m_eff > 0.0:
            raise DomainError(f"m_eff must be positive, got {self.m_eff}")
        for name in ("doppler_sigma_p", "line_width", "line_width_k"):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"{name} must be positive")
        if self.a_ridge < 0.0 or self.a_line < 0.0:
            raise DomainError("amplitudes must be non-negative")
        if self.noise_sigma < 0.0:
            raise DomainError("noise_sigma must be non-negative")


class Centroid(NamedTuple):
    k: float
    e: float
    sigma: float


@dataclass(frozen=True)
class RecoilFit:
    """Weighted least-squares result for E = e0 + c K^2."""

    m_eff_hat: MassValue
    std_err: float
    e0: float
    residual_rms: float
    n_points: int
    centroids: tuple[Centroid, ...]

    def __post_init__(self):
        if self.n_points < 3:
            raise DomainError("recoil fit needs at least 3 points")

    def as_dict(self) -> dict:
        return {
            "m_eff_amu": float(self.m_eff_hat),
            "std_err_amu": self.std_err,
            "e0_meV": self.e0,
            "residual_rms_meV": self.residual_rms,
            "n_points": self.n_points,
            "centroids": [{"k": c.k, "e": c.e, "sigma": c.sigma} for c in self.centroids],
        }


# ---------------------------------------------------------------------------
# synthesis
# ---------------------------------------------------------------------------


def synthesize(params: RotoRecoilParams, k_grid, e_grid, seed: int = 0) -> IntensityMap:
    """Build a roto-recoil map on the given grids.

    The ridge at each K is a Gaussian in E centered at
    e_rot + recoil_energy(K, m_eff) whose width is the Doppler width
    2 * e_from_k_per_amu * K * doppler_sigma_p / m_eff (floored at half
    the E step, so a vanishing momentum spread collapses the ridge to the
    grid resolution).  Multiplicative Gaussian noise uses the fixed seed
    and is clipped so intensities stay non-negative.
    """
    k = np.asarray(k_grid, dtype=float).reshape(-1)
    e = np.asarray(e_grid, dtype=float).reshape(-1)
    if k.size < 4 or e.size < 16:
        raise DomainError("grids too small for a map")
    e_step = float(e[1] - e[0])
    ridge_top = params.e_rot + recoil_energy(float(k.max()), params.m_eff)
    if ridge_top > float(e.max()):
        raise DomainError(
            f"ridge reaches {ridge_top:.3f} meV at K = {k.max():.3f}, beyond "
            f"the E grid maximum {e.max():.3f}"
        )
    centers = params.e_rot + CONSTANTS.e_from_k_per_amu * k**2 / params.m_eff
    widths = 2.0 * CONSTANTS.e_from_k_per_amu * k * params.doppler_sigma_p / params.m_eff
    widths = np.maximum(widths, 0.5 * e_step)

    intensity = params.a_ridge * np.exp(
        -((e[None, :] - centers[:, None]) ** 2) / (2.0 * widths[:, None] ** 2)
    )
    if params.a_line > 0.0:
        line = np.exp(-((e - params.e_rot) ** 2) / (2.0 * params.line_width**2))
        k_profile = np.exp(-((k - params.k_rot) ** 2) / (2.0 * params.line_width_k**2))
        intensity = intensity + params.a_line * k_profile[:, None] * line[None, :]
    if params.noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        factors = 1.0 + params.noise_sigma * rng.standard_normal(intensity.shape)
        intensity = intensity * np.clip(factors, 0.0, None)
    return IntensityMap(k, e, intensity)


# ---------------------------------------------------------------------------
# centroid extraction
# ---------------------------------------------------------------------------


def _gaussian(e, amplitude, center, width):
    return amplitude * np.exp(-((e - center) ** 2) / (2.0 * width**2))


def _fit_column(e: np.ndarray, y: np.ndarray, e_step: float) -> tuple[float, float]:
    """Gaussian-peak center and uncertainty; falls back to the first moment."""
    peak = int(np.argmax(y))
    if y[peak] > 0.0 and y.size >= 5:
        width_guess = max(np.sqrt(
            np.sum(y * (e - e[peak]) ** 2) / np.sum(y)
        ) if np.sum(y) > 0 else e_step, 0.25 * e_step)
        try:
            popt, pcov = curve_fit(
                _gaussian, e, y,
                p0=(float(y[peak]), float(e[peak]), float(width_guess)),
                maxfev=2000,
            )
            center = float(popt[1])
            var = float(pcov[1, 1])
            sigma = math.sqrt(var) if math.isfinite(var) and var > 0.0 else e_step
            if e[0] <= center <= e[-1]:
                return center, max(sigma, SIGMA_FLOOR)
        except (RuntimeError, ValueError):
            pass
    weights = np.clip(y, 0.0, None)
    total = float(weights.sum())
    if total <= 0.0:
        raise ConditioningError("column has no positive intensity in the window")
    return float(np.sum(weights * e) / total), max(e_step, SIGMA_FLOOR)


def extract_centroids(imap: IntensityMap, window: float,
                      baseline: str = "none") -> list[Centroid]:
    """Per-K peak centroids from a Gaussian fit around each column maximum.

    Args:
        imap: the intensity map.
        window: half-width (meV) of the fit window around the column max.
        baseline: "none", or "median" to subtract each column's median
            before fitting (constant-baseline correction).

    Columns whose peak/median ratio falls below 3 are skipped; an empty
    result raises :class:`ConditioningError`.  Centroids are invariant
    under global intensity scaling.
    """
    if baseline not in ("none", "median"):
        raise DomainError(f"unknown baseline method {baseline!r}")
    if not window > 0.0:
        raise DomainError(f"window must be positive, got {window}")
    e = imap.e_grid
    centroids: list[Centroid] = []
    for i, k in enumerate(imap.k_grid):
        raw = imap.intensity[i]
        peak = float(raw.max())
        if peak <= 0.0:
            continue
        median = float(np.median(raw))
        snr = math.inf if median <= 0.0 else peak / median
        if snr < 3.0:
            continue
        y = raw - median if baseline == "median" else raw
        center_e = e[int(np.argmax(y))]
        mask = np.abs(e - center_e) <= window
        if np.count_nonzero(mask) < 3:
            continue
        center, sigma = _fit_column(e[mask], y[mask], imap.e_step)
        centroids.append(Centroid(float(k), center, sigma))
    if not centroids:
        raise ConditioningError("no column passed the SNR >= 3 threshold")
    return centroids


# ---------------------------------------------------------------------------
# recoil-mass fitting
# ---------------------------------------------------------------------------


def fit_recoil_mass(centroids, e_offset_mode: str = "free", *,
                    e_rot: float | None = None, weighted: bool = True,
                    exclude_k=None) -> RecoilFit:
    """Weighted least squares of Ebar = E0 + c K^2; m_eff = e_from_k_per_amu / c.

    Args:
        centroids: (k, e, sigma) triples from :func:`extract_centroids`.
        e_offset_mode: "free" fits E0 and c; "fixed" pins E0 = e_rot and
            fits only the curvature.
        weighted: weight points by 1 / sigma^2 (unweighted mode for data
            without uncertainties).
        exclude_k: optional (k_lo, k_hi) intervals to drop, e.g. to keep a
            localized rotational line out of the ridge fit.

    The parameter covariance is scaled by the reduced chi-square, so the
    reported standard error tracks the actual residual scatter.
    """
    points = [Centroid(float(k), float(e), float(s)) for k, e, s in centroids]
    if exclude_k:
        points = [
            c for c in points
            if not any(lo <= c.k <= hi for lo, hi in exclude_k)
        ]
    if e_offset_mode not in ("free", "fixed"):
        raise DomainError(f"unknown e_offset_mode {e_offset_mode!r}")
    if e_offset_mode == "fixed" and e_rot is None:
        raise DomainError("fixed-offset mode requires e_rot")
    if len({c.k for c in points}) < 3:
        raise DomainError("recoil fit needs at least 3 centroids with distinct K")

    k = np.array([c.k for c in points])
    e = np.array([c.e for c in points])
    sigma = np.array([max(c.sigma, SIGMA_FLOOR) for c in points])
    w = 1.0 / sigma if weighted else np.ones_like(sigma)

    if e_offset_mode == "free":
        design = np.column_stack([np.ones_like(k), k**2])
        target = e
    else:
        design = (k**2)[:, None]
        target = e - e_rot
    solution, *_ = np.linalg.lstsq(design * w[:, None], target * w, rcond=None)
    normal = np.linalg.inv((design * w[:, None]).T @ (design * w[:, None]))

    if e_offset_mode == "free":
        e0, c_hat = float(solution[0]), float(solution[1])
        c_index = 1
    else:
        e0, c_hat = float(e_rot), float(solution[0])
        c_index = 0
    if c_hat <= 0.0:
        raise FitRejectedError(
            f"fitted recoil curvature {c_hat!r} is not positive; data is "
            "not recoil-like"
        )

    residuals = target - design @ solution
    dof = max(len(points) - design.shape[1], 1)
    chi2_red = float(np.sum((residuals * w) ** 2)) / dof
    c_err = math.sqrt(normal[c_index, c_index] * chi2_red)

    m_hat = CONSTANTS.e_from_k_per_amu / c_hat
    std_err = CONSTANTS.e_from_k_per_amu / c_hat**2 * c_err
    return RecoilFit(
        m_eff_hat=MassValue(m_hat),
        std_err=std_err,
        e0=e0,
        residual_rms=float(np.sqrt(np.mean(residuals**2))),
        n_points=len(points),
        centroids=tuple(points),
    )


def ridge_curve(fit: RecoilFit, k: np.ndarray) -> np.ndarray:
    """Fitted parabola E0 + e_from_k_per_amu K^2 / m_eff_hat."""
    return fit.e0 + CONSTANTS.e_from_k_per_amu * np.asarray(k) ** 2 / float(fit.m_eff_hat)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------
#
# Map CSV layout: first row "K\E,e_1,e_2,...", then one row per K value:
# "k_i,v_1,v_2,...".  Floats carry 17 significant digits so round trips
# are bitwise lossless.


def save_map(imap: IntensityMap, target) -> None:
    """Write the map CSV to a path or text stream."""
    if hasattr(target, "write"):
        _write_map(imap, target)
    else:
        with open(target, "w") as handle:
            _write_map(imap, handle)


def _write_map(imap: IntensityMap, handle) -> None:
    handle.write("K\\E," + ",".join(f"{e:.17g}" for e in imap.e_grid) + "\n")
    for k, row in zip(imap.k_grid, imap.intensity):
        handle.write(f"{k:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")


def map_to_text(imap: IntensityMap) -> str:
    buffer = io.StringIO()
    _write_map(imap, buffer)
    return buffer.getvalue()


def load_map(source) -> IntensityMap:
    """Read a map CSV from a path or text stream (line-numbered errors)."""
    close = False
    if hasattr(source, "read"):
        handle = source
        name = getattr(source, "name", "<stream>")
    else:
        handle = open(source)
        name = str(source)
        close = True
    try:
        k_values: list[float] = []
        rows: list[list[float]] = []
        e_grid: np.ndarray | None = None
        for lineno, line in enumerate(handle, start=1):
            text = line.rstrip("\n")
            if lineno == 1:
                cells = text.split(",")
                if not cells or cells[0].strip() != "K\\E":
                    raise DataFormatError(
                        "expected header starting with 'K\\E'", line=lineno, path=name
                    )
                try:
                    e_grid = np.array([float(c) for c in cells[1:]])
                except ValueError as exc:
                    raise DataFormatError(str(exc), line=lineno, path=name) from exc
                if e_grid.size < 16:
                    raise DataFormatError(
                        f"E grid needs at least 16 points, got {e_grid.size}",
                        line=lineno, path=name,
                    )
                if np.any(np.diff(e_grid) <= 0.0):
                    raise DataFormatError(
                        "E grid must be strictly ascending", line=lineno, path=name
                    )
                continue
            if not text.strip():
                continue
            cells = text.split(",")
            if len(cells) != e_grid.size + 1:
                raise DataFormatError(
                    f"expected {e_grid.size + 1} columns, got {len(cells)}",
                    line=lineno, path=name,
                )
            try:
                values = [float(c) for c in cells]
            except ValueError as exc:
                raise DataFormatError(str(exc), line=lineno, path=name) from exc
            if any(v < 0.0 for v in values[1:]):
                raise DataFormatError("negative intensity", line=lineno, path=name)
            if k_values and values[0] <= k_values[-1]:
                raise DataFormatError(
                    "K grid must be strictly ascending", line=lineno, path=name
                )
            k_values.append(values[0])
            rows.append(values[1:])
        if e_grid is None:
            raise DataFormatError("empty file: expected header starting with 'K\\E'",
                                  path=name)
        if len(k_values) < 4:
            raise DataFormatError(
                f"K grid needs at least 4 rows, got {len(k_values)}", path=name
            )
        try:
            return IntensityMap(np.array(k_values), e_grid, np.array(rows))
        except DomainError as exc:
            raise DataFormatError(str(exc), path=name) from exc
    finally:
        if close:
            handle.close()


def fit_to_text(fit: RecoilFit) -> str:
    return json.dumps(fit.as_dict(), indent=2) + "\n"


def save_fit(fit: RecoilFit, target) -> None:
    """Write the fit report JSON to a path or text stream."""
    text = fit_to_text(fit)
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w") as handle:
            handle.write(text)


def load_fit(source) -> RecoilFit:
    """Read a fit report JSON from a path or text stream."""
    close = False
    if hasattr(source, "read"):
        handle = source
        name = getattr(source, "name", "<stream>")
    else:
        handle = open(source)
        name = str(source)
        close = True
    try:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataFormatError(exc.msg, line=exc.lineno, path=name) from exc
    finally:
        if close:
            handle.close()
    required = {"m_eff_amu", "std_err_amu", "e0_meV", "residual_rms_meV",
                "n_points", "centroids"}
    missing = required - set(doc)
    if missing:
        raise DataFormatError(f"missing fields: {sorted(missing)}", path=name)
    try:
        centroids = tuple(
            Centroid(float(c["k"]), float(c["e"]), float(c["sigma"]))
            for c in doc["centroids"]
        )
        return RecoilFit(
            m_eff_hat=MassValue(float(doc["m_eff_amu"])),
            std_err=float(doc["std_err_amu"]),
            e0=float(doc["e0_meV"]),
            residual_rms=float(doc["residual_rms_meV"]),
            n_points=int(doc["n_points"]),
            centroids=centroids,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"malformed fit report: {exc}", path=name) from exc
