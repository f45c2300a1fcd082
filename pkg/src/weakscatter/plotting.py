"""Figure rendering for the CLI report path (matplotlib, Agg backend).

Each function writes one PNG next to the delimited output; figures are
side artifacts, the CSV/JSON files remain the primary outputs.
"""

from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .deficit import DeficitPrediction
from .kinematics import TransferPoint
from .mzi import MziReport
from .qmcore import PointerWavefunction
from .spectra import IntensityMap, RecoilFit, ridge_curve


def _finish(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_map_figure(imap: IntensityMap, path, fit: RecoilFit | None = None,
                    title: str = "S(K, E)") -> None:
    """Heat map of the intensity over the K-E plane, with the fitted
    recoil parabola and centroids overlaid when a fit is given."""
    fig, ax = plt.subplots(figsize=(7, 5))
    mesh = ax.pcolormesh(imap.k_grid, imap.e_grid, imap.intensity.T,
                         shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="intensity (arb.)")
    if fit is not None:
        k_fine = np.linspace(imap.k_grid[0], imap.k_grid[-1], 200)
        ax.plot(k_fine, ridge_curve(fit, k_fine), "r-", lw=1.5,
                label=f"fit: $M_{{eff}}$ = {float(fit.m_eff_hat):.3f} a.m.u.")
        ax.plot([c.k for c in fit.centroids], [c.e for c in fit.centroids],
                "w.", ms=4, label="centroids")
        ax.legend(loc="upper left")
    ax.set_xlabel(r"$K$ (Å$^{-1}$)")
    ax.set_ylabel(r"$E$ (meV)")
    ax.set_title(title)
    ax.set_ylim(imap.e_grid[0], imap.e_grid[-1])
    _finish(fig, path)


def save_fit_figure(fit: RecoilFit, path) -> None:
    """Centroids with error bars plus the fitted recoil parabola."""
    fig, ax = plt.subplots(figsize=(7, 5))
    k = np.array([c.k for c in fit.centroids])
    e = np.array([c.e for c in fit.centroids])
    sigma = np.array([c.sigma for c in fit.centroids])
    ax.errorbar(k, e, yerr=sigma, fmt="o", ms=3, capsize=2, label="centroids")
    k_fine = np.linspace(k.min(), k.max(), 200)
    ax.plot(k_fine, ridge_curve(fit, k_fine), "r-",
            label=(f"$E_0$ + $\\hbar^2K^2/2M$: $M_{{eff}}$ = "
                   f"{float(fit.m_eff_hat):.3f} ± {fit.std_err:.3f} a.m.u."))
    ax.set_xlabel(r"$K$ (Å$^{-1}$)")
    ax.set_ylabel(r"$\bar{E}$ (meV)")
    ax.set_title("Recoil-parabola fit")
    ax.legend()
    _finish(fig, path)


def save_mzi_report_figure(report: MziReport, path) -> None:
    """Bar chart contrasting the dark-port kick with the classical push."""
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = ["kick_d2_predicted", "kick_d2_exact", "classical_kick"]
    values = [report.kick_d2_predicted, report.kick_d2_exact, report.classical_kick]
    colors = ["tab:blue", "tab:cyan", "tab:orange"]
    ax.bar(labels, values, color=colors)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_ylabel("mirror momentum (arb.)")
    ax.set_title(f"Dark-port mirror kick (p_d2 = {report.p_d2:.3f})")
    fig.autofmt_xdate(rotation=20)
    _finish(fig, path)


def save_mzi_sweep_figure(rows, path) -> None:
    """Exact vs predicted dark-port kick across the sweep grid."""
    fig, ax = plt.subplots(figsize=(7, 5))
    r2_values = sorted({row[0] for row in rows})
    for r2 in r2_values:
        pts = sorted((row[1], row[4], row[5]) for row in rows if row[0] == r2)
        ratios = [p[0] for p in pts]
        ax.plot(ratios, [p[1] for p in pts], "o-", ms=4, label=f"exact, $r^2$={r2:g}")
        ax.plot(ratios, [p[2] for p in pts], "k--", lw=0.8)
    ax.set_xlabel(r"$\delta/\Delta$")
    ax.set_ylabel("dark-port mirror kick")
    ax.set_title("Post-selected mirror kick (dashed: weak-value prediction)")
    ax.legend()
    _finish(fig, path)


def save_transfers_figure(points: list[TransferPoint], path) -> None:
    """Scatter of reduced events in the K-E plane."""
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.plot([p.K for p in points], [p.E for p in points], ".", ms=4)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel(r"$K$ (Å$^{-1}$)")
    ax.set_ylabel(r"$E$ (meV)")
    ax.set_title("Reduced time-of-flight events")
    _finish(fig, path)


def save_deficit_figure(initial: PointerWavefunction,
                        final: PointerWavefunction | None,
                        prediction: DeficitPrediction, path) -> None:
    """Initial/final momentum states with the weak value and the total
    transfer marked.  ``final=None`` marks a plane-wave (delta) final
    state, drawn as a vertical line at the weak value."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    scale_i = np.max(np.abs(initial.values)) or 1.0
    ax.plot(initial.grid, np.abs(initial.values) / scale_i, label=r"$|\Xi_i(P)|$")
    if final is not None:
        scale_f = np.max(np.abs(final.values)) or 1.0
        ax.plot(final.grid, np.abs(final.values) / scale_f, label=r"$|\Xi_f(P)|$")
    else:
        ax.axvline(prediction.p_w, color="tab:orange", lw=2.0,
                   label=r"$\Xi_f$: plane wave (delta)")
    ax.axvline(prediction.p_w, color="tab:red", ls="--",
               label=f"$P_w$ = {prediction.p_w:g}")
    ax.axvline(-prediction.total_transfer, color="tab:green", ls=":",
               label=f"|total transfer| = {abs(prediction.total_transfer):g}")
    ax.set_xlabel(r"$P$ ($\hbar$ Å$^{-1}$)")
    ax.set_ylabel("amplitude (normalized to peak)")
    ax.set_title("Pre/post-selected atomic momentum states")
    ax.legend()
    _finish(fig, path)
