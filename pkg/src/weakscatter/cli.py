"""Command-line front end.

Exit codes: 0 success, 2 usage, 3 malformed input data, 4 numeric or
conditioning failure.

Output contract: report subcommands (mzi, weakvalue, kinematics, deficit)
print a one-line summary to stdout, or the full JSON document when
``--json`` is given (summary then moves to stderr).  Data subcommands
(synth, fit, tof-reduce, mzi sweeps) stream their delimited/JSON artifact
to ``--out`` (default stdout) and keep the summary on stderr, so shell
pipelines stay clean.  ``--plot`` renders a matplotlib figure next to the
primary output.  Identical argv plus identical input files produce
byte-identical primary outputs.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import deficit as deficit_mod
from . import kinematics as kin
from . import mzi as mzi_mod
from . import spectra
from .errors import (
    ConditioningError,
    DataFormatError,
    DomainError,
    UsageError,
    WeakScatterError,
)
from .qmcore import (
    DiscreteOperator,
    DiscreteState,
    GaussianSpec,
    load_wavefunction,
)
from . import weakvalue as wv_mod

_SUBPARSERS: dict[str, argparse.ArgumentParser] = {}


# ---------------------------------------------------------------------------
# small helpers
# ---------------------------------------------------------------------------


def _atomic_write(path: str, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".weakscatter-")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_primary(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        _atomic_write(out, text)


def _emit_report(args, doc: dict, summary: str) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    to_stdout = args.json or args.out == "-"
    if args.out and args.out != "-":
        _atomic_write(args.out, text)
    if to_stdout:
        sys.stdout.write(text)
        print(summary, file=sys.stderr)
    else:
        print(summary)


def _figure_path(args, default_name: str) -> str:
    if getattr(args, "plot_out", None):
        return args.plot_out
    out = getattr(args, "out", None)
    if out and out != "-":
        return os.path.splitext(out)[0] + ".png"
    return os.path.join(getattr(args, "plot_dir", "."), default_name)


def _explain_flags(args, sub: str, overrides: dict | None = None) -> None:
    """Print resolved option values and their sources to stderr."""
    parser = _SUBPARSERS[sub]
    print("# resolved configuration (flags > config file > defaults)", file=sys.stderr)
    for action in parser._get_optional_actions():  # noqa: SLF001
        if action.dest in ("help", "explain"):
            continue
        name = action.option_strings[-1].lstrip("-")
        if overrides and action.dest in overrides:
            value, source = overrides[action.dest]
        else:
            value = getattr(args, action.dest, None)
            source = "default" if value == action.default else "flag"
        print(f"{name} = {value} ({source})", file=sys.stderr)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise UsageError(message)


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise UsageError(f"{flag}: expected comma-separated numbers: {exc}") from exc
    _require(bool(values), f"{flag}: empty list")
    return values


def _parse_intervals(text: str, flag: str) -> list[tuple[float, float]]:
    intervals = []
    for chunk in text.split(","):
        if not chunk.strip():
            continue
        parts = chunk.split(":")
        _require(len(parts) == 2, f"{flag}: expected lo:hi intervals")
        try:
            lo, hi = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise UsageError(f"{flag}: {exc}") from exc
        _require(lo <= hi, f"{flag}: interval {chunk!r} has lo > hi")
        intervals.append((lo, hi))
    _require(bool(intervals), f"{flag}: empty list")
    return intervals


def _parse_complex_entry(obj, flag: str) -> complex:
    if isinstance(obj, (int, float)):
        return complex(obj)
    if isinstance(obj, str):
        try:
            return complex(obj.replace(" ", ""))
        except ValueError as exc:
            raise UsageError(f"{flag}: bad complex literal {obj!r}") from exc
    if isinstance(obj, list) and len(obj) == 2:
        return complex(float(obj[0]), float(obj[1]))
    raise UsageError(f"{flag}: cannot read {obj!r} as a complex number")


def _parse_vector(text: str, flag: str) -> np.ndarray:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{flag}: invalid JSON: {exc.msg}") from exc
    _require(isinstance(raw, list) and raw, f"{flag}: expected a JSON array")
    return np.array([_parse_complex_entry(x, flag) for x in raw])


def _parse_matrix(text: str, flag: str) -> np.ndarray:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{flag}: invalid JSON: {exc.msg}") from exc
    _require(
        isinstance(raw, list) and raw and all(isinstance(row, list) for row in raw),
        f"{flag}: expected a JSON array of rows",
    )
    rows = [[_parse_complex_entry(x, flag) for x in row] for row in raw]
    _require(all(len(row) == len(rows) for row in rows), f"{flag}: matrix must be square")
    return np.array(rows)


def _open_source(spec: str | None):
    """stdin for None/'-' else the named file."""
    if spec is None or spec == "-":
        return sys.stdin
    if not os.path.exists(spec):
        raise UsageError(f"no such file: {spec}")
    return spec


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_mzi(args) -> int:
    _require(0.0 < args.r2 < 1.0, "--r2 must lie in (0, 1)")
    _require(args.Delta > 0.0, "--Delta must be positive")
    _require(args.delta >= 0.0, "--delta must be non-negative")
    _require(args.delta <= 0.1 * args.Delta, "--delta must stay within the weak regime (delta <= 0.1 Delta)")
    _require(args.nbar >= 0.0, "--nbar must be non-negative")
    _require(args.intensity >= 0.0, "--intensity must be non-negative")
    _require(0.0 <= args.alpha <= math.pi / 2.0, "--alpha must lie in [0, pi/2]")
    _require(args.grid_n >= 16, "--grid-n must be at least 16")
    if args.explain:
        _explain_flags(args, "mzi")

    if args.sweep_r2 or args.sweep_delta_ratio:
        r2_values = (_parse_float_list(args.sweep_r2, "--sweep-r2")
                     if args.sweep_r2 else [args.r2])
        ratios = (_parse_float_list(args.sweep_delta_ratio, "--sweep-delta-ratio")
                  if args.sweep_delta_ratio else [args.delta / args.Delta])
        for r2 in r2_values:
            _require(0.0 < r2 < 1.0, f"--sweep-r2: value {r2} outside (0, 1)")
        for ratio in ratios:
            _require(0.0 <= ratio <= 0.1, f"--sweep-delta-ratio: value {ratio} outside [0, 0.1]")
        rows = mzi_mod.sweep(r2_values, ratios, args.Delta, n=args.grid_n, span=args.span)
        lines = [",".join(mzi_mod.SWEEP_HEADER)]
        lines += [",".join(f"{v:.17g}" for v in row) for row in rows]
        _write_primary("\n".join(lines) + "\n", args.out)
        print(f"mzi sweep: {len(rows)} rows "
              f"({len(r2_values)} r2 x {len(ratios)} delta/Delta)", file=sys.stderr)
        if args.plot:
            from . import plotting

            path = _figure_path(args, "mzi_sweep.png")
            plotting.save_mzi_sweep_figure(rows, path)
            print(f"figure: {path}", file=sys.stderr)
        return 0

    config = mzi_mod.MziConfig(
        r2=args.r2, delta=args.delta, Delta=args.Delta,
        alpha=args.alpha, nbar=args.nbar, intensity=args.intensity,
    )
    report = mzi_mod.simulate_exact(config, n=args.grid_n, span=args.span)
    summary = (f"mzi: wv_d2={report.wv_d2:.6g} "
               f"kick_d2_predicted={report.kick_d2_predicted:.6g} "
               f"kick_d2_exact={report.kick_d2_exact:.6g} p_d2={report.p_d2:.6g}")
    _emit_report(args, report.as_dict(), summary)
    if args.plot:
        from . import plotting

        path = _figure_path(args, "mzi_report.png")
        plotting.save_mzi_report_figure(report, path)
        print(f"figure: {path}", file=sys.stderr)
    return 0


def _cmd_weakvalue(args) -> int:
    operator = _parse_matrix(args.operator, "--operator")
    pre = _parse_vector(args.pre, "--pre")
    post = _parse_vector(args.post, "--post")
    dim = operator.shape[0]
    _require(pre.size == dim and post.size == dim,
             f"--pre/--post must have dimension {dim} to match --operator")
    if args.explain:
        _explain_flags(args, "weakvalue")

    labels = tuple(str(i) for i in range(dim))
    op = DiscreteOperator(operator)
    pre_state = DiscreteState(labels, pre)
    post_state = DiscreteState(labels, post)
    if args.u is not None or args.v_op is not None:
        u_mat = _parse_matrix(args.u, "--u") if args.u else np.eye(dim)
        v_mat = _parse_matrix(args.v_op, "--v-op") if args.v_op else np.eye(dim)
        _require(u_mat.shape[0] == dim and v_mat.shape[0] == dim,
                 "--u/--v-op must match the operator dimension")
        result = wv_mod.weak_value_evolved(
            op, pre_state, post_state, DiscreteOperator(u_mat), DiscreteOperator(v_mat)
        )
    else:
        result = wv_mod.weak_value(op, pre_state, post_state)

    doc = {
        "value_re": result.value.real,
        "value_im": result.value.imag,
        "overlap_re": result.overlap.real,
        "overlap_im": result.overlap.imag,
        "conditioning": result.conditioning,
    }
    if args.g is not None:
        _require(args.pos_variance > 0.0, "--pos-variance must be positive")
        coupling = wv_mod.CouplingSpec(g=args.g, v=args.pos_variance, sign=args.sign)
        doc["pointer_p_shift"] = wv_mod.pointer_momentum_shift(coupling, result)
        doc["pointer_q_shift"] = wv_mod.pointer_position_shift(coupling, result)
    summary = (f"weakvalue: value={result.value.real:.6g}"
               f"{result.value.imag:+.6g}j conditioning={result.conditioning:.6g}")
    _emit_report(args, doc, summary)
    return 0


def _cmd_kinematics(args) -> int:
    if args.explain:
        _explain_flags(args, "kinematics")
    for flag, value in (("--k", args.k), ("--ki", args.ki), ("--kf", args.kf)):
        if value is not None:
            _require(value >= 0.0, f"{flag} must be non-negative")
    if args.mass is not None:
        _require(args.mass > 0.0, "--mass must be positive")
    if args.e_neutron is not None:
        _require(args.e_neutron >= 0.0, "--e-neutron must be non-negative")

    doc: dict = {}
    if args.e_neutron is not None:
        doc["k_invA"] = kin.k_from_energy(args.e_neutron)
    if args.k_neutron is not None:
        doc["e_meV"] = kin.energy_from_k(args.k_neutron)
    if args.ki is not None and args.kf is not None and args.theta is not None:
        doc["momentum_transfer_invA"] = kin.momentum_transfer(args.ki, args.kf, args.theta)
    if args.ki is not None and args.kf is not None and args.b is not None and args.s_value is not None:
        doc["cross_section_scale"] = kin.cross_section_scale(args.ki, args.kf, args.b, args.s_value)
    if args.k is not None:
        if args.mass is not None:
            doc["recoil_energy_meV"] = kin.recoil_energy(args.k, args.mass)
        if args.e is not None and args.e > 0.0:
            point = kin.TransferPoint(args.k, args.e)
            doc["effective_mass_amu"] = float(kin.effective_mass_from_peak(point))
        if args.e is not None and args.mass is not None:
            point = kin.TransferPoint(args.k, args.e)
            doc["interaction_energy_meV"] = kin.interaction_energy(point, args.mass)
        if args.p_par is not None and args.mass is not None:
            doc["doppler_energy_meV"] = kin.doppler_energy(args.k, args.p_par, args.mass)
    if not doc:
        raise UsageError(
            "nothing to compute; give e.g. --k with --mass and/or --e, "
            "--ki/--kf/--theta, --e-neutron, or --k-neutron"
        )
    summary = "kinematics: " + " ".join(f"{key}={value:.6g}" for key, value in doc.items())
    _emit_report(args, doc, summary)
    return 0


def _cmd_tof_reduce(args) -> int:
    config = kin.load_geometry_config(args.config)
    sources = {key: (value, "config") for key, value in config.items()}
    flag_map = {
        "l1": "l1_m", "l2": "l2_m", "e_i": "e_i_meV", "e_f": "e_f_meV",
        "mode": "mode", "t_offset": "t_offset_s", "path_scale": "path_scale",
    }
    for dest, key in flag_map.items():
        value = getattr(args, dest)
        if value is not None:
            config[key] = value
            sources[key] = (value, "flag")
    for key, default in (("t_offset_s", 0.0), ("path_scale", 1.0)):
        if key not in config:
            config[key] = default
            sources[key] = (default, "default")
    _require(config["l1_m"] > 0.0 and config["l2_m"] > 0.0, "flight paths must be positive")
    _require(config["path_scale"] > 0.0, "path_scale must be positive")
    _require(config["mode"] in ("direct", "inverse"), "--mode must be direct or inverse")
    energy_key = "e_i_meV" if config["mode"] == "direct" else "e_f_meV"
    _require(config.get(energy_key, 0.0) > 0.0,
             f"{config['mode']} geometry requires {energy_key} > 0")
    if args.explain:
        print("# resolved configuration (flags > config file > defaults)", file=sys.stderr)
        for key in sorted(sources):
            value, source = sources[key]
            print(f"{key} = {value} ({source})", file=sys.stderr)

    events = kin.load_tof_events(_open_source(args.events))
    points = kin.reduce_events(config, events)
    buffer = io.StringIO()
    kin.save_transfers(points, buffer)
    _write_primary(buffer.getvalue(), args.out)
    k_values = [p.K for p in points]
    e_values = [p.E for p in points]
    print(f"tof-reduce: {len(points)} events, K in [{min(k_values):.4g}, "
          f"{max(k_values):.4g}] 1/A, E in [{min(e_values):.4g}, "
          f"{max(e_values):.4g}] meV", file=sys.stderr)
    if args.plot:
        from . import plotting

        path = _figure_path(args, "transfers.png")
        plotting.save_transfers_figure(points, path)
        print(f"figure: {path}", file=sys.stderr)
    return 0


def _cmd_deficit(args) -> int:
    _require(args.hbar_k > 0.0, "--hbarK must be positive")
    _require(args.lam >= 0.0, "--lambda must be non-negative")
    _require(args.sigma_i > 0.0, "--sigma-i must be positive")
    if args.sigma_f is not None:
        _require(args.sigma_f > 0.0, "--sigma-f must be positive")
    _require(args.grid_n >= 16, "--grid-n must be at least 16")
    if args.explain:
        _explain_flags(args, "deficit")

    if args.initial:
        initial = load_wavefunction(args.initial)
    else:
        initial = GaussianSpec(0.0, args.sigma_i)
    sigma_f = args.sigma_f if args.sigma_f is not None else args.sigma_i
    if args.final == "gaussian":
        final = GaussianSpec(args.hbar_k, sigma_f)
    elif args.final == "delta":
        final = deficit_mod.DeltaSpec(args.hbar_k)
    else:
        final = load_wavefunction(args.final)

    pair = deficit_mod.AtomicStatePair(initial, final, args.hbar_k)
    prediction = deficit_mod.total_momentum_transfer(
        args.hbar_k, args.lam, pair, n=args.grid_n, span=args.span
    )
    summary = (f"deficit: p_w={prediction.p_w:.6g} "
               f"total_transfer={prediction.total_transfer:.6g} "
               f"deficit_fraction={prediction.deficit_fraction:.6g}")
    if not prediction.weak_regime:
        summary += " (outside weak regime)"
    _emit_report(args, prediction.as_dict(), summary)
    if args.plot:
        from . import plotting

        initial_wf, final_wf = deficit_mod.sample_pair(
            pair, n=args.grid_n, span=args.span
        )
        path = _figure_path(args, "deficit.png")
        plotting.save_deficit_figure(initial_wf, final_wf, prediction, path)
        print(f"figure: {path}", file=sys.stderr)
    return 0


def _cmd_synth(args) -> int:
    _require(args.m_eff > 0.0, "--m-eff must be positive")
    _require(args.doppler_sigma_p > 0.0, "--doppler-sigma-p must be positive")
    _require(args.line_width > 0.0 and args.line_width_k > 0.0,
             "line widths must be positive")
    _require(args.a_ridge >= 0.0 and args.a_line >= 0.0, "amplitudes must be non-negative")
    _require(args.noise >= 0.0, "--noise must be non-negative")
    _require(args.k_min < args.k_max and args.e_min < args.e_max, "grid bounds must ascend")
    _require(args.n_k >= 4, "--n-k must be at least 4")
    _require(args.n_e >= 16, "--n-e must be at least 16")
    if args.explain:
        _explain_flags(args, "synth")

    params = spectra.RotoRecoilParams(
        m_eff=args.m_eff, e_rot=args.e_rot, k_rot=args.k_rot,
        doppler_sigma_p=args.doppler_sigma_p, line_width=args.line_width,
        line_width_k=args.line_width_k, a_ridge=args.a_ridge,
        a_line=args.a_line, noise_sigma=args.noise,
    )
    k_grid = np.linspace(args.k_min, args.k_max, args.n_k)
    e_grid = np.linspace(args.e_min, args.e_max, args.n_e)
    imap = spectra.synthesize(params, k_grid, e_grid, seed=args.seed)
    _write_primary(spectra.map_to_text(imap), args.out)
    print(f"synth: {args.n_k}x{args.n_e} map, m_eff={args.m_eff} a.m.u., "
          f"noise={args.noise}", file=sys.stderr)
    if args.plot:
        from . import plotting

        path = _figure_path(args, "map.png")
        plotting.save_map_figure(imap, path)
        print(f"figure: {path}", file=sys.stderr)
    return 0


def _cmd_fit(args) -> int:
    _require(args.window > 0.0, "--window must be positive")
    if args.e_offset_mode == "fixed":
        _require(args.e_rot is not None, "--e-offset-mode fixed requires --e-rot")
    exclude = _parse_intervals(args.exclude_k, "--exclude-k") if args.exclude_k else None
    if args.explain:
        _explain_flags(args, "fit")

    imap = spectra.load_map(_open_source(args.map))
    centroids = spectra.extract_centroids(imap, args.window, args.baseline)
    fit = spectra.fit_recoil_mass(
        centroids,
        args.e_offset_mode,
        e_rot=args.e_rot,
        weighted=not args.unweighted,
        exclude_k=exclude,
    )
    _write_primary(spectra.fit_to_text(fit), args.out)
    print(f"fit: m_eff_amu={float(fit.m_eff_hat):.6g} "
          f"+- {fit.std_err:.3g} (n={fit.n_points}, "
          f"rms={fit.residual_rms:.3g} meV)", file=sys.stderr)
    if args.plot:
        from . import plotting

        path = _figure_path(args, "fit.png")
        plotting.save_map_figure(imap, path, fit=fit, title="S(K, E) with recoil fit")
        print(f"figure: {path}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser, *, report: bool) -> None:
    parser.add_argument("--out", help="write the primary artifact here ('-' = stdout)")
    if report:
        parser.add_argument("--json", action="store_true",
                            help="emit the JSON document on stdout")
    parser.add_argument("--plot", action="store_true",
                        help="render a matplotlib figure next to the output")
    parser.add_argument("--plot-out", help="explicit figure path (implies --plot)")
    parser.add_argument("--plot-dir", default=".",
                        help="directory for default-named figures")
    parser.add_argument("--explain", action="store_true",
                        help="print resolved options and their sources to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weakscatter",
        description=("Pre/post-selected measurement toolkit: interferometer "
                     "pointer kicks, momentum-transfer deficits, and "
                     "recoil-spectrum fitting."),
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("mzi", help="interferometer dark-port mirror kick")
    p.add_argument("--r2", type=float, required=True, help="reflectivity squared")
    p.add_argument("--delta", type=float, required=True, help="per-photon mirror kick")
    p.add_argument("--Delta", type=float, required=True, help="mirror momentum spread")
    p.add_argument("--alpha", type=float, default=0.0, help="mirror angle (rad)")
    p.add_argument("--nbar", type=float, default=0.0, help="mean photon number")
    p.add_argument("--intensity", type=float, default=1.0, help="classical intensity")
    p.add_argument("--grid-n", type=int, default=8192)
    p.add_argument("--span", type=float, default=10.0, help="grid half-range / Delta")
    p.add_argument("--sweep-r2", help="comma list of r2 values (CSV sweep mode)")
    p.add_argument("--sweep-delta-ratio", help="comma list of delta/Delta values")
    _add_common(p, report=True)
    p.set_defaults(handler=_cmd_mzi)
    _SUBPARSERS["mzi"] = p

    p = sub.add_parser("weakvalue", help="weak value for explicit states/operator")
    p.add_argument("--operator", required=True, help="JSON matrix")
    p.add_argument("--pre", required=True, help="JSON amplitude vector")
    p.add_argument("--post", required=True, help="JSON amplitude vector")
    p.add_argument("--u", help="JSON unitary applied before the coupling")
    p.add_argument("--v-op", help="JSON unitary applied after the coupling")
    p.add_argument("--g", type=float, help="coupling strength for pointer shifts")
    p.add_argument("--pos-variance", type=float, default=1.0,
                   help="initial pointer position variance")
    p.add_argument("--sign", type=int, default=1, choices=(1, -1),
                   help="Hamiltonian sign convention")
    _add_common(p, report=True)
    p.set_defaults(handler=_cmd_weakvalue)
    _SUBPARSERS["weakvalue"] = p

    p = sub.add_parser("kinematics", help="closed-form scattering kinematics")
    p.add_argument("--k", type=float, help="momentum transfer K (1/A)")
    p.add_argument("--e", type=float, help="energy transfer E (meV)")
    p.add_argument("--mass", type=float, help="scatterer mass (a.m.u.)")
    p.add_argument("--p-par", type=float, help="atomic momentum along K (hbar/A)")
    p.add_argument("--ki", type=float, help="incident wavevector (1/A)")
    p.add_argument("--kf", type=float, help="final wavevector (1/A)")
    p.add_argument("--theta", type=float, help="scattering angle (rad)")
    p.add_argument("--b", type=float, help="scattering length")
    p.add_argument("--s-value", type=float, help="structure-factor value")
    p.add_argument("--e-neutron", type=float, help="neutron energy -> wavevector")
    p.add_argument("--k-neutron", type=float, help="neutron wavevector -> energy")
    _add_common(p, report=True)
    p.set_defaults(handler=_cmd_kinematics)
    _SUBPARSERS["kinematics"] = p

    p = sub.add_parser("tof-reduce", help="reduce TOF events to (K, E) transfers")
    p.add_argument("--config", required=True, help="geometry key=value file")
    p.add_argument("--events", help="event CSV 't_total_s,theta_rad' ('-' = stdin)")
    p.add_argument("--l1", type=float, help="override l1_m")
    p.add_argument("--l2", type=float, help="override l2_m")
    p.add_argument("--e-i", type=float, help="override e_i_meV")
    p.add_argument("--e-f", type=float, help="override e_f_meV")
    p.add_argument("--mode", choices=("direct", "inverse"), help="override mode")
    p.add_argument("--t-offset", type=float, help="override t_offset_s")
    p.add_argument("--path-scale", type=float, help="override path_scale")
    _add_common(p, report=False)
    p.set_defaults(handler=_cmd_tof_reduce)
    _SUBPARSERS["tof-reduce"] = p

    p = sub.add_parser("deficit", help="post-selected momentum-transfer deficit")
    p.add_argument("--hbarK", dest="hbar_k", type=float, required=True,
                   help="conventional momentum transfer (hbar/A)")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0,
                   help="coupling smallness factor")
    p.add_argument("--final", default="gaussian",
                   help="'gaussian', 'delta', or a p,re,im CSV path")
    p.add_argument("--initial", help="initial state as a p,re,im CSV path")
    p.add_argument("--sigma-i", type=float, default=1.0,
                   help="initial Gaussian width (hbar/A)")
    p.add_argument("--sigma-f", type=float,
                   help="final Gaussian width (defaults to --sigma-i)")
    p.add_argument("--grid-n", type=int, default=4096)
    p.add_argument("--span", type=float, default=10.0, help="grid half-range / sigma")
    _add_common(p, report=True)
    p.set_defaults(handler=_cmd_deficit)
    _SUBPARSERS["deficit"] = p

    p = sub.add_parser("synth", help="synthesize a roto-recoil intensity map")
    p.add_argument("--m-eff", type=float, required=True, help="ridge mass (a.m.u.)")
    p.add_argument("--e-rot", type=float, default=14.7, help="rotational line (meV)")
    p.add_argument("--k-rot", type=float, default=2.7, help="rotational line (1/A)")
    p.add_argument("--doppler-sigma-p", type=float, default=0.5,
                   help="atomic momentum spread (hbar/A)")
    p.add_argument("--line-width", type=float, default=0.8, help="line E width (meV)")
    p.add_argument("--line-width-k", type=float, default=0.25, help="line K width (1/A)")
    p.add_argument("--a-ridge", type=float, default=1.0, help="ridge amplitude")
    p.add_argument("--a-line", type=float, default=0.0, help="line amplitude")
    p.add_argument("--noise", type=float, default=0.0, help="relative noise sigma")
    p.add_argument("--seed", type=int, default=0, help="noise seed")
    p.add_argument("--k-min", type=float, default=0.4)
    p.add_argument("--k-max", type=float, default=4.0)
    p.add_argument("--n-k", type=int, default=64)
    p.add_argument("--e-min", type=float, default=0.0)
    p.add_argument("--e-max", type=float, default=80.0)
    p.add_argument("--n-e", type=int, default=512)
    _add_common(p, report=False)
    p.set_defaults(handler=_cmd_synth)
    _SUBPARSERS["synth"] = p

    p = sub.add_parser("fit", help="fit the recoil parabola of a map")
    p.add_argument("--map", help="map CSV path ('-' = stdin, the default)")
    p.add_argument("--window", type=float, default=10.0,
                   help="centroid fit window half-width (meV)")
    p.add_argument("--baseline", choices=("none", "median"), default="none")
    p.add_argument("--e-offset-mode", choices=("free", "fixed"), default="free")
    p.add_argument("--e-rot", type=float, help="offset for --e-offset-mode fixed")
    p.add_argument("--exclude-k", help="comma list of lo:hi K intervals to drop")
    p.add_argument("--unweighted", action="store_true",
                   help="ignore centroid uncertainties in the fit")
    _add_common(p, report=False)
    p.set_defaults(handler=_cmd_fit)
    _SUBPARSERS["fit"] = p

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "plot_out", None):
        args.plot = True
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (DomainError, ConditioningError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except WeakScatterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
