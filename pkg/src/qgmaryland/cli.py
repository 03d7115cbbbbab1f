"""Command-line front end.

Subcommands ``validate``, ``spectrum``, ``sigma-curve``, ``eigenfunction`` and
``defect-scan`` read a TOML config (``--config``) and write CSV or JSON files
with ``#``-prefixed header lines. Exit codes: 0 success, 1 numerical or
internal error, 2 invalid configuration.
"""
import argparse
import csv
import io
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import InputError, QGError
from .lattice_model import couplings, spectral_gaps, validate_params
from .spectral_solver import (
    certify_record, eigenvalue_for_index, graph_eigenfunction, index_range,
    lattice_eigenvector, resolved_bracket,
)
from .torus_analysis import sigma, sigma_prime
from .truncation_oracle import defect, defect_scan

log = logging.getLogger("qgmaryland")

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2

SPECTRUM_COLUMNS = ("m", "gap_id", "lambda", "sigma", "target", "residual", "defect_at_lambda")
SIGMA_COLUMNS = ("lambda", "sigma", "sigma_prime", "quad_error")
EIGENFUNCTION_COLUMNS = ("kind", "n", "j", "t", "value", "derivative",
                         "continuity_residual", "flux_residual")
DEFECT_COLUMNS = ("lambda", "defect")
VALIDATE_COLUMNS = ("norm", "m", "nearest_integer", "margin")


def _fmt(value):
    if isinstance(value, tuple):
        return ";".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _jsonable(value):
    if isinstance(value, tuple):
        return list(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_table(cfg, command, name, columns, rows, footer=None):
    """Write ``rows`` under ``output.directory`` and return the path."""
    out_dir = cfg.output.directory
    os.makedirs(out_dir, exist_ok=True)
    fmt = cfg.output.format
    path = os.path.join(out_dir, f"{name}.{fmt}")
    meta = {
        "tool": "qgmaryland",
        "version": __version__,
        "command": command,
        "config_sha256": cfg.digest(),
    }
    footer = footer or {}
    if fmt == "csv":
        buf = io.StringIO()
        for k, v in meta.items():
            buf.write(f"# {k}: {v}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])
        for k, v in footer.items():
            buf.write(f"# {k}: {_fmt(v) if not isinstance(v, list) else json.dumps(v)}\n")
        text = buf.getvalue()
    else:
        doc = {
            "meta": meta,
            "columns": list(columns),
            "records": [{c: _jsonable(row[c]) for c in columns} for row in rows],
            "footer": {k: _jsonable(v) for k, v in footer.items()},
        }
        text = json.dumps(doc, indent=1) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _gaps(cfg):
    return spectral_gaps(cfg.model(), cfg.compute.window)


def _gap(cfg, gap_id):
    gaps = _gaps(cfg)
    if not 0 <= gap_id < len(gaps):
        raise InputError(f"gap {gap_id} does not exist; the window has {len(gaps)} gaps")
    return gaps[gap_id]


def cmd_validate(cfg, args):
    params = cfg.params()
    report = validate_params(params, cfg.compute.check_radius)
    rows = [{"norm": norm, "m": m, "nearest_integer": int(round(float(np.dot(m, params.omega)))),
             "margin": margin} for norm, m, margin in report.best_approximations()]
    footer = {
        "radius_checked": report.radius_checked,
        "c_est": report.c_est,
        "beta_est": report.beta_est,
        "worst_m": report.worst_pair[0],
        "worst_margin": report.worst_pair[2],
        "min_phase_margin": report.min_phase_margin,
    }
    path = write_table(cfg, "validate", "validate", VALIDATE_COLUMNS, rows, footer)
    print(f"parameters valid up to |m| <= {report.radius_checked}: "
          f"C ~ {report.c_est:.4g}, beta ~ {report.beta_est:.4g} ({path})")
    return EXIT_OK


def cmd_spectrum(cfg, args):
    model, params = cfg.model(), cfg.params()
    validate_params(params, cfg.compute.check_radius)
    c = cfg.compute
    gaps = _gaps(cfg)
    gap_ids = range(len(gaps)) if args.gap is None else [args.gap]
    rows = []
    failures = 0
    for gap_id in gap_ids:
        if not 0 <= gap_id < len(gaps):
            raise InputError(f"gap {gap_id} does not exist")
        gap = gaps[gap_id]
        bracket = resolved_bracket(model, params, gap, c.sigma_tol, c.grid_cap)
        for m in index_range(model.d, c.index_radius):
            try:
                rec = eigenvalue_for_index(model, params, gap, m, tol=c.lambda_tol,
                                           gap_id=gap_id, sigma_tol=c.sigma_tol,
                                           bracket=bracket, n_max=c.grid_cap)
                if rec is None:
                    continue
                certify_record(model, params, rec, c.box_radius, tol=c.residual_tol)
                dft = defect(model, params, rec.lam, cfg.defect_box)
            except QGError as exc:
                failures += 1
                log.error("m=%s in gap %d failed: %s", m, gap_id, exc)
                continue
            rows.append({"m": rec.m, "gap_id": gap_id, "lambda": rec.lam,
                         "sigma": rec.sigma_at_lambda, "target": rec.target,
                         "residual": rec.residual, "defect_at_lambda": dft})
    rows.sort(key=lambda r: r["lambda"])
    footer = {"records": len(rows), "failures": failures, "defect_box": cfg.defect_box}
    path = write_table(cfg, "spectrum", "spectrum", SPECTRUM_COLUMNS, rows, footer)
    print(f"{len(rows)} eigenvalues written to {path}")
    return EXIT_OK if failures == 0 else EXIT_NUMERICAL


def cmd_sigma_curve(cfg, args):
    model, params = cfg.model(), cfg.params()
    c = cfg.compute
    gap_id = args.gap or 0
    gap = _gap(cfg, gap_id)
    a, b, _, _ = resolved_bracket(model, params, gap, c.sigma_tol, c.grid_cap)
    samples = args.samples or c.samples
    rows = []
    for lam in np.linspace(a, b, samples):
        sv = sigma(model, params, lam, tol=c.sigma_tol, n_max=c.grid_cap)
        sp = sigma_prime(model, params, lam, gap=gap, n_max=c.grid_cap)
        rows.append({"lambda": float(lam), "sigma": sv.sigma, "sigma_prime": sp,
                     "quad_error": sv.error_estimate})
    path = write_table(cfg, "sigma-curve", f"sigma_curve_gap{gap_id}", SIGMA_COLUMNS, rows,
                       {"gap_id": gap_id, "gap": (gap[0], gap[1]), "resolved": (a, b)})
    print(f"{samples} samples written to {path}")
    return EXIT_OK


def cmd_eigenfunction(cfg, args):
    model, params = cfg.model(), cfg.params()
    c = cfg.compute
    gap_id = args.gap or 0
    gap = _gap(cfg, gap_id)
    m = tuple(args.m) if args.m is not None else (0,) * model.d
    if len(m) != model.d:
        raise InputError(f"--m needs {model.d} integers")
    rec = eigenvalue_for_index(model, params, gap, m, tol=c.lambda_tol, gap_id=gap_id,
                               sigma_tol=c.sigma_tol, n_max=c.grid_cap)
    if rec is None:
        raise InputError(f"no eigenvalue for m={m} in gap {gap_id}")
    certify_record(model, params, rec, c.box_radius, tol=c.residual_tol)
    out_radius = c.box_radius or {1: 24, 2: 12, 3: 6}[model.d]
    out_radius = max(out_radius, max(abs(v) for v in m) + 1)
    u_full = lattice_eigenvector(model, params, rec, rec.box_radius)
    u = lattice_eigenvector(model, params, rec, out_radius)
    gf = graph_eigenfunction(model, params, rec, u)
    scale = float(np.max(np.abs(u.amplitudes)))
    samples = args.samples or 16
    interior, flux = gf.fluxes()
    alpha = couplings(params, interior)
    rows = []
    r = u.box_radius
    flux_by_n = {tuple(int(v) for v in n): (fl, al) for n, fl, al in zip(interior, flux, alpha)}
    for n in interior:
        key = tuple(int(v) for v in n)
        f_n = u.amplitudes[tuple(n + r)]
        fl, al = flux_by_n[key]
        rows.append({"kind": "vertex", "n": key, "j": "", "t": "",
                     "value": float(f_n.real), "derivative": float(fl.real),
                     "continuity_residual": "",
                     "flux_residual": float(abs(fl - al * f_n) / scale)})
    for j, basis in enumerate(gf.bases):
        length = basis.profile.length
        t = np.linspace(0.0, length, samples)
        f, fp = gf.edge_values(j, t)
        start, stop = gf.end_values(j)
        for k, n in enumerate(gf.edge_indices(j)):
            key = tuple(int(v) for v in n)
            for i, ti in enumerate(t):
                if i == 0:
                    cont = float(abs(f[k, i] - start[k]) / scale)
                elif i == samples - 1:
                    cont = float(abs(f[k, i] - stop[k]) / scale)
                else:
                    cont = ""
                rows.append({"kind": "edge", "n": key, "j": j, "t": float(ti),
                             "value": float(f[k, i].real), "derivative": float(fp[k, i].real),
                             "continuity_residual": cont, "flux_residual": ""})
    footer = {
        "m": rec.m, "lambda": rec.lam, "gap_id": gap_id,
        "residual": rec.residual, "certify_box": rec.box_radius,
        "decay_slope": u_full.decay_slope, "decay_r2": u_full.decay_r2,
        "max_imag_ratio": u.imag_ratio(),
        "max_continuity_residual": gf.continuity_residual(),
        "max_flux_residual": gf.flux_residual(),
    }
    name = "eigenfunction_m" + "_".join(str(v) for v in m) + f"_gap{gap_id}"
    path = write_table(cfg, "eigenfunction", name, EIGENFUNCTION_COLUMNS, rows, footer)
    print(f"eigenfunction for m={m} at lambda={rec.lam!r} written to {path}")
    return EXIT_OK


def cmd_defect_scan(cfg, args):
    model, params = cfg.model(), cfg.params()
    c = cfg.compute
    gap_id = args.gap or 0
    gap = _gap(cfg, gap_id)
    grid = args.grid or c.defect_grid
    n_box = args.N or cfg.defect_box
    curve = defect_scan(model, params, gap, grid, n_box)
    rows = [{"lambda": float(l), "defect": float(v)} for l, v in zip(curve.lambdas, curve.defects)]
    bracket = resolved_bracket(model, params, gap, c.sigma_tol, c.grid_cap)
    dips = curve.local_minima()
    matched = []
    for m in index_range(model.d, c.index_radius):
        try:
            rec = eigenvalue_for_index(model, params, gap, m, tol=c.lambda_tol, gap_id=gap_id,
                                       sigma_tol=c.sigma_tol, bracket=bracket, n_max=c.grid_cap)
        except QGError as exc:
            log.error("m=%s failed: %s", m, exc)
            continue
        if rec is None:
            continue
        nearest = float(dips[np.argmin(np.abs(dips - rec.lam))]) if dips.size else math.nan
        matched.append({"m": list(rec.m), "lambda": rec.lam, "nearest_dip": nearest})
    matched.sort(key=lambda x: x["lambda"])
    footer = {"gap_id": gap_id, "box": n_box, "grid_step": float(curve.lambdas[1] - curve.lambdas[0]),
              "matched_records": matched}
    path = write_table(cfg, "defect-scan", f"defect_scan_gap{gap_id}", DEFECT_COLUMNS, rows, footer)
    print(f"defect curve with {grid} points written to {path}")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "spectrum": cmd_spectrum,
    "sigma-curve": cmd_sigma_curve,
    "eigenfunction": cmd_eigenfunction,
    "defect-scan": cmd_defect_scan,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="qgmaryland", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML configuration file")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--out", help="output directory")
        p.add_argument("--index-radius", type=int)
        p.add_argument("--box", type=int, help="lattice box radius for eigenvectors")
        p.add_argument("--gap", type=int, help="gap index inside the window")
        p.add_argument("--samples", type=int)
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "eigenfunction":
            p.add_argument("--m", type=int, nargs="+", help="lattice index of the eigenvalue")
        if name == "defect-scan":
            p.add_argument("--grid", type=int, help="number of energies")
            p.add_argument("--N", type=int, help="oracle box radius")
    return parser


def _apply_overrides(cfg, args):
    if args.format:
        cfg.output.format = args.format
    if args.out:
        cfg.output.directory = args.out
    if args.index_radius is not None:
        cfg.compute.index_radius = args.index_radius
    if args.box is not None:
        cfg.compute.box_radius = args.box
    cfg.validate()


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config)
        _apply_overrides(cfg, args)
        return COMMANDS[args.command](cfg, args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QGError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
