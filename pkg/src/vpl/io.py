"""CSV persistence, run manifest and the re-verification pass.

Output directory layout::

    reports.csv            one row per lambda
    manifest.txt           configuration and versions, ``key: value`` lines
    patches/patch_NNN.csv  active cells (x1, x2, omega); leading ``# key=value``
                           lines carry everything needed to rebuild the class

Floats are written with ``repr`` so that parsing returns the identical value.
"""
from __future__ import annotations

import csv
import math
import platform
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (SolveReport, confined, make_report, psi_bound_check)
from .disk_grid import Ball, DiskGrid, build_grid
from .energy_solver import SolveResult, SolverConfig, evaluate, threshold_profile
from .errors import ContractViolation, PatchFormError
from .patch_class import PatchConstraints, PatchField, validate

REPORT_COLUMNS = ("lambda", "epsilon", "energy", "mu", "cx1", "cy1", "cx2", "cy2",
                  "diam1", "diam2", "resid1", "resid2", "resid3", "iters", "converged")
PATCH_COLUMNS = ("x1", "x2", "omega")
TIE_BREAK = "psi descending, then |x2| descending, then cell index ascending"
FORMAT_VERSION = "1"


def _f(x) -> str:
    return repr(float(x))


def report_row(r: SolveReport) -> list[str]:
    res = list(r.weak_residuals) + [math.nan] * (3 - len(r.weak_residuals))
    return [_f(r.lam), _f(r.epsilon), _f(r.energy), _f(r.mu),
            _f(r.centroid1[0]), _f(r.centroid1[1]), _f(r.centroid2[0]), _f(r.centroid2[1]),
            _f(r.diam1), _f(r.diam2), _f(res[0]), _f(res[1]), _f(res[2]),
            str(int(r.iterations)), "true" if r.converged else "false"]


def write_reports(reports, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            w.writerow(report_row(r))
    return path


def read_reports(path) -> list[dict]:
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for raw in csv.DictReader(fh):
            row = {k: float(v) for k, v in raw.items() if k not in ("iters", "converged")}
            row["iters"] = int(raw["iters"])
            row["converged"] = raw["converged"] == "true"
            rows.append(row)
    return rows


def _constraints_meta(c: PatchConstraints) -> dict[str, str]:
    return {
        "class": "symmetric" if c.symmetric else "general",
        "lambda": _f(c.lam),
        "kappa1": _f(c.kappa1),
        "kappa2": _f(c.kappa2),
        "ball1_center": f"{_f(c.ball1.center[0])},{_f(c.ball1.center[1])}",
        "ball1_radius": _f(c.ball1.radius),
        "ball2_center": f"{_f(c.ball2.center[0])},{_f(c.ball2.center[1])}",
        "ball2_radius": _f(c.ball2.radius),
    }


def write_patch(result: SolveResult, path) -> Path:
    path = Path(path)
    g = result.grid
    meta = {"format": FORMAT_VERSION, "grid_n": str(g.n)}
    meta.update(_constraints_meta(result.constraints))
    meta.update({"iterations": str(result.iterations),
                 "converged": "true" if result.converged else "false"})
    w = result.omega.omega
    act = np.flatnonzero(w)
    with path.open("w", newline="", encoding="utf-8") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}={v}\n")
        cw = csv.writer(fh, lineterminator="\n")
        cw.writerow(PATCH_COLUMNS)
        for i in act:
            cw.writerow([_f(g.centers[i, 0]), _f(g.centers[i, 1]), _f(w[i])])
    return path


def read_patch(path) -> tuple[PatchField, dict[str, str]]:
    meta: dict[str, str] = {}
    rows = []
    with Path(path).open(encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k] = v
        elif line.strip():
            body.append(line)
    reader = csv.reader(body)
    header = next(reader)
    if tuple(header) != PATCH_COLUMNS:
        raise ContractViolation(f"{path}: unexpected header {header}")
    rows = [[float(x) for x in row] for row in reader]
    grid = build_grid(int(meta["grid_n"]))
    cons = PatchConstraints(
        float(meta["lambda"]), float(meta["kappa1"]), float(meta["kappa2"]),
        Ball(tuple(float(x) for x in meta["ball1_center"].split(",")), float(meta["ball1_radius"])),
        Ball(tuple(float(x) for x in meta["ball2_center"].split(",")), float(meta["ball2_radius"])),
        meta["class"] == "symmetric")
    omega = np.zeros(grid.size)
    if rows:
        arr = np.array(rows)
        omega[grid.index_of(arr[:, :2])] = arr[:, 2]
    return PatchField(omega, cons, grid), meta


def write_manifest(path, settings: dict, grid_n: int, solver: SolverConfig | None = None) -> Path:
    solver = solver or SolverConfig()
    lines = [f"code_version: {__version__}",
             f"format_version: {FORMAT_VERSION}",
             f"grid_n: {grid_n}",
             f"tie_break: {TIE_BREAK}",
             "fractional_policy: one fractional cell per stored half-patch, mirrored",
             "mu_convention: psi at the last fully filled cell",
             "test_fields: gradients of bump*q on B_0.5((0.15, 0.35)); q = |x-c|^2/2, "
             "(x1-c1)(x2-c2), x1-c1",
             f"python: {platform.python_version()}",
             f"numpy: {np.__version__}"]
    lines += [f"solver.{k}: {v!r}" for k, v in asdict(solver).items()]
    lines += [f"config.{k}: {v}" for k, v in sorted(settings.items())]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def persist(results: list[SolveResult], out_dir, settings: dict | None = None,
            solver: SolverConfig | None = None, reports: list[SolveReport] | None = None) -> Path:
    """Write reports.csv, per-solve patch CSVs and manifest.txt into ``out_dir``."""
    out = Path(out_dir)
    (out / "patches").mkdir(parents=True, exist_ok=True)
    reports = [make_report(r) for r in results] if reports is None else reports
    write_reports(reports, out / "reports.csv")
    for k, res in enumerate(results):
        write_patch(res, out / "patches" / f"patch_{k:03d}.csv")
    grid_n = results[0].grid.n if results else 0
    write_manifest(out / "manifest.txt", settings or {}, grid_n, solver)
    return out


def _close(a: float, b: float, rtol: float = 1e-12) -> bool:
    if math.isnan(a) and math.isnan(b):
        return True
    return abs(a - b) <= rtol * max(abs(a), abs(b), 1e-300)


def verify_dir(in_dir) -> list[tuple[str, bool, str]]:
    """Recompute diagnostics from persisted patches and re-check invariants."""
    d = Path(in_dir)
    checks: list[tuple[str, bool, str]] = []
    try:
        rows = read_reports(d / "reports.csv")
    except (OSError, KeyError, ValueError) as exc:
        return [("reports.csv readable", False, str(exc))]
    patches = sorted((d / "patches").glob("patch_*.csv"))
    checks.append(("one patch file per report row", len(patches) == len(rows),
                   f"{len(patches)} patches, {len(rows)} rows"))
    for path, row in zip(patches, rows):
        tag = path.name
        field_, meta = read_patch(path)
        ok, why = validate(field_.grid, field_, field_.constraints)
        checks.append((f"{tag}: class membership", ok, why or ""))
        res, fixed = evaluate(field_, int(meta.get("iterations", 0)),
                              meta.get("converged") == "true")
        checks.append((f"{tag}: bathtub fixed point", fixed or not res.converged, ""))
        try:
            prof = threshold_profile(res)
            checks.append((f"{tag}: omega = f(psi)", True, f"{prof.violations_per_patch}"))
        except PatchFormError as exc:
            checks.append((f"{tag}: omega = f(psi)", False, str(exc)))
        ok, hi, lo = psi_bound_check(res)
        checks.append((f"{tag}: psi bound off the balls", ok, f"max {hi:.6g}, min {lo:.6g}"))
        c = field_.constraints
        delta = min(c.ball1.radius, c.ball2.radius)
        if c.lam >= 8 * max(c.kappa1, -c.kappa2) / (math.pi * delta**2):
            checks.append((f"{tag}: support away from ball boundary", confined(res), ""))
        rep = make_report(res)
        mism = [k for k, v in zip(REPORT_COLUMNS[:13], report_row(rep)[:13])
                if not _close(float(v), row[k])]
        checks.append((f"{tag}: report row recomputes", not mism, ",".join(mism)))
        checks.append((f"{tag}: diam/eps >= 2", min(rep.diam_over_eps) >= 2.0,
                       f"{min(rep.diam_over_eps):.4f}"))
    return checks
