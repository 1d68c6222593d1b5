"""Command-line front end.

``spinform <command> --config <path> [--strict] [--out <dir>] [--phase -1] [--refine k]``

Exit codes: 0 success (or a report-only command), 2 unreadable or malformed
configuration, 3 data refused (strict compatibility breach, nonpositive tau0),
4 numerical blow-up, 5 invariant or diagnostic breach.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .compat import InvalidPointData, PointData, clifford_check_all, evaluate_batch
from .cquat import H2Point, pi_project
from .export import (minkowski_vertices, poincare_vertices, read_field_csv, write_field_csv,
                     write_obj)
from .fieldsolve import PLANS, FlowBlowUp, HeightDrift, IncompatibleData, require_compatible, solve_hz
from .minkowski import correspond_from_g1, correspond_to_h2r, flow_v, mink_gauss, mink_immerse
from .spinsurface import (InvariantBreach, SurfaceSample, _nanmax, build_surface, diagnose, flow_g1,
                          gauss_map, product_structure)
from .weierstrass import (DataError, PlanarGrid, compatibility, data_from_dict, grid_from_dict,
                          residual_convergence)

EXIT_OK, EXIT_PARSE, EXIT_REFUSED, EXIT_BLOWUP, EXIT_BREACH = 0, 2, 3, 4, 5

DEFAULTS = {
    "data": {"family": "constant", "theta": 0.0},
    "grid": {"kind": "disk", "radius": 0.5, "resolution": 64},
    "initial": {"z0": None, "theta0_re": 0.0, "theta0_im": 0.0, "h0": 0.0, "phase_sign": 1},
    "plan": "column_rows",
    "strict": False,
    "refine": 0,
    "height_scale": 1.0,
}

# pipeline invariants (exit 5 when exceeded)
INVARIANT_TOL = {"norm_law": 1e-6, "unit_spinor": 1e-8, "hyperboloid": 1e-8, "gauss_hyperboloid": 1e-8,
                 "height_imag_drift": 1e-8}
# finite-difference diagnostics checked by ``diagnose``
DIAGNOSTIC_TOL = {"H_error": 1e-3, "nu_error": 1e-4, "mu2_rel_error": 1e-3}
CORRESPOND_TOL = {"gauss_agreement": 1e-8, "round_trip": 1e-10, "flow_residual": 1e-8}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    raw: dict
    base_dir: Path
    data_spec: dict
    grid: PlanarGrid
    z0: complex | None
    theta0: complex
    h0: float
    phase_sign: int
    plan: str
    strict: bool
    refine: int
    height_scale: float
    out: Path | None

    @property
    def hash(self) -> str:
        canon = {k: v for k, v in self.raw.items() if k != "out"}
        blob = json.dumps(canon, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def load_config(command: str, path: str | Path, args: argparse.Namespace | None = None) -> RunConfig:
    path = Path(path)
    try:
        user = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object")
    raw = _merge(DEFAULTS, user)
    if args is not None:
        if args.strict:
            raw["strict"] = True
        if args.phase is not None:
            raw["initial"]["phase_sign"] = args.phase
        if args.refine is not None:
            raw["refine"] = args.refine
        if args.out is not None:
            raw["out"] = args.out
    try:
        ini = raw["initial"]
        phase = int(ini["phase_sign"])
        if phase not in (1, -1):
            raise ConfigError(f"phase_sign must be +1 or -1, got {phase}")
        gspec = raw["grid"]
        if gspec.get("kind", "disk") == "disk" and int(gspec.get("resolution", 0)) < 8:
            raise ConfigError("grid resolution must be at least 8")
        if gspec.get("kind") == "rectangle" and min(int(gspec["nx"]), int(gspec["ny"])) < 8:
            raise ConfigError("grid needs at least 8 nodes per axis")
        grid = grid_from_dict(gspec)
        if raw["plan"] not in PLANS:
            raise ConfigError(f"unknown plan {raw['plan']!r}; expected one of {sorted(PLANS)}")
        refine = int(raw["refine"])
        if refine < 0:
            raise ConfigError("refine must be nonnegative")
        z0 = ini.get("z0")
        data_spec = dict(raw["data"])
        if "file" in data_spec:
            extra = json.loads((path.parent / data_spec.pop("file")).read_text())
            data_spec = {**extra, **data_spec}
        return RunConfig(
            command=command, raw=raw, base_dir=path.parent, data_spec=data_spec, grid=grid,
            z0=None if z0 is None else complex(float(z0[0]), float(z0[1])),
            theta0=complex(float(ini["theta0_re"]), float(ini["theta0_im"])), h0=float(ini["h0"]),
            phase_sign=phase, plan=raw["plan"], strict=bool(raw["strict"]), refine=refine,
            height_scale=float(raw["height_scale"]),
            out=None if raw.get("out") is None else Path(raw["out"]),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, IndexError, OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"malformed config: {exc!r}") from exc


def _data(cfg: RunConfig, grid: PlanarGrid | None = None):
    try:
        data, _ = data_from_dict(cfg.data_spec, grid or cfg.grid)
    except DataError as exc:
        if getattr(exc, "node", None) is not None:
            raise  # well-formed but invalid data: refused, not a parse error
        raise ConfigError(str(exc)) from exc
    return data


def _plan(cfg: RunConfig, grid: PlanarGrid):
    seed = None if cfg.z0 is None else grid.nearest_node(cfg.z0)
    return PLANS[cfg.plan](grid, seed)


def threads() -> int:
    """Worker cap from SPINFORM_THREADS (default: CPU count, at most 4)."""
    env = os.environ.get("SPINFORM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(4, os.cpu_count() or 1))


def _map(fn, items):
    items = list(items)
    if len(items) <= 1 or threads() == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads()) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# reports

def _clean(x):
    """JSON-safe copy: numpy scalars to Python, NaN and infinities to None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, complex):
        return [_clean(x.real), _clean(x.imag)]
    return x


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _provenance(cfg: RunConfig | None) -> dict:
    return {"config_hash": None if cfg is None else cfg.hash,
            "versions": {"spinform": __version__, "numpy": np.__version__, "scipy": scipy.__version__}}


def _stats(a) -> dict:
    a = np.asarray(a, dtype=float)
    fin = np.isfinite(a)
    if not fin.any():
        return {"max": None, "mean": None}
    return {"max": float(a[fin].max()), "mean": float(a[fin].mean())}


def _checks(values: dict, tols: dict) -> dict:
    return {k: {"value": values[k], "tol": tols[k], "pass": values[k] is not None and values[k] <= tols[k]}
            for k in tols}


def _ratios(errs: list[float]) -> list[float | None]:
    return [errs[k] / errs[k + 1] if errs[k + 1] > 0 else None for k in range(len(errs) - 1)]


# ---------------------------------------------------------------------------
# commands

def cmd_validate(cfg: RunConfig) -> tuple[dict, dict]:
    data = _data(cfg)
    comp = compatibility(data, cfg.grid)  # raises DataError at a nonpositive tau0
    report = {"compatibility": comp.to_dict()}
    if data.name != "tabulated":
        levels = 1 + max(1, cfg.refine)
        conv = _map(lambda which: residual_convergence(data, cfg.grid, levels, which),
                    ("vortex", "holomorphic"))
        report["convergence"] = {which: {"fd_max": errs, "ratios": ratios}
                                 for which, (errs, ratios) in zip(("vortex", "holomorphic"), conv)}
    report["status"] = "PASS" if comp.compatible else "FAIL"
    if not comp.compatible and cfg.strict:
        raise IncompatibleData(f"residuals exceed the threshold {comp.threshold:.3e}")
    return report, {}


def _surface_outputs(res, cfg: RunConfig) -> dict:
    grid = res.grid
    F = res.surface.F1
    comment = f"spinform {__version__}\nconfig {cfg.hash}\nH^2 x R surface, Poincare disk x height"
    return {
        "surface.obj": lambda p: write_obj(p, poincare_vertices(F, res.height.h, cfg.height_scale),
                                           grid.mask, comment),
        "surface.csv": lambda p: write_field_csv(p, grid, {"x0": F.x0, "x1": np.zeros(grid.shape),
                                                           "x2": F.x2, "x3": F.x3, "h": res.height.h}),
        "gauss_map.csv": lambda p: write_field_csv(p, grid, {"G0": res.gauss.x0, "G2": res.gauss.x2,
                                                             "G3": res.gauss.x3}),
        "height.csv": lambda p: write_field_csv(p, grid, {"h": res.height.h, "hz_re": res.hz.hz.real,
                                                          "hz_im": res.hz.hz.imag}),
    }


def _H_interior(diag) -> dict:
    s = _stats(np.abs(diag.H_meas - 0.5))
    fin = np.isfinite(diag.H_meas)
    return {"min": float(diag.H_meas[fin].min()), "max": float(diag.H_meas[fin].max()),
            "error_max": s["max"], "in_range": bool(np.all(np.abs(diag.H_meas[fin] - 0.5) <= 1e-3))}


def _build(cfg: RunConfig, grid: PlanarGrid, **kw):
    data = _data(cfg, grid)
    return build_surface(data, grid, theta0=cfg.theta0, h0=cfg.h0, plan=_plan(cfg, grid),
                         phase_sign=cfg.phase_sign, strict=cfg.strict, **kw)


def cmd_generate(cfg: RunConfig) -> tuple[dict, dict]:
    grids = [cfg.grid.refine(k) for k in range(cfg.refine + 1)]
    results = _map(lambda g: _build(cfg, g), grids)
    res = results[0]
    inv = res.invariants()
    report = {
        "grid": cfg.grid.to_dict(), "active_nodes": cfg.grid.n_active,
        "invariants": _checks(inv, INVARIANT_TOL), "hz_mixed_partial": inv["hz_mixed_partial"],
        "diagnostics": res.surface.diagnostics.summary(), "H_meas": _H_interior(res.surface.diagnostics),
    }
    if cfg.refine:
        errs = [_H_interior(r.surface.diagnostics)["error_max"] for r in results]
        report["refinement"] = {"H_error": errs, "ratios": _ratios(errs)}
    breach = [k for k, v in report["invariants"].items() if not v["pass"]]
    report["status"] = "FAIL" if breach else "PASS"
    if breach:
        report["breach"] = breach
    return report, _surface_outputs(res, cfg)


def _load_surface(cfg: RunConfig, path: Path) -> SurfaceSample:
    fields = read_field_csv(path, cfg.grid)
    missing = {"x0", "x2", "x3", "h"} - set(fields)
    if missing:
        raise ConfigError(f"{path}: missing columns {sorted(missing)}")
    m = cfg.grid.mask
    if not np.all(np.isfinite(fields["x0"][m])):
        raise ConfigError(f"{path}: surface does not cover every active node")
    return SurfaceSample(cfg.grid, H2Point(fields["x0"], fields["x2"], fields["x3"]), fields["h"])


def cmd_diagnose(cfg: RunConfig) -> tuple[dict, dict]:
    data = _data(cfg)
    grid = cfg.grid
    plan = _plan(cfg, grid)
    surf_path = cfg.raw.get("surface")
    if surf_path is None:
        res = _build(cfg, grid)
        diag, source = res.surface.diagnostics, "generated"
    else:
        p = cfg.base_dir / surf_path
        try:
            surf = _load_surface(cfg, p)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read surface {p}: {exc}") from exc
        require_compatible(data, grid, cfg.strict)
        hz = solve_hz(data, grid, plan, cfg.theta0)
        g1 = flow_g1(data, grid, plan, phase_sign=cfg.phase_sign)
        diag = diagnose(surf, product_structure(data.on_grid(grid), hz, grid), data, gauss_map(g1.g1p))
        source = str(surf_path)
    summary = diag.summary()
    values = {k: summary[k]["max"] for k in DIAGNOSTIC_TOL}
    report = {"source": source, "diagnostics": summary, "checks": _checks(values, DIAGNOSTIC_TOL),
              "H_meas": _H_interior(diag)}
    breach = [k for k, v in report["checks"].items() if not v["pass"]]
    report["status"] = "FAIL" if breach else "PASS"
    if breach:
        report["breach"] = breach
    return report, {}


def cmd_correspond(cfg: RunConfig) -> tuple[dict, dict]:
    data = _data(cfg)
    grid = cfg.grid
    plan = _plan(cfg, grid)
    require_compatible(data, grid, cfg.strict)  # refuse before any integration
    frame = flow_v(data, grid, plan, phase_sign=cfg.phase_sign, strict=cfg.strict)
    mink = mink_immerse(frame, plan)
    g1 = correspond_to_h2r(frame, data, tol=math.inf)
    res = build_surface(data, grid, theta0=cfg.theta0, h0=cfg.h0, plan=plan, g1=g1, strict=cfg.strict)
    G_mink = mink_gauss(frame.v).as_array()
    G_h2r = pi_project(g1.g1p).as_array()
    back = correspond_from_g1(g1)
    values = {
        "gauss_agreement": _nanmax(np.abs(G_mink - G_h2r)),
        "round_trip": _nanmax(np.abs(back.vp.c - frame.vp.c)),
        "flow_residual": g1.provenance["flow_residual"],
    }
    report = {
        "checks": _checks(values, CORRESPOND_TOL),
        "minkowski": {**mink.summary(), "norm_law": _nanmax(np.abs(frame.norm - np.sqrt(data.sample(grid)[1]))),
                      "pattern_defect": frame.pattern_defect()},
        "h2r": {"H_meas": _H_interior(res.surface.diagnostics), "invariants": res.invariants()},
    }
    breach = [k for k, v in report["checks"].items() if not v["pass"]]
    report["status"] = "FAIL" if breach else "PASS"
    if breach:
        report["breach"] = breach
    comment = f"spinform {__version__}\nconfig {cfg.hash}"
    outputs = _surface_outputs(res, cfg)
    outputs["minkowski.obj"] = lambda p: write_obj(p, minkowski_vertices(mink.F), grid.mask,
                                                   comment + "\nR^(1,2) surface as (x2, x3, x0)")
    outputs["minkowski.csv"] = lambda p: write_field_csv(p, grid, {"x0": mink.F[..., 0], "x2": mink.F[..., 1],
                                                                   "x3": mink.F[..., 2]})
    return report, outputs


def cmd_compat(cfg_path: Path, raw) -> tuple[dict, dict]:
    """Input: a JSON array of point records, or an object with ``points`` (or ``input``, a path).

    The object form may set ``clifford: true`` to add the Clifford cross-check per instance.
    """
    clifford = False
    if isinstance(raw, dict):
        clifford = bool(raw.get("clifford", False))
        raw = json.loads((cfg_path.parent / raw["input"]).read_text()) if "input" in raw else raw.get("points", [])
    if not isinstance(raw, list):
        raise ConfigError("compat input must be a JSON array of point records")
    items = []
    for k, rec in enumerate(raw):
        try:
            items.append(PointData.from_dict(rec))
        except (InvalidPointData, TypeError, ValueError) as exc:
            items.append(exc)
    entries = evaluate_batch([d for d in items if isinstance(d, PointData)])
    results, it = [], iter(entries)
    for k, d in enumerate(items):
        if isinstance(d, PointData):
            e = next(it)
            e["index"] = k
            if clifford and e["valid"]:
                e["clifford"] = clifford_check_all(d).__dict__
            results.append(e)
        else:
            results.append({"index": k, "valid": False, "error": str(d)})
    return {"instances": results, "count": len(results), "status": "REPORT"}, {}


COMMANDS = {"validate": cmd_validate, "generate": cmd_generate, "diagnose": cmd_diagnose,
            "correspond": cmd_correspond}


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinform", description="H = 1/2 surfaces from Weierstrass data.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("validate", "generate", "diagnose", "correspond", "compat"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--strict", action="store_true", help="refuse data failing the compatibility check")
        p.add_argument("--out", help="output directory")
        p.add_argument("--phase", type=int, choices=(1, -1), help="sign of the initial spinor")
        p.add_argument("--refine", type=int, help="extra refinement levels for convergence reporting")
    return parser


def _write(out: Path | None, report: dict, outputs: dict) -> None:
    text = dumps(report)
    sys.stdout.write(text)
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    for name in sorted(outputs):
        outputs[name](out / name)
    (out / "report.json").write_text(text)


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    report: dict = {"command": args.command}
    cfg = None
    out = None if args.out is None else Path(args.out)
    try:
        if args.command == "compat":
            path = Path(args.config)
            try:
                raw = json.loads(path.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read {path}: {exc}") from exc
            body, outputs = cmd_compat(path, raw)
            code = EXIT_OK
        else:
            cfg = load_config(args.command, args.config, args)
            out = cfg.out if cfg.out is not None else (Path("spinform_out") if args.command == "generate" else None)
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", RuntimeWarning)
                body, outputs = COMMANDS[args.command](cfg)
            msgs = sorted({str(w.message) for w in caught if issubclass(w.category, RuntimeWarning)})
            if msgs:
                body["warnings"] = msgs
            code = EXIT_BREACH if body.get("status") == "FAIL" and args.command != "validate" else EXIT_OK
    except ConfigError as exc:
        body, outputs, code = {"status": "ERROR", "error": str(exc)}, {}, EXIT_PARSE
    except (IncompatibleData, DataError) as exc:
        body, outputs, code = {"status": "REFUSED", "error": str(exc)}, {}, EXIT_REFUSED
        if isinstance(exc, DataError) and getattr(exc, "node", None) is not None:
            body["node"], body["z"] = {"iy": exc.node[0], "ix": exc.node[1]}, exc.z
    except FlowBlowUp as exc:
        body, outputs, code = {"status": "BLOWUP", "error": str(exc)}, {}, EXIT_BLOWUP
        if getattr(exc, "node", None) is not None:
            body["node"], body["z"] = {"iy": exc.node[0], "ix": exc.node[1]}, exc.z
    except (InvariantBreach, HeightDrift) as exc:
        body, outputs, code = {"status": "FAIL", "error": str(exc)}, {}, EXIT_BREACH
    report.update(body)
    report["exit_code"] = code
    report["provenance"] = _provenance(cfg)
    _write(out, report, outputs)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
