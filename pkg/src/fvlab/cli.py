"""Command-line front end: flat INI configuration, study orchestration with
CSV emission, mesh inspection and identity checking.

Exit codes: 0 success, 2 configuration/parse errors, 3 acceptance-threshold
failure (the failing series is named), 4 regularity audit abort (the
offending parameter is named), 1 identity-check failure.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from pathlib import Path

import numpy as np

from .fields import interpolate_test
from .geometry import (build_dual_mac, build_dual_rt, build_time_grid,
                       check_mesh_identities, regularity)
from .meshio import load_mesh
from .quadrature import CellQuadrature
from .study import (StudyConfig, StudyRegularityError, build_level, run_study,
                    write_report_csv, write_rates_csv)

__all__ = ["main", "parse_config", "serialize_config", "ConfigError"]


class ConfigError(ValueError):
    pass


_SCHEMA = {
    "mesh": {"family": str, "nx": int, "ny": int, "x0": float, "x1": float,
             "y0": float, "y1": float, "grading": float,
             "grading_growth": float, "amplitude": float, "seed": int,
             "file": str},
    "time": {"T": float, "dt_over_h": float, "pattern": str, "ratio": float},
    "study": {"levels": int, "layout": str, "beta": str, "g": str,
              "face_scheme": str, "lambda": float, "field_source": str,
              "solution": str, "boundary_policy": str, "cfl": float,
              "translate_theta": float, "threads": int},
    "test_function": {"x0": float, "x1": float, "y0": float, "y1": float,
                      "t_max_factor": float, "time_profile": str},
    "numerics": {"quad_order": int, "interp_panels": int, "oracle_order": int,
                 "rhs_panels": int},
    "audit": {"regularity_cap": float, "regularity_growth": float},
    "output": {"out_dir": str},
    "thresholds": None,      # free-form series = min-slope entries
}


def parse_config(path) -> tuple[StudyConfig, dict]:
    """Read a flat key = value INI file into a StudyConfig.

    Returns (config, meta) where meta holds non-study settings (mesh file,
    output directory).
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str            # keep key case (T vs t)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        schema = _SCHEMA[section]
        if schema is None:
            continue
        for key in cp[section]:
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} in [{section}]")

    def get(section, key, conv, default):
        if cp.has_option(section, key):
            try:
                return conv(cp.get(section, key))
            except ValueError as exc:
                raise ConfigError(
                    f"bad value for {key!r} in [{section}]: {exc}") from exc
        return default

    layout = get("study", "layout", str, "mac")
    dim = 1 if layout == "colocated1d" else 2
    domain_x = (get("mesh", "x0", float, 0.0), get("mesh", "x1", float, 1.0))
    domain_y = (get("mesh", "y0", float, 0.0), get("mesh", "y1", float, 1.0))
    domain = (domain_x,) if dim == 1 else (domain_x, domain_y)
    support = None
    if cp.has_section("test_function") and cp.has_option("test_function", "x0"):
        sx = (get("test_function", "x0", float, 0.2),
              get("test_function", "x1", float, 0.8))
        if dim == 1:
            support = (sx,)
        else:
            support = (sx, (get("test_function", "y0", float, 0.2),
                            get("test_function", "y1", float, 0.8)))
    thresholds = {}
    if cp.has_section("thresholds"):
        for key in cp["thresholds"]:
            thresholds[key] = float(cp.get("thresholds", key))
    cfg = StudyConfig(
        mesh_family=get("mesh", "family", str,
                        "interval" if dim == 1 else "uniform"),
        nx0=get("mesh", "nx", int, 8),
        ny0=get("mesh", "ny", int, 8),
        levels=get("study", "levels", int, 3),
        domain=domain,
        grading=get("mesh", "grading", float, 1.0),
        grading_growth=get("mesh", "grading_growth", float, 1.0),
        amplitude=get("mesh", "amplitude", float, 0.2),
        seed=get("mesh", "seed", int, 0),
        layout=layout,
        beta_name=get("study", "beta", str, "id"),
        g_name=get("study", "g", str, "id"),
        face_scheme=get("study", "face_scheme", str, "upwind"),
        lam=get("study", "lambda", float, 0.5),
        field_source=get("study", "field_source", str, "manufactured"),
        solution=get("study", "solution", str,
                     "bump_advect_1d" if dim == 1 else "sinsin_cos"),
        boundary_policy=get("study", "boundary_policy", str, "upwind_zero"),
        cfl=get("study", "cfl", float, 0.5),
        T=get("time", "T", float, 0.5),
        dt_over_h=get("time", "dt_over_h", float, 0.5),
        time_pattern=get("time", "pattern", str, "uniform"),
        time_ratio=get("time", "ratio", float, 1.0),
        support=support,
        t_max_factor=get("test_function", "t_max_factor", float, 0.7),
        time_profile=get("test_function", "time_profile", str, "initial"),
        quad_order=get("numerics", "quad_order", int, 4),
        interp_panels=get("numerics", "interp_panels", int, 4),
        oracle_order=get("numerics", "oracle_order", int, 8),
        rhs_panels=get("numerics", "rhs_panels", int, 12),
        translate_theta=get("study", "translate_theta", float, 1.0),
        regularity_cap=get("audit", "regularity_cap", float, 1e3),
        regularity_growth=get("audit", "regularity_growth", float, 2.0),
        thresholds=thresholds,
        threads=get("study", "threads", int, 1),
    )
    meta = {"mesh_file": get("mesh", "file", str, ""),
            "out_dir": get("output", "out_dir", str, ".")}
    return cfg, meta


def serialize_config(cfg: StudyConfig, meta: dict | None = None) -> str:
    """Write a StudyConfig back to INI text (parse -> serialize -> parse is
    the identity)."""
    meta = meta or {}
    dim = cfg.dim()
    lines = ["[mesh]",
             f"family = {cfg.mesh_family}",
             f"nx = {cfg.nx0}", f"ny = {cfg.ny0}",
             f"x0 = {cfg.domain[0][0]!r}", f"x1 = {cfg.domain[0][1]!r}"]
    if dim == 2:
        lines += [f"y0 = {cfg.domain[1][0]!r}", f"y1 = {cfg.domain[1][1]!r}"]
    lines += [f"grading = {cfg.grading!r}",
              f"grading_growth = {cfg.grading_growth!r}",
              f"amplitude = {cfg.amplitude!r}", f"seed = {cfg.seed}"]
    if meta.get("mesh_file"):
        lines.append(f"file = {meta['mesh_file']}")
    lines += ["", "[time]", f"T = {cfg.T!r}",
              f"dt_over_h = {cfg.dt_over_h!r}",
              f"pattern = {cfg.time_pattern}", f"ratio = {cfg.time_ratio!r}"]
    lines += ["", "[study]", f"levels = {cfg.levels}",
              f"layout = {cfg.layout}", f"beta = {cfg.beta_name}",
              f"g = {cfg.g_name}", f"face_scheme = {cfg.face_scheme}",
              f"lambda = {cfg.lam!r}", f"field_source = {cfg.field_source}",
              f"solution = {cfg.solution}",
              f"boundary_policy = {cfg.boundary_policy}",
              f"cfl = {cfg.cfl!r}",
              f"translate_theta = {cfg.translate_theta!r}",
              f"threads = {cfg.threads}"]
    lines += ["", "[test_function]"]
    if cfg.support is not None:
        lines += [f"x0 = {cfg.support[0][0]!r}", f"x1 = {cfg.support[0][1]!r}"]
        if dim == 2:
            lines += [f"y0 = {cfg.support[1][0]!r}",
                      f"y1 = {cfg.support[1][1]!r}"]
    lines += [f"t_max_factor = {cfg.t_max_factor!r}",
              f"time_profile = {cfg.time_profile}"]
    lines += ["", "[numerics]", f"quad_order = {cfg.quad_order}",
              f"interp_panels = {cfg.interp_panels}",
              f"oracle_order = {cfg.oracle_order}",
              f"rhs_panels = {cfg.rhs_panels}"]
    lines += ["", "[audit]", f"regularity_cap = {cfg.regularity_cap!r}",
              f"regularity_growth = {cfg.regularity_growth!r}"]
    if meta.get("out_dir", ".") != ".":
        lines += ["", "[output]", f"out_dir = {meta['out_dir']}"]
    if cfg.thresholds:
        lines += ["", "[thresholds]"]
        lines += [f"{k} = {v!r}" for k, v in cfg.thresholds.items()]
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# commands

def _mesh_for(cfg: StudyConfig, meta: dict):
    if meta.get("mesh_file"):
        mesh = load_mesh(meta["mesh_file"])
        dual = None
        if mesh.dim == 2 and cfg.layout == "mac" and mesh.is_rectangular():
            dual = build_dual_mac(mesh)
        elif mesh.dim == 2 and cfg.layout == "rt":
            dual = build_dual_rt(mesh)
        return mesh, dual
    mesh, dual, _ = build_level(cfg, 0)
    return mesh, dual


def cmd_mesh_info(cfg: StudyConfig, meta: dict, out=None) -> int:
    out = out if out is not None else sys.stdout
    mesh, dual = _mesh_for(cfg, meta)
    grid = build_time_grid(cfg.T, max(1, round(
        cfg.T / (cfg.dt_over_h * mesh.delta()))), pattern=cfg.time_pattern,
        ratio=cfg.time_ratio)
    reg = regularity(mesh, grid,
                     mac=dual if cfg.layout == "mac" and dual else None)
    print(f"dimension    {mesh.dim}", file=out)
    print(f"cells        {mesh.n_cells}", file=out)
    print(f"faces        {mesh.n_faces}", file=out)
    print(f"vertices     {mesh.n_vertices}", file=out)
    print(f"interior     {int(mesh.interior_cell_mask.sum())}", file=out)
    print(f"delta        {mesh.delta():.17g}", file=out)
    print(f"theta1       {reg.theta1:.17g}", file=out)
    print(f"theta2       {reg.theta2:.17g}", file=out)
    print(f"theta3       {reg.theta3:.17g}", file=out)
    if cfg.layout == "mac" and dual is not None:
        print(f"theta_mac    {dual.theta:.17g}", file=out)
    return 0


def cmd_run_study(cfg: StudyConfig, meta: dict, out=None) -> int:
    out = out if out is not None else sys.stdout
    out_dir = Path(meta.get("out_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        result = run_study(cfg)
    except StudyRegularityError as exc:
        print(f"regularity audit failed: {exc.parameter}: {exc}",
              file=sys.stderr)
        return 4
    write_report_csv(result, out_dir / "report.csv")
    write_rates_csv(result, out_dir / "rates.csv")
    print(f"wrote {out_dir / 'report.csv'} and {out_dir / 'rates.csv'}",
          file=out)
    failed = result.failed_thresholds()
    if failed:
        for name in failed:
            fit = result.rates.get(name)
            got = fit.finest_pair if fit is not None else float("nan")
            print(f"threshold failed: {name}: finest-pair slope {got:.3f} "
                  f"< {cfg.thresholds[name]}", file=sys.stderr)
        return 3
    return 0


def cmd_check_identities(cfg: StudyConfig, meta: dict, out=None) -> int:
    out = out if out is not None else sys.stdout
    mesh, dual = _mesh_for(cfg, meta)
    problems = check_mesh_identities(
        mesh,
        mac=dual if cfg.layout == "mac" else None,
        rt=dual if cfg.layout == "rt" else None)
    # gradient-averaging identity on the configured test function
    if not problems and not meta.get("mesh_file"):
        grid = build_time_grid(cfg.T, 2)
        phi = cfg.test_function()
        try:
            # coarse meshes need heavy panels to resolve the bump per edge;
            # 1e-7 still exposes any broken normal or measure (errors O(1))
            interp = interpolate_test(phi, mesh, grid,
                                      order=max(cfg.quad_order, 6), panels=8)
            oracle = CellQuadrature(mesh, cfg.oracle_order, panels=8)
            for n, t in enumerate(grid.knots):
                ref = oracle.cell_vector_means(
                    lambda x, t=t: phi.grad(x, t))
                err = np.sqrt(((interp.grad_phi[n] - ref) ** 2).sum(-1))
                worst = int(np.argmax(err))
                if err[worst] > 1e-7:
                    problems.append(
                        f"cell {worst}: gradient-averaging identity off by "
                        f"{err[worst]:.3e}")
                    break
        except Exception as exc:   # support violations etc.
            problems.append(f"gradient identity suite: {exc}")
    if problems:
        for p in problems:
            print(f"FAIL {p}", file=out)
        return 1
    print("all identities hold", file=out)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fvlab",
        description="finite-volume weak-consistency laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("mesh-info", "run-study", "check-identities"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI configuration file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--levels", type=int, default=None,
                       help="override the refinement level count")
        p.add_argument("--seed", type=int, default=None,
                       help="override the mesh perturbation seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (fallback: FVLAB_THREADS)")
    args = parser.parse_args(argv)
    try:
        cfg, meta = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.levels is not None:
        cfg.levels = args.levels
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    elif os.environ.get("FVLAB_THREADS"):
        try:
            cfg.threads = int(os.environ["FVLAB_THREADS"])
        except ValueError:
            print("config error: FVLAB_THREADS is not an integer",
                  file=sys.stderr)
            return 2
    if args.out is not None:
        meta["out_dir"] = args.out
    try:
        cfg.validate()
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "mesh-info":
            return cmd_mesh_info(cfg, meta)
        if args.command == "run-study":
            return cmd_run_study(cfg, meta)
        return cmd_check_identities(cfg, meta)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
