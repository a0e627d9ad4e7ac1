"""Refinement studies: build a level hierarchy, audit its regularity,
compute every consistency residual per level, fit decay rates and emit CSV
reports.

Levels are independent and may be computed by a thread pool; reports are
assembled in level order with deterministic reductions, so outputs are
byte-identical for any thread count.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .consistency import (compute_X1, compute_X2, jump_sums, measured_constant,
                          residual_flux, residual_init, residual_time,
                          weak_form_gap, weak_rhs)
from .fields import (TestFunction, default_translate_weights, interpolate_test,
                     lp_distance, translate_functional)
from .geometry import (build_cartesian, build_dual_mac, build_dual_rt,
                       build_intervals, build_perturbed_quads, build_tensor,
                       build_time_grid, regularity, subdivide_nodes)
from .operators import (BetaFamily, assemble_convection,
                        flux_colocated_upwind_1d, flux_staggered, get_pair)
from .schemes import SchemeConfig, run_mass_mac, run_upwind_1d, sample_manufactured

__all__ = [
    "StudyConfig", "ResidualReport", "RateFit", "StudyResult", "run_study",
    "write_report_csv", "write_rates_csv", "StudyRegularityError",
    "manufactured_solution", "SOLUTIONS",
]

RATE_SERIES = ("res_init", "res_time", "res_flux", "R1", "R2", "translate",
               "weak_gap")


class StudyRegularityError(RuntimeError):
    """A regularity parameter is unbounded across the refinement levels."""

    def __init__(self, parameter: str, message: str):
        super().__init__(message)
        self.parameter = parameter


# ----------------------------------------------------------------------
# manufactured solutions

def _bump_profile(s, a, b):
    u = (2.0 * np.asarray(s, dtype=float) - (a + b)) / (b - a)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


SOLUTIONS = {
    "constant": dict(
        dim=2,
        q=lambda x, t: np.full(x.shape[0], 2.0),
        v=lambda x, t: np.broadcast_to(np.array([1.0, 0.5]),
                                       (x.shape[0], 2)).copy()),
    "sinsin_cos": dict(
        dim=2,
        q=lambda x, t: np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])
        * np.cos(t),
        v=lambda x, t: np.broadcast_to(np.array([1.0, 0.5]),
                                       (x.shape[0], 2)).copy()),
    "sinsin_shear": dict(
        dim=2,
        q=lambda x, t: 1.0 + 0.5 * np.sin(np.pi * x[:, 0])
        * np.sin(np.pi * x[:, 1]) * np.cos(t),
        v=lambda x, t: np.stack([1.0 + 0.3 * np.sin(np.pi * x[:, 0]),
                                 0.5 + 0.2 * np.cos(np.pi * x[:, 1])],
                                axis=-1)),
    "bump_advect_1d": dict(
        dim=1,
        q=lambda x, t: _bump_profile(np.atleast_2d(x)[:, 0]
                                     - np.asarray(t), 0.15, 0.45),
        v=None),
}


def manufactured_solution(name: str):
    if name not in SOLUTIONS:
        raise KeyError(f"unknown manufactured solution {name!r}; "
                       f"choose from {sorted(SOLUTIONS)}")
    return SOLUTIONS[name]


# ----------------------------------------------------------------------
# configuration

@dataclass
class StudyConfig:
    """Everything a refinement study needs; see the CLI docs for the INI
    mapping.  ``grading_growth`` > 1 deliberately unbounds theta2 across
    levels (used to exercise the regularity audit)."""

    mesh_family: str = "uniform"          # uniform | graded | perturbed | interval
    nx0: int = 8
    ny0: int = 8
    levels: int = 3
    domain: tuple = ((0.0, 1.0), (0.0, 1.0))
    grading: float = 1.0
    grading_growth: float = 1.0
    amplitude: float = 0.2
    seed: int = 0
    layout: str = "mac"                   # mac | rt | colocated1d
    beta_name: str = "id"
    g_name: str = "id"
    face_scheme: str = "upwind"
    lam: float = 0.5
    field_source: str = "manufactured"    # manufactured | scheme
    solution: str = "sinsin_cos"
    boundary_policy: str = "upwind_zero"
    cfl: float = 0.5
    T: float = 0.5
    dt_over_h: float = 0.5
    time_pattern: str = "uniform"
    time_ratio: float = 1.0
    support: tuple | None = None          # default: central box of the domain
    t_max_factor: float = 0.7
    time_profile: str = "initial"
    quad_order: int = 4
    interp_panels: int = 4
    oracle_order: int = 8
    rhs_panels: int = 12
    translate_theta: float = 1.0
    regularity_cap: float = 1e3
    regularity_growth: float = 2.0
    thresholds: dict = field(default_factory=dict)
    threads: int = 1

    def dim(self) -> int:
        return 1 if self.layout == "colocated1d" else 2

    def validate(self):
        if self.levels < 3:
            raise ValueError("a study needs >= 3 levels for rate fitting")
        if self.layout not in ("mac", "rt", "colocated1d"):
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.field_source not in ("manufactured", "scheme"):
            raise ValueError(f"unknown field source {self.field_source!r}")
        if self.layout == "colocated1d" and self.mesh_family != "interval":
            raise ValueError("colocated1d needs the interval mesh family")
        if self.layout != "colocated1d" and self.mesh_family == "interval":
            raise ValueError(f"layout {self.layout!r} needs a 2D mesh family")
        sol = manufactured_solution(self.solution)
        if sol["dim"] != self.dim():
            raise ValueError(f"solution {self.solution!r} is {sol['dim']}D but "
                             f"the layout is {self.dim()}D")
        get_pair(self.beta_name, self.g_name)

    def test_function(self) -> TestFunction:
        dom = self.domain if self.dim() == 2 else (self.domain[0],)
        if self.support is not None:
            support = self.support
        else:
            support = tuple((lo + 0.2 * (hi - lo), hi - 0.2 * (hi - lo))
                            for lo, hi in dom)
        return TestFunction(support, self.t_max_factor * self.T,
                            self.time_profile)


# ----------------------------------------------------------------------
# per-level report

@dataclass
class ResidualReport:
    level: int
    h: float
    dt: float
    theta1: float
    theta2: float
    theta3: float
    x1: float
    x2: float
    res_init: float               # per-cell absolute init majorant
    res_time: float               # Lipschitz time majorant (measure-weighted)
    res_flux: float
    r1: float
    r2: float
    translate: float
    weak_gap: float
    sup_norm: float
    theta_mac: float = np.nan
    res_init_signed: float = np.nan
    res_init_l1: float = np.nan
    res_time_signed: float = np.nan
    x2_gradient: float = np.nan
    rt_constant: float = np.nan
    measured_c: float = np.nan
    l1_distance: float = np.nan   # to the exact solution (manufactured limit)
    l1_cauchy: float = np.nan     # to the previous level (scheme surrogate)
    scheme_min: float = np.nan
    scheme_max: float = np.nan
    mass_defect: float = np.nan

    def series(self, name: str) -> float:
        return {"res_init": self.res_init, "res_time": self.res_time,
                "res_flux": self.res_flux, "R1": self.r1, "R2": self.r2,
                "translate": self.translate, "weak_gap": self.weak_gap}[name]


CSV_COLUMNS = ("level", "h", "dt", "theta1", "theta2", "theta3", "X1", "X2",
               "res_init", "res_time", "res_flux", "R1", "R2", "translate",
               "weak_gap", "sup_norm")
CSV_EXTRAS = ("theta_mac", "res_init_signed", "res_init_l1",
              "res_time_signed", "x2_gradient", "rt_constant", "measured_c",
              "l1_distance", "l1_cauchy", "scheme_min", "scheme_max",
              "mass_defect")


@dataclass
class RateFit:
    """log(residual) against log(h + dt): least-squares slope over all
    levels with positive residuals, plus per-pair slopes (the acceptance
    thresholds read the finest pair)."""

    series: str
    lsq_slope: float
    pair_slopes: np.ndarray

    @property
    def finest_pair(self) -> float:
        finite = self.pair_slopes[np.isfinite(self.pair_slopes)]
        return float(finite[-1]) if finite.size else np.nan


def fit_rates(reports) -> dict:
    if len(reports) < 3:
        raise ValueError("rate fitting needs >= 3 levels")
    x = np.log([r.h + r.dt for r in reports])
    out = {}
    for name in RATE_SERIES:
        vals = np.array([r.series(name) for r in reports])
        pair = np.full(len(reports) - 1, np.nan)
        ok = vals > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = np.where(ok, np.log(np.where(ok, vals, 1.0)), np.nan)
            d = np.diff(logs) / np.diff(x)
        pair[:] = d
        lsq = np.nan
        if ok.sum() >= 3:
            lsq = float(np.polyfit(x[ok], logs[ok], 1)[0])
        out[name] = RateFit(series=name, lsq_slope=lsq, pair_slopes=pair)
    return out


@dataclass
class StudyResult:
    config: StudyConfig
    reports: list
    rates: dict

    def failed_thresholds(self):
        """Threshold names whose finest-pair slope falls short."""
        bad = []
        for name, min_slope in self.config.thresholds.items():
            fit = self.rates.get(name)
            if fit is None or not np.isfinite(fit.finest_pair) \
                    or fit.finest_pair < float(min_slope):
                bad.append(name)
        return bad


# ----------------------------------------------------------------------
# level construction

def build_level(config: StudyConfig, level: int):
    """Mesh, dual and reference axis step for one refinement level."""
    scale = 2 ** level
    if config.mesh_family == "interval":
        n = config.nx0 * scale
        dom = config.domain[0]
        mesh = build_intervals(n, dom, grading=config.grading
                               * config.grading_growth ** level)
        h_ref = (dom[1] - dom[0]) / n
        return mesh, None, h_ref
    nx, ny = config.nx0 * scale, config.ny0 * scale
    grading = config.grading * config.grading_growth ** level
    if config.mesh_family == "uniform":
        mesh = build_cartesian(nx, ny, config.domain)
    elif config.mesh_family == "graded":
        if config.grading_growth == 1.0:
            # refine by nested subdivision of the level-0 graded nodes:
            # rebuilding at a fixed consecutive ratio would unbound theta1
            # (worst aspect ratio grows like ratio^nx under refinement)
            base = build_cartesian(config.nx0, config.ny0, config.domain,
                                   grading=config.grading)
            xs = subdivide_nodes(np.unique(base.vertices[:, 0]), scale)
            ys = subdivide_nodes(np.unique(base.vertices[:, 1]), scale)
            mesh = build_tensor(xs, ys, config.domain)
        else:
            # deliberate blow-up hook for the regularity audit
            mesh = build_cartesian(nx, ny, config.domain, grading=grading)
    elif config.mesh_family == "perturbed":
        mesh = build_perturbed_quads(nx, ny, config.domain,
                                     amplitude=config.amplitude,
                                     seed=config.seed + level)
    else:
        raise ValueError(f"unknown mesh family {config.mesh_family!r}")
    dual = build_dual_mac(mesh) if config.layout == "mac" else (
        build_dual_rt(mesh) if config.layout == "rt" else None)
    h_ref = (config.domain[0][1] - config.domain[0][0]) / nx
    return mesh, dual, h_ref


def _tensor_field_function(field) -> Callable | None:
    """Evaluate a cell field on a tensor-product mesh as a function (x, t);
    None for meshes without tensor structure (perturbed quadrangles)."""
    mesh, grid = field.mesh, field.grid
    if mesh.dim == 2 and not mesh.is_rectangular():
        return None
    if mesh.dim == 1:
        xs = np.unique(mesh.vertices[:, 0])
        shape = (xs.size - 1,)
    else:
        xs = np.unique(mesh.vertices[:, 0])
        ys = np.unique(mesh.vertices[:, 1])
        shape = (xs.size - 1, ys.size - 1)
    table = field.values.reshape((grid.n_steps + 1,) + shape)

    def fn(x, t):
        x = np.atleast_2d(x)
        n = int(np.clip(np.searchsorted(grid.knots, t, side="right") - 1,
                        0, grid.n_steps - 1))
        ix = np.clip(np.searchsorted(xs, x[:, 0], side="right") - 1,
                     0, shape[0] - 1)
        if mesh.dim == 1:
            return table[n][ix]
        iy = np.clip(np.searchsorted(ys, x[:, 1], side="right") - 1,
                     0, shape[1] - 1)
        return table[n][ix, iy]

    return fn


def _audit(config, level, reg, base):
    named = {"theta1": reg.theta1, "theta2": reg.theta2, "theta3": reg.theta3}
    bad = []
    for name, val in named.items():
        if val > config.regularity_cap:
            bad.append((name, f"{name} = {val:.6g} exceeds cap "
                              f"{config.regularity_cap} at level {level}"))
        elif base is not None and val > config.regularity_growth * max(
                getattr(base, name), 1.0):
            bad.append((name, f"{name} grows across levels: "
                              f"{getattr(base, name):.6g} -> {val:.6g} "
                              f"at level {level}"))
    if bad:
        raise StudyRegularityError(" ".join(n for n, _ in bad),
                                   "; ".join(msg for _, msg in bad))


# ----------------------------------------------------------------------
# the study itself

def _compute_level(config: StudyConfig, level: int, phi, rhs, base_reg):
    mesh, dual, h_ref = build_level(config, level)
    sol = manufactured_solution(config.solution)
    q_exact, v_exact = sol["q"], sol["v"]
    pair = get_pair(config.beta_name, config.g_name)
    extras = {}
    if config.field_source == "manufactured":
        n_steps = max(1, round(config.T / (config.dt_over_h * h_ref)))
        grid = build_time_grid(config.T, n_steps, pattern=config.time_pattern,
                               ratio=config.time_ratio)
        q, v = sample_manufactured(q_exact, v_exact, config.layout, mesh, dual,
                                   grid, order=config.quad_order, check=False)
    else:
        scheme_cfg = SchemeConfig(q0=lambda x: q_exact(x, 0.0), T=config.T,
                                  cfl=config.cfl, velocity=v_exact,
                                  boundary_policy=config.boundary_policy,
                                  quad_order=config.quad_order)
        if config.layout == "colocated1d":
            q, grid, ledger = run_upwind_1d(mesh, scheme_cfg)
            v = None
        elif config.layout == "mac":
            q, v, grid, ledger = run_mass_mac(mesh, dual, scheme_cfg)
        else:
            raise ValueError("scheme source supports colocated1d and mac only")
        extras["scheme_min"] = float(q.values.min())
        extras["scheme_max"] = float(q.values.max())
        extras["mass_defect"] = ledger.max_relative_defect()
    reg = regularity(mesh, grid, mac=dual if config.layout == "mac" else None)
    _audit(config, level, reg, base_reg)
    if config.layout == "colocated1d":
        flux = flux_colocated_upwind_1d(q, policy=config.boundary_policy)
    else:
        flux = flux_staggered(q, v, pair, scheme=config.face_scheme,
                              lam=config.lam, policy=config.boundary_policy)
    betas = BetaFamily.from_field(q, pair)
    c_values = assemble_convection(betas, flux, mesh, grid)
    interp = interpolate_test(phi, mesh, grid, order=config.quad_order,
                              panels=config.interp_panels)
    x1 = compute_X1(betas, interp, mesh, grid)
    x2 = compute_X2(flux, interp, mesh, grid, q=q, v=v, pair=pair, dual=dual)
    init = residual_init(betas, lambda x: q_exact(x, 0.0), phi, mesh, pair,
                         order=config.oracle_order)
    times = residual_time(betas, q, phi, pair, mesh, grid,
                          space_order=config.quad_order)
    rflux = residual_flux(flux, q, v, pair, mesh, grid, config.layout, dual)
    jumps = jump_sums(q, v, mesh, dual, grid, config.layout)
    weights = default_translate_weights(mesh, grid, theta=config.translate_theta)
    trans = translate_functional(q, weights)
    gap = weak_form_gap(c_values, interp, (q_exact, v_exact,
                                           lambda x: q_exact(x, 0.0)),
                        pair, mesh, grid, rhs=rhs)
    sup_q = q.values[:-1]
    sup_norm = float(np.abs(sup_q).max())
    if v is not None:
        sup_norm = max(sup_norm, v.sup_norm())
    l1 = lp_distance(q, q_exact, p=1, order=config.quad_order).distance
    report = ResidualReport(
        level=level, h=mesh.delta(), dt=grid.dt_max, theta1=reg.theta1,
        theta2=reg.theta2, theta3=reg.theta3, x1=x1.value, x2=x2.value,
        res_init=init.cellwise, res_time=times.majorant, res_flux=rflux,
        r1=jumps.r1, r2=jumps.r2, translate=trans, weak_gap=gap.gap,
        sup_norm=sup_norm, theta_mac=reg.theta_mac,
        res_init_signed=init.signed, res_init_l1=init.l1_majorant,
        res_time_signed=times.signed, x2_gradient=x2.gradient_route,
        rt_constant=(jumps.rt_constant if jumps.rt_constant is not None
                     else np.nan),
        measured_c=measured_constant(q, v, pair, config.layout),
        l1_distance=l1, **extras)
    return report, q


def run_study(config: StudyConfig) -> StudyResult:
    """Run all refinement levels, audit regularity and fit decay rates.

    The weak-form right-hand side is integrated once (it is the level-
    independent limit object).  The L1 Cauchy column compares each level's
    field with the previous level's as a piecewise-constant function: for
    scheme sources this is the convergence surrogate (no exact limit is
    assumed), for manufactured sources l1_distance to the exact limit is
    the primary diagnostic.
    """
    config.validate()
    phi = config.test_function()
    sol = manufactured_solution(config.solution)
    pair = get_pair(config.beta_name, config.g_name)
    rhs = weak_rhs(pair, sol["q"], sol["v"], lambda x: sol["q"](x, 0.0),
                   phi, order=config.oracle_order, panels=config.rhs_panels)
    base_reg = None
    # level 0 first: it fixes the regularity baseline for the audit
    report0, field0 = _compute_level(config, 0, phi, rhs, None)
    base_reg = report0
    results = [(report0, field0)]
    levels = list(range(1, config.levels))
    if config.threads > 1 and levels:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            futures = [pool.submit(_compute_level, config, lv, phi, rhs,
                                   base_reg) for lv in levels]
            results.extend(f.result() for f in futures)
    else:
        for lv in levels:
            results.extend([_compute_level(config, lv, phi, rhs, base_reg)])
    reports = []
    prev_field = None
    for report, fld in results:
        if prev_field is not None:
            coarse_fn = _tensor_field_function(prev_field)
            if coarse_fn is not None:
                report.l1_cauchy = lp_distance(fld, coarse_fn, p=1,
                                               order=2).distance
        reports.append(report)
        prev_field = fld
    return StudyResult(config=config, reports=reports, rates=fit_rates(reports))


# ----------------------------------------------------------------------
# CSV emission (17 significant digits, '.' separator, LF endings)

def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    val = float(x) + 0.0          # canonicalize -0.0
    return f"{val:.17g}"


def write_report_csv(result: StudyResult, path):
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS + CSV_EXTRAS)
        for r in result.reports:
            row = [r.level, r.h, r.dt, r.theta1, r.theta2, r.theta3, r.x1,
                   r.x2, r.res_init, r.res_time, r.res_flux, r.r1, r.r2,
                   r.translate, r.weak_gap, r.sup_norm]
            row += [getattr(r, name) for name in CSV_EXTRAS]
            writer.writerow([_fmt(v) for v in row])


def write_rates_csv(result: StudyResult, path):
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        npairs = len(result.reports) - 1
        header = ["series", "lsq_slope", "finest_pair_slope"] + \
            [f"pair_{i}_{i + 1}" for i in range(npairs)]
        writer.writerow(header)
        for name in RATE_SERIES:
            fit = result.rates[name]
            row = [name, _fmt(fit.lsq_slope), _fmt(fit.finest_pair)]
            row += [_fmt(s) for s in fit.pair_slopes]
            writer.writerow(row)
