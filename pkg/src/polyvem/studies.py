"""Study drivers: convergence tables, the perforated plastic strip, the finite-strain block."""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .config import ConfigError, StudyConfig
from .constitutive import (
    Benchmark,
    HenckyVonMises,
    J2Params,
    J2Plasticity,
    LinearElastic,
    NeoHookean,
)
from .mesh import PolyMesh, generate_strip, generate_structured, generate_voronoi, load_mesh, serialize
from .solver import (
    DisplacementField,
    LoadProgram,
    NewtonSettings,
    SolveHistory,
    SolverError,
    clamp,
    incremental_solve,
)

log = logging.getLogger(__name__)


# building blocks ----------------------------------------------------------------------


def build_mesh(cfg: StudyConfig, n: int | None = None) -> PolyMesh:
    if cfg.mesh == "file":
        with open(cfg.mesh_file, encoding="utf-8") as fh:
            return load_mesh(fh.read())
    if cfg.mesh == "voronoi":
        return generate_voronoi(n, seed=cfg.seed)
    if cfg.mesh == "strip":
        return generate_strip(n, kind=cfg.strip_kind, width=cfg.width, height=cfg.height, radius=cfg.radius)
    return generate_structured(cfg.mesh, n)


def build_law(cfg: StudyConfig, default: str | None = None):
    name = cfg.law or default
    if name == "linear_elastic":
        return LinearElastic(lam=1.0 if cfg.lam is None else cfg.lam, mu=1.0 if cfg.mu is None else cfg.mu)
    if name == "hencky":
        return HenckyVonMises()
    if name == "benchmark":
        return Benchmark()
    if name == "neo_hookean":
        kw = {k: v for k, v in (("lam", cfg.lam), ("mu", cfg.mu)) if v is not None}
        return NeoHookean(variant=cfg.variant, **kw)
    if name == "j2":
        return J2Plasticity(J2Params(E=cfg.E, nu=cfg.nu, sigma_y0=cfg.sigma_y0, H_iso=cfg.H_iso, H_kin=cfg.H_kin))
    raise ConfigError(f"no law configured (got {name!r})")


def newton_settings(cfg: StudyConfig) -> NewtonSettings:
    return NewtonSettings(cfg.tol_rel, cfg.tol_abs, cfg.max_iter)


def _ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _g(x) -> str:
    if x is None:
        return ""
    return f"{x:.10e}" if math.isfinite(x) else "nan"


def _write_mesh(cfg: StudyConfig, out: str, name: str, mesh: PolyMesh) -> None:
    if cfg.write_meshes:
        with open(os.path.join(out, name), "w", encoding="utf-8") as fh:
            fh.write(serialize(mesh))


# convergence ---------------------------------------------------------------------------


@dataclass
class ConvergenceResult:
    rows: list[analysis.ConvergenceRow]
    relative: list[tuple[int, float, float | None]] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def solve_manufactured(
    mesh: PolyMesh,
    case: analysis.ManufacturedCase,
    steps: int = 10,
    alpha_mode: str = "updated",
    alpha_norm: str = "max",
    alpha_value: float | None = None,
    settings: NewtonSettings = NewtonSettings(),
) -> SolveHistory:
    """Dirichlet data from the exact solution on the whole boundary, forcing from the law."""
    bc = clamp(mesh, None, case.u)
    program = LoadProgram(steps, case.force, bc)
    return incremental_solve(mesh, case.law, program, settings, alpha_mode, alpha_value, alpha_norm)


def run_convergence_study(cfg: StudyConfig, out: str | None = None) -> ConvergenceResult:
    """Solve a manufactured problem on each refinement and tabulate errors.

    ``cfg.e0_scale = relative`` divides the vertex max error by the largest
    nodal value of the exact solution. With ``compare_fixed`` the relative
    nodal error is also computed with a fixed stabilization scale.
    """
    cfg.validate()
    law = build_law(cfg) if cfg.law else None
    case = analysis.make_case(cfg.case, law)
    settings = newton_settings(cfg)
    rows: list[analysis.ConvergenceRow] = []
    relative = []
    failures = []
    for n in cfg.refinements:
        mesh = build_mesh(cfg, n)
        try:
            hist = solve_manufactured(mesh, case, cfg.steps, cfg.alpha_mode, cfg.alpha_norm, cfg.alpha_value, settings)
        except SolverError as exc:
            failures.append(f"refinement {n}: {exc}")
            rows.append(analysis.ConvergenceRow(mesh.n_vertices, math.nan, math.nan))
            relative.append((mesh.n_vertices, math.nan, None))
            continue
        e0 = analysis.error_0_inf(mesh, hist.final, case)
        if cfg.e0_scale == "relative":
            e0 /= np.abs(case.u(mesh.vertices)).max()
        rows.append(analysis.ConvergenceRow(mesh.n_vertices, e0, analysis.error_1_2(mesh, hist.final, case)))
        rel_fixed = None
        if cfg.compare_fixed:
            try:
                fixed = solve_manufactured(mesh, case, cfg.steps, "fixed", cfg.alpha_norm, cfg.alpha_value, settings)
                rel_fixed = analysis.relative_error_inf(mesh, fixed.final, case)
            except SolverError as exc:
                failures.append(f"refinement {n} (fixed alpha): {exc}")
                rel_fixed = math.nan
        relative.append((mesh.n_vertices, analysis.relative_error_inf(mesh, hist.final, case), rel_fixed))
        log.info("N_h=%d E_0inf=%.4e E_12=%.4e", rows[-1].N_h, rows[-1].E_0inf, rows[-1].E_12)
    try:
        analysis.fill_rates(rows)
    except analysis.UndefinedRateError:
        pass
    result = ConvergenceResult(rows, relative, failures)
    if out is not None:
        _ensure_dir(out)
        with open(os.path.join(out, "convergence.csv"), "w", encoding="utf-8") as fh:
            fh.write(analysis.rows_to_csv(rows))
        header = ["N_h", "E_inf_updated"] + (["E_inf_fixed"] if cfg.compare_fixed else [])
        _write_csv(
            os.path.join(out, "relative_error.csv"),
            header,
            [[nh, _g(a)] + ([_g(b)] if cfg.compare_fixed else []) for nh, a, b in relative],
        )
    return result


# plasticity strip ------------------------------------------------------------------------


@dataclass
class StripRow:
    label: str
    N_h: int
    displ_A: float
    displ_B: float
    sigma_max: float
    sigma_T: float
    gamma_min: float
    max_plastic_trace: float


@dataclass
class StripResult:
    rows: list[StripRow]
    reference: StripRow | None = None
    failures: list[str] = field(default_factory=list)
    histories: dict[str, SolveHistory] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def strip_constraints(mesh: PolyMesh, delta: float) -> DisplacementField:
    """Symmetry rollers on the two cut edges, vertical pull ``delta`` on the top."""
    bc = DisplacementField.free(mesh.n_vertices)
    bc.constrain(mesh.boundary_vertices("sym_x"), 0, 0.0)
    bc.constrain(mesh.boundary_vertices("sym_y"), 1, 0.0)
    bc.constrain(mesh.boundary_vertices("top"), 1, delta)
    return bc


def strip_report(mesh: PolyMesh, hist: SolveHistory, radius: float, label: str) -> StripRow:
    u = hist.final.values
    a = mesh.locate_vertex((0.0, radius))
    b = mesh.locate_vertex((radius, 0.0))
    amp = np.sqrt((hist.stress**2).sum(axis=(1, 2)))
    trace = np.abs(hist.states.plastic_strain[:, 0] + hist.states.plastic_strain[:, 1] + hist.states.plastic_strain[:, 3])
    return StripRow(
        label=label,
        N_h=mesh.n_vertices,
        displ_A=float(u[a, 1]),
        displ_B=float(u[b, 0]),
        sigma_max=float(amp.max()),
        sigma_T=float((mesh.cell_areas() * amp).sum()),
        gamma_min=float(hist.states.gamma.min()),
        max_plastic_trace=float(trace.max()),
    )


def solve_strip(mesh: PolyMesh, cfg: StudyConfig, delta: float | None = None) -> SolveHistory:
    law = build_law(cfg, "j2")
    bc = strip_constraints(mesh, cfg.delta if delta is None else delta)
    program = LoadProgram(cfg.steps, None, bc)
    return incremental_solve(mesh, law, program, newton_settings(cfg), cfg.alpha_mode, cfg.alpha_value, cfg.alpha_norm)


def write_gamma(path: str, mesh: PolyMesh, hist: SolveHistory) -> None:
    centroids = np.array([mesh.vertices[c].mean(axis=0) for c in mesh.cells])
    _write_csv(
        path,
        ["element", "cx", "cy", "gamma"],
        [[i, _g(cx), _g(cy), _g(g)] for i, ((cx, cy), g) in enumerate(zip(centroids, hist.states.gamma))],
    )


def run_plasticity_strip(cfg: StudyConfig, out: str | None = None) -> StripResult:
    cfg.validate()
    runs = [(f"{cfg.strip_kind}_{n}", cfg.strip_kind, n) for n in cfg.refinements]
    if cfg.reference_refinement:
        runs.append((f"reference_{cfg.reference_kind}_{cfg.reference_refinement}", cfg.reference_kind, cfg.reference_refinement))
    result = StripResult(rows=[])
    if out is not None:
        _ensure_dir(out)
    for label, kind, n in runs:
        if cfg.mesh == "file":
            mesh = build_mesh(cfg)
        else:
            mesh = generate_strip(n, kind=kind, width=cfg.width, height=cfg.height, radius=cfg.radius)
        try:
            hist = solve_strip(mesh, cfg)
        except SolverError as exc:
            result.failures.append(f"{label}: {exc}")
            log.error("%s failed: %s", label, exc)
            break
        row = strip_report(mesh, hist, cfg.radius, label)
        result.histories[label] = hist
        if label.startswith("reference"):
            result.reference = row
        else:
            result.rows.append(row)
        log.info("%s: A=%.5f B=%.5f sigma_max=%.4f sigma_T=%.4f", label, row.displ_A, row.displ_B, row.sigma_max, row.sigma_T)
        if out is not None:
            write_gamma(os.path.join(out, f"gamma_{label}.csv"), mesh, hist)
            _write_mesh(cfg, out, f"mesh_{label}.txt", mesh)
    if out is not None:
        rows = result.rows + ([result.reference] if result.reference else [])
        _write_csv(
            os.path.join(out, "strip.csv"),
            ["mesh", "N_h", "displ_A", "displ_B", "sigma_max", "sigma_T"],
            [[r.label, r.N_h, _g(r.displ_A), _g(r.displ_B), _g(r.sigma_max), _g(r.sigma_T)] for r in rows],
        )
    return result


# finite strain block ------------------------------------------------------------------------


@dataclass
class BlockRow:
    variant: str
    N_h: int
    ux: float
    uy: float


@dataclass
class BlockResult:
    rows: list[BlockRow]
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def series(self, variant: str) -> list[BlockRow]:
        return [r for r in self.rows if r.variant == variant]


def solve_block(mesh: PolyMesh, cfg: StudyConfig, variant: str | None = None) -> SolveHistory:
    law = build_law(cfg, "neo_hookean")
    if variant is not None:
        law = NeoHookean(lam=law.lam, mu=law.mu, variant=variant)
    force = np.asarray(cfg.body_force or [0.0, 0.0], dtype=float)
    bc = clamp(mesh, cfg.clamp or ["left"])
    program = LoadProgram(cfg.steps, lambda x: np.broadcast_to(force, (len(x), 2)), bc)
    return incremental_solve(mesh, law, program, newton_settings(cfg), cfg.alpha_mode, cfg.alpha_value, cfg.alpha_norm)


def run_finite_strain_block(cfg: StudyConfig, out: str | None = None) -> BlockResult:
    cfg.validate()
    variants = cfg.variants or [cfg.variant]
    result = BlockResult(rows=[])
    if out is not None:
        _ensure_dir(out)
    for variant in variants:
        for n in cfg.refinements if cfg.mesh != "file" else [None]:
            mesh = build_mesh(cfg, n)
            try:
                hist = solve_block(mesh, cfg, variant)
            except SolverError as exc:
                msg = f"{variant}, N_h={mesh.n_vertices}: {exc}"
                if "det F" in str(exc):
                    msg += " (an element inverted; try a finer mesh or more load steps)"
                result.failures.append(msg)
                log.error("%s", msg)
                continue
            p = mesh.locate_vertex(cfg.probe)
            ux, uy = hist.final.values[p]
            result.rows.append(BlockRow(variant, mesh.n_vertices, float(ux), float(uy)))
            if out is not None:
                deformed = mesh.vertices + hist.final.values
                _write_csv(
                    os.path.join(out, f"deformed_{variant}_{mesh.n_vertices}.csv"),
                    ["vertex", "x", "y"],
                    [[i, _g(x), _g(y)] for i, (x, y) in enumerate(deformed)],
                )
                _write_mesh(cfg, out, f"mesh_{mesh.n_vertices}.txt", mesh)
    if out is not None:
        _write_csv(
            os.path.join(out, "block.csv"),
            ["variant", "N_h", "ux_P", "uy_P"],
            [[r.variant, r.N_h, _g(r.ux), _g(r.uy)] for r in result.rows],
        )
    return result


# single solve ------------------------------------------------------------------------------


@dataclass
class SingleResult:
    mesh: PolyMesh
    history: SolveHistory | None
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def run_single_solve(cfg: StudyConfig, out: str | None = None) -> SingleResult:
    """One incremental solve with constant body force and clamped labelled edges."""
    cfg.validate()
    mesh = build_mesh(cfg, cfg.refinements[0] if cfg.refinements else None)
    law = build_law(cfg, "linear_elastic")
    force = np.asarray(cfg.body_force or [0.0, 0.0], dtype=float)
    bc = clamp(mesh, cfg.clamp or None)
    program = LoadProgram(cfg.steps, lambda x: np.broadcast_to(force, (len(x), 2)), bc)
    try:
        hist = incremental_solve(mesh, law, program, newton_settings(cfg), cfg.alpha_mode, cfg.alpha_value, cfg.alpha_norm)
    except SolverError as exc:
        return SingleResult(mesh, getattr(exc, "history", None), [str(exc)])
    if out is not None:
        _ensure_dir(out)
        _write_csv(
            os.path.join(out, "displacement.csv"),
            ["vertex", "x", "y", "ux", "uy"],
            [[i, _g(x), _g(y), _g(ux), _g(uy)] for i, ((x, y), (ux, uy)) in enumerate(zip(mesh.vertices, hist.final.values))],
        )
        _write_csv(
            os.path.join(out, "stress.csv"),
            ["element", "s_xx", "s_xy", "s_yx", "s_yy"],
            [[i] + [_g(v) for v in s.ravel()] for i, s in enumerate(hist.stress)],
        )
        _write_mesh(cfg, out, "mesh.txt", mesh)
    return SingleResult(mesh, hist)
