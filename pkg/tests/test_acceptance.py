"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line with the measured values
before asserting, so the verdicts are visible in ``pytest -v`` output.
Runtime is a few minutes; the plasticity strip dominates.
"""

import time

import numpy as np
import pytest

from polyvem.analysis import (
    ConvergenceRow,
    convergence_rate,
    error_0_inf,
    error_1_2,
    fill_rates,
    linear_case,
    make_case,
    relative_error_inf,
)
from polyvem.config import defaults_for, parse_config
from polyvem.constitutive import (
    Benchmark,
    HenckyVonMises,
    J2Plasticity,
    LinearElastic,
    MaterialState,
    NeoHookean,
    j2_return_map,
    tangent_fd_oracle,
    with_state,
)
from polyvem.mesh import element_geometry, generate_structured, generate_voronoi
from polyvem.solver import DisplacementField, assemble
from polyvem.studies import run_finite_strain_block, run_plasticity_strip, solve_manufactured

from .conftest import polygon_mesh, random_star_polygon

pytestmark = pytest.mark.acceptance

BENCH_E0 = [4.5978e-3, 1.2340e-3, 3.1086e-4]
BENCH_E12 = [9.0144e-1, 4.4672e-1, 2.2279e-1]
BLOCK_TARGET = 1.1005


@pytest.fixture
def report(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        return ok

    return emit


def within(value, target, tol):
    return abs(value - target) <= tol * abs(target)


def convergence_table(kind, ns, case, **solve_kw):
    rows = []
    for n in ns:
        mesh = generate_structured(kind, n)
        hist = solve_manufactured(mesh, case, 10, **solve_kw)
        scale = np.abs(case.u(mesh.vertices)).max()
        rows.append((ConvergenceRow(mesh.n_vertices, error_0_inf(mesh, hist.final, case), error_1_2(mesh, hist.final, case)), scale))
    table = fill_rates([r for r, _ in rows])
    return table, [s for _, s in rows]


def fmt_rows(rows, e0_scales=None):
    parts = []
    for i, r in enumerate(rows):
        e0 = r.E_0inf / (e0_scales[i] if e0_scales else 1.0)
        parts.append(f"N_h={r.N_h} E0={e0:.4e} E12={r.E_12:.4e}")
    return "; ".join(parts)


def test_c1_patch_test(report):
    start = time.perf_counter()
    case = linear_case([[0.021, -0.013], [0.008, 0.034]], [0.1, -0.05], Benchmark())
    worst = {}
    for kind in ("square", "triangle", "trapezoid", "hex_structured", "chevron"):
        mesh = generate_structured(kind, 4)
        hist = solve_manufactured(mesh, case, steps=1)
        exact = case.u(mesh.vertices)
        worst[kind] = np.abs(hist.final.values - exact).max() / np.abs(exact).max()
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-10 and elapsed < 1.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f"; {elapsed:.2f} s"
    assert report("C1 patch test (rel. vertex error <= 1e-10, < 1 s)", ok, detail)


def test_c2_benchmark_convergence(report):
    """Frobenius stabilization scale, nodal error relative to the peak nodal value."""
    start = time.perf_counter()
    case = make_case("benchmark_sine")
    rows, scales = convergence_table("square", (32, 64, 128), case, alpha_norm="frobenius")
    e0 = [r.E_0inf / s for r, s in zip(rows, scales)]
    e12 = [r.E_12 for r in rows]
    r0 = convergence_rate([(r.N_h, e) for r, e in zip(rows, e0)])
    r12 = [rows[1].R_12, rows[2].R_12]
    elapsed = time.perf_counter() - start
    ok = (
        [r.N_h for r in rows] == [1089, 4225, 16641]
        and all(within(a, b, 0.15) for a, b in zip(e0, BENCH_E0))
        and all(within(a, b, 0.10) for a, b in zip(e12, BENCH_E12))
        and all(1.85 <= r <= 2.15 for r in r0)
        and all(0.95 <= r <= 1.10 for r in r12)
        and elapsed < 600
    )
    detail = (
        fmt_rows(rows, scales)
        + f"; R0={r0[0]:.3f},{r0[1]:.3f} R12={r12[0]:.3f},{r12[1]:.3f}"
        + f"; E0 dev {', '.join(f'{a / b - 1:+.1%}' for a, b in zip(e0, BENCH_E0))}"
        + f"; E12 dev {', '.join(f'{a / b - 1:+.1%}' for a, b in zip(e12, BENCH_E12))}; {elapsed:.0f} s"
    )
    assert report("C2 benchmark law on square grids", ok, detail)


def test_c2_benchmark_max_entry_scale(capsys):
    """Same table with the max-entry stabilization scale; reported, not asserted."""
    case = make_case("benchmark_sine")
    rows, scales = convergence_table("square", (32, 64, 128), case)
    e0 = [r.E_0inf / s for r, s in zip(rows, scales)]
    r0 = convergence_rate([(r.N_h, e) for r, e in zip(rows, e0)])
    with capsys.disabled():
        print(
            "\n[INFO] C2 with max-entry alpha: "
            + fmt_rows(rows, scales)
            + f"; E0 dev {', '.join(f'{a / b - 1:+.1%}' for a, b in zip(e0, BENCH_E0))}"
            + f"; R0={r0[0]:.3f},{r0[1]:.3f} R12={rows[1].R_12:.3f},{rows[2].R_12:.3f}"
        )
    assert all(np.isfinite(e0))


def test_c3_hencky_rates(report):
    case = make_case("hencky_sine")
    lines, ok = [], True
    for kind in ("square", "trapezoid"):
        rows, _ = convergence_table(kind, (8, 16, 32, 64), case)
        last = rows[-1]
        ok &= 0.9 <= last.R_12 <= 1.2 and 1.8 <= last.R_0inf <= 2.3
        lines.append(f"{kind}: R12={last.R_12:.3f} R0={last.R_0inf:.3f} ({fmt_rows(rows[-2:])})")
    assert report("C3 Hencky rates on the last pair", ok, "; ".join(lines))


def test_c4_updated_vs_fixed_alpha(report):
    meshes = [generate_voronoi(n, seed=0) for n in (100, 400, 1600)]
    res = {}
    for name in ("case1", "case2"):
        case = make_case(name)
        for mode in ("updated", "fixed"):
            res[name, mode] = [relative_error_inf(m, solve_manufactured(m, case, 10, mode).final, case) for m in meshes]

    def decreasing(seq):
        return all(b < a for a, b in zip(seq, seq[1:]))

    gap = res["case2", "fixed"][-1] / res["case2", "updated"][-1]
    ok = (
        decreasing(res["case2", "updated"])
        and gap >= 10
        and decreasing(res["case1", "updated"])
        and decreasing(res["case1", "fixed"])
    )
    detail = "; ".join(f"{c} {m}: " + ", ".join(f"{v:.3e}" for v in vals) for (c, m), vals in res.items())
    detail += f"; N_h={[m.n_vertices for m in meshes]}; case2 finest fixed/updated = {gap:.1f}"
    assert report("C4 updated vs fixed alpha on Voronoi meshes", ok, detail)


def test_c5_plasticity_strip(report):
    cfg = parse_config("reference_refinement = 128", defaults_for("plasticity_strip"))
    start = time.perf_counter()
    res = run_plasticity_strip(cfg)
    elapsed = time.perf_counter() - start
    assert res.ok, res.failures
    rows, ref = res.rows, res.reference
    a = [r.displ_A for r in rows]
    t = [r.sigma_T for r in rows]
    shrink_a = abs(a[1] - a[0]) / abs(a[2] - a[1])
    shrink_t = abs(t[1] - t[0]) / abs(t[2] - t[1])
    ref_gap = abs(a[-1] - ref.displ_A) / abs(ref.displ_A)
    gamma_min = min(r.gamma_min for r in rows + [ref])
    trace = max(r.max_plastic_trace for r in rows + [ref])
    ok = shrink_a >= 1.5 and shrink_t >= 1.5 and ref_gap <= 0.01 and gamma_min >= 0 and trace <= 1e-10
    detail = (
        "; ".join(f"{r.label} N_h={r.N_h} A={r.displ_A:.4f} B={r.displ_B:.4f} smax={r.sigma_max:.3f} sT={r.sigma_T:.1f}" for r in rows + [ref])
        + f"; shrink A {shrink_a:.2f}, sigma_T {shrink_t:.2f}; |A-A_ref|/A_ref={ref_gap:.2%}"
        + f"; min gamma {gamma_min:.1e}; max |tr eps_p| {trace:.1e}; {elapsed:.0f} s"
    )
    assert report("C5 plasticity strip", ok, detail)


def test_c6_finite_strain_block(report, capsys):
    cfg = parse_config("variants = sign_fixed, default, as_printed", defaults_for("finite_strain_block"))
    start = time.perf_counter()
    res = run_finite_strain_block(cfg)
    elapsed = time.perf_counter() - start
    main = res.series("sign_fixed")
    ux = [r.ux for r in main]
    dist = [abs(u - BLOCK_TARGET) for u in ux]
    ok = (
        [r.N_h for r in main] == [49, 196, 784, 3025]
        and all(b < a for a, b in zip(dist, dist[1:]))
        and within(ux[-1], BLOCK_TARGET, 0.03)
        and elapsed < 300
    )
    detail = f"sign_fixed ux_P={', '.join(f'{u:.4f}' for u in ux)} (uy_P={main[-1].uy:.4f}); {elapsed:.0f} s"
    with capsys.disabled():
        for variant in ("default", "as_printed"):
            series = res.series(variant)
            vals = ", ".join(f"{r.ux:.4f}" for r in series) or "no converged rows"
            print(f"\n[INFO] C6 variant {variant}: ux_P={vals}")
        for msg in res.failures:
            print(f"[INFO] C6 {msg}")
    assert report("C6 finite-strain block", ok, detail)


def test_c7_oracles(report, rng):
    worst = {}
    laws = {
        "linear": (LinearElastic(2.0, 1.0), 0.3),
        "hencky": (HenckyVonMises(), 0.3),
        "benchmark": (Benchmark(), 0.3),
        "neo_hookean": (NeoHookean(variant="default"), 0.2),
        "neo_hookean_sign_fixed": (NeoHookean(variant="sign_fixed"), 0.2),
    }
    for name, (law, scale) in laws.items():
        g = rng.normal(size=(100, 2, 2)) * scale
        T, fd = law(g).tangent, tangent_fd_oracle(law, g)
        worst[name] = max(np.abs(fd[i] - T[i]).max() / np.abs(T[i]).max() for i in range(100))
    j2 = J2Plasticity()
    ep = rng.normal(size=(100, 4)) * 0.01
    ep[:, 3] = -(ep[:, 0] + ep[:, 1])
    beta = rng.normal(size=(100, 4)) * 0.1
    beta[:, 3] = -(beta[:, 0] + beta[:, 1])
    state = MaterialState(ep, beta, rng.uniform(0, 0.05, 100))
    g = rng.normal(size=(100, 2, 2)) * 0.05
    T, fd = j2(None, state, g).tangent, tangent_fd_oracle(with_state(j2, state), g)
    worst["j2"] = max(np.abs(fd[i] - T[i]).max() / np.abs(T[i]).max() for i in range(100))

    # single-element global assembly against a dense loop-built element matrix
    xy = random_star_polygon(rng, 7)
    mesh = polygon_mesh(xy)
    geom = element_geometry(mesh, 0)
    u = rng.normal(size=14)
    field = DisplacementField.free(mesh.n_vertices)
    field.values[:] = u.reshape(-1, 2)
    K = assemble(mesh, LinearElastic(1.0, 1.0), field, DisplacementField.free(mesh.n_vertices)).tangent.toarray()
    K_dense = dense_element_matrix(xy, geom.area)
    asm_err = np.abs(K - K_dense).max() / np.abs(K_dense).max()

    target = np.array([[0.05, 0.0], [0.0, 0.0]])
    one = j2_return_map(None, MaterialState.zeros(1), target[None], j2.params)
    state = MaterialState.zeros(1)
    for k in range(1, 1001):
        resp = j2_return_map(None, state, (target * k / 1000)[None], j2.params)
        state = resp.new_state
    rm_err = np.abs(one.stress - resp.stress).max() / np.abs(resp.stress).max()

    ok = max(worst.values()) <= 1e-5 and asm_err <= 1e-12 and rm_err <= 1e-3
    detail = "tangent vs FD " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    detail += f"; assembly vs dense {asm_err:.1e}; return map vs 1000 substeps {rm_err:.1e}"
    assert report("C7 oracle equivalences", ok, detail)


def dense_element_matrix(xy, area):
    """|E| G^T C G + 3 S for lam = mu = 1, built entry by entry."""
    k = len(xy)
    G = np.zeros((4, 2 * k))
    for f in range(k):
        a, b = f, (f + 1) % k
        t = xy[b] - xy[a]
        hn = np.array([t[1], -t[0]])
        for node in (a, b):
            for comp in range(2):
                for j in range(2):
                    G[2 * comp + j, 2 * node + comp] += 0.5 * hn[j] / area
    P = np.zeros((2 * k, 2 * k))
    xbar = xy.mean(axis=0)
    for col in range(2 * k):
        v = np.zeros(2 * k)
        v[col] = 1.0
        grad = (G @ v).reshape(2, 2)
        P[:, col] = (v.reshape(k, 2).mean(axis=0) + (xy - xbar) @ grad.T).ravel()
    R = np.eye(2 * k) - P
    C = np.zeros((4, 4))
    for i in range(2):
        for j in range(2):
            for m in range(2):
                for n in range(2):
                    C[2 * i + j, 2 * m + n] = (i == j) * (m == n) + (i == m) * (j == n) + (i == n) * (j == m)
    return area * G.T @ C @ G + 3.0 * R.T @ R


def test_c8_path_independence(report, capsys):
    case = make_case("benchmark_sine")
    gaps = {}
    for kind, mode in (("square", "fixed"), ("triangle", "updated"), ("square", "updated")):
        mesh = generate_structured(kind, 8)
        a = solve_manufactured(mesh, case, 10, mode).final.values
        b = solve_manufactured(mesh, case, 100, mode).final.values
        gaps[kind, mode] = np.abs(a - b).max() / np.abs(b).max()
    ok = gaps["square", "fixed"] <= 1e-8 and gaps["triangle", "updated"] <= 1e-8
    detail = (
        f"squares N=8, fixed alpha: {gaps['square', 'fixed']:.1e}; "
        f"triangles N=8, updated alpha: {gaps['triangle', 'updated']:.1e}"
    )
    with capsys.disabled():
        print(
            f"\n[INFO] C8 squares with updated alpha differ by {gaps['square', 'updated']:.1e}: "
            "alpha is frozen at the previous step, so the discrete system itself depends on the step count"
        )
    assert report("C8 elastic path independence (N=10 vs N=100)", ok, detail)
