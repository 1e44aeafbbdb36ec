"""Global assembly, Dirichlet constraints and the incremental Newton driver."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .constitutive import ConstitutiveError, ConstitutiveResponse, MaterialState
from .mesh import PolyMesh
from .vem import ElementGroup, alpha_from_tangent, build_groups, group_forces, group_tangents, projected_gradients

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class NonConvergenceError(SolverError):
    def __init__(self, message: str, residuals: Sequence[float]):
        super().__init__(message)
        self.residuals = list(residuals)


class SingularSystemError(SolverError):
    pass


class StepFailureError(SolverError):
    """A load step failed; ``history`` holds the converged steps before it."""

    def __init__(self, message: str, step: int, history: "SolveHistory | None" = None):
        super().__init__(message)
        self.step = step
        self.history = history


class ElementLawError(SolverError):
    def __init__(self, message: str, cells: np.ndarray):
        super().__init__(message)
        self.cells = cells


# fields and constraints -------------------------------------------------------------


@dataclass
class DisplacementField:
    """Vertex displacements with a per-component constraint table.

    ``prescribed`` marks constrained components; ``targets`` holds their
    full-load values (scaled by :func:`apply_dirichlet`).
    """

    values: np.ndarray
    prescribed: np.ndarray
    targets: np.ndarray

    @classmethod
    def free(cls, n_vertices: int) -> DisplacementField:
        return cls(np.zeros((n_vertices, 2)), np.zeros((n_vertices, 2), dtype=bool), np.zeros((n_vertices, 2)))

    def copy(self) -> DisplacementField:
        return DisplacementField(self.values.copy(), self.prescribed.copy(), self.targets.copy())

    def constrain(self, vertices, component: int | None = None, value=0.0) -> DisplacementField:
        """Prescribe ``value`` (scalar, (2,), or per-vertex array) on the given vertices in place."""
        vertices = np.asarray(vertices, dtype=np.int64)
        comps = [0, 1] if component is None else [component]
        val = np.broadcast_to(np.asarray(value, dtype=float), (len(vertices), 2) if component is None else (len(vertices),))
        for c in comps:
            self.prescribed[vertices, c] = True
            self.targets[vertices, c] = val[:, c] if component is None else val
        return self

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    @property
    def free_dofs(self) -> np.ndarray:
        return np.flatnonzero(~self.prescribed.reshape(-1))

    @property
    def n_free(self) -> int:
        return int((~self.prescribed).sum())


def apply_dirichlet(field: DisplacementField, scale: float) -> DisplacementField:
    out = field.copy()
    out.values[out.prescribed] = scale * out.targets[out.prescribed]
    return out


def clamp(mesh: PolyMesh, labels=None, values: Callable | None = None) -> DisplacementField:
    """Field with every component prescribed on the labelled boundary.

    ``values`` maps vertex coordinates ``(n, 2)`` to target displacements.
    """
    f = DisplacementField.free(mesh.n_vertices)
    vs = mesh.boundary_vertices(labels)
    target = 0.0 if values is None else values(mesh.vertices[vs])
    return f.constrain(vs, None, target)


# load program ---------------------------------------------------------------------


@dataclass
class LoadProgram:
    """Incremental loading: step ``n`` applies ``n / n_steps`` of everything."""

    n_steps: int = 10
    body_force: Callable[[np.ndarray], np.ndarray] | None = None
    constraints: DisplacementField | None = None

    def __post_init__(self):
        if int(self.n_steps) < 1:
            raise ValueError("a load program needs at least one step")

    def scale(self, n: int) -> float:
        return n / self.n_steps


@dataclass
class NewtonSettings:
    tol_rel: float = 1e-10
    tol_abs: float = 1e-12
    max_iter: int = 25


# assembly -------------------------------------------------------------------------


@dataclass
class SystemMatrices:
    """Assembled state at one iterate."""

    residual: np.ndarray
    tangent: sp.csr_matrix | None
    stress: np.ndarray
    stress_zz: np.ndarray | None
    element_tangent: np.ndarray
    new_states: MaterialState | None
    full_tangent: sp.csr_matrix | None = None


class Assembler:
    """Precomputed element operators and sparsity for one mesh and law."""

    def __init__(self, mesh: PolyMesh, law, free_dofs: np.ndarray | None = None, with_weights: bool = True):
        self.mesh = mesh
        self.law = law
        self.groups: list[ElementGroup] = build_groups(mesh, with_weights=with_weights)
        self.n_dofs = 2 * mesh.n_vertices
        self.n_cells = mesh.n_cells
        rows = np.concatenate([np.repeat(g.dofs, g.dofs.shape[1], axis=1).ravel() for g in self.groups])
        cols = np.concatenate([np.tile(g.dofs, (1, g.dofs.shape[1])).ravel() for g in self.groups])
        self._full = _Pattern(rows, cols, self.n_dofs, self.n_dofs)
        self.set_free(free_dofs)
        self.vertex_weights = None
        if with_weights:
            w = np.zeros(mesh.n_vertices)
            for g in self.groups:
                np.add.at(w, g.loops.ravel(), g.weights.ravel())
            self.vertex_weights = w

    def set_free(self, free_dofs: np.ndarray | None):
        self.free_dofs = np.arange(self.n_dofs) if free_dofs is None else np.asarray(free_dofs)
        lookup = -np.ones(self.n_dofs, dtype=np.int64)
        lookup[self.free_dofs] = np.arange(len(self.free_dofs))
        r, c = lookup[self._full.rows], lookup[self._full.cols]
        keep = (r >= 0) & (c >= 0)
        self._keep = keep
        self._free = _Pattern(r[keep], c[keep], len(self.free_dofs), len(self.free_dofs))

    def gradients(self, u_flat: np.ndarray) -> np.ndarray:
        out = np.empty((self.n_cells, 2, 2))
        for g in self.groups:
            out[g.cells] = projected_gradients(g, u_flat)
        return out

    def external_forces(self, body_force: Callable | None, scale: float = 1.0) -> np.ndarray:
        if body_force is None:
            return np.zeros(self.n_dofs)
        if self.vertex_weights is None:
            raise SolverError("body forces need vertex load weights")
        f = np.asarray(body_force(self.mesh.vertices), dtype=float).reshape(-1, 2)
        return scale * (self.vertex_weights[:, None] * f).reshape(-1)

    def evaluate_law(self, grads: np.ndarray, states: MaterialState | None, grads_old: np.ndarray | None):
        try:
            if getattr(self.law, "inelastic", False):
                return self.law(grads_old, states, grads)
            return self.law(grads)
        except ConstitutiveError as exc:
            bad = _failing_cells(self.law, grads, states, grads_old)
            raise ElementLawError(f"constitutive law failed on cells {bad[:10].tolist()}: {exc}", bad) from exc

    def assemble(
        self,
        u_flat: np.ndarray,
        alpha: np.ndarray,
        states: MaterialState | None = None,
        u_old_flat: np.ndarray | None = None,
        f_ext: np.ndarray | None = None,
        tangent: bool = True,
        full: bool = False,
    ) -> SystemMatrices:
        grads = self.gradients(u_flat)
        grads_old = self.gradients(u_old_flat) if u_old_flat is not None else None
        resp = self.evaluate_law(grads, states, grads_old)
        residual = np.zeros(self.n_dofs)
        k_vals = []
        for g in self.groups:
            sub = ConstitutiveResponse(resp.stress[g.cells], resp.tangent[g.cells])
            F = group_forces(g, sub, u_flat[g.dofs], alpha[g.cells])
            np.add.at(residual, g.dofs.ravel(), F.ravel())
            if tangent:
                k_vals.append(group_tangents(g, sub, alpha[g.cells]).ravel())
        if f_ext is not None:
            residual -= f_ext
        K = Kfull = None
        if tangent:
            vals = np.concatenate(k_vals)
            K = self._free.build(vals[self._keep])
            if full:
                Kfull = self._full.build(vals)
        return SystemMatrices(
            residual=residual,
            tangent=K,
            stress=resp.stress,
            stress_zz=resp.stress_zz,
            element_tangent=resp.tangent,
            new_states=resp.new_state,
            full_tangent=Kfull,
        )


class _Pattern:
    """COO triplets folded once into a CSR pattern; later values are scattered by index."""

    def __init__(self, rows: np.ndarray, cols: np.ndarray, n_rows: int, n_cols: int):
        key = rows.astype(np.int64) * n_cols + cols
        uniq, self.inverse = np.unique(key, return_inverse=True)
        r, c = np.divmod(uniq, n_cols)
        self.indptr = np.searchsorted(r, np.arange(n_rows + 1)).astype(np.int64)
        self.indices = c.astype(np.int64)
        self.nnz = len(uniq)
        self.shape = (n_rows, n_cols)
        self.rows, self.cols = rows, cols

    def build(self, vals: np.ndarray) -> sp.csr_matrix:
        data = np.bincount(self.inverse, weights=vals, minlength=self.nnz)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=self.shape)


def _failing_cells(law, grads, states, grads_old) -> np.ndarray:
    bad = []
    for i in range(len(grads)):
        try:
            if getattr(law, "inelastic", False):
                law(None if grads_old is None else grads_old[i : i + 1], states[i : i + 1], grads[i : i + 1])
            else:
                law(grads[i : i + 1])
        except ConstitutiveError:
            bad.append(i)
    return np.array(bad, dtype=np.int64)


def compute_alpha(assembler: Assembler, s_flat: np.ndarray, norm: str = "max") -> np.ndarray:
    """Per-element stabilization scale from the law tangent at the projected gradient of ``s``."""
    law = assembler.law
    grads = assembler.gradients(s_flat)
    if getattr(law, "inelastic", False):
        raise SolverError("inelastic laws take alpha from the committed tangent")
    return alpha_from_tangent(law(grads).tangent, norm)


def assemble(mesh, law, u: DisplacementField, s: DisplacementField, states=None, u_old=None, body_force=None):
    """One-shot assembly on all dofs (tangent restricted to free components of ``u``)."""
    asm = Assembler(mesh, law, u.free_dofs, with_weights=body_force is not None)
    if getattr(law, "inelastic", False):
        ref = law(None, states, asm.gradients(s.flat))
        alpha = alpha_from_tangent(ref.tangent)
    else:
        alpha = compute_alpha(asm, s.flat)
    f_ext = asm.external_forces(body_force)
    return asm.assemble(u.flat, alpha, states, None if u_old is None else u_old.flat, f_ext, full=True)


# linear solves ------------------------------------------------------------------------


def _tiny_pivot(lu) -> bool:
    d = np.abs(lu.U.diagonal())
    return bool(d.min() <= 100 * len(d) * np.finfo(float).eps * d.max())


def solve_linear(K: sp.csr_matrix, b: np.ndarray, symmetric: bool = True) -> np.ndarray:
    """Sparse LU solve; symmetric tangents try diagonal pivoting on an A+A^T ordering first."""
    if K.shape[0] == 0:
        return np.zeros(0)
    K = K.tocsc()
    try:
        lu = None
        if symmetric:
            try:
                lu = spla.splu(K, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options={"SymmetricMode": True})
            except RuntimeError:
                pass
            if lu is None or _tiny_pivot(lu):
                lu = spla.splu(K, permc_spec="MMD_AT_PLUS_A")
        else:
            lu = spla.splu(K, permc_spec="COLAMD")
        if _tiny_pivot(lu):
            raise SingularSystemError("tangent is numerically singular (are rigid motions constrained?)")
        x = lu.solve(b)
    except RuntimeError as exc:
        raise SingularSystemError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("linear solve produced non-finite values")
    return np.atleast_1d(x)


# Newton and load stepping -----------------------------------------------------------------


@dataclass
class NewtonResult:
    field: DisplacementField
    states: MaterialState | None
    residuals: list[float]
    system: SystemMatrices


def newton_solve(
    assembler: Assembler,
    u_init: DisplacementField,
    alpha: np.ndarray,
    f_ext: np.ndarray,
    states: MaterialState | None = None,
    u_old: DisplacementField | None = None,
    settings: NewtonSettings = NewtonSettings(),
) -> NewtonResult:
    """Newton iterations on the free components; ``u_init`` must already satisfy the constraints."""
    u = u_init.copy()
    free = u.free_dofs
    if not np.array_equal(free, assembler.free_dofs):
        assembler.set_free(free)
    u_old_flat = None if u_old is None else u_old.flat
    symmetric = not getattr(assembler.law, "unsymmetric", False)
    residuals: list[float] = []
    r0 = None
    for it in range(settings.max_iter + 1):
        system = assembler.assemble(u.flat, alpha, states, u_old_flat, f_ext)
        r = system.residual[free]
        rnorm = float(np.linalg.norm(r))
        residuals.append(rnorm)
        if r0 is None:
            r0 = rnorm
        if not np.isfinite(rnorm):
            raise NonConvergenceError("residual is not finite", residuals)
        if rnorm <= settings.tol_rel * r0 + settings.tol_abs:
            new_states = system.new_states if states is not None else None
            return NewtonResult(u, new_states, residuals, system)
        if it == settings.max_iter:
            break
        du = solve_linear(system.tangent, -r, symmetric=symmetric)
        u.flat[free] += du
    raise NonConvergenceError(
        f"Newton did not converge in {settings.max_iter} iterations (residual {residuals[-1]:.3e}, initial {r0:.3e})",
        residuals,
    )


@dataclass
class SolveHistory:
    fields: list[DisplacementField] = field(default_factory=list)
    states: MaterialState | None = None
    logs: list[list[float]] = field(default_factory=list)
    alphas: list[np.ndarray] = field(default_factory=list)
    stress: np.ndarray | None = None
    stress_zz: np.ndarray | None = None

    @property
    def final(self) -> DisplacementField:
        return self.fields[-1]


def incremental_solve(
    mesh: PolyMesh,
    law,
    program: LoadProgram,
    settings: NewtonSettings = NewtonSettings(),
    alpha_mode: str = "updated",
    alpha_value: float | None = None,
    alpha_norm: str = "max",
    assembler: Assembler | None = None,
) -> SolveHistory:
    """Solve steps ``n = 1..N`` with load ``n/N`` and alpha frozen at the previous step.

    ``alpha_mode="fixed"`` keeps one alpha for the whole run: ``alpha_value``
    if given, else the law's tangent norm at ``u = 0``.
    """
    constraints = program.constraints or DisplacementField.free(mesh.n_vertices)
    if assembler is None:
        assembler = Assembler(mesh, law, constraints.free_dofs, with_weights=program.body_force is not None)
    inelastic = getattr(law, "inelastic", False)
    u = apply_dirichlet(constraints, 0.0)
    states = law.initial_state(mesh.n_cells) if inelastic else None
    history = SolveHistory(fields=[u.copy()], states=states)

    zero = np.zeros(assembler.n_dofs)
    if inelastic:
        committed_tangent = law(None, states, assembler.gradients(zero)).tangent
    fixed_alpha = None
    if alpha_mode == "fixed":
        if alpha_value is not None:
            fixed_alpha = np.full(mesh.n_cells, float(alpha_value))
        elif inelastic:
            fixed_alpha = alpha_from_tangent(committed_tangent, alpha_norm)
        else:
            fixed_alpha = compute_alpha(assembler, zero, alpha_norm)
    elif alpha_mode != "updated":
        raise ValueError(f"unknown alpha mode {alpha_mode!r}")

    for n in range(1, program.n_steps + 1):
        scale = program.scale(n)
        if fixed_alpha is not None:
            alpha = fixed_alpha
        elif inelastic:
            alpha = alpha_from_tangent(committed_tangent, alpha_norm)
        else:
            alpha = compute_alpha(assembler, u.flat, alpha_norm)
        f_ext = assembler.external_forces(program.body_force, scale)
        trial = apply_dirichlet(constraints, scale)
        trial.values[~trial.prescribed] = u.values[~trial.prescribed]
        try:
            res = newton_solve(assembler, trial, alpha, f_ext, states, u if inelastic else None, settings)
        except (SolverError, ConstitutiveError) as exc:
            raise StepFailureError(f"load step {n}/{program.n_steps} failed: {exc}", n, history) from exc
        u = res.field
        if inelastic:
            states = res.states
            committed_tangent = res.system.element_tangent
        history.fields.append(u.copy())
        history.logs.append(res.residuals)
        history.alphas.append(alpha)
        history.states = states
        history.stress = res.system.stress
        history.stress_zz = res.system.stress_zz
        log.debug("step %d/%d converged in %d iterations", n, program.n_steps, len(res.residuals) - 1)
    return history
