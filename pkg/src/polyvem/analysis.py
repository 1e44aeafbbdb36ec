"""Discrete error norms, convergence rates and manufactured forcing."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .constitutive import Benchmark, HenckyVonMises, LinearElastic
from .mesh import PolyMesh


class UndefinedRateError(ValueError):
    pass


# Gauss-Legendre nodes on [0, 1]
_GAUSS3_T = 0.5 + 0.5 * np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)])
_GAUSS3_W = np.array([5.0, 8.0, 5.0]) / 18.0


@dataclass
class ManufacturedCase:
    """Exact displacement and gradient in closed form, plus the law that loads it.

    ``u`` maps points ``(n, 2)`` to ``(n, 2)``; ``grad`` maps them to
    ``(n, 2, 2)`` with ``grad[..., i, j] = d u_i / d x_j``.
    """

    name: str
    u: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    law: Callable | None = None
    body_force: Callable[[np.ndarray], np.ndarray] | None = None

    def force(self, x: np.ndarray) -> np.ndarray:
        if self.body_force is not None:
            return self.body_force(np.atleast_2d(x))
        return manufactured_body_force(self, x)


def _sine(amp: float):
    def u(x):
        x = np.atleast_2d(x)
        s = amp * np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])
        return np.stack([s, s], axis=1)

    def grad(x):
        x = np.atleast_2d(x)
        gx = amp * np.pi * np.cos(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])
        gy = amp * np.pi * np.sin(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1])
        row = np.stack([gx, gy], axis=1)
        return np.stack([row, row], axis=1)

    return u, grad


def _bubble(amp: float):
    def u(x):
        x = np.atleast_2d(x)
        s = amp * x[:, 0] * (1 - x[:, 0]) * x[:, 1] * (1 - x[:, 1])
        return np.stack([s, s], axis=1)

    def grad(x):
        x = np.atleast_2d(x)
        X, Y = x[:, 0], x[:, 1]
        gx = amp * (1 - 2 * X) * Y * (1 - Y)
        gy = amp * X * (1 - X) * (1 - 2 * Y)
        row = np.stack([gx, gy], axis=1)
        return np.stack([row, row], axis=1)

    return u, grad


def linear_case(A, b=(0.0, 0.0), law=None) -> ManufacturedCase:
    """``u(x) = A x + b``; any law gives zero body force."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    return ManufacturedCase(
        "linear",
        lambda x: np.atleast_2d(x) @ A.T + b,
        lambda x: np.broadcast_to(A, (len(np.atleast_2d(x)), 2, 2)).copy(),
        law,
        lambda x: np.zeros((len(np.atleast_2d(x)), 2)),
    )


def make_case(name: str, law=None) -> ManufacturedCase:
    """Named verification problems on the unit square with homogeneous Dirichlet data."""
    table = {
        "hencky_sine": (lambda: _sine(1.0), HenckyVonMises),
        "benchmark_sine": (lambda: _sine(10.0), Benchmark),
        "case1": (lambda: _bubble(1.0), Benchmark),
        "case2": (lambda: _bubble(80.0), Benchmark),
        "elastic_sine": (lambda: _sine(1.0), LinearElastic),
    }
    if name not in table:
        raise ValueError(f"unknown manufactured case {name!r}; choose from {sorted(table)}")
    make, default_law = table[name]
    u, grad = make()
    return ManufacturedCase(name, u, grad, law if law is not None else default_law())


def manufactured_body_force(case: ManufacturedCase, x, step: float = 1e-5) -> np.ndarray:
    """``f = -div sigma(grad u)`` by central differences of the stress field.

    Accepts one point ``(2,)`` or many ``(n, 2)``.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    h = step * (1.0 + np.abs(pts).max(axis=1))
    div = np.zeros((len(pts), 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = 1.0
        sp = case.law(case.grad(pts + h[:, None] * e)).stress
        sm = case.law(case.grad(pts - h[:, None] * e)).stress
        div += (sp[:, :, j] - sm[:, :, j]) / (2.0 * h[:, None])
    f = -div
    return f[0] if np.ndim(x) == 1 else f


# norms ------------------------------------------------------------------------------


def _values(u_h) -> np.ndarray:
    return np.asarray(getattr(u_h, "values", u_h), dtype=float).reshape(-1, 2)


def error_0_inf(mesh: PolyMesh, u_h, exact) -> float:
    """Largest componentwise vertex error."""
    err = _values(u_h) - exact.u(mesh.vertices)
    return float(np.abs(err).max()) if err.size else 0.0


def error_1_2(mesh: PolyMesh, u_h, exact) -> float:
    """Edge-based discrete H1 seminorm of ``u_h - u``.

    Each edge contributes ``h_e`` times the squared L2 norm of the tangential
    derivative error; the exact derivative is integrated by 3-point Gauss.
    """
    uh = _values(u_h)
    e = mesh.edges
    a, b = mesh.vertices[e[:, 0]], mesh.vertices[e[:, 1]]
    d = b - a
    h = np.linalg.norm(d, axis=1)
    t = d / h[:, None]
    c_h = (uh[e[:, 1]] - uh[e[:, 0]]) / h[:, None]
    total = np.zeros(len(e))
    for tq, wq in zip(_GAUSS3_T, _GAUSS3_W):
        g = exact.grad(a + tq * d)
        diff = c_h - np.einsum("nij,nj->ni", g, t)
        total += wq * (diff**2).sum(axis=1)
    # h_e * (h_e * mean) over the edge
    return float(math.sqrt(np.sum(h**2 * total)))


def relative_error_inf(mesh: PolyMesh, u_h, exact) -> float:
    """Largest nodal component error over the largest nodal exact component."""
    ref = exact.u(mesh.vertices)
    scale = np.abs(ref).max()
    if scale == 0.0:
        raise ValueError("exact solution vanishes at every vertex")
    return float(np.abs(_values(u_h) - ref).max() / scale)


def convergence_rate(rows: Sequence[tuple[float, float]]) -> list[float]:
    """``R = -2 log(E/E') / log(N/N')`` for each consecutive pair of rows."""
    rates = []
    for (n0, e0), (n1, e1) in zip(rows[:-1], rows[1:]):
        if e0 <= 0.0 or e1 <= 0.0 or not (math.isfinite(e0) and math.isfinite(e1)):
            raise UndefinedRateError(f"rate needs positive finite errors, got {e0} and {e1}")
        if n1 == n0:
            raise UndefinedRateError("consecutive rows have the same vertex count")
        rates.append(-2.0 * math.log(e1 / e0) / math.log(n1 / n0))
    return rates


@dataclass
class ConvergenceRow:
    N_h: int
    E_0inf: float
    E_12: float
    R_0inf: float | None = None
    R_12: float | None = None


def fill_rates(rows: list[ConvergenceRow]) -> list[ConvergenceRow]:
    """Set R_0inf and R_12 in place from the second row on."""
    if len(rows) < 2:
        return rows
    r0 = convergence_rate([(r.N_h, r.E_0inf) for r in rows])
    r1 = convergence_rate([(r.N_h, r.E_12) for r in rows])
    for row, a, b in zip(rows[1:], r0, r1):
        row.R_0inf, row.R_12 = a, b
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(v)
    return f"{v:.6e}" if math.isfinite(v) else "nan"


def rows_to_csv(rows: Sequence[ConvergenceRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N_h", "E_0inf", "R_0inf", "E_12", "R_12"])
    for r in rows:
        w.writerow([r.N_h, _fmt(r.E_0inf), _fmt(r.R_0inf), _fmt(r.E_12), _fmt(r.R_12)])
    return buf.getvalue()
