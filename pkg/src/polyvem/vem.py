"""Lowest-order virtual element operators on polygons.

Element degrees of freedom are vertex displacements, interleaved as
``[u_x(v0), u_y(v0), u_x(v1), ...]`` following the cell's vertex loop.
Gradients are flattened row-major: ``[g_xx, g_xy, g_yx, g_yy]`` with
``g_ij = d u_i / d x_j``.

The batched builders take coordinates of shape ``(m, k, 2)`` for ``m``
elements with ``k`` vertices each; the single-element helpers wrap them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .constitutive import ConstitutiveResponse, MaterialState, frobenius, max_entry
from .mesh import ElementGeometry, PolyMesh, UnsupportedElementError


class InvalidStateError(ValueError):
    pass


ALPHA_NORMS: dict[str, Callable[[np.ndarray], np.ndarray]] = {"max": max_entry, "frobenius": frobenius}


# batched operators ---------------------------------------------------------------


def signed_areas(coords: np.ndarray) -> np.ndarray:
    x, y = coords[..., 0], coords[..., 1]
    return 0.5 * (x * np.roll(y, -1, axis=-1) - np.roll(x, -1, axis=-1) * y).sum(-1)


def diameters(coords: np.ndarray) -> np.ndarray:
    d = coords[:, :, None, :] - coords[:, None, :, :]
    return np.sqrt((d**2).sum(-1)).max(axis=(1, 2))


def grad_operator(coords: np.ndarray, area: np.ndarray) -> np.ndarray:
    """``(m, 4, 2k)`` matrices mapping element dofs to the mean gradient.

    The boundary integral of each edgewise-linear trace is exact with the
    trapezoidal rule, so vertex ``a`` collects half of ``h_f n_f`` from its
    two incident edges.
    """
    m, k, _ = coords.shape
    d = np.roll(coords, -1, axis=1) - np.roll(coords, 1, axis=1)
    w = 0.5 * np.stack([d[..., 1], -d[..., 0]], axis=-1) / area[:, None, None]  # (m, k, 2)
    G = np.zeros((m, 4, 2 * k))
    for i in range(2):
        for j in range(2):
            G[:, 2 * i + j, i::2] = w[..., j]
    return G


def projector_operator(coords: np.ndarray, G: np.ndarray) -> np.ndarray:
    """``(m, 2k, 2k)`` matrices giving vertex values of the linear projection."""
    m, k, _ = coords.shape
    xc = coords - coords.mean(axis=1, keepdims=True)
    P = np.zeros((m, 2 * k, 2 * k))
    for i in range(2):
        # constant part: vertex average of component i
        P[:, i::2, i::2] += 1.0 / k
        # linear part: sum_j grad_ij (x_v - xbar)_j
        P[:, i::2, :] += np.einsum("mvj,mjd->mvd", xc, G[:, 2 * i : 2 * i + 2, :])
    return P


def stab_operator(P: np.ndarray, diameter: np.ndarray | None = None, dim: int = 2) -> np.ndarray:
    """``(I - P)^T D (I - P)`` with ``D = h_E^(d-2) I``."""
    n = P.shape[-1]
    R = np.eye(n) - P
    S = np.einsum("mai,maj->mij", R, R)
    if dim != 2 and diameter is not None:
        S *= diameter[:, None, None] ** (dim - 2)
    return S


def load_weights(coords: np.ndarray, area: np.ndarray) -> np.ndarray:
    """Vertex quadrature weights exact for linear functions.

    Fan triangulation from the vertex centroid; the centroid's share is
    spread evenly over the vertices, which keeps linears exact.
    """
    m, k, _ = coords.shape
    c = coords.mean(axis=1, keepdims=True)
    a = coords - c
    b = np.roll(coords, -1, axis=1) - c
    tri = 0.5 * (a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0])  # (m, k), triangle (c, v_a, v_a+1)
    if np.any(tri <= 0.0):
        raise UnsupportedElementError("element is not star-shaped with respect to its vertex centroid")
    w = (tri + np.roll(tri, 1, axis=1)) / 3.0 + area[:, None] / (3.0 * k)
    return w


# element groups --------------------------------------------------------------------


@dataclass
class ElementGroup:
    """All cells of a mesh sharing one vertex count."""

    cells: np.ndarray
    loops: np.ndarray
    coords: np.ndarray
    area: np.ndarray
    diameter: np.ndarray
    G: np.ndarray
    P: np.ndarray
    S: np.ndarray
    dofs: np.ndarray
    weights: np.ndarray | None = None

    @property
    def k(self) -> int:
        return self.loops.shape[1]


def build_groups(mesh: PolyMesh, with_weights: bool = True) -> list[ElementGroup]:
    by_k: dict[int, list[int]] = {}
    for idx, c in enumerate(mesh.cells):
        by_k.setdefault(len(c), []).append(idx)
    groups = []
    for k in sorted(by_k):
        ids = np.array(by_k[k])
        loops = np.stack([mesh.cells[i] for i in ids])
        coords = mesh.vertices[loops]
        area = signed_areas(coords)
        if np.any(area <= 0.0):
            bad = ids[np.argmin(area)]
            raise UnsupportedElementError(f"cell {bad} has non-positive area")
        G = grad_operator(coords, area)
        P = projector_operator(coords, G)
        S = stab_operator(P)
        dofs = np.empty((len(ids), 2 * k), dtype=np.int64)
        dofs[:, 0::2] = 2 * loops
        dofs[:, 1::2] = 2 * loops + 1
        groups.append(
            ElementGroup(
                cells=ids,
                loops=loops,
                coords=coords,
                area=area,
                diameter=diameters(coords),
                G=G,
                P=P,
                S=S,
                dofs=dofs,
                weights=load_weights(coords, area) if with_weights else None,
            )
        )
    return groups


def projected_gradients(group: ElementGroup, u_global: np.ndarray) -> np.ndarray:
    """``(m, 2, 2)`` mean gradients of the global field ``u`` (flat, length 2n)."""
    return np.einsum("mad,md->ma", group.G, u_global[group.dofs]).reshape(-1, 2, 2)


def alpha_from_tangent(tangent: np.ndarray, norm: str = "max") -> np.ndarray:
    alpha = ALPHA_NORMS[norm](tangent)
    if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0.0):
        raise InvalidStateError("stabilization parameter must be finite and positive")
    return alpha


def group_forces(group: ElementGroup, resp: ConstitutiveResponse, u_e: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    stress = resp.stress.reshape(-1, 4)
    F = group.area[:, None] * np.einsum("mad,ma->md", group.G, stress)
    F += alpha[:, None] * np.einsum("mij,mj->mi", group.S, u_e)
    return F


def group_tangents(group: ElementGroup, resp: ConstitutiveResponse, alpha: np.ndarray) -> np.ndarray:
    C = resp.tangent.reshape(-1, 4, 4)
    K = group.area[:, None, None] * np.einsum("mai,mab,mbj->mij", group.G, C, group.G, optimize=True)
    K += alpha[:, None, None] * group.S
    return K


# single-element API ------------------------------------------------------------------


def _coords(geom: ElementGeometry) -> np.ndarray:
    return np.asarray(geom.coords, dtype=float)[None]


def _flat(v) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape(-1)


def _single(geom: ElementGeometry):
    xy = _coords(geom)
    area = np.array([geom.area])
    G = grad_operator(xy, area)
    return xy, area, G


def pi0_grad(geom: ElementGeometry, v) -> np.ndarray:
    _, _, G = _single(geom)
    return (G[0] @ _flat(v)).reshape(2, 2)


def pi_nabla(geom: ElementGeometry, v) -> np.ndarray:
    xy, _, G = _single(geom)
    P = projector_operator(xy, G)[0]
    return (P @ _flat(v)).reshape(-1, 2)


def projector_matrices(geom: ElementGeometry) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(G, P, S)`` for one element."""
    xy, _, G = _single(geom)
    P = projector_operator(xy, G)
    return G[0], P[0], stab_operator(P)[0]


def stab_matrix(geom: ElementGeometry) -> np.ndarray:
    return projector_matrices(geom)[2]


def vertex_load_weights(geom: ElementGeometry) -> np.ndarray:
    return load_weights(_coords(geom), np.array([geom.area]))[0]


def alpha_param(law, s, geom: ElementGeometry, norm: str = "max") -> float:
    resp = law(pi0_grad(geom, s)[None])
    return float(alpha_from_tangent(resp.tangent, norm)[0])


def _evaluate(law, geom, u, state, u_old):
    g = pi0_grad(geom, u)[None]
    if getattr(law, "inelastic", False):
        if state is None:
            raise ValueError("inelastic law needs a material state")
        g_old = pi0_grad(geom, u_old)[None] if u_old is not None else np.zeros_like(g)
        st = state if np.ndim(state.gamma) == 1 else state[None]
        return law(g_old, st, g)
    return law(g)


def _default_alpha(law, geom, s, state) -> float:
    if getattr(law, "inelastic", False):
        # algorithm tangent at the reference gradient with the committed history
        return float(max_entry(_evaluate(law, geom, s, state, None).tangent)[0])
    return alpha_param(law, s, geom)


def local_residual(law, geom: ElementGeometry, u, s, state: MaterialState | None = None, u_old=None, alpha=None):
    """Element force vector and (for inelastic laws) the updated state.

    The law is evaluated once, at the projected gradient of ``u``. ``alpha``
    overrides the stabilization scale otherwise computed from ``s``.
    """
    G, _, S = projector_matrices(geom)
    resp = _evaluate(law, geom, u, state, u_old)
    if alpha is None:
        alpha = _default_alpha(law, geom, s, state)
    F = geom.area * G.T @ resp.stress.reshape(4) + alpha * S @ _flat(u)
    new_state = resp.new_state[0] if resp.new_state is not None else None
    return F, new_state


def local_tangent(law, geom: ElementGeometry, u, s, state: MaterialState | None = None, u_old=None, alpha=None):
    G, _, S = projector_matrices(geom)
    resp = _evaluate(law, geom, u, state, u_old)
    if alpha is None:
        alpha = _default_alpha(law, geom, s, state)
    return geom.area * G.T @ resp.tangent.reshape(4, 4) @ G + alpha * S
