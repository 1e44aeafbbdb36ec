"""Polygonal meshes: representation, generators, exchange format and quality checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.spatial import Voronoi


class MeshError(ValueError):
    """Invalid mesh data or generator parameters."""


class MeshParseError(MeshError):
    def __init__(self, lineno: int | None, message: str):
        self.lineno = lineno
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(where + message)


class DegenerateElementError(MeshError):
    pass


class UnsupportedElementError(MeshError):
    pass


@dataclass(frozen=True, eq=False)
class PolyMesh:
    """Conforming polygonal mesh of a 2D domain.

    Attributes:
        vertices: ``(n, 2)`` coordinates.
        cells: counterclockwise vertex loops, one integer array per cell.
        boundary_edges: ``(i, j, label)`` triples, oriented as in the owning cell.
    """

    vertices: np.ndarray
    cells: tuple[np.ndarray, ...]
    boundary_edges: tuple[tuple[int, int, str], ...]
    _edges: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=float).reshape(-1, 2)
        verts.setflags(write=False)
        cells = []
        for c in self.cells:
            arr = np.array(c, dtype=np.int64).ravel()
            arr.setflags(write=False)
            cells.append(arr)
        bedges = tuple((int(i), int(j), str(lab)) for i, j, lab in self.boundary_edges)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "cells", tuple(cells))
        object.__setattr__(self, "boundary_edges", bedges)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def edges(self) -> np.ndarray:
        """Unique edges as ``(n_edges, 2)``, each row sorted ascending."""
        if self._edges is None:
            pairs = np.concatenate([np.stack([c, np.roll(c, -1)], axis=1) for c in self.cells])
            pairs.sort(axis=1)
            edges = np.unique(pairs, axis=0)
            edges.setflags(write=False)
            object.__setattr__(self, "_edges", edges)
        return self._edges

    @property
    def labels(self) -> list[str]:
        return sorted({lab for _, _, lab in self.boundary_edges})

    def boundary_vertices(self, labels: str | Iterable[str] | None = None) -> np.ndarray:
        """Sorted vertex indices on boundary edges carrying any of ``labels`` (all if None)."""
        if isinstance(labels, str):
            labels = {labels}
        elif labels is not None:
            labels = set(labels)
        ids = {v for i, j, lab in self.boundary_edges if labels is None or lab in labels for v in (i, j)}
        return np.array(sorted(ids), dtype=np.int64)

    def cell_areas(self) -> np.ndarray:
        return np.array([_shoelace(self.vertices[c]) for c in self.cells])

    def locate_vertex(self, point: Sequence[float], tol: float = 1e-9) -> int:
        """Index of the vertex at ``point``; raises if none lies within ``tol`` (relative)."""
        d = np.linalg.norm(self.vertices - np.asarray(point, dtype=float), axis=1)
        k = int(np.argmin(d))
        scale = max(1.0, float(np.abs(self.vertices).max()))
        if d[k] > tol * scale:
            raise MeshError(f"no vertex at {tuple(point)} (closest is {d[k]:.3g} away)")
        return k

    def check(self) -> None:
        """Raise ``MeshError`` unless every structural invariant holds."""
        n = self.n_vertices
        directed: dict[tuple[int, int], int] = {}
        for k, c in enumerate(self.cells):
            if len(c) < 3:
                raise MeshError(f"cell {k} has fewer than 3 vertices")
            if c.min() < 0 or c.max() >= n:
                raise MeshError(f"cell {k} references a vertex outside 0..{n - 1}")
            if len(set(c.tolist())) != len(c):
                raise MeshError(f"cell {k} repeats a vertex")
            if _shoelace(self.vertices[c]) <= 0.0:
                raise MeshError(f"cell {k} is not counterclockwise with positive area")
            if not _is_simple(self.vertices[c]):
                raise MeshError(f"cell {k} is self-intersecting")
            for a, b in zip(c, np.roll(c, -1)):
                key = (int(a), int(b))
                if key in directed:
                    raise MeshError(f"edge {key} traversed twice in the same direction")
                directed[key] = k
        boundary = set()
        for a, b in directed:
            if (b, a) not in directed:
                boundary.add((a, b))
        listed = set()
        for i, j, _ in self.boundary_edges:
            if (i, j) in listed:
                raise MeshError(f"boundary edge ({i}, {j}) listed twice")
            listed.add((i, j))
        if listed != boundary:
            missing = boundary - listed
            extra = listed - boundary
            raise MeshError(
                f"boundary edges do not tile the boundary: {len(missing)} missing, {len(extra)} spurious"
            )
        used = np.zeros(n, dtype=bool)
        for c in self.cells:
            used[c] = True
        if not used.all():
            raise MeshError(f"vertex {int(np.flatnonzero(~used)[0])} belongs to no cell")


@dataclass(frozen=True)
class ElementGeometry:
    coords: np.ndarray
    area: float
    diameter: float
    centroid: np.ndarray
    edge_lengths: np.ndarray
    normals: np.ndarray
    edge_vertices: np.ndarray


@dataclass(frozen=True)
class MeshQualityReport:
    edge_ratio: np.ndarray
    star_shaped: np.ndarray
    kernel_radius: np.ndarray

    @property
    def all_star_shaped(self) -> bool:
        return bool(self.star_shaped.all())


# geometry ------------------------------------------------------------------


def _shoelace(xy: np.ndarray) -> float:
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def _is_simple(xy: np.ndarray) -> bool:
    n = len(xy)
    if n <= 3:
        return True
    for a in range(n):
        for b in range(a + 2, n):
            if a == 0 and b == n - 1:
                continue
            if _segments_cross(xy[a], xy[(a + 1) % n], xy[b], xy[(b + 1) % n]):
                return False
    return True


def element_geometry(mesh: PolyMesh, cell: int) -> ElementGeometry:
    if not 0 <= cell < mesh.n_cells:
        raise IndexError(f"cell index {cell} out of range")
    loop = mesh.cells[cell]
    xy = mesh.vertices[loop]
    area = _shoelace(xy)
    if not area > 0.0:
        raise DegenerateElementError(f"cell {cell} has area {area:.3g}")
    d = xy[:, None, :] - xy[None, :, :]
    diameter = float(np.sqrt((d**2).sum(-1)).max())
    seg = np.roll(xy, -1, axis=0) - xy
    lengths = np.linalg.norm(seg, axis=1)
    normals = np.stack([seg[:, 1], -seg[:, 0]], axis=1) / lengths[:, None]
    return ElementGeometry(
        coords=xy,
        area=area,
        diameter=diameter,
        centroid=xy.mean(axis=0),
        edge_lengths=lengths,
        normals=normals,
        edge_vertices=np.stack([loop, np.roll(loop, -1)], axis=1),
    )


def _kernel_radius(xy: np.ndarray, point: np.ndarray) -> float:
    """Distance from ``point`` to the nearest edge line, signed negative if outside a half-plane."""
    seg = np.roll(xy, -1, axis=0) - xy
    lengths = np.linalg.norm(seg, axis=1)
    inward = np.stack([-seg[:, 1], seg[:, 0]], axis=1) / lengths[:, None]
    return float(np.min(np.einsum("ij,ij->i", point - xy, inward)))


def validate(mesh: PolyMesh, margin: float = 1e-10) -> MeshQualityReport:
    """Per-element shape-regularity indicators.

    Star-shapedness is tested against the vertex centroid only: every edge's
    inward half-plane must contain it with a relative margin.
    """
    ratios, flags, radii = [], [], []
    for k in range(mesh.n_cells):
        g = element_geometry(mesh, k)
        r = _kernel_radius(g.coords, g.centroid) / g.diameter
        ratios.append(g.edge_lengths.min() / g.diameter)
        flags.append(r > margin)
        radii.append(max(r, 0.0))
    return MeshQualityReport(np.array(ratios), np.array(flags), np.array(radii))


# assembling meshes from polygon soups --------------------------------------


def label_unit_square(x: float, y: float, tol: float = 1e-9) -> str:
    if abs(y) < tol:
        return "bottom"
    if abs(x - 1.0) < tol:
        return "right"
    if abs(y - 1.0) < tol:
        return "top"
    if abs(x) < tol:
        return "left"
    return "boundary"


def from_cells(
    vertices: np.ndarray,
    cells: Sequence[Sequence[int]],
    labeler: Callable[[float, float], str] | None = None,
) -> PolyMesh:
    """Build a mesh, deriving and labelling boundary edges from edge midpoints."""
    vertices = np.asarray(vertices, dtype=float)
    directed = set()
    for c in cells:
        c = list(c)
        for a, b in zip(c, c[1:] + c[:1]):
            directed.add((int(a), int(b)))
    labeler = labeler or label_unit_square
    bedges = []
    for c in cells:
        c = list(c)
        for a, b in zip(c, c[1:] + c[:1]):
            if (b, a) not in directed:
                mid = 0.5 * (vertices[a] + vertices[b])
                bedges.append((int(a), int(b), labeler(float(mid[0]), float(mid[1]))))
    return PolyMesh(vertices, tuple(np.asarray(c) for c in cells), tuple(bedges))


def merge_polygons(
    polygons: Sequence[np.ndarray],
    labeler: Callable[[float, float], str] | None = None,
    tol: float = 1e-9,
    min_area: float = 1e-12,
) -> PolyMesh:
    """Weld a list of CCW polygons (as coordinate arrays) into a conforming mesh.

    Coordinates closer than ``tol`` (relative to the bounding box) are merged;
    consecutive duplicates and polygons below ``min_area`` are dropped.
    """
    pts = np.concatenate([np.asarray(p, dtype=float) for p in polygons])
    span = float(np.ptp(pts, axis=0).max()) or 1.0
    from scipy.spatial import cKDTree

    tree = cKDTree(pts)
    pairs = tree.query_pairs(tol * span, output_type="ndarray")
    parent = np.arange(len(pts))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(len(pts))])

    order: dict[int, int] = {}
    cells = []
    offset = 0
    for p in polygons:
        idx = roots[offset : offset + len(p)]
        offset += len(p)
        loop = []
        for r in idx:
            if not loop or loop[-1] != r:
                loop.append(int(r))
        while len(loop) > 1 and loop[0] == loop[-1]:
            loop.pop()
        if len(loop) < 3 or _shoelace(pts[loop]) <= min_area * span**2:
            continue
        cells.append(loop)
        for r in loop:
            order.setdefault(r, len(order))
    vertices = np.empty((len(order), 2))
    for r, k in order.items():
        vertices[k] = pts[r]
    cells = [[order[r] for r in c] for c in cells]
    return from_cells(vertices, cells, labeler)


# structured generators -----------------------------------------------------


def _check_n(N) -> int:
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise MeshError(f"N must be a positive integer, got {N!r}")
    return int(N)


def _grid_mesh(xs: np.ndarray, ys: np.ndarray, split: bool = False) -> PolyMesh:
    """Quadrilateral (or triangulated) mesh over a logically rectangular point grid ``(ny+1, nx+1, 2)``."""
    ny1, nx1 = xs.shape
    vertices = np.stack([xs.ravel(), ys.ravel()], axis=1)

    def vid(i, j):
        return j * nx1 + i

    cells = []
    for j in range(ny1 - 1):
        for i in range(nx1 - 1):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if split:
                cells += [[a, b, c], [a, c, d]]
            else:
                cells.append([a, b, c, d])
    return from_cells(vertices, cells)


def generate_structured(kind: str, N: int) -> PolyMesh:
    """Mesh families on the unit square.

    ``square``: N x N squares. ``trapezoid``: N x N congruent trapezoids
    (N even). ``hex_structured``: hexagonal tiling with about N hexagons per
    row, clipped to the square. ``triangle``: each square split along its
    diagonal. ``chevron``: non-convex arrow-shaped cells.
    """
    N = _check_n(N)
    t = np.linspace(0.0, 1.0, N + 1)
    if kind == "square":
        xs, ys = np.meshgrid(t, t)
        return _grid_mesh(xs, ys)
    if kind == "triangle":
        xs, ys = np.meshgrid(t, t)
        return _grid_mesh(xs, ys, split=True)
    if kind == "trapezoid":
        if N % 2:
            raise MeshError("trapezoid meshes need an even N")
        xs, ys = np.meshgrid(t, t)
        ys = ys.copy()
        h = 1.0 / N
        for j in range(1, N, 2):
            ys[j, :] = (j - 1) * h + np.where(np.arange(N + 1) % 2 == 0, 2.0 * h / 3.0, 4.0 * h / 3.0)
        return _grid_mesh(xs, ys)
    if kind == "hex_structured":
        return _hex_structured(N)
    if kind == "chevron":
        return _chevron(N)
    raise MeshError(f"unknown mesh kind {kind!r}")


def _chevron(N: int, depth: float = 0.3) -> PolyMesh:
    h = 1.0 / N
    verts = []
    index = {}

    def vid(key, xy):
        if key not in index:
            index[key] = len(verts)
            verts.append(xy)
        return index[key]

    def sag(j):
        return 0.0 if j in (0, N) else depth * h

    cells = []
    for j in range(N):
        for i in range(N):
            x0, x1, xm = i * h, (i + 1) * h, (i + 0.5) * h
            y0, y1 = j * h, (j + 1) * h
            loop = [
                vid(("c", i, j), (x0, y0)),
                vid(("m", i, j), (xm, y0 - sag(j))),
                vid(("c", i + 1, j), (x1, y0)),
                vid(("c", i + 1, j + 1), (x1, y1)),
                vid(("m", i, j + 1), (xm, y1 - sag(j + 1))),
                vid(("c", i, j + 1), (x0, y1)),
            ]
            cells.append(loop)
    return from_cells(np.array(verts), cells)


def clip_to_box(poly: np.ndarray, lo=(0.0, 0.0), hi=(1.0, 1.0)) -> np.ndarray:
    """Sutherland-Hodgman clip of a polygon against an axis-aligned box.

    Intersection points get the clip coordinate assigned exactly.
    """
    out = np.asarray(poly, dtype=float)
    for axis, bound, keep_above in ((0, lo[0], True), (0, hi[0], False), (1, lo[1], True), (1, hi[1], False)):
        if len(out) == 0:
            break

        def inside(p):
            return p[axis] >= bound if keep_above else p[axis] <= bound

        res = []
        for k in range(len(out)):
            cur, nxt = out[k], out[(k + 1) % len(out)]
            cin, nin = inside(cur), inside(nxt)
            if cin:
                res.append(cur)
            if cin != nin:
                s = (bound - cur[axis]) / (nxt[axis] - cur[axis])
                p = cur + s * (nxt - cur)
                p[axis] = bound
                res.append(p)
        out = np.array(res).reshape(-1, 2)
    return out


def _voronoi_cells(points: np.ndarray, lo=(0.0, 0.0), hi=(1.0, 1.0)) -> list[np.ndarray]:
    """Bounded Voronoi cells of ``points`` inside a box, via mirrored seeds."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    mirrors = [points]
    for axis in (0, 1):
        for b in (lo[axis], hi[axis]):
            m = points.copy()
            m[:, axis] = 2.0 * b - m[:, axis]
            mirrors.append(m)
    vor = Voronoi(np.concatenate(mirrors))
    polys = []
    for k in range(len(points)):
        region = vor.regions[vor.point_region[k]]
        if -1 in region or len(region) < 3:
            raise MeshError("unbounded Voronoi region for an interior seed")
        xy = vor.vertices[region]
        c = xy.mean(axis=0)
        ang = np.arctan2(xy[:, 1] - c[1], xy[:, 0] - c[0])
        xy = xy[np.argsort(ang)]
        polys.append(clip_to_box(xy, lo, hi))
    return polys


def _hex_structured(N: int) -> PolyMesh:
    dx = 1.0 / N
    M = max(1, int(round(2.0 * N / math.sqrt(3.0))))
    dy = 1.0 / M
    seeds = []
    for j in range(-1, M + 2):
        shift = 0.5 * dx if j % 2 else 0.0
        for i in range(-1, N + 2):
            seeds.append((i * dx + shift, j * dy))
    seeds = np.array(seeds)
    vor = Voronoi(seeds)
    polys = []
    for k, p in enumerate(seeds):
        if not (-dx <= p[0] <= 1.0 + dx and -dy <= p[1] <= 1.0 + dy):
            continue
        region = vor.regions[vor.point_region[k]]
        if -1 in region or len(region) < 3:
            continue
        xy = vor.vertices[region]
        c = xy.mean(axis=0)
        xy = xy[np.argsort(np.arctan2(xy[:, 1] - c[1], xy[:, 0] - c[0]))]
        clipped = clip_to_box(xy)
        if len(clipped) >= 3 and _shoelace(clipped) > 1e-10 * dx * dy:
            polys.append(_snap(clipped))
    return merge_polygons(polys)


def _snap(xy: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    xy = xy.copy()
    for target in (0.0, 1.0):
        xy[np.abs(xy - target) < tol] = target
    return xy


def _polygon_centroid(xy: np.ndarray) -> np.ndarray:
    x, y = xy[:, 0], xy[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * a)


def generate_voronoi(n_seeds: int, seed: int = 0, sweeps: int = 10) -> PolyMesh:
    """Lloyd-relaxed Voronoi mesh of the unit square (deterministic for a given seed)."""
    n_seeds = _check_n(n_seeds)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.0, 1.0, size=(n_seeds, 2))
    for _ in range(sweeps):
        polys = _voronoi_cells(pts)
        pts = np.array([_polygon_centroid(p) for p in polys])
    polys = [_snap(p) for p in _voronoi_cells(pts)]
    return merge_polygons(polys)


# perforated strip ------------------------------------------------------------


def label_strip(width: float, height: float, radius: float) -> Callable[[float, float], str]:
    def labeler(x: float, y: float, tol: float = 1e-9) -> str:
        s = max(width, height)
        if abs(x) < tol * s:
            return "sym_x"
        if abs(y) < tol * s:
            return "sym_y"
        if abs(y - height) < tol * s:
            return "top"
        if abs(x - width) < tol * s:
            return "right"
        return "hole"

    return labeler


def generate_strip(
    n_arc: int,
    n_radial: int | None = None,
    kind: str = "brick",
    width: float = 100.0,
    height: float = 180.0,
    radius: float = 50.0,
    grading: float = 1.0,
) -> PolyMesh:
    """Quarter of a strip with a circular hole centred at the origin.

    A transfinite map sends each of ``n_arc`` hole segments along a straight
    line to the outer boundary (right then top edge). ``kind`` selects the
    cells: ``quad``, ``tri`` (each quad split), or ``brick`` (pairs of quads
    merged in staggered rows, giving hexagon-topology cells).
    """
    n_arc = _check_n(n_arc)
    n_radial = _check_n(n_radial if n_radial is not None else max(1, n_arc // 2))
    s = np.linspace(0.0, 1.0, n_arc + 1)
    theta = 0.5 * math.pi * s
    inner = radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    # outer path parametrised by arc length: right edge then top edge
    total = height + width
    corner = height / total
    outer = np.where(
        (s <= corner)[:, None],
        np.stack([np.full_like(s, width), s * total], axis=1),
        np.stack([width - (s * total - height), np.full_like(s, height)], axis=1),
    )
    outer[np.isclose(s, 1.0)] = (0.0, height)
    r = np.linspace(0.0, 1.0, n_radial + 1) ** grading
    pts = inner[None, :, :] + r[:, None, None] * (outer - inner)[None, :, :]
    pts[:, 0, 1] = 0.0
    pts[:, -1, 0] = 0.0
    xs, ys = pts[..., 0], pts[..., 1]
    labeler = label_strip(width, height, radius)
    nx1 = n_arc + 1
    vertices = np.stack([xs.ravel(), ys.ravel()], axis=1)

    def vid(i, j):
        return j * nx1 + i

    def quad(i, j):
        return _ccw(vertices, [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)])

    cells = []
    if kind in ("quad", "tri"):
        for j in range(n_radial):
            for i in range(n_arc):
                q = quad(i, j)
                if kind == "tri":
                    cells += [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]
                else:
                    cells.append(q)
    elif kind == "brick":
        for j in range(n_radial):
            i = 0
            if j % 2:
                cells.append(quad(0, j))
                i = 1
            while i < n_arc:
                if i + 1 < n_arc:
                    loop = [vid(i, j), vid(i + 1, j), vid(i + 2, j), vid(i + 2, j + 1), vid(i + 1, j + 1), vid(i, j + 1)]
                    cells.append(_ccw(vertices, loop))
                    i += 2
                else:
                    cells.append(quad(i, j))
                    i += 1
    else:
        raise MeshError(f"unknown strip mesh kind {kind!r}")
    return from_cells(vertices, cells, labeler)


def _ccw(vertices: np.ndarray, loop: list[int]) -> list[int]:
    return loop if _shoelace(vertices[loop]) > 0 else loop[::-1]


# exchange format -------------------------------------------------------------


def serialize(mesh: PolyMesh) -> str:
    lines = ["polymesh 2d"]
    lines += [f"v {x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines += ["c " + " ".join(str(int(i)) for i in c) for c in mesh.cells]
    lines += [f"b {i} {j} {lab}" for i, j, lab in mesh.boundary_edges]
    return "\n".join(lines) + "\n"


def load_mesh(text: str) -> PolyMesh:
    """Parse the line-based ``polymesh 2d`` exchange format."""
    vertices: list[tuple[float, float]] = []
    cells: list[tuple[int, list[int]]] = []
    bedges: list[tuple[int, int, int, str]] = []
    header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if not header:
            if tok != ["polymesh", "2d"]:
                raise MeshParseError(lineno, "expected header 'polymesh 2d'")
            header = True
            continue
        try:
            if tok[0] == "v" and len(tok) == 3:
                vertices.append((float(tok[1]), float(tok[2])))
            elif tok[0] == "c" and len(tok) >= 4:
                cells.append((lineno, [int(t) for t in tok[1:]]))
            elif tok[0] == "b" and len(tok) == 4:
                bedges.append((lineno, int(tok[1]), int(tok[2]), tok[3]))
            else:
                raise MeshParseError(lineno, f"malformed record {raw.strip()!r}")
        except ValueError as exc:
            if isinstance(exc, MeshParseError):
                raise
            raise MeshParseError(lineno, f"bad number in {raw.strip()!r}") from None
    if not header:
        raise MeshParseError(None, "empty input")
    n = len(vertices)
    for k, (lineno, c) in enumerate(cells):
        bad = [i for i in c if not 0 <= i < n]
        if bad:
            raise MeshParseError(lineno, f"cell {k} references vertex {bad[0]} but only {n} vertices exist")
    for lineno, i, j, _ in bedges:
        if not (0 <= i < n and 0 <= j < n):
            raise MeshParseError(lineno, f"boundary edge ({i}, {j}) references a missing vertex")
    mesh = PolyMesh(
        np.array(vertices, dtype=float).reshape(-1, 2),
        tuple(np.array(c) for _, c in cells),
        tuple((i, j, lab) for _, i, j, lab in bedges),
    )
    try:
        mesh.check()
    except MeshError as exc:
        raise MeshParseError(None, str(exc)) from None
    return mesh
