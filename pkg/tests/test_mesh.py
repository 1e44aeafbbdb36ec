import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from polyvem.mesh import (
    DegenerateElementError,
    MeshError,
    MeshParseError,
    PolyMesh,
    element_geometry,
    generate_strip,
    generate_structured,
    generate_voronoi,
    load_mesh,
    serialize,
    validate,
)

from .conftest import polygon_mesh

FAMILIES = ["square", "triangle", "trapezoid", "hex_structured", "chevron"]


def all_generated():
    meshes = [(f"{k}-{n}", generate_structured(k, n)) for k in FAMILIES for n in (2, 4, 8)]
    meshes.append(("voronoi-40", generate_voronoi(40, seed=3)))
    meshes += [(f"strip-{kind}", generate_strip(8, kind=kind)) for kind in ("quad", "tri", "brick")]
    return meshes


GENERATED = all_generated()
ON_UNIT_SQUARE = [g for g in GENERATED if not g[0].startswith("strip")]


def _canonical(loop_xy):
    """Rotation-independent key for a CCW coordinate loop."""
    pts = [tuple(np.round(p, 12)) for p in loop_xy]
    k = pts.index(min(pts))
    return tuple(pts[k:] + pts[:k])


class TestStructured:
    def test_single_square(self):
        m = generate_structured("square", 1)
        assert m.n_cells == 1 and m.n_vertices == 4
        assert m.cell_areas().sum() == pytest.approx(1.0)

    def test_square_counts(self):
        m = generate_structured("square", 4)
        assert (m.n_vertices, m.n_cells) == (25, 16)

    def test_trapezoid_matches_hand_tiling(self):
        # 2x2 motif from the prototype (0,0),(1/2,0),(1/2,2/3),(0,1/3), its
        # point reflection stacked above it and the mirror images to the right
        motif = [
            [(0, 0), (0.5, 0), (0.5, 2 / 3), (0, 1 / 3)],
            [(0, 1 / 3), (0.5, 2 / 3), (0.5, 1), (0, 1)],
            [(0.5, 0), (1, 0), (1, 1 / 3), (0.5, 2 / 3)],
            [(0.5, 2 / 3), (1, 1 / 3), (1, 1), (0.5, 1)],
        ]
        expected = set()
        for bi in range(2):
            for bj in range(2):
                for cell in motif:
                    xy = 0.5 * np.array(cell) + 0.5 * np.array([bi, bj])
                    expected.add(_canonical(xy))
        m = generate_structured("trapezoid", 4)
        got = {_canonical(m.vertices[c]) for c in m.cells}
        assert got == expected
        assert abs(m.cell_areas().sum() - 1.0) < 1e-12

    def test_trapezoids_are_congruent(self):
        m = generate_structured("trapezoid", 6)
        areas = m.cell_areas()
        assert_allclose(areas, 1 / 36, rtol=1e-12)
        sides = np.array([sorted(np.linalg.norm(np.roll(m.vertices[c], -1, 0) - m.vertices[c], axis=1)) for c in m.cells])
        assert_allclose(sides, np.broadcast_to(sides[0], sides.shape), rtol=1e-12)

    def test_hex_cells(self):
        m = generate_structured("hex_structured", 6)
        counts = {len(c) for c in m.cells}
        assert 6 in counts
        assert counts <= {3, 4, 5, 6}

    @pytest.mark.parametrize("n", [0, -1])
    def test_invalid_n(self, n):
        with pytest.raises(MeshError):
            generate_structured("square", n)

    def test_unknown_kind(self):
        with pytest.raises(MeshError):
            generate_structured("circle", 4)

    def test_chevron_has_nonconvex_cells(self):
        m = generate_structured("chevron", 4)
        reflex = 0
        for c in m.cells:
            xy = m.vertices[c]
            a = np.roll(xy, 1, 0) - xy
            b = np.roll(xy, -1, 0) - xy
            reflex += np.sum(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0] > 1e-14)
        assert reflex > 0


class TestInvariants:
    @pytest.mark.parametrize("name,mesh", GENERATED, ids=[g[0] for g in GENERATED])
    def test_structure(self, name, mesh):
        mesh.check()

    @pytest.mark.parametrize("name,mesh", ON_UNIT_SQUARE, ids=[g[0] for g in ON_UNIT_SQUARE])
    def test_area_sum(self, name, mesh):
        assert abs(mesh.cell_areas().sum() - 1.0) < 1e-12

    @pytest.mark.parametrize("name,mesh", GENERATED, ids=[g[0] for g in GENERATED])
    def test_closed_polygons(self, name, mesh):
        for k in range(mesh.n_cells):
            g = element_geometry(mesh, k)
            assert np.abs((g.edge_lengths[:, None] * g.normals).sum(axis=0)).max() < 1e-12 * max(1.0, g.diameter)

    @pytest.mark.parametrize("name,mesh", GENERATED, ids=[g[0] for g in GENERATED])
    def test_round_trip(self, name, mesh):
        back = load_mesh(serialize(mesh))
        assert np.array_equal(back.vertices, mesh.vertices)
        assert all(np.array_equal(a, b) for a, b in zip(back.cells, mesh.cells))
        assert back.boundary_edges == mesh.boundary_edges

    def test_interior_edges_shared_twice(self):
        m = generate_structured("hex_structured", 5)
        use = {}
        for c in m.cells:
            for a, b in zip(c, np.roll(c, -1)):
                use[(int(a), int(b))] = use.get((int(a), int(b)), 0) + 1
        for (a, b), count in use.items():
            assert count == 1
        n_boundary = sum(1 for a, b in use if (b, a) not in use)
        assert n_boundary == len(m.boundary_edges)

    def test_strip_area(self):
        m = generate_strip(64, kind="quad")
        exact = 100 * 180 - math.pi * 50**2 / 4
        # polygonal hole: the chords cut off circular segments
        assert m.cell_areas().sum() == pytest.approx(exact, rel=1e-3)
        assert set(m.labels) == {"hole", "right", "sym_x", "sym_y", "top"}


class TestGeometry:
    def test_unit_square(self):
        g = element_geometry(polygon_mesh([[0, 0], [1, 0], [1, 1], [0, 1]]), 0)
        assert g.area == pytest.approx(1.0)
        assert g.diameter == pytest.approx(math.sqrt(2))
        assert_allclose(g.normals, [[0, -1], [1, 0], [0, 1], [-1, 0]], atol=1e-15)

    def test_right_triangle(self):
        g = element_geometry(polygon_mesh([[0, 0], [1, 0], [0, 1]]), 0)
        assert g.area == pytest.approx(0.5)
        assert g.diameter == pytest.approx(math.sqrt(2))

    def test_regular_hexagon(self):
        t = np.arange(6) * math.pi / 3
        g = element_geometry(polygon_mesh(np.stack([np.cos(t), np.sin(t)], 1)), 0)
        assert g.area == pytest.approx(3 * math.sqrt(3) / 2, rel=1e-14)
        assert g.diameter == pytest.approx(2.0, rel=1e-14)

    def test_degenerate(self):
        m = PolyMesh(np.array([[0, 0], [1, 0], [2, 0]], float), (np.array([0, 1, 2]),), ((0, 1, "g"), (1, 2, "g"), (2, 0, "g")))
        with pytest.raises(DegenerateElementError):
            element_geometry(m, 0)

    def test_normals_unit_outward(self, rng):
        from .conftest import random_convex_polygon

        g = element_geometry(polygon_mesh(random_convex_polygon(rng, 7)), 0)
        assert_allclose(np.linalg.norm(g.normals, axis=1), 1.0)
        mids = 0.5 * (g.coords + np.roll(g.coords, -1, 0))
        assert np.all(np.einsum("ij,ij->i", mids - g.centroid, g.normals) > 0)


class TestValidate:
    def test_square_grid(self):
        rep = validate(generate_structured("square", 4))
        assert rep.all_star_shaped
        assert_allclose(rep.edge_ratio, 1 / math.sqrt(2))

    def test_l_shaped_cell(self):
        # vertex mean (4/3, 4/3) lies in the notch; the kernel is [0,1]^2
        rep = validate(polygon_mesh([[0, 0], [3, 0], [3, 1], [1, 1], [1, 3], [0, 3]]))
        assert not rep.star_shaped[0]

    def test_hex_structured(self):
        assert validate(generate_structured("hex_structured", 8)).all_star_shaped

    def test_deterministic(self):
        m = generate_voronoi(30, seed=1)
        a, b = validate(m), validate(m)
        assert np.array_equal(a.edge_ratio, b.edge_ratio)
        assert np.array_equal(a.star_shaped, b.star_shaped)


VORONOI_LIKE = """\
polymesh 2d
# corners then the inner pentagon
v 0 0
v 1 0
v 1 1
v 0 1
v 0.3 0.3
v 0.5 0.25
v 0.7 0.3
v 0.7 0.7
v 0.3 0.7
c 4 5 6 7 8
c 0 1 6 5 4
c 1 2 7 6
c 2 3 8 7
c 3 0 4 8
b 0 1 bottom
b 1 2 right
b 2 3 top
b 3 0 left
"""


class TestLoadMesh:
    def test_hand_written(self):
        m = load_mesh(VORONOI_LIKE)
        assert m.n_cells == 5
        assert m.labels == ["bottom", "left", "right", "top"]
        assert m.cell_areas().sum() == pytest.approx(1.0)

    def test_dangling_index(self):
        text = VORONOI_LIKE.replace("c 2 3 8 7", "c 2 3 8 17")
        with pytest.raises(MeshParseError, match="cell 3") as err:
            load_mesh(text)
        assert err.value.lineno == 15

    def test_malformed_line(self):
        with pytest.raises(MeshParseError) as err:
            load_mesh(VORONOI_LIKE.replace("v 0.3 0.7", "v 0.3"))
        assert err.value.lineno == 11

    def test_open_boundary(self):
        with pytest.raises(MeshParseError, match="boundary"):
            load_mesh(VORONOI_LIKE.replace("b 2 3 top\n", ""))

    def test_bad_header(self):
        with pytest.raises(MeshParseError):
            load_mesh("mesh 3d\nv 0 0\n")

    def test_clockwise_cell_rejected(self):
        with pytest.raises(MeshParseError):
            load_mesh(VORONOI_LIKE.replace("c 4 5 6 7 8", "c 8 7 6 5 4"))


class TestVoronoi:
    def test_seeded_reproducible(self):
        a, b = generate_voronoi(50, seed=7), generate_voronoi(50, seed=7)
        assert np.array_equal(a.vertices, b.vertices)
        assert generate_voronoi(50, seed=8).n_vertices > 0

    def test_cells_match_seeds(self):
        m = generate_voronoi(100, seed=0)
        assert m.n_cells == 100
        assert validate(m).all_star_shaped
