import numpy as np
import pytest

from handact.errors import InvalidIndex, InvariantViolation, NonManifoldEdge, ParseError
from handact.mesh import (TriangleMesh, build_adjacency, edge_set,
                          euler_characteristic, load_mesh, validate_mesh, write_off)
from handact.synth import hand_template, icosphere


def octahedron():
    verts = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0],
                      [0, 0, 1], [0, 0, -1]], dtype=float)
    faces = np.array([[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
                      [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]])
    return TriangleMesh(verts, faces)


class TestValidation:
    def test_valid_octahedron(self):
        validate_mesh(octahedron())

    def test_index_out_of_range(self):
        m = TriangleMesh(np.eye(3), np.array([[0, 1, 3]]))
        with pytest.raises(InvariantViolation, match="index"):
            validate_mesh(m)

    def test_repeated_vertex_in_face(self):
        m = TriangleMesh(np.eye(3), np.array([[0, 1, 1]]))
        with pytest.raises(InvariantViolation, match="repeats"):
            validate_mesh(m)

    def test_zero_area_face(self):
        verts = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], dtype=float)
        m = TriangleMesh(verts, np.array([[0, 1, 2]]))
        with pytest.raises(InvariantViolation, match="area"):
            validate_mesh(m)

    def test_same_orientation_twice(self):
        verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
        faces = np.array([[0, 1, 2], [0, 1, 3]])  # edge (0,1) same direction twice
        with pytest.raises(InvariantViolation, match="orientation"):
            validate_mesh(TriangleMesh(verts, faces))

    def test_more_than_two_faces_per_edge(self):
        # with three faces on one edge, two must share a direction, so either
        # manifold check may fire; both are invariant violations
        verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0, -1, 0]],
                         dtype=float)
        faces = np.array([[0, 1, 2], [1, 0, 3], [0, 1, 4]])
        with pytest.raises(InvariantViolation, match="edge"):
            validate_mesh(TriangleMesh(verts, faces))


class TestAdjacency:
    def test_single_triangle(self):
        m = TriangleMesh(np.eye(3), np.array([[0, 1, 2]]))
        adj = build_adjacency(m)
        assert adj.boundary.all()
        for i in range(3):
            assert set(adj.rings[i]) == {0, 1, 2} - {i}

    def test_octahedron_closed_rings(self):
        adj = build_adjacency(octahedron())
        assert not adj.boundary.any()
        assert all(len(r) == 4 for r in adj.rings)
        # every ring lists exactly the vertices sharing an edge
        e = {tuple(pair) for pair in edge_set(octahedron())}
        for i, ring in enumerate(adj.rings):
            for j in ring:
                assert tuple(sorted((i, int(j)))) in e

    def test_ring_order_follows_orientation(self):
        adj = build_adjacency(octahedron())
        m = octahedron()
        # consecutive ring entries around an interior vertex share a face with it
        for i, ring in enumerate(adj.rings):
            for k in range(len(ring)):
                a, b = int(ring[k]), int(ring[(k + 1) % len(ring)])
                found = any({i, a, b} == set(face) for face in m.faces.tolist())
                assert found

    def test_nonmanifold_edge_raises(self):
        verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0, -1, 0]],
                         dtype=float)
        faces = np.array([[0, 1, 2], [1, 0, 3], [0, 1, 4]])
        with pytest.raises(NonManifoldEdge):
            build_adjacency(TriangleMesh(verts, faces))

    def test_invalid_index_raises(self):
        m = TriangleMesh(np.eye(3), np.array([[0, 1, 5]]))
        with pytest.raises(InvalidIndex):
            build_adjacency(m)

    def test_boundary_ring_is_open_chain(self):
        # one quad of two triangles: all four vertices on the boundary
        verts = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
        faces = np.array([[0, 1, 2], [0, 2, 3]])
        adj = build_adjacency(TriangleMesh(verts, faces))
        assert adj.boundary.all()
        assert sorted(len(r) for r in adj.rings) == [2, 2, 3, 3]


class TestEuler:
    def test_closed_sphere(self):
        assert euler_characteristic(icosphere(1)) == 2

    def test_open_disk_template(self):
        assert euler_characteristic(hand_template()) == 1


class TestOffParser:
    def test_minimal_off(self, tmp_path):
        p = tmp_path / "t.off"
        p.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
        m = load_mesh(p)
        assert m.n_vertices == 3 and m.n_faces == 1

    def test_comments_and_blank_lines(self, tmp_path):
        p = tmp_path / "t.off"
        p.write_text("OFF\n# a comment\n\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n\n3 0 1 2\n")
        assert load_mesh(p).n_faces == 1

    def test_declared_four_vertices_listing_three(self, tmp_path):
        p = tmp_path / "t.off"
        p.write_text("OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
        with pytest.raises(ParseError):
            load_mesh(p)

    def test_missing_header(self, tmp_path):
        p = tmp_path / "t.off"
        p.write_text("3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
        with pytest.raises(ParseError, match="header"):
            load_mesh(p)

    def test_quad_face_rejected(self, tmp_path):
        p = tmp_path / "t.off"
        p.write_text("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n")
        with pytest.raises(ParseError, match="triangles"):
            load_mesh(p)

    def test_parse_error_carries_line_number(self, tmp_path):
        p = tmp_path / "t.off"
        p.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n4 0 1 2 0\n")
        with pytest.raises(ParseError, match="line 6"):
            load_mesh(p)

    def test_invariants_checked_after_parse(self, tmp_path):
        p = tmp_path / "t.off"
        p.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n2 0 0\n3 0 1 2\n")  # collinear
        with pytest.raises(InvariantViolation):
            load_mesh(p)

    def test_round_trip_bitwise(self, tmp_path):
        m = icosphere(1)
        p = tmp_path / "s.off"
        write_off(m, p)
        m2 = load_mesh(p)
        assert np.array_equal(m.vertices, m2.vertices)
        assert np.array_equal(m.faces, m2.faces)


class TestObjParser:
    def test_minimal_obj(self, tmp_path):
        p = tmp_path / "t.obj"
        p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
        m = load_mesh(p)
        assert m.n_vertices == 3 and m.n_faces == 1

    def test_slash_references(self, tmp_path):
        p = tmp_path / "t.obj"
        p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\nf 1/1/1 2/1/1 3/1/1\n")
        assert load_mesh(p).n_faces == 1

    def test_quads_rejected(self, tmp_path):
        p = tmp_path / "t.obj"
        p.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
        with pytest.raises(ParseError, match="triangles"):
            load_mesh(p)

    def test_negative_indices(self, tmp_path):
        p = tmp_path / "t.obj"
        p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n")
        m = load_mesh(p)
        assert np.array_equal(m.faces, [[0, 1, 2]])
