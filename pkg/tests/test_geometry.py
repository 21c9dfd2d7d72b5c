import math

import numpy as np
import pytest
import trimesh
from hypothesis import given
from hypothesis import strategies as st

from dualgrasp.geometry import (
    MeshError,
    NotWatertightError,
    TriangleMesh,
    contains_many,
    load_mesh,
    mass_properties,
    primitives,
    raycast,
    raycast_many,
    sample_surface,
    sample_surface_batch,
)
from oracles import brute_inside, brute_raycast, write_obj


# -- loading ----------------------------------------------------------------

def test_load_unit_cube_obj(tmp_path):
    path = write_obj(tmp_path / "cube.obj", *primitives.box())
    mesh = load_mesh(path)
    assert len(mesh.vertices) == 8 and len(mesh.faces) == 12
    assert mass_properties(mesh).volume == pytest.approx(1.0, abs=1e-12)


def test_scale_cubes_volume(tmp_path):
    path = write_obj(tmp_path / "cube.obj", *primitives.box())
    assert mass_properties(load_mesh(path, 0.1)).volume == pytest.approx(1e-3, rel=1e-12)


@pytest.mark.parametrize("binary", [True, False])
def test_load_stl(tmp_path, binary):
    tm = trimesh.Trimesh(*primitives.box(), process=False)
    path = tmp_path / "cube.stl"
    path.write_bytes(trimesh.exchange.stl.export_stl(tm) if binary
                     else trimesh.exchange.stl.export_stl_ascii(tm).encode())
    mesh = load_mesh(path)
    # per-face vertex copies are merged back to the 8 corners
    assert len(mesh.vertices) == 8
    assert mesh.is_watertight()
    assert mass_properties(mesh).volume == pytest.approx(1.0, abs=1e-9)


def test_inverted_winding_is_repaired(tmp_path):
    v, f = primitives.box()
    mesh = load_mesh(write_obj(tmp_path / "inv.obj", v, f[:, ::-1]))
    assert mesh.signed_volume() == pytest.approx(1.0)


def test_icosphere_volume_close_to_ball(icosphere):
    assert mass_properties(icosphere).volume == pytest.approx(4.0 * math.pi / 3.0, rel=0.02)


def test_load_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_mesh(tmp_path / "missing.obj")
    bad = tmp_path / "x.ply"
    bad.write_text("ply\n")
    with pytest.raises(MeshError, match="unsupported"):
        load_mesh(bad)
    junk = tmp_path / "junk.obj"
    junk.write_text("this is not a mesh\n")
    with pytest.raises(MeshError):
        load_mesh(junk)
    with pytest.raises(MeshError, match="scale"):
        load_mesh(write_obj(tmp_path / "c.obj", *primitives.box()), 0.0)


def test_degenerate_faces_rejected_above_one_percent(tmp_path):
    v, f = primitives.box()
    v = np.vstack([v, [[2.0, 0, 0], [3.0, 0, 0], [4.0, 0, 0]]])
    # a zero-area sliver is 1 of 13 faces, far above the 1% limit
    f = np.vstack([f, [[8, 9, 10]]])
    with pytest.raises(MeshError, match="degenerate"):
        load_mesh(write_obj(tmp_path / "deg.obj", v, f))


def test_degenerate_faces_dropped_below_limit(tmp_path):
    v, f = primitives.icosphere(4)  # 5120 faces
    n = len(v)
    v = np.vstack([v, [[3.0, 0, 0], [4.0, 0, 0], [5.0, 0, 0]]])
    f = np.vstack([f, [[n, n + 1, n + 2]]])
    mesh = load_mesh(write_obj(tmp_path / "ok.obj", v, f))
    assert len(mesh.faces) == 5120


# -- mass properties --------------------------------------------------------

def test_centered_cube_mass(unit_cube):
    mp = mass_properties(unit_cube, 1000.0)
    assert mp.mass == pytest.approx(1000.0)
    np.testing.assert_allclose(mp.center_of_mass, 0.0, atol=1e-12)


def test_corner_cube_com():
    mesh = TriangleMesh.from_arrays(*primitives.box(center=(0.5, 0.5, 0.5)))
    np.testing.assert_allclose(mass_properties(mesh).center_of_mass, 0.5, atol=1e-12)


def test_l_prism_com_matches_voxels(l_prism):
    # 10^6 voxel centers over the bounding box [0,2]x[0,2]x[0,1]
    nx, ny, nz = 100, 100, 100
    xs = (np.arange(nx) + 0.5) * 2.0 / nx
    ys = (np.arange(ny) + 0.5) * 2.0 / ny
    zs = (np.arange(nz) + 0.5) * 1.0 / nz
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    inside = ((X <= 2) & (Y <= 1)) | ((X <= 1) & (Y <= 2))
    voxel_com = np.array([X[inside].mean(), Y[inside].mean(), Z[inside].mean()])
    mp = mass_properties(l_prism)
    assert mp.volume == pytest.approx(3.0)
    np.testing.assert_allclose(mp.center_of_mass, voxel_com, atol=1e-3)
    np.testing.assert_allclose(mp.center_of_mass, [5 / 6, 5 / 6, 0.5], atol=1e-12)


def test_open_mesh_names_edges():
    v, f = primitives.box()
    mesh = TriangleMesh.from_arrays(v, f[:-1])
    with pytest.raises(NotWatertightError) as err:
        mass_properties(mesh)
    assert err.value.open_edges
    assert str(err.value.open_edges[0]) in str(err.value)


@given(st.randoms(use_true_random=False))
def test_mass_properties_permutation_invariant(rnd):
    v, f = primitives.l_prism(1.0)
    base = mass_properties(TriangleMesh.from_arrays(v, f))
    perm = list(range(len(v)))
    rnd.shuffle(perm)
    inv = np.argsort(perm)
    faces = inv[f]
    order = list(range(len(faces)))
    rnd.shuffle(order)
    # rotate each triangle's vertex order too; winding is preserved
    faces = np.array([np.roll(faces[k], rnd.randrange(3)) for k in order])
    mp = mass_properties(TriangleMesh.from_arrays(v[perm], faces))
    assert mp.volume == pytest.approx(base.volume, rel=1e-12)
    np.testing.assert_allclose(mp.center_of_mass, base.center_of_mass, atol=1e-12)


# -- surface sampling -------------------------------------------------------

def test_cube_face_frequencies(unit_cube):
    pts, normals, _ = sample_surface_batch(unit_cube, 7, 60_000)
    side = np.argmax(np.abs(normals), axis=1) * 2 + (normals.max(axis=1) > 0.5)
    counts = np.bincount(side, minlength=6)
    np.testing.assert_allclose(counts / counts.sum(), 1 / 6, atol=0.01)
    # chi-square against uniform, 5 dof, 1% critical value
    expected = counts.sum() / 6
    assert ((counts - expected) ** 2 / expected).sum() < 15.086
    # every point lies on the face it was drawn from
    np.testing.assert_allclose(np.abs(pts).max(axis=1), 0.5, atol=1e-12)


def test_area_weighting_two_faces():
    # one face of area 0.99 and one of 0.01
    v = np.array([[0, 0, 0], [1.98, 0, 0], [0, 1, 0], [5, 0, 0], [5.02, 0, 0], [5, 1, 0]], dtype=float)
    mesh = TriangleMesh.from_arrays(v, [[0, 1, 2], [3, 4, 5]])
    np.testing.assert_allclose(mesh.face_areas, [0.99, 0.01])
    _, _, face = sample_surface_batch(mesh, 3, 10_000)
    assert (face == 0).mean() == pytest.approx(0.99, abs=0.01)


def test_sampling_is_deterministic(icosphere):
    a = [sample_surface(icosphere, np.random.default_rng(5)) for _ in range(3)]
    b = [sample_surface(icosphere, np.random.default_rng(5)) for _ in range(3)]
    for x, y in zip(a, b):
        assert np.array_equal(x.point, y.point) and x.face_index == y.face_index
    p1 = sample_surface_batch(icosphere, 9, 100)[0]
    p2 = sample_surface_batch(icosphere, 9, 100)[0]
    assert p1.tobytes() == p2.tobytes()


# -- ray casting ----------------------------------------------------------------

def test_cube_face_center_ray(unit_cube):
    hit = raycast(unit_cube, [0.5, 0.0, 0.0], [-1.0, 0.0, 0.0])
    assert hit is not None
    assert hit.distance == pytest.approx(1.0)
    np.testing.assert_allclose(hit.point, [-0.5, 0, 0], atol=1e-12)
    np.testing.assert_allclose(hit.normal, [-1, 0, 0])


def test_ray_away_misses(unit_cube):
    assert raycast(unit_cube, [2.0, 0.0, 0.0], [1.0, 0.0, 0.0]) is None


def test_icosphere_rays_match_brute_force(icosphere):
    rng = np.random.default_rng(0)
    origins = rng.normal(size=(1000, 3))
    origins *= (0.9 * rng.random(1000) ** (1 / 3) / np.linalg.norm(origins, axis=1))[:, None]
    dirs = rng.normal(size=(1000, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    t, face = raycast_many(icosphere, origins, dirs)
    tris = icosphere.triangles
    for k in range(1000):
        bt, bf = brute_raycast(tris, origins[k], dirs[k])
        assert face[k] == bf
        assert t[k] == pytest.approx(bt, rel=1e-12, abs=1e-15)


@given(
    o=st.tuples(*[st.floats(-3, 3) for _ in range(3)]),
    d=st.tuples(*[st.floats(-1, 1) for _ in range(3)]).filter(lambda v: np.linalg.norm(v) > 1e-3),
)
def test_l_prism_rays_match_brute_force(l_prism, o, d):
    o = np.array(o)
    d = np.array(d) / np.linalg.norm(d)
    t, _ = raycast_many(l_prism, o, d)
    # rays grazing an edge or vertex may go either way: bracket between a
    # slightly shrunken and a slightly inflated copy of every triangle
    t_in, _ = brute_raycast(l_prism.triangles, o, d, tol=1e-7)
    t_out, _ = brute_raycast(l_prism.triangles, o, d, tol=-1e-7)
    assert t_in - 1e-9 <= t[0] <= t_out + 1e-9 or t[0] == t_out


def test_ray_distances_sorted(unit_cube):
    d = unit_cube.ray_distances([-2.0, 0.1, 0.2], [1.0, 0.0, 0.0])
    np.testing.assert_allclose(d, [1.5, 2.5])


def test_contains_matches_oracle(l_prism):
    rng = np.random.default_rng(1)
    pts = rng.uniform(-0.5, 2.5, size=(300, 3))
    got = contains_many(l_prism, pts)
    x, y, z = pts.T
    analytic = (z > 0) & (z < 1) & (x > 0) & (y > 0) & (((x < 2) & (y < 1)) | ((x < 1) & (y < 2)))
    assert np.array_equal(got, analytic)
    for p, g in zip(pts[:60], got[:60]):
        assert brute_inside(l_prism.triangles, p) == g


def test_mesh_is_immutable(unit_cube):
    with pytest.raises(ValueError):
        unit_cube.vertices[0, 0] = 5.0
