import math
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dualgrasp.geometry import TriangleMesh, contains_many, primitives
from dualgrasp.gripper import GripperModel
from dualgrasp.sampler import (
    SamplerConfig,
    antipodality_check,
    cone_directions,
    sample_antipodal,
    sample_antipodal_report,
)
from oracles import contact_angles_deg

GRIPPER = GripperModel()


def _poses_bytes(grasps):
    return b"".join(g.transform.tobytes() + g.contact_1.tobytes() + g.contact_2.tobytes() for g in grasps)


def test_sphere_yields_requested_count(small_sphere):
    rep = sample_antipodal_report(small_sphere, GRIPPER, SamplerConfig(n_grasps=500, rng_seed=1))
    assert len(rep.grasps) == 500
    assert rep.attempts <= 100 * 500


def test_cube_contacts_inside_friction_cones(small_cube):
    grasps = sample_antipodal(small_cube, GRIPPER, SamplerConfig(mu=0.5, n_grasps=300, rng_seed=2))
    assert len(grasps) == 300
    limit = math.degrees(math.atan(0.5))
    for g in grasps:
        a1, a2 = contact_angles_deg(g.contact_1, g.normal_1, g.contact_2, g.normal_2)
        assert max(a1, a2) <= limit + 1e-6
        # contacts lie on the surface, normals point inward
        assert np.abs(g.contact_1).max() == pytest.approx(0.025, abs=1e-12)
        assert np.abs(g.contact_2).max() == pytest.approx(0.025, abs=1e-12)
        assert contains_many(small_cube, (g.contact_1 + 1e-4 * g.normal_1)[None])[0]


def test_thin_plate_is_pinched_through_thickness():
    plate = TriangleMesh.from_arrays(*primitives.box((0.2, 0.2, 0.01)))
    rep = sample_antipodal_report(plate, GRIPPER, SamplerConfig(n_grasps=100, max_attempts=4000, rng_seed=3))
    # the palm only clears the plate for contacts near its rim, so most attempts collide
    assert len(rep.grasps) >= 10 and rep.colliding > rep.not_antipodal
    for g in rep.grasps:
        assert abs(g.normal_1[2]) == pytest.approx(1.0) and abs(g.normal_2[2]) == pytest.approx(1.0)
        assert g.width <= 0.01 / math.cos(math.atan(0.5) / 2) + 1e-9
        rim = 0.1 - np.abs(g.contact_1[:2]).max()
        assert rim <= GRIPPER.standoff + 1e-9


def test_antipodality_examples():
    c1, c2 = np.array([-1.0, 0, 0]), np.array([1.0, 0, 0])
    ex = np.array([1.0, 0, 0])
    assert antipodality_check(c1, ex, c2, -ex, 0.5)
    assert not antipodality_check(c1, -ex, c2, ex, 0.5)  # outward normals
    tilt = lambda deg: np.array([math.cos(math.radians(deg)), math.sin(math.radians(deg)), 0.0])  # noqa: E731
    assert antipodality_check(c1, tilt(26.0), c2, -ex, 0.5)
    assert not antipodality_check(c1, tilt(27.0), c2, -ex, 0.5)
    assert not antipodality_check(c1, ex, c1, -ex, 0.5)


unit = st.tuples(*[st.floats(-1, 1) for _ in range(3)]).filter(lambda v: np.linalg.norm(v) > 1e-2)


@given(c1=unit, c2=unit, n1=unit, n2=unit, mu=st.floats(0.05, 1.5))
def test_antipodality_matches_angles(c1, c2, n1, n2, mu):
    c1, c2 = np.array(c1), np.array(c2)
    if np.linalg.norm(c2 - c1) < 1e-3:
        return
    n1 = np.array(n1) / np.linalg.norm(n1)
    n2 = np.array(n2) / np.linalg.norm(n2)
    a1, a2 = contact_angles_deg(c1, n1, c2, n2)
    limit = math.degrees(math.atan(mu))
    if abs(max(a1, a2) - limit) < 1e-6:
        return  # on the cone boundary either answer is acceptable
    assert antipodality_check(c1, n1, c2, n2, mu) == (max(a1, a2) < limit)


@given(st.integers(0, 2**32 - 1), st.floats(0.01, 1.2))
def test_cone_directions_stay_in_cone(seed, half):
    rng = np.random.default_rng(seed)
    axes = rng.normal(size=(50, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    d = cone_directions(axes, half, rng.random((50, 2)))
    np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-12)
    assert np.all(np.einsum("ij,ij->i", d, axes) >= math.cos(half) - 1e-12)


def test_sampling_is_deterministic(small_cube):
    cfg = SamplerConfig(n_grasps=120, rng_seed=9)
    a = sample_antipodal(small_cube, GRIPPER, cfg)
    b = sample_antipodal(small_cube, GRIPPER, cfg)
    c = sample_antipodal(small_cube, GRIPPER, cfg, threads=4)
    assert _poses_bytes(a) == _poses_bytes(b) == _poses_bytes(c)
    d = sample_antipodal(small_cube, GRIPPER, SamplerConfig(n_grasps=120, rng_seed=10))
    assert _poses_bytes(a) != _poses_bytes(d)


def test_report_counts_add_up(l_prism):
    mesh = TriangleMesh.from_arrays(*primitives.l_prism(0.03))
    rep = sample_antipodal_report(mesh, GRIPPER, SamplerConfig(n_grasps=50, rng_seed=4))
    assert len(rep.grasps) == 50
    assert rep.attempts == 50 + rep.no_hit + rep.not_antipodal + rep.too_wide + rep.colliding


def test_unreachable_object_is_exhausted():
    huge = TriangleMesh.from_arrays(*primitives.box((0.5, 0.5, 0.5)))
    rep = sample_antipodal_report(huge, GRIPPER, SamplerConfig(n_grasps=5, max_attempts=200))
    assert rep.exhausted and rep.attempts == 200 and rep.too_wide + rep.not_antipodal + rep.no_hit == 200


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(mu=0.0)
    with pytest.raises(ValueError):
        SamplerConfig(n_grasps=-1)
    cfg = SamplerConfig(mu=0.5, n_grasps=7)
    assert cfg.attempts == 700
    assert cfg.gamma == pytest.approx(math.tan(math.atan(0.5) / 2))


def test_large_mesh_runtime():
    mesh = TriangleMesh.from_arrays(*primitives.icosphere(6, radius=0.035))
    assert len(mesh.faces) >= 50_000
    start = time.perf_counter()
    grasps = sample_antipodal(mesh, GRIPPER, SamplerConfig(n_grasps=500, rng_seed=0))
    assert len(grasps) == 500
    assert time.perf_counter() - start < 60.0
