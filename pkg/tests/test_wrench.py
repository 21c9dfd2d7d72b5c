import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dualgrasp.wrench import (
    contact_block,
    contact_frame,
    grasp_matrices,
    grasp_matrix,
    grasp_qualities,
    grasp_quality,
    rank_test,
    rank_tests,
    skew,
    tangent_basis,
)

seeds = st.integers(0, 2**32 - 1)


def random_frames(rng, k=4):
    p = rng.normal(size=(k, 3)) * 0.05
    n = rng.normal(size=(k, 3))
    return [contact_frame(a, b) for a, b in zip(p, n)]


def test_single_contact_worked_example():
    fr = contact_frame([1.0, 0, 0], [-1.0, 0, 0])
    np.testing.assert_allclose(fr.R, [[0, 0, -1], [1, 0, 0], [0, -1, 0]], atol=1e-15)
    B = contact_block(fr)
    # a pure normal push goes through the reference point: no torque
    np.testing.assert_allclose(B @ [0, 0, 1], [-1, 0, 0, 0, 0, 0], atol=1e-15)
    # first tangent is +y, lever arm +x: torque about +z
    np.testing.assert_allclose(B @ [1, 0, 0], [0, 1, 0, 0, 0, 1], atol=1e-15)


def test_skew_is_cross_product():
    a, b = np.array([0.3, -1.2, 2.0]), np.array([-0.7, 0.1, 0.5])
    np.testing.assert_allclose(skew(a) @ b, np.cross(a, b))


@given(st.tuples(*[st.floats(-1, 1) for _ in range(3)]).filter(lambda v: np.linalg.norm(v) > 1e-3))
def test_tangent_basis_is_rotation(n):
    R = tangent_basis(n)
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) == pytest.approx(1.0)
    np.testing.assert_allclose(R[:, 2], np.array(n) / np.linalg.norm(n), atol=1e-12)


@given(seeds)
def test_grasp_matrix_applies_forces(seed):
    rng = np.random.default_rng(seed)
    frames = random_frames(rng)
    f = rng.normal(size=12)
    forces = [fr.R @ f[3 * k:3 * k + 3] for k, fr in enumerate(frames)]
    expect = np.concatenate([sum(forces), sum(np.cross(fr.p, F) for fr, F in zip(frames, forces))])
    np.testing.assert_allclose(grasp_matrix(frames).G @ f, expect, atol=1e-12)


@given(seeds)
def test_blocks_and_batch_agree(seed):
    rng = np.random.default_rng(seed)
    frames = random_frames(rng)
    G = grasp_matrix(frames)
    assert G.G.shape == (6, 12)
    for blk, fr in zip(G.blocks, frames):
        np.testing.assert_array_equal(blk, contact_block(fr))
    p = np.array([fr.p for fr in frames])[None]
    R = np.array([fr.R for fr in frames])[None]
    np.testing.assert_allclose(grasp_matrices(p, R)[0], G.G, atol=1e-15)


@given(seeds)
def test_quality_is_product_of_singular_values(seed):
    G = grasp_matrix(random_frames(np.random.default_rng(seed))).G
    s = np.linalg.svd(G, compute_uv=False)
    assert grasp_quality(G) == pytest.approx(np.prod(s), rel=1e-9)
    assert grasp_qualities(G[None])[0] == pytest.approx(np.prod(s), rel=1e-9)


def test_orthonormal_rows_have_unit_quality():
    Q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(12, 12)))
    assert grasp_quality(Q[:6]) == pytest.approx(1.0, abs=1e-12)


@given(seeds, st.floats(1e-3, 1e3), st.permutations(range(4)))
def test_rank_invariant_to_scaling_and_order(seed, c, perm):
    rng = np.random.default_rng(seed)
    frames = random_frames(rng)
    G = grasp_matrix(frames).G
    base = rank_test(G)
    assert rank_test(c * G) == base
    assert rank_test(grasp_matrix([frames[k] for k in perm])) == base
    assert rank_tests(G[None])[0] == base


def test_collinear_contacts_are_rank_deficient():
    # no contact force can produce torque about the common line
    frames = [contact_frame([x, 0, 0], [0, 1, 0.2 * x]) for x in (-0.05, -0.02, 0.02, 0.05)]
    G = grasp_matrix(frames)
    assert np.linalg.matrix_rank(G.G) == 5
    assert not rank_test(G)
    assert rank_test(grasp_matrix(random_frames(np.random.default_rng(1))))


def test_zero_matrix_fails_rank():
    assert not rank_test(np.zeros((6, 12)))
    assert grasp_quality(np.zeros((6, 12))) == 0.0
