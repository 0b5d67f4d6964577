import math
from pathlib import Path

import numpy as np
import pytest

import vemfacet as vf

DATA = Path(__file__).resolve().parents[1] / "data"


@pytest.fixture(scope="module")
def square():
    return vf.geometry(vf.load_mesh(str(DATA / "unit_square.msh")), 0)


@pytest.fixture(scope="module")
def cube():
    return vf.geometry(vf.load_mesh(str(DATA / "unit_cube.msh")), 0)


def test_mesh_counts():
    mesh = vf.load_mesh(str(DATA / "unit_cube.msh"))
    assert (mesh.n_vertices, mesh.n_edges, mesh.n_faces, mesh.n_cells) == (8, 12, 6, 1)


def test_bad_mesh_raises():
    with pytest.raises(vf.ValidationError, match="face 3"):
        vf.load_mesh(str(DATA / "bad_cube.msh"))


def test_constants(square, cube):
    d = np.full(4, 0.5)
    assert vf.rot_constant(d, square) == pytest.approx(2.0)
    assert vf.div_constant(vf.SpaceTag.Face3D, np.full(6, 0.5), cube) == pytest.approx(3.0)
    assert vf.stabilization(vf.SpaceTag.Face3D, np.ones(6), np.ones(6), cube) == pytest.approx(6 * math.sqrt(3))


def test_callable_field_dofs(cube):
    d = vf.extract_dofs(vf.SpaceTag.Edge3D, lambda x: np.array([1.0, 0.0, 0.0]), cube)
    np.testing.assert_allclose(np.sort(np.abs(d)), [0.0] * 8 + [1.0] * 4, atol=1e-12)


def test_reconstruct_x_perp(square):
    f = vf.reconstruct(vf.SpaceTag.Edge2D, np.full(4, 0.5), square, level=2)
    assert f.l2_norm() == pytest.approx(1 / math.sqrt(6), abs=1e-10)
    np.testing.assert_allclose(vf.reextract_dofs(f, square), 0.5, atol=1e-12)
    np.testing.assert_allclose(f([0.75, 0.5, 0.0]), [0.0, 0.25, 0.0], atol=1e-12)


def test_gram_matches_discrete_inner_on_constants(cube):
    G, acc = vf.gram_matrix(vf.SpaceTag.Edge3D, cube, level=1)
    d = vf.constant_dofs(vf.SpaceTag.Edge3D, [1.0, 0.0, 0.0], cube)
    assert d @ G @ d == pytest.approx(1.0, abs=1e-10)
    assert vf.discrete_inner(vf.SpaceTag.Edge3D, d, d, cube) == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.linalg.eigvalsh(G) > 0)


def test_run_studies_deterministic():
    text = """
[rates]
kind = convergence
spaces = edge2d
family = squares
h = 1/2, 1/4, 1/8
fields = trig
oracle_level = 2
"""
    a = vf.run_studies_json(text, seed=3)
    b = vf.run_studies_json(text, seed=3, threads=2)
    assert a == b
    report = vf.run_studies(text)
    slope = report["studies"][0]["slopes"][1]  # rot_error
    assert slope["conclusive"] and 0.85 < slope["slope"] < 1.15


def test_bad_config_raises():
    with pytest.raises(vf.ValidationError):
        vf.run_studies("[x]\nkind = convergence\nspaces = edge2d\nfamily = cubes\nh = 1/2\nfields = trig\n")
