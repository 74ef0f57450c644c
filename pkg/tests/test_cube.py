import numpy as np
import pytest

from hsdenoise.cube import (
    AbundanceMap,
    Cube,
    Signature,
    frobenius_norm,
    l1_norm,
    mode3_fold,
    mode3_unfold,
    outer_accumulate,
    outer_accumulate_empty,
)
from hsdenoise.errors import ShapeMismatchError


def _outer_oracle(maps, sigs, i, j, k):
    """Triple-loop reference for the mixture assembly."""
    out = np.zeros((k, i, j))
    for r in range(len(maps)):
        for ii in range(i):
            for jj in range(j):
                for kk in range(k):
                    out[kk, ii, jj] += maps[r][ii, jj] * sigs[r][kk]
    return out


def test_outer_accumulate_single_factor():
    maps = [np.array([[1.0, 0.0], [0.0, 1.0]])]
    sigs = [np.array([2.0, 3.0])]
    cube = outer_accumulate(maps, sigs)
    assert np.array_equal(cube.spectrum(0, 0), [2.0, 3.0])
    assert np.array_equal(cube.spectrum(1, 1), [2.0, 3.0])
    assert cube.value(0, 1, 0) == 0.0
    assert cube.value(1, 0, 1) == 0.0


def test_outer_accumulate_empty_is_zero():
    cube = outer_accumulate_empty(3, 4, 5)
    assert cube.dims == (3, 4, 5)
    assert not cube.data.any()


def test_outer_accumulate_matches_triple_loop():
    rng = np.random.default_rng(42)
    maps = [rng.random((4, 4)) for _ in range(3)]
    sigs = [rng.random(5) for _ in range(3)]
    cube = outer_accumulate(maps, sigs)
    oracle = _outer_oracle(maps, sigs, 4, 4, 5)
    assert np.allclose(cube.data, oracle, rtol=1e-13, atol=1e-13)


def test_outer_accumulate_linear_in_signatures():
    rng = np.random.default_rng(1)
    maps = [rng.random((3, 3)) for _ in range(2)]
    sigs = [rng.random(4) for _ in range(2)]
    base = outer_accumulate(maps, sigs)
    scaled = outer_accumulate(maps, [sigs[0] * 2.5, sigs[1]])
    contrib = outer_accumulate([maps[0]], [sigs[0]])
    assert np.allclose(scaled.data, base.data + 1.5 * contrib.data, rtol=1e-12)


def test_outer_accumulate_shape_errors():
    with pytest.raises(ShapeMismatchError):
        outer_accumulate([np.ones((2, 2))], [np.ones(3), np.ones(3)])
    with pytest.raises(ShapeMismatchError):
        outer_accumulate([np.ones((2, 2)), np.ones((3, 2))], [np.ones(3), np.ones(3)])
    with pytest.raises(ShapeMismatchError):
        outer_accumulate([np.ones((2, 2)), np.ones((2, 2))], [np.ones(3), np.ones(4)])


def test_mode3_unfold_single_pixel():
    spectrum = np.arange(1.0, 6.0)
    cube = Cube(spectrum.reshape(5, 1, 1))
    mat = mode3_unfold(cube)
    assert mat.shape == (5, 1)
    assert np.array_equal(mat[:, 0], spectrum)


def test_mode3_unfold_column_convention():
    # column index must be j*I + i
    i, j, k = 3, 4, 2
    cube = Cube(np.arange(i * j * k, dtype=float).reshape(k, i, j))
    mat = mode3_unfold(cube)
    for ii in range(i):
        for jj in range(j):
            for kk in range(k):
                assert mat[kk, jj * i + ii] == cube.value(ii, jj, kk)


def test_unfold_equals_factor_matrices():
    rng = np.random.default_rng(7)
    i, j, k, r = 4, 5, 6, 3
    maps = [rng.random((i, j)) for _ in range(r)]
    sigs = [rng.random(k) for _ in range(r)]
    cube = outer_accumulate(maps, sigs)
    c_mat = np.stack(sigs, axis=1)  # K x R
    a_mat = np.stack([m.flatten(order="F") for m in maps], axis=1)  # IJ x R
    lhs = mode3_unfold(cube)
    rhs = c_mat @ a_mat.T
    rel = np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs)
    assert rel < 1e-12


def test_fold_unfold_round_trip():
    rng = np.random.default_rng(3)
    cube = Cube(rng.random((4, 3, 5)))
    again = mode3_fold(mode3_unfold(cube), cube.dims)
    assert np.array_equal(again.data, cube.data)


def test_norms_all_ones():
    cube = Cube(np.ones((2, 2, 2)))
    assert frobenius_norm(cube) == pytest.approx(np.sqrt(8), rel=1e-15)
    assert l1_norm(cube) == 8.0


def test_norms_zero_cube():
    cube = Cube.zeros(2, 3, 4)
    assert frobenius_norm(cube) == 0.0
    assert l1_norm(cube) == 0.0


def test_norms_match_naive_accumulation():
    rng = np.random.default_rng(9)
    cube = Cube(rng.standard_normal((3, 4, 5)))
    fro = 0.0
    l1 = 0.0
    for v in cube.data.ravel():
        fro += v * v
        l1 += abs(v)
    assert abs(frobenius_norm(cube) - np.sqrt(fro)) <= 1e-12 * np.sqrt(fro)
    assert abs(l1_norm(cube) - l1) <= 1e-12 * l1


def test_triangle_inequality_spot_checks():
    rng = np.random.default_rng(21)
    for _ in range(5):
        a = Cube(rng.standard_normal((2, 3, 3)))
        b = Cube(rng.standard_normal((2, 3, 3)))
        assert frobenius_norm(a + b) <= frobenius_norm(a) + frobenius_norm(b) + 1e-12


def test_elementwise_ops_and_shape_errors():
    a = Cube(np.full((2, 2, 2), 3.0))
    b = Cube(np.full((2, 2, 2), 1.0))
    assert np.array_equal((a - b).data, np.full((2, 2, 2), 2.0))
    assert np.array_equal((a + b).data, np.full((2, 2, 2), 4.0))
    assert np.array_equal(a.scale(0.5).data, np.full((2, 2, 2), 1.5))
    with pytest.raises(ShapeMismatchError):
        a + Cube(np.ones((2, 2, 3)))


def test_cube_rejects_nonfinite_and_wrong_rank():
    with pytest.raises(ValueError):
        Cube(np.array([[[np.nan]]]))
    with pytest.raises(ShapeMismatchError):
        Cube(np.ones((2, 2)))


def test_cube_is_immutable():
    cube = Cube(np.ones((1, 2, 2)))
    with pytest.raises(ValueError):
        cube.data[0, 0, 0] = 5.0


def test_factor_types_enforce_nonnegativity():
    with pytest.raises(ValueError):
        AbundanceMap(np.array([[0.5, -0.1]]))
    with pytest.raises(ValueError):
        Signature(np.array([1.0, -2.0]))
    m = AbundanceMap(np.array([[0.5, 0.1]]))
    s = Signature(np.array([1.0, 2.0]))
    cube = outer_accumulate([m], [s])
    assert cube.dims == (1, 2, 2)
