import math

import numpy as np
import pytest

from widthlab.norms import InputError
from widthlab.wavelets import (BesovBallSpec, DyadicGrid, SequenceIndex, SequenceVector, analyze,
                               build_wavelet, daubechies_filter, discrete_besov_norm,
                               discretization_band, filter_residuals, gram_matrix, lp_discretization_check,
                               lp_norm, sample_ball, sequence_norm, synthesize, wavelet_samples)

# classical tabulated minimum-phase filter with four vanishing moments
DB4_TABLE = [0.2303778133088964, 0.7148465705529154, 0.6308807679298587, -0.0279837694168599,
             -0.1870348117190931, 0.0308413818355607, 0.0328830116668852, -0.0105974017850690]


@pytest.fixture(scope="module")
def db4():
    return build_wavelet(4, 12)


def test_two_moment_filter_closed_form():
    s = math.sqrt(3)
    expected = np.array([1 + s, 3 + s, 3 - s, 1 - s]) / (4 * math.sqrt(2))
    assert np.allclose(daubechies_filter(2), expected, atol=1e-14)


def test_four_moment_filter_table():
    assert np.allclose(daubechies_filter(4), DB4_TABLE, atol=1e-12)


@pytest.mark.parametrize("r0", [1, 2, 3, 4, 6, 10])
def test_filter_identities(r0):
    res = filter_residuals(daubechies_filter(r0))
    assert res["orthonormality"] < 1e-10
    assert res["sum"] < 1e-12
    assert res["moments"] < 1e-8


def test_filter_range():
    with pytest.raises(InputError):
        daubechies_filter(0)


def test_haar_wavelet_shape():
    ws = build_wavelet(1, 8)
    half = 2**7
    assert np.allclose(ws.psi[:half], ws.psi[0])
    assert np.allclose(ws.psi[half:2 * half], -ws.psi[0])
    assert abs(ws.psi[0]) == pytest.approx(1.0)


def test_scaling_function_integral_and_moments(db4):
    step = 2.0**-db4.J
    assert db4.phi.sum() * step == pytest.approx(1.0, abs=1e-9)
    t = np.arange(db4.psi.size) * step
    for j in range(4):
        assert abs(np.sum(db4.psi * t**j) * step) < 1e-6


def test_gram_identity(db4):
    G = gram_matrix(db4, SequenceIndex(4))
    assert np.abs(G - np.eye(15)).max() < 1e-3


def test_round_trip(db4):
    idx = SequenceIndex(4)
    x = SequenceVector(idx, np.random.default_rng(0).standard_normal(idx.size))
    back = analyze(synthesize(x, db4), db4, idx)
    assert np.abs(back.values - x.values).max() < 1e-4


def test_analyze_callable_matches_samples(db4):
    grid = DyadicGrid.for_system(db4)
    idx = SequenceIndex(3)
    a = analyze(np.sin, db4, idx, grid)
    b = analyze(np.sin(grid.t), db4, idx, grid)
    assert np.array_equal(a.values, b.values)


def test_resolution_guard(db4):
    coarse = DyadicGrid.for_system(db4, level=6)
    with pytest.raises(InputError):
        wavelet_samples(db4, coarse, 4, 1)


def test_sequence_index_layout():
    idx = SequenceIndex(3)
    assert idx.size == 7
    assert idx.level_of.tolist() == [0, 1, 1, 2, 2, 2, 2]
    assert idx.flat(2, 1) == 3
    with pytest.raises(InputError):
        idx.flat(3, 1)


def test_sequence_vector_json_round_trip():
    x = SequenceVector(SequenceIndex(3), np.arange(7.0))
    assert np.array_equal(SequenceVector.from_json(x.to_json()).values, x.values)
    with pytest.raises(InputError):
        SequenceVector.from_json({"m": 2, "levels": [[1.0], [1.0]]})


def test_sequence_norm_values():
    x = SequenceVector(SequenceIndex(2), [3.0, 4.0, 0.0])
    assert sequence_norm(x, 0, 2, 2) == pytest.approx(5.0)
    assert sequence_norm(x, 1, 1, math.inf) == pytest.approx(8.0)
    assert sequence_norm(x, 1, 1, 1) == pytest.approx(3 + 8)


def test_discretization_is_equality_for_p_two(db4):
    idx = SequenceIndex(4)
    x = SequenceVector(idx, np.random.default_rng(3).standard_normal(idx.size))
    rep = lp_discretization_check(x, db4, 2.0)
    assert rep.left == pytest.approx(rep.right, rel=1e-12)
    assert rep.mid == pytest.approx(rep.left, rel=1e-3)


def test_discretization_band_finite(db4):
    band = discretization_band(db4, 4, 4.0, 10, seed=0)
    assert all(np.isfinite(band.left_over_mid)) and all(np.isfinite(band.mid_over_right))
    assert band.left_over_mid[0] <= band.left_over_mid[1]


def test_lp_norm_constant():
    grid = DyadicGrid(4, 0, 2)
    f = np.full(grid.t.size, 3.0)
    assert lp_norm(f, grid, 2, normalized=True) == pytest.approx(3.0, rel=0.05)
    assert lp_norm(f, grid, math.inf) == 3.0


def test_besov_norm_requires_smoothness_below_moments(db4):
    with pytest.raises(InputError):
        discrete_besov_norm(np.sin, db4, 4.0, 2, 2, SequenceIndex(3))
    assert discrete_besov_norm(np.sin, db4, 1.0, 2, 2, SequenceIndex(3)) > 0


@pytest.mark.parametrize("theta", [1.0, 2.0, math.inf])
def test_ball_samples_on_boundary(theta):
    spec = BesovBallSpec(0.5, 2.0, theta, SequenceIndex(4))
    for x in sample_ball(spec, 5, seed=0):
        assert sequence_norm(x, 0.5, 2.0, theta) == pytest.approx(1.0)
    for x in sample_ball(spec, 5, seed=0, kind="interior"):
        assert sequence_norm(x, 0.5, 2.0, theta) <= 1.0 + 1e-12


def test_extreme_points():
    idx = SequenceIndex(4)
    for x in sample_ball(BesovBallSpec(0.0, 1.0, math.inf, idx), 3, seed=1, kind="extreme"):
        assert [np.abs(x.level(k)).sum() for k in range(4)] == [1, 1, 1, 1]
    for x in sample_ball(BesovBallSpec(0.0, 1.0, 1.0, idx), 3, seed=1, kind="extreme"):
        assert np.abs(x.values).sum() == 1
    with pytest.raises(InputError):
        sample_ball(BesovBallSpec(0.5, 1.0, 1.0, idx), 1, 0, kind="extreme")
