"""Energy-matrix deltas and quaternion feature packing."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrnn.features import (EnergyMatrix, compute_delta, delta_stack,
                           frame_vector, pack_features)


def delta_index_oracle(values: np.ndarray, window: int = 2) -> np.ndarray:
    """Second, index-based implementation of the regression delta."""
    values = np.asarray(values, dtype=np.float64)
    t_count = values.shape[0]
    denom = 2.0 * sum(n * n for n in range(1, window + 1))

    def at(i):
        return values[min(max(i, 0), t_count - 1)]

    out = np.zeros_like(values)
    for t in range(t_count):
        acc = np.zeros(values.shape[1])
        for n in range(1, window + 1):
            acc += n * (at(t + n) - at(t - n))
        out[t] = acc / denom
    return out


# ---------------------------------------------------------------------------
# the delta operator


def test_constant_matrix_has_zero_deltas():
    const = np.full((12, 5), 3.25)
    np.testing.assert_array_equal(compute_delta(const), np.zeros((12, 5)))
    for order in delta_stack(const)[1:]:
        np.testing.assert_array_equal(order, np.zeros((12, 5)))


def test_linear_ramp_interior_delta_is_one():
    ramp = np.arange(10.0).reshape(-1, 1)
    delta = compute_delta(ramp, window=2)
    # interior: (1*2 + 2*4) / (2 * (1 + 4)) = 1
    np.testing.assert_allclose(delta[2:-2], np.ones((6, 1)), atol=1e-15)


def test_linear_ramp_edges_attenuate_to_half():
    ramp = np.arange(10.0).reshape(-1, 1)
    delta = compute_delta(ramp, window=2)
    # first frame: (1*1 + 2*2) / 10 with the left edge replicated
    assert delta[0, 0] == pytest.approx(0.5, abs=1e-15)
    assert delta[-1, 0] == pytest.approx(0.5, abs=1e-15)
    assert delta[1, 0] == pytest.approx((1 * 2 + 2 * 3) / 10, abs=1e-15)


def test_window_one_is_a_central_difference():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((8, 3))
    delta = compute_delta(m, window=1)
    np.testing.assert_allclose(delta[1:-1], (m[2:] - m[:-2]) / 2.0, atol=1e-15)


def test_matches_index_based_oracle_through_third_order():
    rng = np.random.default_rng(1)
    m = rng.standard_normal((50, 8))
    stack = delta_stack(m, orders=3)
    reference = m
    for order in range(1, 4):
        reference = delta_index_oracle(reference)
        np.testing.assert_allclose(stack[order], reference, atol=1e-12)


def test_reversal_antisymmetry():
    rng = np.random.default_rng(2)
    m = rng.standard_normal((20, 4))
    np.testing.assert_allclose(compute_delta(m[::-1])[::-1],
                               -compute_delta(m), atol=1e-14)


def test_single_frame_deltas_vanish():
    m = np.array([[1.0, -2.0, 5.5]])
    np.testing.assert_array_equal(compute_delta(m), np.zeros((1, 3)))


def test_empty_matrix_passes_through():
    empty = np.zeros((0, 4))
    assert compute_delta(empty).shape == (0, 4)


def test_window_validation():
    with pytest.raises(ValueError):
        compute_delta(np.zeros((3, 2)), window=0)


@given(st.integers(1, 3))
@settings(deadline=None)
def test_delta_is_linear(window):
    rng = np.random.default_rng(window)
    m1 = rng.standard_normal((15, 4))
    m2 = rng.standard_normal((15, 4))
    lhs = compute_delta(2.5 * m1 - 1.5 * m2, window=window)
    rhs = 2.5 * compute_delta(m1, window=window) - 1.5 * compute_delta(m2, window=window)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


# ---------------------------------------------------------------------------
# packing


def test_constant_matrix_packs_to_pure_real_quaternions():
    packed = pack_features(EnergyMatrix(np.full((6, 3), 7.0)))
    for t in range(6):
        qv = frame_vector(packed, t)
        for b in range(3):
            np.testing.assert_array_equal(qv.quaternion(b).as_array(),
                                          [7.0, 0.0, 0.0, 0.0])


def test_forty_bands_give_one_hundred_sixty_components():
    packed = pack_features(EnergyMatrix(np.zeros((5, 40))))
    assert packed.shape == (5, 160)
    assert frame_vector(packed, 0).n_quats == 40


def test_real_parts_preserve_the_energies_exactly():
    rng = np.random.default_rng(3)
    m = rng.standard_normal((50, 8))
    packed = pack_features(EnergyMatrix(m))
    np.testing.assert_array_equal(packed[:, :8], m)


def test_imaginary_parts_match_independent_delta_oracle():
    rng = np.random.default_rng(4)
    m = rng.standard_normal((50, 8))
    packed = pack_features(EnergyMatrix(m))
    d1 = delta_index_oracle(m)
    d2 = delta_index_oracle(d1)
    d3 = delta_index_oracle(d2)
    np.testing.assert_allclose(packed[:, 8:16], d1, atol=1e-12)
    np.testing.assert_allclose(packed[:, 16:24], d2, atol=1e-12)
    np.testing.assert_allclose(packed[:, 24:32], d3, atol=1e-12)


def test_band_quaternion_collects_its_four_derivative_views():
    rng = np.random.default_rng(5)
    m = rng.standard_normal((12, 5))
    packed = pack_features(EnergyMatrix(m))
    stack = delta_stack(m, orders=3)
    q = frame_vector(packed, 4).quaternion(2).as_array()
    np.testing.assert_array_equal(q, [stack[0][4, 2], stack[1][4, 2],
                                      stack[2][4, 2], stack[3][4, 2]])


def test_packing_is_linear():
    rng = np.random.default_rng(6)
    m1 = rng.standard_normal((20, 4))
    m2 = rng.standard_normal((20, 4))
    lhs = pack_features(EnergyMatrix(0.5 * m1 + 2.0 * m2))
    rhs = 0.5 * pack_features(EnergyMatrix(m1)) + 2.0 * pack_features(EnergyMatrix(m2))
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_shift_covariance_away_from_edges():
    rng = np.random.default_rng(7)
    base = rng.standard_normal((31, 4))
    ahead = pack_features(EnergyMatrix(base[1:]))
    behind = pack_features(EnergyMatrix(base[:-1]))
    # third-order deltas with window 2 reach 6 frames out, so stay inside
    margin = 6
    np.testing.assert_allclose(ahead[margin:-margin - 1],
                               behind[margin + 1:-margin], atol=1e-12)


def test_frame_vector_validates_packed_shape():
    with pytest.raises(ValueError):
        frame_vector(np.zeros((3, 10)), 0)
    with pytest.raises(ValueError):
        frame_vector(np.zeros(8), 0)


# ---------------------------------------------------------------------------
# EnergyMatrix parsing and validation


def test_matrix_validation():
    with pytest.raises(ValueError):
        EnergyMatrix(np.zeros(5))
    with pytest.raises(ValueError):
        EnergyMatrix(np.array([[1.0, np.nan]]))
    with pytest.raises(ValueError):
        EnergyMatrix(np.array([[np.inf, 1.0]]))


def test_from_csv_round_trip(tmp_path):
    path = tmp_path / "energies.csv"
    path.write_text("1.5,2.5\n-3.0,4.25\n\n0.0,1e3\n")
    m = EnergyMatrix.from_csv(path)
    np.testing.assert_array_equal(m.values,
                                  [[1.5, 2.5], [-3.0, 4.25], [0.0, 1000.0]])
    assert m.n_frames == 3 and m.n_bands == 2


def test_from_csv_rejects_ragged_rows(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2,3\n4,5\n")
    with pytest.raises(ValueError, match="ragged csv: line 2 has 2 fields"):
        EnergyMatrix.from_csv(path)


def test_from_csv_rejects_non_numeric(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,oops\n")
    with pytest.raises(ValueError, match="non-numeric field on line 2"):
        EnergyMatrix.from_csv(path)


def test_from_csv_rejects_empty(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("\n\n")
    with pytest.raises(ValueError, match="empty csv"):
        EnergyMatrix.from_csv(path)
