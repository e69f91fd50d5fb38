import numpy as np
import pytest

from trontide import (
    DomainError,
    NetSpec,
    RngStream,
    SensingFamily,
    ShapeError,
    build_symmetric_family,
    conv_family,
    forward,
    forward_many,
    leaky_relu,
    pointwise_sq_diff_bound,
    sample_full_rank_matrix,
    single_relu_net,
)


def random_net(rng, k, r, n, leak_alpha):
    mats = [rng.standard_normal((r, n)) for _ in range(k)]
    return NetSpec(k=k, leak_alpha=leak_alpha,
                   sensing=SensingFamily.from_matrices(mats))


class TestLeakyRelu:
    def test_positive_passthrough(self):
        assert leaky_relu(2.0, 0.0) == 2.0

    def test_negative_scaled(self):
        assert leaky_relu(-3.0, 0.1) == pytest.approx(-0.3)

    def test_identity_at_alpha_one(self):
        assert leaky_relu(-3.0, 1.0) == -3.0

    def test_alpha_range_enforced(self):
        with pytest.raises(DomainError):
            leaky_relu(1.0, 1.5)


class TestForward:
    def test_relu_of_negative_preactivation(self):
        net = single_relu_net(2)
        assert forward(net, [1.0, 0.0], [-2.0, 5.0]) == 0.0

    def test_leak_scales_negative_branch(self):
        net = single_relu_net(2, leak_alpha=0.5)
        assert forward(net, [1.0, 0.0], [-2.0, 5.0]) == pytest.approx(-1.0)

    def test_two_member_family_hand_value(self):
        fam = SensingFamily.from_matrices([np.eye(2), 2.0 * np.eye(2)])
        net = NetSpec(k=2, leak_alpha=0.0, sensing=fam)
        # (sigma(3) + sigma(6)) / 2
        assert forward(net, [1.0, 0.0], [3.0, 0.0]) == pytest.approx(4.5)

    def test_shape_mismatch(self):
        net = single_relu_net(3)
        with pytest.raises(ShapeError):
            forward(net, [1.0, 0.0], [1.0, 2.0, 3.0])

    def test_positive_homogeneity(self):
        rng = RngStream(5)
        net = random_net(rng, 3, 4, 6, 0.3)
        w = rng.standard_normal(4)
        x = rng.standard_normal(6)
        for c in (0.5, 2.0, 7.25):
            assert forward(net, w, c * x) == pytest.approx(
                c * forward(net, w, x), rel=1e-12, abs=1e-12)

    def test_linear_at_alpha_one(self):
        rng = RngStream(6)
        net = random_net(rng, 4, 3, 5, 1.0)
        for _ in range(20):
            w = rng.standard_normal(3)
            x = rng.standard_normal(5)
            expected = float(w @ net.sensing.mean @ x)
            assert forward(net, w, x) == pytest.approx(expected, rel=1e-12,
                                                       abs=1e-12)

    def test_forward_many_matches_scalar(self):
        rng = RngStream(7)
        net = random_net(rng, 2, 3, 4, 0.2)
        w = rng.standard_normal(3)
        X = rng.standard_normal((10, 4))
        batched = forward_many(net, w, X)
        for i in range(10):
            assert batched[i] == pytest.approx(forward(net, w, X[i]), rel=1e-14)


class TestSymmetricFamily:
    def test_pair_around_center(self):
        M = np.array([[1.0, 2.0], [3.0, 4.0]])
        C = np.array([[0.5, 0.0], [0.0, 0.5]])
        fam = build_symmetric_family(M, C, 1)
        assert fam.k == 2
        np.testing.assert_array_equal(fam.stack[0], M - C)
        np.testing.assert_array_equal(fam.stack[1], M + C)
        np.testing.assert_array_equal(fam.mean, M)

    def test_zero_offset_gives_copies(self):
        M = np.array([[1.0, -1.0]])
        fam = build_symmetric_family(M, np.zeros_like(M), 2)
        assert fam.k == 4
        for member in fam.stack:
            np.testing.assert_array_equal(member, M)

    def test_mean_is_exact_center(self):
        rng = RngStream(8)
        M = rng.standard_normal((3, 5))
        C = rng.standard_normal((3, 5)) * 0.1
        fam = build_symmetric_family(M, C, 3)
        np.testing.assert_array_equal(fam.mean, M)

    def test_lambda3_matches_per_member_top_eigenvalue(self):
        fam = build_symmetric_family(np.eye(2), 0.1 * np.eye(2), 2)
        # members (1 -+ 0.1 j) * I, j in {2, 1}: gains {0.8, 0.9, 1.1, 1.2}
        expected = np.mean([0.8 ** 2, 0.9 ** 2, 1.1 ** 2, 1.2 ** 2])
        assert fam.lambda3 == pytest.approx(expected, rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            build_symmetric_family(np.eye(2), np.eye(3), 1)


class TestConvFamily:
    def test_selector_rows(self):
        fam = conv_family([[0, 1], [2, 3]], n=4)
        assert fam.k == 2 and fam.r == 2 and fam.n == 4
        np.testing.assert_array_equal(fam.stack[0],
                                      [[1, 0, 0, 0], [0, 1, 0, 0]])
        assert fam.lambda3 == pytest.approx(1.0)

    def test_repeated_column_rejected(self):
        with pytest.raises(ShapeError):
            conv_family([[0, 0]], n=3)

    def test_out_of_range_index_rejected(self):
        with pytest.raises(ShapeError):
            conv_family([[0, 5]], n=3)


class TestFullRankSampling:
    def test_square_case_positive_definite(self):
        M = sample_full_rank_matrix(RngStream(1).substream("M"), 2, 2, 2)
        np.testing.assert_array_equal(M, M.T)
        assert np.linalg.eigvalsh(M).min() > 0

    def test_rectangular_rank(self):
        M = sample_full_rank_matrix(RngStream(2).substream("M"), 3, 5, 4)
        assert M.shape == (3, 5)
        assert np.linalg.matrix_rank(M) == 3

    def test_deterministic(self):
        a = sample_full_rank_matrix(RngStream(3).substream("M"), 3, 4, 5)
        b = sample_full_rank_matrix(RngStream(3).substream("M"), 3, 4, 5)
        np.testing.assert_array_equal(a, b)

    def test_bad_dof(self):
        with pytest.raises(DomainError):
            sample_full_rank_matrix(RngStream(4), 3, 4, 2)


class TestPointwiseBound:
    def test_equal_filters(self):
        net = single_relu_net(3)
        lhs, rhs = pointwise_sq_diff_bound(net, [1, 2, 3], [1, 2, 3], [0.5, 0, 1])
        assert lhs == 0.0 and rhs == 0.0

    def test_tight_one_dimensional_case(self):
        net = single_relu_net(1)
        lhs, rhs = pointwise_sq_diff_bound(net, [1.0], [0.0], [2.0])
        assert lhs == pytest.approx(4.0)
        assert rhs == pytest.approx(4.0)
        assert lhs <= rhs + 1e-9

    def test_random_instances(self):
        rng = RngStream(9)
        for _ in range(1000):
            k = int(rng.integers(1, 4))
            net = random_net(rng, k, 3, 4, float(rng.random()))
            w1 = rng.standard_normal(3)
            w2 = rng.standard_normal(3)
            x = rng.standard_normal(4)
            lhs, rhs = pointwise_sq_diff_bound(net, w1, w2, x)
            assert lhs <= rhs + 1e-9


class TestNetSpecInvariants:
    def test_width_mismatch(self):
        fam = SensingFamily.from_matrices([np.eye(2)])
        with pytest.raises(ShapeError):
            NetSpec(k=2, leak_alpha=0.0, sensing=fam)

    def test_alpha_out_of_range(self):
        fam = SensingFamily.from_matrices([np.eye(2)])
        with pytest.raises(DomainError):
            NetSpec(k=1, leak_alpha=1.5, sensing=fam)
