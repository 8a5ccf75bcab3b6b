import numpy as np
import pytest

from tensordoa.tensor_ops import (
    hadamard,
    khatri_rao,
    merge_modes,
    rank1_sum,
    reverse_conjugate,
    split_modes,
    unfold,
    unfold_mode1,
)


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestRank1Sum:
    def test_outer_product_of_ones(self):
        t = rank1_sum([([1, 1], [1, 1])], (2, 2))
        assert np.array_equal(t, np.ones((2, 2)))

    def test_basis_vectors(self):
        t = rank1_sum([([1, 0], [0, 1])], (2, 2))
        expected = np.zeros((2, 2))
        expected[0, 1] = 1
        assert np.array_equal(t, expected)

    def test_matches_entrywise_triple_loop(self):
        rng = np.random.default_rng(0)
        shape = (3, 4, 2)
        terms = [
            tuple(random_complex(rng, (s,)) for s in shape) for _ in range(2)
        ]
        t = rank1_sum(terms, shape)
        ref = np.zeros(shape, dtype=complex)
        for i in range(shape[0]):
            for j in range(shape[1]):
                for k in range(shape[2]):
                    ref[i, j, k] = sum(u[i] * v[j] * w[k] for (u, v, w) in terms)
        assert np.max(np.abs(t - ref)) <= 1e-12 * np.max(np.abs(ref))

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError):
            rank1_sum([([1, 1, 1], [1, 1])], (2, 2))


class TestUnfold:
    def test_singleton_third_mode(self):
        rng = np.random.default_rng(1)
        t = random_complex(rng, (2, 2, 1))
        assert np.array_equal(unfold_mode1(t), t[:, :, 0])

    def test_cp_unfolding_identity(self):
        # tensor built from random rank-2 factors unfolds to G (P kr H)^T
        rng = np.random.default_rng(2)
        g, h, p = (random_complex(rng, (n, 2)) for n in (3, 4, 5))
        t = np.einsum("ir,jr,kr->ijk", g, h, p)
        lhs = unfold_mode1(t)
        rhs = g @ khatri_rao(p, h).T
        assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(rhs)

    def test_output_shape(self):
        t = np.zeros((3, 4, 5))
        assert unfold_mode1(t).shape == (3, 20)

    def test_column_order_mode2_fastest(self):
        t = np.arange(24).reshape(2, 3, 4)
        m = unfold_mode1(t)
        # column index = j + k*I2
        for j in range(3):
            for k in range(4):
                assert np.array_equal(m[:, j + k * 3], t[:, j, k])

    def test_wrong_order_raises(self):
        with pytest.raises(ValueError):
            unfold_mode1(np.zeros((2, 2)))


class TestKhatriRao:
    def test_angle_vector_listing(self):
        # [1, phi^-1] with [1, theta] interleaves to [1, theta, phi^-1, theta*phi^-1]
        theta = np.exp(1j * 0.7)
        phi = np.exp(1j * 0.3)
        e = np.array([[1.0], [1.0 / phi]])
        c = np.array([[1.0], [theta]])
        col = khatri_rao(e, c)[:, 0]
        expected = np.array([1.0, theta, 1.0 / phi, theta / phi])
        assert np.allclose(col, expected, atol=1e-15)

    def test_all_ones(self):
        out = khatri_rao(np.ones((2, 1)), np.ones((3, 1)))
        assert np.array_equal(out, np.ones((6, 1)))

    def test_matches_per_column_kron(self):
        rng = np.random.default_rng(3)
        a = random_complex(rng, (3, 2))
        b = random_complex(rng, (2, 2))
        out = khatri_rao(a, b)
        for r in range(2):
            assert np.allclose(out[:, r], np.kron(a[:, r], b[:, r]), atol=1e-15)

    def test_column_mismatch_raises(self):
        with pytest.raises(ValueError):
            khatri_rao(np.ones((2, 2)), np.ones((3, 1)))


class TestMergeModes:
    def test_five_mode_grouping_shape(self):
        lx0, lz0, tail = 5, 5, 50
        t = np.zeros((lx0, 2, lz0, 2, tail))
        merged = merge_modes(t, [[0, 2], [1, 3], [4]])
        assert merged.shape == (lx0 * lz0, 4, tail)

    def test_identity_partition(self):
        rng = np.random.default_rng(4)
        t = random_complex(rng, (3, 4, 5))
        assert np.array_equal(merge_modes(t, [[0], [1], [2]]), t)

    def test_first_listed_mode_fastest(self):
        t = np.arange(2 * 3 * 4).reshape(2, 3, 4)
        merged = merge_modes(t, [[0, 2], [1]])
        for i in range(2):
            for j in range(3):
                for k in range(4):
                    assert merged[i + 2 * k, j] == t[i, j, k]

    def test_roundtrip_with_split(self):
        rng = np.random.default_rng(5)
        t = random_complex(rng, (2, 3, 4, 2, 5))
        groups = [[0, 2], [1, 3], [4]]
        merged = merge_modes(t, groups)
        back = split_modes(merged, groups, t.shape)
        assert np.array_equal(back, t)

    def test_preserves_entry_multiset(self):
        rng = np.random.default_rng(6)
        t = random_complex(rng, (3, 2, 4))
        merged = merge_modes(t, [[2, 0], [1]])
        assert sorted(merged.ravel().tolist(), key=lambda z: (z.real, z.imag)) == sorted(
            t.ravel().tolist(), key=lambda z: (z.real, z.imag)
        )

    def test_bad_partition_raises(self):
        with pytest.raises(ValueError):
            merge_modes(np.zeros((2, 2, 2)), [[0, 1], [1, 2]])


class TestReverseConjugate:
    def test_palindromic_real_fixed_point(self):
        t = np.array([1.0, 2.0, 1.0])
        assert np.array_equal(reverse_conjugate(t), t)

    def test_involution(self):
        rng = np.random.default_rng(7)
        t = random_complex(rng, (3, 4, 5))
        assert np.array_equal(reverse_conjugate(reverse_conjugate(t)), t)

    def test_vandermonde_rescaling(self):
        # reversing+conjugating a rank-1 Vandermonde correlation tensor
        # rescales it by theta^(-M-1) * phi^(M-1) when l + n - 1 = M holds
        m, l = 4, 2
        n_sub = m - l + 1
        theta = np.exp(1j * np.pi * np.cos(np.deg2rad(66.0)))
        phi = np.exp(1j * np.pi * np.cos(np.deg2rad(58.0)))
        a_x = theta ** np.arange(1, l + 1)
        b_x = theta ** np.arange(n_sub)
        a_zc = np.conj(phi ** np.arange(l))
        b_zc = np.conj(phi ** np.arange(n_sub))
        t = np.einsum("l,n,m,p->lnmp", a_x, b_x, a_zc, b_zc)
        flipped = reverse_conjugate(t)
        scale = theta ** (-m - 1) * phi ** (m - 1)
        assert np.allclose(flipped, scale * t, atol=1e-14)


class TestHadamard:
    def test_identity_with_ones(self):
        rng = np.random.default_rng(8)
        t = random_complex(rng, (3, 3))
        assert np.array_equal(hadamard(t, np.ones((3, 3))), t)

    def test_annihilation_with_zeros(self):
        rng = np.random.default_rng(9)
        t = random_complex(rng, (2, 5))
        assert np.array_equal(hadamard(t, np.zeros((2, 5))), np.zeros((2, 5)))

    def test_matches_entrywise_loop(self):
        rng = np.random.default_rng(10)
        a = random_complex(rng, (3, 2, 2))
        b = random_complex(rng, (3, 2, 2))
        out = hadamard(a, b)
        for idx in np.ndindex(a.shape):
            assert out[idx] == a[idx] * b[idx]

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError):
            hadamard(np.ones((2, 2)), np.ones((2, 3)))


class TestConventionConsistency:
    def test_khatri_rao_kron_exhaustive_small(self):
        rng = np.random.default_rng(11)
        for i in (1, 2, 3):
            for j in (1, 2, 4):
                for r in (1, 2):
                    a = random_complex(rng, (i, r))
                    b = random_complex(rng, (j, r))
                    out = khatri_rao(a, b)
                    for col in range(r):
                        assert np.array_equal(out[:, col], np.kron(a[:, col], b[:, col]))

    def test_general_unfold_matches_mode1(self):
        rng = np.random.default_rng(12)
        t = random_complex(rng, (3, 4, 5))
        assert np.array_equal(unfold(t, 0), unfold_mode1(t))
