import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ampsep.errors import ContractViolation, RefusalError
from ampsep.operators import (
    BlockOperator,
    MixingModel,
    apply_adjoint,
    apply_forward,
    economy_svd,
    materialize_dense,
    read_matrix_csv,
    write_matrix_csv,
)

A23 = [[1.0, 0.0, 2.0], [0.0, 1.0, 1.0]]


def dense_block(A, T):
    """Lay out the blocks A_ij * I_T by hand."""
    A = np.asarray(A, dtype=float)
    M, N = A.shape
    D = np.zeros((M * T, N * T))
    for i in range(M):
        for j in range(N):
            for t in range(T):
                D[i * T + t, j * T + t] = A[i, j]
    return D


class TestMixingModel:
    def test_rejects_bad_inputs(self):
        with pytest.raises(ContractViolation):
            MixingModel(np.array([[np.nan]]))
        with pytest.raises(ContractViolation):
            MixingModel(np.ones((2, 2)), gamma_w=0.0)
        with pytest.raises(ContractViolation):
            MixingModel(np.ones(3))

    def test_dims(self):
        op = BlockOperator.from_matrix(A23, T=5)
        assert op.shape == (10, 15)


class TestForwardAdjoint:
    def test_identity(self):
        op = BlockOperator.from_matrix([[1.0]], T=3)
        np.testing.assert_array_equal(apply_forward(op, [1, 2, 3]), [1, 2, 3])
        np.testing.assert_array_equal(apply_adjoint(op, [1, 2, 3]), [1, 2, 3])

    def test_forward_example(self):
        op = BlockOperator.from_matrix(A23, T=2)
        x = np.array([1, 1, 2, 2, 3, 3], dtype=float)
        np.testing.assert_array_equal(dense_block(A23, 2) @ x, [7, 7, 5, 5])
        np.testing.assert_array_equal(apply_forward(op, x), [7, 7, 5, 5])

    def test_adjoint_example(self):
        op = BlockOperator.from_matrix(A23, T=2)
        s = np.ones(4)
        np.testing.assert_array_equal(dense_block(A23, 2).T @ s, [1, 1, 1, 1, 3, 3])
        np.testing.assert_array_equal(apply_adjoint(op, s), [1, 1, 1, 1, 3, 3])

    def test_zero(self):
        op = BlockOperator.from_matrix(A23, T=4)
        assert not apply_forward(op, np.zeros(12)).any()
        assert not apply_adjoint(op, np.zeros(8)).any()

    def test_dimension_mismatch_names_lengths(self):
        op = BlockOperator.from_matrix(A23, T=2)
        with pytest.raises(ContractViolation, match="6"):
            apply_forward(op, np.ones(5))
        with pytest.raises(ContractViolation, match="4"):
            apply_adjoint(op, np.ones(6))

    @settings(max_examples=60, deadline=None)
    @given(M=st.integers(1, 4), N=st.integers(1, 6), T=st.sampled_from([1, 2, 4, 8]), seed=st.integers(0, 2**31))
    def test_matches_dense_and_adjoint_identity(self, M, N, T, seed):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(M, N))
        op = BlockOperator.from_matrix(A, T)
        D = dense_block(A, T)
        x, s = rng.normal(size=N * T), rng.normal(size=M * T)
        np.testing.assert_allclose(op.forward(x), D @ x, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(op.adjoint(s), D.T @ s, rtol=1e-12, atol=1e-12)
        gap = abs(op.forward(x) @ s - x @ op.adjoint(s))
        assert gap <= 1e-12 * np.linalg.norm(x) * np.linalg.norm(s) * max(np.linalg.norm(A), 1e-300)


class TestSvd:
    def test_orthogonal_base(self):
        f = economy_svd(BlockOperator.from_matrix(np.eye(2), T=3))
        np.testing.assert_allclose(f.s, np.ones(6))
        assert f.R == 6

    def test_zero_matrix(self):
        f = economy_svd(BlockOperator.from_matrix(np.zeros((2, 3)), T=4))
        assert f.R == 0
        assert f.s.size == 0

    def test_random_against_dense_oracle(self, rng):
        A = rng.normal(size=(2, 3))
        op = BlockOperator.from_matrix(A, T=4)
        f = economy_svd(op)
        D = dense_block(A, 4)
        s_dense = np.linalg.svd(D, compute_uv=False)
        np.testing.assert_allclose(np.sort(f.s), np.sort(s_dense[: f.R]), atol=1e-10)
        U, V = f.U_dense(), f.V_dense()
        np.testing.assert_allclose(U.T @ U, np.eye(f.R), atol=1e-10)
        np.testing.assert_allclose(V.T @ V, np.eye(f.R), atol=1e-10)
        recon = U @ np.diag(f.s) @ V.T
        assert np.linalg.norm(recon - D) <= 1e-10 * np.linalg.norm(D)
        assert np.all(np.diff(f.s) <= 0)

    def test_rank_deficient(self, rng):
        u, v = rng.normal(size=3), rng.normal(size=4)
        f = economy_svd(BlockOperator.from_matrix(np.outer(u, v), T=5))
        assert f.R == 5

    def test_structured_products(self, rng):
        A = rng.normal(size=(3, 5))
        f = economy_svd(BlockOperator.from_matrix(A, T=3))
        x, y, z = rng.normal(size=15), rng.normal(size=9), rng.normal(size=f.R)
        np.testing.assert_allclose(f.Vt(x), f.V_dense().T @ x, atol=1e-12)
        np.testing.assert_allclose(f.V(z), f.V_dense() @ z, atol=1e-12)
        np.testing.assert_allclose(f.Ut(y), f.U_dense().T @ y, atol=1e-12)

    @pytest.mark.parametrize("T", [1, 2, 4, 8])
    def test_rank_scales_with_block(self, rng, T):
        A = rng.normal(size=(3, 4))
        assert economy_svd(BlockOperator.from_matrix(A, T)).R == 3 * T


class TestMaterialize:
    def test_scalar(self):
        np.testing.assert_array_equal(materialize_dense(BlockOperator.from_matrix([[3.0]], 2)), [[3, 0], [0, 3]])

    def test_T1(self):
        A = [[1.0, 2.0], [3.0, 4.0]]
        np.testing.assert_array_equal(materialize_dense(BlockOperator.from_matrix(A, 1)), A)

    def test_hand_layout(self):
        np.testing.assert_array_equal(materialize_dense(BlockOperator.from_matrix(A23, 2)), dense_block(A23, 2))

    def test_cap(self):
        with pytest.raises(RefusalError, match="100"):
            materialize_dense(BlockOperator.from_matrix(A23, 8), cap=100)


def test_csv_roundtrip(tmp_path, rng):
    A = rng.normal(size=(2, 3))
    write_matrix_csv(tmp_path / "A.csv", A)
    np.testing.assert_array_equal(read_matrix_csv(tmp_path / "A.csv"), A)


@pytest.mark.parametrize("text", ["1,2\n3\n", "1,a\n", ""])
def test_csv_malformed(tmp_path, text):
    (tmp_path / "A.csv").write_text(text)
    with pytest.raises(ContractViolation):
        read_matrix_csv(tmp_path / "A.csv")
