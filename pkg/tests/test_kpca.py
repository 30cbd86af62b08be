import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from eegsr import kpca
from eegsr.errors import DegeneracyError, ParameterError


def dense_oracle(X, m, gamma=None, coef0=1.0, degree=3, standardize=False):
    """Independent KPCA: explicit kernel loops, H K H centering, general eig."""
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if standardize:
        sd = X.std(axis=0)
        sd[sd == 0] = 1.0
        X = (X - X.mean(axis=0)) / sd
    g = 1.0 / d if gamma is None else gamma
    K = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            K[i, j] = (g * sum(X[i, k] * X[j, k] for k in range(d)) + coef0) ** degree
    H = np.eye(n) - np.full((n, n), 1.0 / n)
    Kc = H @ K @ H
    w, V = scipy.linalg.eig(Kc)
    w, V = w.real, V.real
    order = np.argsort(-w)
    w, V = w[order], V[:, order]
    V = V / np.linalg.norm(V, axis=0)
    proj = V[:, :m] * np.sqrt(w[:m])
    return w, proj


def match_up_to_sign(a, b, atol):
    for j in range(a.shape[1]):
        s = np.sign(np.dot(a[:, j], b[:, j])) or 1.0
        np.testing.assert_allclose(a[:, j], s * b[:, j], atol=atol)


class TestKernel:
    def test_examples(self):
        z = np.zeros(155)
        assert kpca.poly_kernel(z, z) == 1.0
        one = np.ones(155)
        assert kpca.poly_kernel(one, one) == pytest.approx(8.0, rel=1e-14)
        e1 = np.eye(155)[0]
        assert kpca.poly_kernel(e1, 2 * e1) == pytest.approx((2 / 155 + 1) ** 3, rel=1e-14)
        assert kpca.poly_kernel(e1, 2 * e1) == pytest.approx(1.0392, abs=1e-4)

    def test_dimension_mismatch(self):
        with pytest.raises(ParameterError):
            kpca.poly_kernel(np.zeros(3), np.zeros(4))

    @given(st.integers(0, 10**6))
    @settings(max_examples=30, deadline=None)
    def test_symmetry(self, seed):
        x, y = np.random.default_rng(seed).normal(size=(2, 12))
        assert kpca.poly_kernel(x, y) == kpca.poly_kernel(y, x)


class TestFit:
    def test_identical_rows_degenerate(self):
        X = np.tile(np.arange(6.0), (8, 1))
        with pytest.raises(DegeneracyError) as info:
            kpca.fit(X, 2)
        assert info.value.rank == 0

    def test_too_few_rows(self):
        with pytest.raises(ParameterError):
            kpca.fit(np.random.default_rng(0).normal(size=(3, 4)), 5)

    def test_ratios_sum_to_one(self):
        p = kpca.fit(np.random.default_rng(1).normal(size=(15, 7)), 4)
        assert p.explained_variance_ratio().sum() == pytest.approx(1.0, abs=1e-9)

    def test_five_points_against_oracle(self):
        X = np.random.default_rng(2).normal(size=(5, 6))
        p = kpca.fit(X, 2, standardize=False)
        w, proj = dense_oracle(X, 2)
        np.testing.assert_allclose(p.eigenvalues, np.clip(w, 0, None), atol=1e-8)
        match_up_to_sign(kpca.transform(p, X), proj, atol=1e-8)

    def test_standardized_against_oracle(self):
        X = np.random.default_rng(3).normal(size=(12, 5)) * [1, 10, 100, 0.1, 3] + 7
        p = kpca.fit(X, 3)
        _, proj = dense_oracle(X, 3, standardize=True)
        match_up_to_sign(kpca.transform(p, X), proj, atol=1e-8)

    def test_matches_sklearn(self):
        sk = pytest.importorskip("sklearn.decomposition")
        X = np.random.default_rng(4).normal(size=(30, 8))
        p = kpca.fit(X, 5, standardize=False)
        ref = sk.KernelPCA(5, kernel="poly", degree=3, gamma=1 / 8, coef0=1, eigen_solver="dense")
        match_up_to_sign(kpca.transform(p, X), ref.fit_transform(X), atol=1e-8)

    def test_normalization_invariant(self):
        p = kpca.fit(np.random.default_rng(5).normal(size=(25, 6)), 6)
        for i in range(p.n_components):
            lam = p.eigenvalues[i]
            assert abs(lam * p.alphas[:, i] @ p.alphas[:, i] - 1) <= 1e-8

    def test_eigenvalues_sorted(self):
        p = kpca.fit(np.random.default_rng(6).normal(size=(25, 6)), 3)
        assert np.all(np.diff(p.eigenvalues) <= 1e-12)
        assert p.eigenvalues.min() >= -1e-8 * p.eigenvalues[0]

    def test_sign_convention(self):
        p = kpca.fit(np.random.default_rng(7).normal(size=(20, 4)), 4)
        for j in range(4):
            a = p.alphas[:, j]
            assert a[np.argmax(np.abs(a))] > 0

    def test_centered_kernel_rows_sum_to_zero(self):
        X = np.random.default_rng(8).normal(size=(20, 5))
        K = kpca.kernel_matrix(X, X, 0.2, 1.0, 3)
        assert np.abs(kpca.center_kernel(K).sum(axis=1)).max() <= 1e-8

    def test_projections_uncorrelated(self):
        X = np.random.default_rng(9).normal(size=(40, 6))
        p = kpca.fit(X, 6)
        Y = kpca.transform(p, X)
        n = X.shape[0]
        for i in range(6):
            for j in range(6):
                if i != j:
                    bound = 1e-6 * n * np.sqrt(p.eigenvalues[i] * p.eigenvalues[j])
                    assert abs(Y[:, i] @ Y[:, j]) <= bound

    def test_orthogonal_invariance(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(18, 5))
        Q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
        a = kpca.fit(X, 3, standardize=False)
        b = kpca.fit(X @ Q, 3, standardize=False)
        np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, atol=1e-8)


class TestTransform:
    def test_training_rows_consistent(self):
        X = np.random.default_rng(11).normal(size=(16, 5))
        p = kpca.fit(X, 4)
        Y = kpca.transform(p, X)
        for r in (0, 7, 15):
            np.testing.assert_allclose(kpca.transform(p, X[r]), Y[r], atol=1e-8)
        np.testing.assert_array_equal(kpca.transform(p, X[0].copy()), kpca.transform(p, X[0]))

    def test_symmetric_configuration(self):
        X = np.eye(3)
        p = kpca.fit(X, 2, standardize=False)
        # K = 64/27 on the diagonal, 1 elsewhere, so Kc = (37/27) H with a double eigenvalue
        H = np.eye(3) - 1 / 3
        np.testing.assert_allclose(p.eigenvalues[:2], 37 / 27, rtol=1e-12)
        # centroid is equidistant from all three points: projects to the origin
        np.testing.assert_allclose(kpca.transform(p, X.mean(axis=0)), 0.0, atol=1e-8)
        # repeated eigenvalue: compare Gram matrices, which are basis independent
        Y = kpca.transform(p, X)
        np.testing.assert_allclose(Y @ Y.T, 37 / 27 * H, atol=1e-10)

    def test_out_of_sample_matches_oracle_formula(self):
        rng = np.random.default_rng(12)
        X, x = rng.normal(size=(10, 4)), rng.normal(size=4)
        p = kpca.fit(X, 3, standardize=False)
        g = 1 / 4
        K = (g * X @ X.T + 1) ** 3
        kx = (g * X @ x + 1) ** 3
        kt = kx - kx.mean() - K.mean(axis=0) + K.mean()
        np.testing.assert_allclose(kpca.transform(p, x), kt @ p.alphas, atol=1e-10)

    def test_dimension_mismatch(self):
        p = kpca.fit(np.random.default_rng(0).normal(size=(6, 3)), 2)
        with pytest.raises(ParameterError):
            kpca.transform(p, np.zeros(4))


class TestCurve:
    def test_rank_one(self):
        # one-dimensional linear kernel on symmetric points: a single component
        X = np.array([[-1.0], [1.0]])
        p = kpca.fit(X, 1, degree=1, standardize=False)
        curve = kpca.explained_variance_curve(p)
        assert [c for _, c in curve] == [1.0, 1.0]

    def test_equal_eigenvalues(self):
        p = kpca.KpcaProjector(
            train=np.zeros((4, 1)), gamma=1.0, coef0=1.0, degree=3, mean=np.zeros(1),
            scale=np.ones(1), eigenvalues=np.full(4, 2.5), alphas=np.zeros((4, 1)),
            k_col_means=np.zeros(4), k_grand_mean=0.0,
        )
        assert [c for _, c in kpca.explained_variance_curve(p)] == pytest.approx([0.25, 0.5, 0.75, 1.0])

    def test_random_fit_against_oracle(self):
        X = np.random.default_rng(13).normal(size=(10, 4))
        p = kpca.fit(X, 3, standardize=False)
        w, _ = dense_oracle(X, 3)
        w = np.clip(w, 0, None)
        got = [c for _, c in kpca.explained_variance_curve(p)]
        np.testing.assert_allclose(got, np.cumsum(w) / w.sum(), atol=1e-9)
        assert all(b >= a for a, b in zip(got, got[1:]))
        assert got[-1] == 1.0


class TestProjectorFile:
    def test_round_trip(self, tmp_path):
        X = np.random.default_rng(14).normal(size=(12, 5))
        p = kpca.fit(X, 3)
        path = tmp_path / "p.kpca"
        kpca.save_projector(p, path)
        assert path.read_bytes()[:4] == b"KPCA"
        q = kpca.load_projector(path)
        np.testing.assert_array_equal(kpca.transform(p, X), kpca.transform(q, X))

    def test_pool_subsample(self):
        frames = np.arange(100.0).reshape(50, 2)
        a = kpca.subsample_pool(frames, 10, seed=3)
        b = kpca.subsample_pool(frames, 10, seed=3)
        assert a.shape == (10, 2)
        np.testing.assert_array_equal(a, b)
        assert kpca.subsample_pool(frames, 80, seed=3) is frames or len(kpca.subsample_pool(frames, 80, 3)) == 50
