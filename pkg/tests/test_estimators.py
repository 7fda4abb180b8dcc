import numpy as np
import pytest

from vnentropy.coloring import greedy_distance_coloring
from vnentropy.estimators import (
    DenseProvider,
    KrylovEntropyProvider,
    NonConvergenceError,
    adaptive_hutchpp,
    _adaptive_hutchinson,
    entropy_hutchpp,
    entropy_probing,
    fit_probing_model,
    gaussian_vector,
    hutchinson,
    hutchpp,
    probing_error_identity_check,
    probing_trace,
)
from vnentropy.krylov import ENTROPY
from vnentropy.sparse import dense_entropy_oracle, dense_sym_eig, from_coo

from conftest import (
    complete_graph,
    diag_density,
    laplacian_density,
    random_connected_graph,
)


def dense_entropy_matrix(density):
    w, u = dense_sym_eig(density.matrix.todense())
    w = np.clip(w, 0.0, None)
    return (u * np.asarray(ENTROPY.f(w))) @ u.T


class TestProbingTrace:
    def test_singleton_coloring_exact(self, rng):
        rho = laplacian_density(random_connected_graph(40, 50, rng))
        coloring = greedy_distance_coloring(rho.matrix, 40)  # d >= diameter
        assert coloring.num_colors == 40
        provider = KrylovEntropyProvider(rho)
        eps_hat = 1e-8
        value, per_class = probing_trace(rho, coloring, provider, eps_hat)
        exact = dense_entropy_oracle(rho.matrix)
        assert len(per_class) == 40
        assert abs(value - exact) <= eps_hat * (1 + 1e-6)

    def test_accumulation_deterministic_with_threads(self, rng):
        rho = laplacian_density(random_connected_graph(60, 70, rng))
        coloring = greedy_distance_coloring(rho.matrix, 2)
        v1, _ = probing_trace(rho, coloring, KrylovEntropyProvider(rho), 1e-7, threads=1)
        v2, _ = probing_trace(rho, coloring, KrylovEntropyProvider(rho), 1e-7, threads=4)
        assert v1 == v2


class TestProbingErrorIdentity:
    def test_singleton_classes_zero(self, rng):
        rho = laplacian_density(random_connected_graph(20, 20, rng))
        coloring = greedy_distance_coloring(rho.matrix, 20)
        val = probing_error_identity_check(rho.matrix.todense(), coloring, ENTROPY)
        assert val == pytest.approx(0.0, abs=1e-14)

    def test_single_class_two_by_two(self):
        rho = laplacian_density(complete_graph(2))
        fa = dense_entropy_matrix(rho)
        coloring = greedy_distance_coloring(from_coo(2, [], [], []), 1)
        val = probing_error_identity_check(rho.matrix.todense(), coloring, ENTROPY)
        assert val == pytest.approx(-2 * fa[0, 1], rel=1e-12)

    def test_identity_matches_probing_error(self, rng):
        rho = laplacian_density(random_connected_graph(100, 130, rng))
        coloring = greedy_distance_coloring(rho.matrix, 2)
        fa = dense_entropy_matrix(rho)
        exact = float(np.trace(fa))
        trace_p = sum(
            float(fa[np.ix_(cls, cls)].sum()) for cls in coloring.classes
        )
        identity = probing_error_identity_check(rho.matrix.todense(), coloring, ENTROPY)
        assert exact - trace_p == pytest.approx(identity, abs=1e-10)

    def test_m_matrix_lower_bound_small(self, rng):
        for _ in range(5):
            rho = laplacian_density(random_connected_graph(50, 60, rng))
            fa = dense_entropy_matrix(rho)
            exact = float(np.trace(fa))
            for d in (1, 2, 3):
                coloring = greedy_distance_coloring(rho.matrix, d)
                trace_p = sum(float(fa[np.ix_(c, c)].sum()) for c in coloring.classes)
                assert trace_p <= exact + 1e-12


class TestHeuristicFit:
    def test_recovers_synthetic_model(self):
        c_true, q_true, k = 1.0, 0.5, 2
        delta1 = c_true * q_true / 1**k
        delta2 = c_true * q_true**2 / 2**k
        fits, d_star = fit_probing_model(delta1, delta2, eps_hat=1e-6)
        c_fit, q_fit = fits[k]
        assert q_fit == pytest.approx(q_true, abs=1e-12)
        assert c_fit == pytest.approx(c_true, abs=1e-12)
        # modeled error telescopes the remaining differences
        tail = lambda d: sum(c_true * q_true**j / j**2 for j in range(d, d + 200))
        expect = next(d for d in range(1, 100) if tail(d) <= 1e-6)
        # k = 3 fit from the same data gives q = 1 (rejected), so max is k=2's
        assert 3 not in fits
        assert d_star == expect

    def test_rejects_nondecreasing_differences(self):
        fits, d_star = fit_probing_model(1e-3, 2e-3, eps_hat=1e-6)
        assert not fits

    def test_loose_epsilon_floors_at_two(self):
        fits, d_star = fit_probing_model(0.5, 0.03125, eps_hat=10.0)
        assert d_star == 2


class TestEntropyProbing:
    def test_maximally_mixed_exact(self):
        n = 64
        rho = diag_density(np.ones(n))
        est = entropy_probing(rho, 1e-6)
        assert est.value == pytest.approx(np.log(n), rel=1e-12)
        assert est.d == 3  # differences vanish, early-converged branch

    def test_random_graph_within_tolerance(self, rng):
        rho = laplacian_density(random_connected_graph(150, 160, rng))
        exact = dense_entropy_oracle(rho.matrix)
        for eps in (1e-3, 1e-4):
            est = entropy_probing(rho, eps)
            assert abs(est.value - exact) / exact <= eps
            assert est.eps_abs == pytest.approx(eps * est.rough_pre_estimate / 2)

    def test_pre_estimate_is_lower_bound(self, rng):
        rho = laplacian_density(random_connected_graph(120, 150, rng))
        exact = dense_entropy_oracle(rho.matrix)
        est = entropy_probing(rho, 1e-3)
        assert est.rough_pre_estimate <= exact * (1 + 1e-6)

    def test_apriori_mode(self, rng):
        rho = laplacian_density(random_connected_graph(60, 60, rng))
        exact = dense_entropy_oracle(rho.matrix)
        est = entropy_probing(rho, 1e-2, mode="apriori")
        assert abs(est.value - exact) / exact <= 1e-2
        assert est.heuristic is None

    def test_d_override(self, rng):
        rho = laplacian_density(random_connected_graph(80, 90, rng))
        est = entropy_probing(rho, 1e-3, d_override=4)
        assert est.d == 4


class TestHutchinson:
    def test_zero_operator(self):
        assert hutchinson(DenseProvider(np.zeros((7, 7))), 25, seed=1) == 0.0

    def test_identity_within_three_sigma(self):
        n, num = 20, 10_000
        est = hutchinson(DenseProvider(np.eye(n)), num, seed=11)
        sigma = np.sqrt(2.0 * n / num)
        assert abs(est - n) <= 3 * sigma

    def test_fixed_seed_bit_identical(self, rng):
        b = rng.standard_normal((15, 15))
        provider = DenseProvider(b @ b.T)
        assert hutchinson(provider, 50, seed=7) == hutchinson(provider, 50, seed=7)

    def test_unbiased_single_sample(self, rng):
        n = 20
        b = rng.standard_normal((n, n))
        b = b @ b.T
        provider = DenseProvider(b)
        num = 10_000
        samples = [
            provider.quadform(gaussian_vector(seed, 3, 0, n)) for seed in range(num)
        ]
        sigma_mean = np.sqrt(2.0) * np.linalg.norm(b, "fro") / np.sqrt(num)
        assert abs(np.mean(samples) - np.trace(b)) <= 4 * sigma_mean


class TestHutchpp:
    def test_exact_on_low_rank(self, rng):
        n, r = 40, 4
        g = rng.standard_normal((n, r))
        b = g @ g.T  # PSD rank 4
        est = hutchpp(DenseProvider(b), n_rank=6, n_hutch=3, seed=5)
        assert est == pytest.approx(np.trace(b), rel=1e-10)

    def test_diag_123_exact(self):
        b = np.diag([1.0, 2.0, 3.0] + [0.0] * 17)
        est = hutchpp(DenseProvider(b), n_rank=3, n_hutch=0, seed=2)
        assert est == pytest.approx(6.0, rel=1e-12)

    def test_no_hutch_phase_underestimates_psd(self, rng):
        b = rng.standard_normal((30, 30))
        b = b @ b.T
        est = hutchpp(DenseProvider(b), n_rank=5, n_hutch=0, seed=3)
        assert est <= np.trace(b) + 1e-10


class TestAdaptiveHutchpp:
    def test_loose_tolerance_keeps_minimum_rank(self, rng):
        # flat-spectrum entropy operator: deflation does not pay off
        rho = laplacian_density(random_connected_graph(1200, 1500, rng))
        b = dense_entropy_matrix(rho)
        exact = float(np.trace(b))
        est, n_rank, n_hutch = adaptive_hutchpp(
            DenseProvider(b), eps_hat=0.01 * exact, delta=1e-2, seed=3
        )
        assert n_rank == 3
        assert n_hutch <= 300
        assert abs(est - exact) <= 0.02 * exact

    def test_tight_tolerance_grows_rank(self, rng):
        rho = laplacian_density(random_connected_graph(300, 360, rng))
        b = dense_entropy_matrix(rho)
        exact = float(np.trace(b))
        _, n_rank_loose, _ = adaptive_hutchpp(
            DenseProvider(b), eps_hat=0.05 * exact, delta=1e-2, seed=4
        )
        _, n_rank_tight, _ = adaptive_hutchpp(
            DenseProvider(b), eps_hat=2e-4 * exact, delta=1e-2, seed=4
        )
        assert n_rank_tight > n_rank_loose

    def test_hutch_samples_scale_inverse_square(self, rng):
        rho = laplacian_density(random_connected_graph(400, 500, rng))
        b = dense_entropy_matrix(rho)
        provider = DenseProvider(b)
        _, n1 = _adaptive_hutchinson(provider, 0.10, 1e-2, 9, lambda *a: None)
        _, n4 = _adaptive_hutchinson(provider, 0.05, 1e-2, 9, lambda *a: None)
        assert 2.5 <= n4 / n1 <= 8.0

    def test_budget_error(self, rng):
        b = rng.standard_normal((50, 50))
        b = b @ b.T
        with pytest.raises(NonConvergenceError):
            adaptive_hutchpp(DenseProvider(b), eps_hat=1e-12, delta=1e-2, seed=1, max_total=20)

    def test_validation(self):
        with pytest.raises(ValueError):
            adaptive_hutchpp(DenseProvider(np.eye(3)), eps_hat=0.0, delta=0.5, seed=0)


class TestEntropyHutchpp:
    def test_maximally_mixed(self):
        n = 128
        rho = diag_density(np.ones(n))
        est = entropy_hutchpp(rho, 1e-2, 1e-2, seed=5)
        assert abs(est.value - np.log(n)) <= 1e-2 * np.log(n)
        assert est.n_rank >= 3

    def test_deterministic_under_seed(self, rng):
        rho = laplacian_density(random_connected_graph(100, 120, rng))
        a = entropy_hutchpp(rho, 1e-2, 1e-2, seed=123)
        b = entropy_hutchpp(rho, 1e-2, 1e-2, seed=123)
        assert a.value == b.value
        assert (a.n_rank, a.n_hutch) == (b.n_rank, b.n_hutch)

    def test_hutchinson_method(self, rng):
        rho = laplacian_density(random_connected_graph(80, 100, rng))
        exact = dense_entropy_oracle(rho.matrix)
        est = entropy_hutchpp(rho, 5e-2, 1e-1, seed=77, method="hutchinson")
        assert est.method == "hutchinson"
        assert est.n_rank == 0
        assert abs(est.value - exact) / exact <= 0.15  # statistical, loose

    def test_fixed_rank_hutchpp_method(self, rng):
        rho = laplacian_density(random_connected_graph(80, 100, rng))
        est = entropy_hutchpp(rho, 5e-2, 1e-1, seed=78, method="hutchpp")
        assert est.n_rank == 3


class TestPoleEconomy:
    def test_factor_cache_bounded_by_eds_pole_count(self):
        # ill-conditioned cycle Laplacian forces rational iterations; the
        # shared EDS sequence keeps the number of factorizations small
        from conftest import cycle_graph

        rho = laplacian_density(cycle_graph(400))
        est = entropy_probing(rho, 1e-5)
        assert est.rational_iters > 0
        assert est.factorizations <= 10
        exact = dense_entropy_oracle(rho.matrix)
        # the even cycle is bipartite: its staircase error decay is the
        # worst case for the heuristic d selection, which carries no hard
        # accuracy guarantee; allow modest slack over the nominal target
        assert abs(est.value - exact) / exact <= 5e-5


class TestHeuristicFallback:
    def test_invalid_fit_falls_back_to_apriori(self, rng):
        from vnentropy.estimators import KrylovEntropyProvider, heuristic_select_d
        from vnentropy.bounds import select_d_apriori

        rho = laplacian_density(random_connected_graph(60, 80, rng))
        provider = KrylovEntropyProvider(rho)
        # doctored non-monotone probing values: the model fit is rejected
        values = {2: 1.0, 3: 1.5}
        fit = heuristic_select_d(
            rho, provider, eps_hat=1e-3,
            run_probing=lambda d, eps: values[d], p1=0.8,
        )
        assert fit.fallback and not fit.valid
        expect = select_d_apriori(rho.n, provider.interval.a, provider.interval.b, 1e-3)
        assert fit.d_star == expect


class TestSmallGraphEdges:
    def test_zero_entropy_single_edge(self):
        # K2 density matrix has eigenvalues {0, 1}: a pure state, S = 0
        rho = laplacian_density(complete_graph(2))
        assert dense_entropy_oracle(rho.matrix) == 0.0
        est = entropy_probing(rho, 1e-3)
        assert abs(est.value) <= 1e-12
        est2 = entropy_hutchpp(rho, 1e-1, 1e-1, seed=1)
        assert abs(est2.value) <= 1e-12

    def test_triangle_exact(self):
        # K3 density matrix has eigenvalues {0, 1/2, 1/2}: S = log 2
        rho = laplacian_density(complete_graph(3))
        est = entropy_probing(rho, 1e-6)
        assert est.value == pytest.approx(np.log(2), abs=1e-12)


class TestBoundStop:
    def test_probing_with_bound_stopping(self, rng):
        rho = laplacian_density(random_connected_graph(120, 140, rng))
        exact = dense_entropy_oracle(rho.matrix)
        est = entropy_probing(rho, 1e-3, stop="bound")
        assert abs(est.value - exact) / exact <= 1e-3

    def test_hutchpp_with_bound_stopping(self, rng):
        rho = laplacian_density(random_connected_graph(120, 140, rng))
        exact = dense_entropy_oracle(rho.matrix)
        est = entropy_hutchpp(rho, 5e-2, 1e-1, seed=2, stop="bound")
        assert abs(est.value - exact) / exact <= 0.15
