import numpy as np
import pytest
from scipy import stats
from scipy.special import gammaln

from src.errors import DegenerateStateError, StructuralError
from src.model import (ReadCountData, cell_loglik, compute_M, compute_p, log_joint,
                       log_likelihood, log_prior, loglik_N, loglik_n, variant_numerator)
from src import priors


def test_compute_M_background_only():
    L = np.array([[0], [3]])
    w = np.array([[1.0, 0.0]])
    assert np.allclose(compute_M(L, w), 2.0)


def test_compute_M_pure_subclone():
    assert np.allclose(compute_M(np.array([[3]]), np.array([[0.0, 1.0]])), 3.0)


def test_compute_M_two_subclones():
    M = compute_M(np.array([[3, 0]]), np.array([[0.1, 0.6, 0.3]]))
    assert M[0, 0] == pytest.approx(2.0)


def test_compute_M_is_affine_in_weights():
    L = np.array([[3, 1], [0, 2]])
    wa = np.array([[0.2, 0.5, 0.3]])
    wb = np.array([[0.6, 0.1, 0.3]])
    mix = 0.3 * wa + 0.7 * wb
    assert np.allclose(compute_M(L, mix), 0.3 * compute_M(L, wa) + 0.7 * compute_M(L, wb))


def test_compute_M_rejects_mismatched_weights():
    with pytest.raises(StructuralError):
        compute_M(np.array([[1, 2]]), np.array([[0.5, 0.5]]))


def test_compute_p_examples():
    assert np.allclose(compute_p(np.array([[2]]), np.array([[0]]), np.array([[0.5, 0.5]]), 0.0), 0.0)
    assert compute_p(np.array([[2]]), np.array([[1]]), np.array([[0.0, 1.0]]), 0.3)[0, 0] == pytest.approx(0.5)
    p = compute_p(np.array([[3, 0]]), np.array([[2, 0]]), np.array([[0.1, 0.6, 0.3]]), 0.05)
    assert p[0, 0] == pytest.approx(0.605)


def test_compute_p_degenerate_state():
    with pytest.raises(DegenerateStateError):
        compute_p(np.array([[0]]), np.array([[0]]), np.array([[0.0, 1.0]]), 0.05)


def test_p_stays_in_unit_interval_for_random_states(rng):
    for _ in range(50):
        C, S, T = rng.integers(1, 4), 6, 3
        L = rng.integers(0, 4, size=(S, C))
        Z = np.floor(rng.random((S, C)) * (L + 1)).astype(int)
        w = rng.dirichlet(np.ones(C + 1), size=T)
        p0 = rng.random()
        num = variant_numerator(Z, w, p0)
        M = compute_M(L, w)
        assert np.all(num <= M + 1e-12)
        p = compute_p(L, Z, w, p0)
        assert np.all((p >= 0) & (p <= 1))


def test_loglik_N_examples():
    assert loglik_N(np.array([[0.0]]), np.array([[2.0]]), np.array([10.0])) == pytest.approx(-10.0)
    assert loglik_N(np.array([[0.0]]), np.array([[0.0]]), np.array([10.0])) == 0.0
    value = loglik_N(np.array([[5.0]]), np.array([[2.0]]), np.array([6.0]))
    assert value == pytest.approx(stats.poisson.logpmf(5, 6.0), abs=1e-10)
    assert value == pytest.approx(5 * np.log(6) - 6 - gammaln(6), abs=1e-12)


def test_loglik_N_zero_mean_with_reads_is_impossible():
    assert loglik_N(np.array([[3.0]]), np.array([[0.0]]), np.array([5.0])) == -np.inf


def test_loglik_N_rejects_negative_counts():
    with pytest.raises(StructuralError):
        loglik_N(np.array([[-1.0]]), np.array([[2.0]]), np.array([5.0]))


def test_loglik_n_examples():
    assert loglik_n(np.array([[0.0]]), np.array([[10.0]]), np.array([[0.0]])) == 0.0
    assert loglik_n(np.array([[5.0]]), np.array([[10.0]]), np.array([[0.5]])) == pytest.approx(-1.4020, abs=1e-4)
    assert loglik_n(np.array([[3.0]]), np.array([[10.0]]), np.array([[1.0]])) == -np.inf


def test_loglik_n_rejects_excess_variants():
    with pytest.raises(StructuralError):
        loglik_n(np.array([[11.0]]), np.array([[10.0]]), np.array([[0.5]]))


def test_likelihoods_match_scipy_on_integer_counts(rng):
    N = rng.integers(0, 40, size=(5, 3)).astype(float)
    n = np.floor(N * rng.random((5, 3)))
    M = rng.uniform(0.5, 3.0, size=(5, 3))
    phi = rng.uniform(5, 30, size=3)
    p = rng.uniform(0.05, 0.95, size=(5, 3))
    assert loglik_N(N, M, phi) == pytest.approx(stats.poisson.logpmf(N, phi * M / 2).sum(), abs=1e-10)
    assert loglik_n(n, N, p) == pytest.approx(stats.binom.logpmf(n, N, p).sum(), abs=1e-10)


def test_fractional_counts_are_finite():
    assert np.isfinite(loglik_N(np.array([[2.5]]), np.array([[2.0]]), np.array([3.1])))
    assert np.isfinite(loglik_n(np.array([[0.7]]), np.array([[2.5]]), np.array([[0.3]])))


def test_read_count_data_validation():
    with pytest.raises(StructuralError):
        ReadCountData(N=np.ones((2, 2)), n=np.ones((2, 3)))
    with pytest.raises(StructuralError):
        ReadCountData(N=np.ones((2, 2)), n=np.full((2, 2), 2.0))
    with pytest.raises(StructuralError):
        ReadCountData(N=-np.ones((1, 1)), n=np.zeros((1, 1)))
    data = ReadCountData(N=np.ones((2, 3)), n=np.zeros((2, 3)))
    assert data.locus_ids == ["locus_1", "locus_2"]
    assert data.sample_ids == ["sample_1", "sample_2", "sample_3"]


def test_cell_kernel_plus_constants_is_log_likelihood(small_data, small_state):
    w = small_state.w
    kernel = cell_loglik(small_data, compute_M(small_state.L, w),
                         variant_numerator(small_state.Z, w, small_state.p0), small_state.phi)
    N, n = small_data.N, small_data.n
    constants = -gammaln(n + 1).sum() - gammaln(N - n + 1).sum()
    assert kernel.sum() + constants == pytest.approx(log_likelihood(small_state, small_data), abs=1e-9)


def test_log_joint_is_sum_of_terms(small_data, small_state, hyper):
    params = priors.BetaDirichletParams.from_hyper(hyper, small_state.C)
    w = small_state.w
    M = compute_M(small_state.L, w)
    manual = (loglik_N(small_data.N, M, small_state.phi)
              + loglik_n(small_data.n, small_data.N, compute_p(small_state.L, small_state.Z, w, small_state.p0))
              + sum(priors.logdens_pi(row, params) for row in small_state.pi)
              + priors.logpmf_L_given_pi(small_state.L, small_state.pi)
              + priors.logpmf_Z_given_L(small_state.Z, small_state.L)
              + priors.logdens_theta(small_state.theta, hyper)
              + priors.logdens_phi(small_state.phi, hyper)
              + priors.logdens_p0(small_state.p0, hyper)
              + priors.logpmf_C(small_state.C, hyper))
    assert log_joint(small_state, small_data, hyper) == pytest.approx(manual, abs=1e-9)


def test_log_joint_phi_change_moves_only_poisson_and_gamma_terms(small_data, small_state, hyper):
    moved = small_state.copy()
    moved.phi = small_state.phi * np.array([1.3, 1.0])
    M = compute_M(small_state.L, small_state.w)
    expected = (loglik_N(small_data.N, M, moved.phi) - loglik_N(small_data.N, M, small_state.phi)
                + priors.logdens_phi(moved.phi, hyper) - priors.logdens_phi(small_state.phi, hyper))
    delta = log_joint(moved, small_data, hyper) - log_joint(small_state, small_data, hyper)
    assert delta == pytest.approx(expected, abs=1e-9)


def test_log_joint_b00_change_matches_beta_density(small_data, small_state, hyper):
    other = hyper.model_copy(update={"b00": 8.0})
    delta = log_joint(small_state, small_data, other) - log_joint(small_state, small_data, hyper)
    expected = stats.beta.logpdf(0.05, 0.3, 8.0) - stats.beta.logpdf(0.05, 0.3, 5.0)
    assert delta == pytest.approx(expected, abs=1e-9)


def test_relabelling_subclones_keeps_the_joint(small_data, small_state, hyper):
    swapped = small_state.permuted([1, 0])
    assert log_joint(swapped, small_data, hyper) == pytest.approx(log_joint(small_state, small_data, hyper))


def test_log_prior_without_C_term(small_state, hyper):
    difference = log_prior(small_state, hyper) - log_prior(small_state, hyper, include_C=False)
    assert difference == pytest.approx(np.log(0.2) + np.log(0.8))


def test_state_validation(small_state):
    small_state.validate(3)
    broken = small_state.copy()
    broken.Z[0, 0] = 4
    with pytest.raises(StructuralError):
        broken.validate(3)
