import numpy as np
import pytest
from scipy import integrate, stats

from src import priors
from src.config import Hyperparameters
from src.errors import StructuralError


def test_sample_pi_rows_lie_on_simplex(rng):
    params = priors.BetaDirichletParams(aC=1.0, beta=1.0, gamma=np.full(3, 0.5))
    for _ in range(100):
        row = priors.sample_pi(params, rng)
        assert row.shape == (4,)
        assert row.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(row >= 0)


def test_sample_pi_off_neutral_mass_has_beta_mean(rng):
    n = 100_000
    pi = priors.sample_pi_rows(np.full(n, 2.0), np.full(n, 1.0), np.full((n, 3), 0.5), rng)
    assert (1.0 - pi[:, priors.NEUTRAL]).mean() == pytest.approx(2.0 / 3.0, abs=0.01)


def test_sample_pi_small_aC_keeps_neutral_dominant(rng):
    params = priors.BetaDirichletParams(aC=1e-3, beta=1.0, gamma=np.full(3, 0.5))
    draws = np.array([priors.sample_pi(params, rng)[priors.NEUTRAL] for _ in range(2000)])
    assert np.median(draws) > 0.99


def test_sampler_means_match_analytic_category_means(rng):
    aC, beta, gamma = 0.7, 1.3, np.array([0.5, 1.0, 2.0])
    n = 100_000
    pi = priors.sample_pi_rows(np.full(n, aC), np.full(n, beta), np.tile(gamma, (n, 1)), rng)
    mean_u = aC / (aC + beta)
    expected = np.empty(4)
    expected[priors.NEUTRAL] = 1.0 - mean_u
    expected[priors.off_neutral(3)] = mean_u * gamma / gamma.sum()
    assert np.allclose(pi.mean(axis=0), expected, atol=0.005)


def test_logdens_pi_integrates_to_one():
    params = priors.BetaDirichletParams(aC=2.0, beta=1.5, gamma=np.array([1.5, 2.0]))

    def density(pi1, pi0):
        pi2 = max(1.0 - pi0 - pi1, 0.0)
        return np.exp(priors.logdens_pi(np.array([pi0, pi1, pi2]), params))

    total, _ = integrate.dblquad(density, 0.0, 1.0, 0.0, lambda pi0: 1.0 - pi0)
    assert total == pytest.approx(1.0, rel=0.02)


def _marginal_cdf(params, entry, grid):
    """CDF of one entry of a Q=2 pi row, integrating the density over the other free coordinate."""

    def row(value, other):
        out = np.empty(3)
        out[entry] = value
        free = [k for k in range(3) if k != entry]
        out[free[0]], out[free[1]] = other, max(1.0 - value - other, 0.0)
        return out

    density = [0.0]
    for value in grid[1:-1]:
        mass, _ = integrate.quad(lambda other: np.exp(priors.logdens_pi(row(value, other), params)),
                                 0.0, 1.0 - value)
        density.append(mass)
    density.append(0.0)
    cdf = integrate.cumulative_trapezoid(density, grid, initial=0.0)
    return cdf / cdf[-1]


@pytest.mark.parametrize("entry", [0, priors.NEUTRAL])
def test_sample_pi_marginals_match_logdens_pi(rng, entry):
    params = priors.BetaDirichletParams(aC=2.0, beta=1.5, gamma=np.array([1.5, 2.0]))
    n = 100_000
    draws = priors.sample_pi_rows(np.full(n, params.aC), np.full(n, params.beta),
                                  np.tile(params.gamma, (n, 1)), rng)[:, entry]
    grid = np.linspace(0.0, 1.0, 401)
    cdf = _marginal_cdf(params, entry, grid)
    assert stats.kstest(draws, lambda v: np.interp(v, grid, cdf)).statistic < 0.02


def test_compound_copy_number_probabilities():
    aC, beta, gamma = 2.0, 1.5, np.array([1.5, 2.0])
    params = priors.BetaDirichletParams(aC=aC, beta=beta, gamma=gamma)
    expected = np.empty(3)
    expected[priors.NEUTRAL] = beta / (aC + beta)
    expected[priors.off_neutral(2)] = aC / (aC + beta) * gamma / gamma.sum()
    for q in range(3):
        L = np.array([[q]])

        def joint(pi1, pi0):
            row = np.array([pi0, pi1, max(1.0 - pi0 - pi1, 0.0)])
            return np.exp(priors.logdens_pi(row, params) + priors.logpmf_L_given_pi(L, row[None, :]))

        mass, _ = integrate.dblquad(joint, 0.0, 1.0, 0.0, lambda pi0: 1.0 - pi0)
        assert mass == pytest.approx(expected[q], rel=0.01)


def test_logdens_pi_symmetric_in_off_neutral_coordinates():
    params = priors.BetaDirichletParams(aC=0.5, beta=1.0, gamma=np.full(3, 0.5))
    row = np.array([0.1, 0.2, 0.6, 0.1])
    swapped = np.array([0.2, 0.1, 0.6, 0.1])
    assert priors.logdens_pi(row, params) == pytest.approx(priors.logdens_pi(swapped, params))


def test_logdens_pi_rejects_rows_off_the_simplex():
    params = priors.BetaDirichletParams(aC=0.5, beta=1.0, gamma=np.full(3, 0.5))
    with pytest.raises(StructuralError):
        priors.logdens_pi(np.array([0.5, 0.5, 0.5, 0.5]), params)


def test_beta_dirichlet_params_must_be_positive():
    with pytest.raises(StructuralError):
        priors.BetaDirichletParams(aC=0.0, beta=1.0, gamma=np.ones(3))


def test_categorical_and_uniform_pmfs():
    pi = np.array([[0.2, 0.3, 0.4, 0.1]])
    assert priors.logpmf_L_given_pi(np.array([[1]]), pi) == pytest.approx(np.log(0.3))
    assert priors.logpmf_Z_given_L(np.array([[0]]), np.array([[0]])) == 0.0
    assert priors.logpmf_Z_given_L(np.array([[1]]), np.array([[3]])) == pytest.approx(-np.log(4))
    assert priors.logpmf_Z_given_L(np.array([[2]]), np.array([[1]])) == -np.inf


def test_scalar_prior_densities():
    hyper = Hyperparameters(d0=1.0, d=1.0, a_phi=2.0, b_phi=3.0)
    theta = np.array([[0.5, 1.2, 2.0]])
    assert priors.logdens_theta(theta, hyper) == pytest.approx(-theta.sum())
    assert priors.logpmf_C(1, hyper) == pytest.approx(np.log(0.2))
    assert priors.logpmf_C(3, hyper) == pytest.approx(np.log(0.2) + 2 * np.log(0.8))
    assert priors.logdens_phi(np.array([1.5]), hyper) == pytest.approx(stats.gamma.logpdf(1.5, 2.0, scale=1 / 3.0))
    # a00 < 1: the density of p0 decreases away from 0
    assert priors.logdens_p0(0.01, hyper) > priors.logdens_p0(0.1, hyper) > priors.logdens_p0(0.5, hyper)


def test_draw_categorical_frequencies(rng):
    prob = np.tile([0.1, 0.2, 0.3, 0.4], (50_000, 1))
    draws = priors.draw_categorical(prob, rng)
    freq = np.bincount(draws, minlength=4) / len(draws)
    assert np.allclose(freq, [0.1, 0.2, 0.3, 0.4], atol=0.01)


def test_draw_categorical_respects_zero_weights(rng):
    prob = np.tile([0.0, 0.0, 2.0, 1.0], (1000, 1))
    draws = priors.draw_categorical(prob, rng)
    assert set(np.unique(draws)) <= {2, 3}


def test_sample_prior_state_is_valid(rng, hyper):
    for C in (1, 3):
        state = priors.sample_prior_state(C, 20, 4, hyper, rng)
        state.validate(hyper.Q)
        assert state.C == C and state.S == 20 and state.T == 4


def test_theta_and_p0_draws_match_moments(rng, hyper):
    theta = np.stack([priors.sample_theta(3, 2, hyper, rng) for _ in range(20_000)])
    assert theta[:, :, 0].mean() == pytest.approx(hyper.d0, abs=0.02)
    assert theta[:, :, 1:].mean() == pytest.approx(hyper.d, abs=0.03)
    p0 = np.array([priors.sample_p0(hyper, rng) for _ in range(20_000)])
    assert p0.mean() == pytest.approx(0.3 / 5.3, abs=0.003)
