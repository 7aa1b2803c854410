import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from core.errors import InvalidParams, UnidentifiableRegime
from core.params import HarnessParams
from exact.q1 import (
    BINOMIAL,
    GAMMA,
    NEGATIVE_BINOMIAL,
    POINT_MASS,
    POISSON,
    DistributionSpec,
    MeixnerParams,
    boundary_time,
    check_q1_moments,
    identify_meixner,
    layout_families,
    marginal_moments,
    regime_report,
    sample_q1_path,
    sample_q1_paths,
    sample_table1,
    straddle_ks,
    transition_params,
    y_from_z,
)

P = HarnessParams(1.0, 1.0, 1.0)
ACCEPTANCE_GRID = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0]


def test_transition_params_from_origin():
    eta, theta, t = 0.7, 1.3, 0.9
    p = HarnessParams(eta, theta, 1.0)
    mp = transition_params(0.0, t, 0.0, p)
    assert (mp.theta_tilde, mp.tau_tilde, mp.t_tilde) == pytest.approx((t * eta + theta, eta * theta * t, t))


@pytest.mark.parametrize("s,t,x", [(0.0, 0.5, 0.0), (0.4, 2.0, 1.5), (2.0, 3.0, -0.2)])
def test_discriminant_is_a_square(s, t, x):
    p = HarnessParams(0.8, 1.2, 1.0)
    mp = transition_params(s, t, x, p)
    assert mp.discriminant == pytest.approx((t * p.eta - p.theta) ** 2)


def test_state_at_lower_edge_gives_point_mass():
    p = HarnessParams(0.8, 1.2, 1.0)
    mp = transition_params(0.2, 0.6, -1 / p.eta, p)
    assert mp.t_tilde == pytest.approx(0.0)
    assert identify_meixner(mp).family == POINT_MASS


def test_transition_params_preconditions():
    with pytest.raises(InvalidParams):
        transition_params(0.0, 1.0, 0.0, HarnessParams(-1.0, 1.0, 1.0))
    with pytest.raises(InvalidParams):
        transition_params(1.0, 0.5, 0.0, P)
    with pytest.raises(InvalidParams):
        transition_params(0.0, 1.0, -3.0, P)
    with pytest.raises(InvalidParams):
        transition_params(0.0, 1.0, 0.0, HarnessParams(1.0, 1.0, 0.5))


def test_identify_cases():
    poisson = identify_meixner(MeixnerParams(2.0, 0.0, 3.0))
    assert poisson.family == POISSON
    assert poisson.args["lam"] == pytest.approx(3.0 / 4.0)
    assert (poisson.scale, poisson.shift) == pytest.approx((2.0, -1.5))

    gamma = identify_meixner(MeixnerParams(-2.0, 1.0, 3.0))
    assert gamma.family == GAMMA
    assert gamma.args == pytest.approx({"r": 3.0, "sigma": 1.0})
    assert gamma.scale == -1.0

    nb = identify_meixner(MeixnerParams(3.0, 1.0, 2.0))
    assert nb.family == NEGATIVE_BINOMIAL
    assert nb.args["r"] == pytest.approx(2.0)
    assert nb.args["p"] == pytest.approx(2 * math.sqrt(5) / (3 + math.sqrt(5)))

    binom = identify_meixner(MeixnerParams(1.0, -1.0, 4.0))
    assert binom.family == BINOMIAL
    assert binom.args["n"] == 4
    assert binom.args["p"] == pytest.approx(0.5 * (1 - 1 / math.sqrt(5)))


@pytest.mark.parametrize(
    "mp",
    [MeixnerParams(2.0, 0.0, 3.0), MeixnerParams(-2.0, 1.0, 3.0), MeixnerParams(3.0, 1.0, 2.0), MeixnerParams(1.0, -1.0, 4.0)],
)
def test_identified_laws_are_centred(mp):
    assert identify_meixner(mp).mean == pytest.approx(0.0, abs=1e-12)


def test_unidentifiable_regimes():
    with pytest.raises(UnidentifiableRegime):
        identify_meixner(MeixnerParams(1.0, -1.0, 2.5))
    with pytest.raises(UnidentifiableRegime):
        identify_meixner(MeixnerParams(1.0, 1.0, 2.0))
    with pytest.raises(UnidentifiableRegime):
        identify_meixner(MeixnerParams(0.0, 0.0, 2.0))


def test_distribution_spec_ranges():
    with pytest.raises(InvalidParams):
        DistributionSpec(POISSON, args={"lam": -1.0})
    with pytest.raises(InvalidParams):
        DistributionSpec(NEGATIVE_BINOMIAL, args={"r": 1.0, "p": 1.5})
    with pytest.raises(InvalidParams):
        DistributionSpec("cauchy")


def test_layouts_hit_every_family():
    for params in (P, HarnessParams(0.5, 2.0, 1.0), HarnessParams(3.0, 0.4, 1.0)):
        rows = layout_families(params)
        assert [row["found"] for row in rows] == [row["expected"] for row in rows]
        assert {row["found"] for row in rows} == {NEGATIVE_BINOMIAL, GAMMA, POISSON, BINOMIAL}


def test_regime_report_model():
    report = regime_report(0.0, 0.5, 0.0, P)
    assert report.family == NEGATIVE_BINOMIAL
    assert report.discriminant == pytest.approx(0.25)
    assert "theta_tilde" in report.model_dump_json()


# --- Samplers ---

def test_table1_binomial_with_no_trials():
    rng = np.random.default_rng(0)
    spec = DistributionSpec(BINOMIAL, scale=2.0, shift=-0.5, args={"n": 0.0, "p": 0.3})
    assert np.all(sample_table1(spec, rng, 100) == -0.5)


@pytest.mark.parametrize(
    "spec,mean",
    [
        (DistributionSpec(POISSON, args={"lam": 2.5}), 2.5),
        (DistributionSpec(NEGATIVE_BINOMIAL, args={"r": 1.7, "p": 0.4}), 1.7 * 0.6 / 0.4),
        (DistributionSpec(GAMMA, args={"r": 2.0, "sigma": 0.5}), 1.0),
    ],
)
def test_table1_sample_means(spec, mean):
    n = 100_000
    draws = sample_table1(spec, np.random.default_rng(5), n)
    assert abs(draws.mean() - mean) <= 4 * draws.std() / math.sqrt(n)
    assert spec.mean == pytest.approx(mean)


def test_y_map_starts_at_zero_and_is_continuous_at_boundary():
    b = boundary_time(P)
    assert y_from_z(0.0, 0.0, P) == 0.0
    assert y_from_z(b, 2.0, P) == pytest.approx(2.0 - 1.0)


def test_path_starts_at_zero_and_is_reproducible():
    a = sample_q1_paths(ACCEPTANCE_GRID, 3, 500, P)
    b = sample_q1_paths(ACCEPTANCE_GRID, 3, 500, P)
    np.testing.assert_array_equal(a.paths, b.paths)
    assert np.all(a.paths[:, 0] == 0.0)
    assert list(sample_q1_path(ACCEPTANCE_GRID, 3, P).grid) == ACCEPTANCE_GRID


def test_boundary_time_is_not_reported():
    ens = sample_q1_paths([0.0, 0.5, 2.0], 1, 100, P)
    assert list(ens.grid) == [0.0, 0.5, 2.0]
    assert ens.paths.shape == (100, 3)


def test_states_after_boundary_stay_above_edge():
    ens = sample_q1_paths(ACCEPTANCE_GRID, 9, 20_000, P)
    after = ens.grid > boundary_time(P)
    assert np.all(ens.paths[:, after] >= -1 / P.eta - 1e-12)


def test_moments_match_on_acceptance_grid():
    table = check_q1_moments(ACCEPTANCE_GRID, 2024, 100_000, P)
    assert len(table) == 4 * (len(ACCEPTANCE_GRID) - 1)
    assert table["z"].max() <= 4.0


def test_marginal_moments_formula():
    t = 1.5
    m = marginal_moments(t, P)
    assert m[2] == pytest.approx(t)
    assert m[3] == pytest.approx((t * P.eta + P.theta) * t)
    assert m[4] == pytest.approx(3 * t**2 + ((t * P.eta + P.theta) ** 2 + 2 * P.eta * P.theta * t) * t)


@pytest.mark.parametrize("s,t", [(0.0, 2.0), (0.5, 1.5)])
def test_straddle_one_step_agrees_with_two_steps(s, t):
    assert straddle_ks(s, t, 17, 100_000, P) < 0.02


def test_straddle_needs_a_straddle():
    with pytest.raises(InvalidParams):
        straddle_ks(0.2, 0.8, 1, 100, P)


def test_one_step_marginal_matches_direct_identification():
    # Y_t = |θ − ηt|Z − min(θ, ηt)/(θη), Z ~ NB(1/(ηθ), |θ − ηt|/max(θ, ηt))
    p = HarnessParams(1.0, 0.5, 1.0)
    t, n = 2.0, 100_000
    rng = np.random.default_rng(4)
    eta, theta = p.eta, p.theta
    z = rng.negative_binomial(1 / (eta * theta), abs(theta - eta * t) / max(theta, eta * t), n)
    direct = abs(theta - eta * t) * z - min(theta, eta * t) / (theta * eta)
    sampled = sample_q1_paths([0.0, t], 8, n, p, through_boundary=False).paths[:, -1]
    assert ks_2samp(direct, sampled).statistic < 0.02
