import itertools
import math

import numpy as np
import pytest

from core.errors import InvalidParams
from core.params import HarnessParams
from exact.qm1 import (
    MINUS,
    PLUS,
    SIGNS,
    TransitionMatrix2,
    TwoPointLaw,
    atoms,
    check_ck_exact,
    check_harness_exact,
    conditional_law,
    harness_moments,
    harness_table,
    sample_qm1_path,
    sample_qm1_paths,
    support_residual,
    transition_matrix,
)

PARAMS = [HarnessParams(0.3, 0.7, -1.0), HarnessParams(0.0, 0.0, -1.0), HarnessParams(1.0, -0.5, -1.0)]
TIMES = [(0.5, 1.0, 2.0), (0.1, 0.2, 0.4)]
P = PARAMS[0]


def test_symmetric_atoms():
    law = atoms(2.0, HarnessParams(0.0, 0.0, -1.0))
    assert (law.a_plus, law.a_minus) == pytest.approx((math.sqrt(2.0), -math.sqrt(2.0)))
    assert (law.p_plus, law.p_minus) == pytest.approx((0.5, 0.5))


@pytest.mark.parametrize("params", PARAMS)
@pytest.mark.parametrize("t", [0.1, 0.5, 1.0, 3.0])
def test_atoms_are_centred_with_variance_t(params, t):
    law = atoms(t, params)
    assert law.mean == pytest.approx(0.0, abs=1e-12)
    assert law.second_moment == pytest.approx(t, abs=1e-12)
    roots = np.sort(np.roots([1.0, -(t * params.eta + params.theta), -t]))
    assert [law.a_minus, law.a_plus] == pytest.approx(list(roots), abs=1e-12)


def test_atoms_need_positive_time_and_q_minus_one():
    with pytest.raises(InvalidParams):
        atoms(0.0, P)
    with pytest.raises(InvalidParams):
        atoms(1.0, HarnessParams(0.3, 0.7, 0.5))


def test_two_point_law_validation():
    with pytest.raises(InvalidParams):
        TwoPointLaw(a_plus=1.0, a_minus=-1.0, p_plus=0.6, p_minus=0.6)
    with pytest.raises(InvalidParams):
        TwoPointLaw(a_plus=-1.0, a_minus=1.0, p_plus=0.5, p_minus=0.5)


@pytest.mark.parametrize("params", PARAMS)
@pytest.mark.parametrize("s,t", [(0.1, 0.2), (0.5, 1.0), (1.0, 4.0), (0.2, 0.4)])
def test_matrix_is_stochastic_and_preserves_means(params, s, t):
    m = transition_matrix(s, t, params)
    arr = m.as_array()
    assert np.all((arr >= -1e-15) & (arr <= 1 + 1e-15))
    np.testing.assert_allclose(arr.sum(axis=1), 1.0, atol=1e-14)
    law_s, law_t = atoms(s, params), atoms(t, params)
    for alpha in SIGNS:
        mean = sum(law_t.atom(beta) * m.entry(alpha, beta) for beta in SIGNS)
        assert mean == pytest.approx(law_s.atom(alpha), abs=1e-12)


def test_matrix_from_origin_repeats_the_marginal():
    m = transition_matrix(0.0, 1.0, P)
    law = atoms(1.0, P)
    assert m.as_array().tolist() == [[law.p_minus, law.p_plus], [law.p_minus, law.p_plus]]


def test_matrix_round_trip_and_labels():
    m = transition_matrix(0.5, 1.0, P)
    assert TransitionMatrix2.from_array(m.as_array()) == m
    assert m.to_dict()["labels"] == [MINUS, PLUS]


@pytest.mark.parametrize("params", PARAMS)
def test_supports_are_consistent(params):
    for s, t in [(0.1, 0.2), (0.5, 1.0), (0.5, 2.0)]:
        assert support_residual(s, t, params) <= 1e-10


@pytest.mark.parametrize("params", PARAMS)
@pytest.mark.parametrize("s,t,u", TIMES)
def test_chapman_kolmogorov(params, s, t, u):
    assert check_ck_exact(s, t, u, params) <= 1e-12


def test_chapman_kolmogorov_from_origin():
    assert check_ck_exact(0.0, 0.5, 1.0, P) <= 1e-12


def test_short_step_is_nearly_identity():
    m = transition_matrix(1.0, 1.0 + 1e-9, P).as_array()
    np.testing.assert_allclose(m, np.eye(2), atol=1e-8)


@pytest.mark.parametrize("params", PARAMS)
@pytest.mark.parametrize("s,t,u", TIMES)
def test_harness(params, s, t, u):
    assert check_harness_exact(s, t, u, params) <= 1e-10


def test_conditional_laws_are_normalised():
    for alpha, gamma in itertools.product(SIGNS, SIGNS):
        law = conditional_law(0.5, 1.0, 2.0, alpha, gamma, P)
        assert law.p_plus + law.p_minus == pytest.approx(1.0)


def test_symmetric_conditional_mean_interpolates():
    p = HarnessParams(0.0, 0.0, -1.0)
    s, t, u = 1.0, 2.0, 3.0
    law_s, law_u = atoms(s, p), atoms(u, p)
    for alpha, gamma in itertools.product(SIGNS, SIGNS):
        cond = conditional_law(s, t, u, alpha, gamma, p)
        x, z = law_s.atom(alpha), law_u.atom(gamma)
        assert cond.mean == pytest.approx((x + z) / 2, abs=1e-12)


def test_variance_uses_u_plus_s():
    mean, variance = harness_moments(1.0, 2.0, 3.0, 0.0, 0.0, HarnessParams(0.0, 0.0, -1.0))
    assert mean == 0.0
    assert variance == pytest.approx(1 * 1 / (3.0 + 1.0))


def test_harness_table_lists_all_pairs():
    table = harness_table(0.5, 1.0, 2.0, P)
    assert len(table) == 4
    assert set(zip(table.alpha, table.gamma)) == set(itertools.product(SIGNS, SIGNS))


def test_conditioning_needs_positive_start():
    with pytest.raises(InvalidParams):
        conditional_law(0.0, 1.0, 2.0, PLUS, PLUS, P)


# --- Sampling ---

def test_path_values_are_atoms():
    grid = [0.0, 0.5, 1.0, 2.0]
    path = sample_qm1_path(grid, 4, P)
    assert path.values[0] == 0.0
    for t, x in zip(grid[1:], path.values[1:]):
        law = atoms(t, P)
        assert x in (law.a_plus, law.a_minus)


def test_sampling_is_reproducible():
    a = sample_qm1_paths([0.0, 0.5, 1.0], 3, 1000, P)
    b = sample_qm1_paths([0.0, 0.5, 1.0], 3, 1000, P)
    np.testing.assert_array_equal(a.paths, b.paths)


def test_sampled_marginal_and_covariance():
    n = 100_000
    ens = sample_qm1_paths([0.0, 0.5, 1.0], 21, n, P)
    law = atoms(1.0, P)
    hits = ens.paths[:, 2] == law.a_plus
    assert abs(hits.mean() - law.p_plus) <= 4 * math.sqrt(law.p_plus * law.p_minus / n)
    prod = ens.paths[:, 1] * ens.paths[:, 2]
    assert abs(prod.mean() - 0.5) <= 4 * prod.std() / math.sqrt(n)
