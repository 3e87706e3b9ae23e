import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from complierprofile import (
    Dataset,
    Observation,
    ProfilingWarning,
    complier_mean,
    compute_moments,
    observable_strata_means,
    strata_means,
    strata_shares,
)
from complierprofile.errors import (
    DegenerateInstrumentError,
    EmptyDataError,
    MonotonicityViolationError,
)
from complierprofile.moments import MomentVector, contributions, decomposition_residual

from conftest import make_dataset, random_dataset


def test_ten_obs_moments(ten_obs):
    m = compute_moments(ten_obs, 0)
    got = (m.mu, m.mu_vnt, m.mu_vat, m.pi_vnt, m.pi_vat, m.pi_z)
    assert got == pytest.approx((2.8, 0.2, 0.6, 0.2, 0.1, 0.5), abs=1e-15)
    assert m.n == 10


def test_perfect_compliance_moments(perfect_compliance):
    m = compute_moments(perfect_compliance, 0)
    assert m.mu_vnt == m.mu_vat == m.pi_vnt == m.pi_vat == 0.0


@pytest.mark.parametrize("c", [-3.5, 0.0, 2.0, 1e3])
def test_constant_covariate_moments(c):
    rng = np.random.default_rng(3)
    data = random_dataset(rng, 50)
    data = make_dataset(data.z, data.d, np.full(50, c))
    m = compute_moments(data, 0)
    assert m.mu == pytest.approx(c, rel=1e-15, abs=0)
    assert m.mu_vnt == pytest.approx(c * m.pi_vnt, rel=1e-14, abs=1e-300)
    assert m.mu_vat == pytest.approx(c * m.pi_vat, rel=1e-14, abs=1e-300)


def test_moments_errors():
    with pytest.raises(EmptyDataError) as e:
        compute_moments(make_dataset([], [], np.empty((0, 1))), 0)
    assert e.value.code == "empty-data"
    with pytest.raises(DegenerateInstrumentError) as e:
        compute_moments(make_dataset([1, 1, 1], [1, 0, 1], [1.0, 2.0, 3.0]), 0)
    assert e.value.code == "degenerate-instrument"


def test_each_moment_is_mean_of_contributions(ten_obs):
    c = contributions(ten_obs.z, ten_obs.d, ten_obs.x[:, 0])
    m = compute_moments(ten_obs, 0)
    np.testing.assert_allclose(m.as_array(), c.mean(axis=0), rtol=1e-15)
    assert np.all(c[:, 1] == c[:, 0] * c[:, 3])
    assert np.all(c[:, 2] == c[:, 0] * c[:, 4])


def test_moments_bit_identical_under_permutation():
    rng = np.random.default_rng(11)
    data = random_dataset(rng, 997)
    base = compute_moments(data, 0)
    for _ in range(5):
        p = rng.permutation(data.n)
        shuffled = make_dataset(data.z[p], data.d[p], data.x[p])
        assert compute_moments(shuffled, 0) == base


def test_missing_values_dropped_per_covariate():
    x = np.array([[1.0, np.nan], [2.0, 5.0], [3.0, 6.0], [np.nan, 7.0], [4.0, 8.0]])
    data = make_dataset([1, 0, 1, 0, 1], [1, 0, 0, 1, 1], x)
    assert compute_moments(data, 0).n == 4
    assert compute_moments(data, 1).n == 4
    assert data.column(0)[3] == 1


def test_dataset_validation():
    with pytest.raises(ValueError):
        make_dataset([0, 2], [0, 1], [1.0, 2.0])
    with pytest.raises(ValueError):
        make_dataset([0, 1], [0, 1], [1.0, np.inf])
    with pytest.raises(ValueError):
        make_dataset([0, 1, 1], [0, 1], [1.0, 2.0])


def test_from_observations(ten_obs):
    obs = [Observation(int(z), int(d), (float(x),)) for z, d, x in
           zip(ten_obs.z, ten_obs.d, ten_obs.x[:, 0])]
    data = Dataset.from_observations(obs, ["x1"])
    assert compute_moments(data, 0) == compute_moments(ten_obs, 0)


# -- observable strata --------------------------------------------------------


def test_observable_means_ten_obs(ten_obs):
    assert observable_strata_means(ten_obs, 0) == (1.0, 6.0)


def test_observable_means_one_sided(perfect_compliance):
    with pytest.warns(ProfilingWarning) as rec:
        out = observable_strata_means(perfect_compliance, 0)
    assert out == (None, None)
    assert {w.message.code for w in rec} == {"one-sided-compliance"}


def test_observable_means_singleton():
    data = make_dataset([1, 1, 0, 0], [0, 1, 1, 0], [7.0, 2.0, 3.0, 4.0])
    assert observable_strata_means(data, 0).mu_nt == 7.0


# -- shares and complier mean -------------------------------------------------


def test_shares_ten_obs(ten_obs):
    sh = strata_shares(compute_moments(ten_obs, 0))
    assert (sh.pi_nt, sh.pi_at, sh.pi_co) == pytest.approx((0.4, 0.2, 0.4), abs=1e-15)
    assert sh.first_stage == sh.pi_co


def test_shares_perfect_compliance(perfect_compliance):
    sh = strata_shares(compute_moments(perfect_compliance, 0))
    assert (sh.pi_nt, sh.pi_at, sh.pi_co) == (0.0, 0.0, 1.0)


def test_monotonicity_violation_carries_shares():
    # only defier-looking units: z=1 -> d=0, z=0 -> d=1
    data = make_dataset([1, 1, 0, 0], [0, 0, 1, 1], [1.0, 2.0, 3.0, 4.0])
    with pytest.raises(MonotonicityViolationError) as e:
        strata_shares(compute_moments(data, 0))
    assert e.value.code == "monotonicity-or-relevance-violation"
    assert e.value.shares == pytest.approx((1.0, 1.0, -1.0))


def test_complier_mean_ten_obs(ten_obs):
    assert complier_mean(compute_moments(ten_obs, 0)) == pytest.approx(3.0, abs=1e-14)


def test_complier_mean_perfect_compliance_is_sample_mean(perfect_compliance):
    m = compute_moments(perfect_compliance, 0)
    assert complier_mean(m) == m.mu


def test_weak_complier_share_warns():
    m = MomentVector(mu=1.0, mu_vnt=0.3, mu_vat=0.2, pi_vnt=0.2475, pi_vat=0.24875,
                     pi_z=0.5, n=100)
    with pytest.warns(ProfilingWarning) as rec:
        complier_mean(m)
    assert rec[0].message.code == "weak-complier-share"
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        complier_mean(m, weak_threshold=0.001)


# -- properties ---------------------------------------------------------------


def test_decomposition_identity_ten_obs(ten_obs):
    m = compute_moments(ten_obs, 0)
    means = strata_means(ten_obs, 0)
    assert decomposition_residual(strata_shares(m), means) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(8, 400))
def test_invariants_random_data(seed, n):
    data = random_dataset(np.random.default_rng(seed), n)
    m = compute_moments(data, 0)
    assert 0 <= m.pi_vnt <= m.pi_z <= 1 and m.pi_vat <= 1 - m.pi_z
    sh = strata_shares(m)
    assert abs(sh.pi_nt + sh.pi_at + sh.pi_co - 1.0) <= 1e-12
    assert sh.first_stage == sh.pi_co
    means = strata_means(data, 0)
    assert decomposition_residual(sh, means) <= 1e-10


@settings(max_examples=100, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    a=st.floats(-100, 100).filter(lambda v: abs(v) > 1e-3),
    b=st.floats(-100, 100),
)
def test_affine_equivariance(seed, a, b):
    data = random_dataset(np.random.default_rng(seed), 60)
    mapped = make_dataset(data.z, data.d, a * data.x + b)
    before, after = strata_means(data, 0), strata_means(mapped, 0)
    for field in ("mu_co", "mu_at", "mu_nt", "mu_sample"):
        u, v = getattr(before, field), getattr(after, field)
        scale = abs(a) * (abs(u) + 1) + abs(b)
        assert abs(v - (a * u + b)) <= 1e-11 * scale


@pytest.mark.parametrize("c", [-2.0, 0.1, 3.0, 250.0])
def test_constant_covariate_complier_mean(c):
    rng = np.random.default_rng(5)
    for _ in range(20):
        data = random_dataset(rng, int(rng.integers(10, 300)))
        data = make_dataset(data.z, data.d, np.full(data.n, c))
        assert complier_mean(compute_moments(data, 0)) == pytest.approx(c, rel=1e-12)


def test_all_orderings_small_dataset(ten_obs):
    base = compute_moments(ten_obs, 0)
    for p in itertools.islice(itertools.permutations(range(10)), 0, 5000, 97):
        p = list(p)
        assert compute_moments(make_dataset(ten_obs.z[p], ten_obs.d[p], ten_obs.x[p]), 0) == base
