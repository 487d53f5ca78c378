import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kfspoof.design import SpoofSpec
from kfspoof.errors import DimensionError, NoConstraints
from kfspoof.kalman import GaussianBelief, build_gain_schedule, run_filter
from kfspoof.separation import (build_coeff_table, build_constraint_matrix, build_terms,
                                closed_form_separation, expected_separation)

from conftest import random_cov, random_system


def reference_terms(model, T, sigma0=np.eye(2)):
    s = build_gain_schedule(model, sigma0, T)
    return build_terms(model, s, s)


def dual_filter_difference(sys, sigma0, sigma0_t, m0, mt0, eps, rng):
    """Run clean and spoofed filters on the same noisy data; return diffs and B inputs."""
    T = len(eps)
    u = [rng.standard_normal(sys.n) for _ in range(T)]
    z = [rng.standard_normal(sys.m) * 3 for _ in range(T)]
    clean = build_gain_schedule(sys, sigma0, T)
    spoof = build_gain_schedule(sys, sigma0_t, T)
    m = run_filter(sys, GaussianBelief(m0, sigma0), clean, u, z)
    mt = run_filter(sys, GaussianBelief(mt0, sigma0_t), spoof, u, [zi + e for zi, e in zip(z, eps)])
    means = [m0] + [b.mean for b in m[:-1]]
    terms = build_terms(sys, clean, spoof, z, means, u)
    return terms, [a.mean - b.mean for a, b in zip(m, mt)]


def test_shared_prior_has_zero_b_terms(model):
    s = build_gain_schedule(model, np.eye(2), 5)
    terms = build_terms(model, s, s, [np.ones(2)] * 5, [np.zeros(2)] * 5, [np.ones(2)] * 5)
    assert not terms.gains_differ
    assert all(np.array_equal(b, np.zeros(2)) for b in terms.b_vecs)


def test_first_a_matrix(model):
    assert np.allclose(reference_terms(model, 1).a_mats[0], 0.25 * np.eye(2))


def test_full_correction_annihilates_memory(model):
    # K = I when the measurement is noise free
    sys = model.with_noise(Q=1e-14 * np.eye(2))
    terms = reference_terms(sys, 3)
    assert np.allclose(terms.a_mats[1], 0.0, atol=1e-12)


def test_b_inputs_all_or_nothing(model):
    s = build_gain_schedule(model, np.eye(2), 2)
    with pytest.raises(ValueError):
        build_terms(model, s, s, clean_measurements=[np.ones(2)] * 2)
    with pytest.raises(DimensionError):
        build_terms(model, s, build_gain_schedule(model, np.eye(2), 3))


def test_closed_form_examples(model):
    terms = reference_terms(model, 3)
    zero = [np.zeros(2)] * 3
    assert np.allclose(closed_form_separation(terms, np.zeros(2), zero, 3), 0.0)
    eps = [np.array([2.0, 0.0])] + zero[1:]
    assert np.allclose(closed_form_separation(terms, np.zeros(2), eps, 1), [-1.5, 0.0])


def test_realized_separation_needs_b_when_gains_differ(model):
    clean = build_gain_schedule(model, np.eye(2), 2)
    spoof = build_gain_schedule(model, 1.5 * np.eye(2), 2)
    terms = build_terms(model, clean, spoof)
    with pytest.raises(ValueError):
        closed_form_separation(terms, np.zeros(2), [np.zeros(2)] * 2, 2)
    # the expectation is still available
    expected_separation(terms, np.zeros(2), [np.zeros(2)] * 2, 2)


def test_expected_separation_three_steps(model):
    terms = reference_terms(model, 3)
    bias = np.ones(2)
    by_hand = terms.a_mats[2] @ terms.a_mats[1] @ terms.a_mats[0] @ bias
    got = expected_separation(terms, bias, [np.zeros(2)] * 3, 3)
    assert np.allclose(got, by_hand, atol=1e-14)
    assert np.allclose(expected_separation(terms, np.zeros(2), [np.zeros(2)] * 3, 3), 0.0)


def test_expected_separation_matches_monte_carlo(model):
    rng = np.random.default_rng(5)
    T, N = 4, 10000
    clean = build_gain_schedule(model, np.eye(2), T)
    spoof = build_gain_schedule(model, 1.5 * np.eye(2), T)
    terms = build_terms(model, clean, spoof)
    bias = np.array([1.0, 1.0])
    eps = [np.array([0.3, -0.2])] * T
    samples = np.zeros((N, 2))
    for n in range(N):
        m0 = bias + rng.standard_normal(2)
        # realized data drawn from the clean filter's own predictive model
        x = m0 + rng.standard_normal(2)
        z, u = [], [np.ones(2)] * T
        for _ in range(T):
            x = x + 1.0 + rng.standard_normal(2) * np.sqrt(0.5)
            z.append(x + rng.standard_normal(2) * np.sqrt(0.5))
        m = run_filter(model, GaussianBelief(m0, np.eye(2)), clean, u, z)
        mt = run_filter(model, GaussianBelief(np.zeros(2), 1.5 * np.eye(2)), spoof, u,
                        [zi + e for zi, e in zip(z, eps)])
        samples[n] = m[-1].mean - mt[-1].mean
    want = expected_separation(terms, bias, eps, T)
    se = samples.std(axis=0, ddof=1) / np.sqrt(N)
    assert np.all(np.abs(samples.mean(axis=0) - want) <= 3 * se)


@given(st.integers(0, 2**32 - 1), st.booleans())
def test_closed_form_matches_dual_filter(seed, same_prior):
    rng = np.random.default_rng(seed)
    sys = random_system(rng)
    sigma0 = random_cov(rng)
    sigma0_t = sigma0 if same_prior else random_cov(rng)
    m0, mt0 = rng.standard_normal(2), rng.standard_normal(2)
    eps = [rng.standard_normal(2) for _ in range(6)]
    terms, diffs = dual_filter_difference(sys, sigma0, sigma0_t, m0, mt0, eps, rng)
    for t in range(1, 7):
        got = closed_form_separation(terms, m0 - mt0, eps, t)
        assert np.abs(got - diffs[t - 1]).max() <= 1e-9 * max(1.0, np.abs(diffs[t - 1]).max())


@given(st.integers(0, 2**32 - 1))
def test_phi_recursion(seed):
    rng = np.random.default_rng(seed)
    sys = random_system(rng)
    s = build_gain_schedule(sys, random_cov(rng), 8)
    terms = build_terms(sys, s, s)
    table = build_coeff_table(terms)
    for t in range(1, 9):
        assert np.array_equal(table.phi[(t, t)], -terms.c_gain[t - 1])
        for i in range(1, t):
            assert np.abs(table.phi[(t, i)] - terms.a_mats[t - 1] @ table.phi[(t - 1, i)]).max() <= 1e-12


def test_constraint_row_single_step(model):
    table = build_coeff_table(reference_terms(model, 1))
    cs = build_constraint_matrix(table, SpoofSpec(1, [1.5]))
    assert cs.g.shape == (1, 2)
    assert np.allclose(np.abs(cs.g[0]), [0.75, 0.75])


def test_constraint_row_two_steps(model):
    table = build_coeff_table(reference_terms(model, 2))
    cs = build_constraint_matrix(table, SpoofSpec(2, [0.0, 2.0]))
    # layout [e1x, e2x, e1y, e2y]
    assert np.allclose(np.abs(cs.g[0]), [0.272727, 0.636364, 0.272727, 0.636364], atol=1e-6)
    assert cs.times == [2]


def test_constraint_shape_and_layout(model):
    d = np.zeros(20)
    d[[4, 9, 14]] = [1.77, 3.54, 5.30]
    cs = build_constraint_matrix(build_coeff_table(reference_terms(model, 20)), SpoofSpec(20, d))
    assert cs.g.shape == (3, 40) and cs.k == 3 and cs.times == [5, 10, 15]
    # zero columns after each constraint's step
    assert np.all(cs.g[0, 5:20] == 0.0) and np.all(cs.g[0, 25:] == 0.0)
    eps = np.arange(40.0).reshape(2, 20).T
    assert np.array_equal(cs.unpack(cs.pack(eps)), eps)


def test_offsets_and_blocks_reproduce_expectation(model):
    terms = reference_terms(model, 6)
    spec = SpoofSpec(6, [0, 1.0, 0, 2.0, 0, 3.0], m0_bias=[0.4, -0.3])
    cs = build_constraint_matrix(build_coeff_table(terms), spec)
    eps = np.random.default_rng(0).standard_normal((6, 2))
    for q, t in enumerate(cs.times):
        want = expected_separation(terms, spec.m0_bias, eps, t)
        assert np.allclose(cs.offsets[q] + cs.blocks[q] @ cs.pack(eps), want, atol=1e-12)


def test_no_constraints(model):
    with pytest.raises(NoConstraints):
        build_constraint_matrix(build_coeff_table(reference_terms(model, 3)), SpoofSpec(3, [0, 0, 0]))
    with pytest.raises(DimensionError):
        build_constraint_matrix(build_coeff_table(reference_terms(model, 3)), SpoofSpec(2, [1, 0]))
