import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from dbnwp import rbm as R
from dbnwp.numerics import make_rng


def small_params():
    return R.RbmParams([[0.5, -1.0], [0.25, 0.75], [-0.5, 0.1]], [0.1, -0.2, 0.3], [-0.4, 0.6])


@st.composite
def tiny_rbms(draw, max_units=8):
    nv = draw(st.integers(1, max_units - 1))
    nh = draw(st.integers(1, max_units - nv))
    seed = draw(st.integers(0, 2**32))
    scale = draw(st.floats(0.1, 3.0))
    rng = np.random.default_rng(seed)
    return R.RbmParams(rng.normal(0, scale, (nv, nh)), rng.normal(0, scale, nv), rng.normal(0, scale, nh))


def test_energy_of_all_positive_form():
    p = R.RbmParams.from_positive_form([[2.0]], [3.0], [5.0])
    assert R.energy(p, [1], [1]) == 10.0
    assert R.energy(p, [0], [0]) == 0.0
    W, b, c = p.to_positive_form()
    assert W.tolist() == [[2.0]] and b.tolist() == [3.0] and c.tolist() == [5.0]


def test_energy_matches_oracle_and_checks_lengths():
    p = small_params()
    for v in oracles.states(3):
        for h in oracles.states(2):
            assert R.energy(p, v, h) == pytest.approx(oracles.energy(p.W.tolist(), p.b, p.c, v, h), abs=1e-14)
    with pytest.raises(ValueError, match="length"):
        R.energy(p, [1, 0], [1, 0])


def test_partition_function_frozen_and_oracle():
    p = small_params()
    _, z = oracles.joint(p.W.tolist(), p.b.tolist(), p.c.tolist())
    assert R.partition_function(p) == pytest.approx(z, rel=1e-14)
    assert R.partition_function(p) == pytest.approx(46.04493189038669, rel=1e-14)
    assert R.joint_probability(p, [1, 0, 1], [0, 1]) == pytest.approx(0.024002010051976778, rel=1e-13)


def test_zero_params_are_uniform():
    p = R.RbmParams.zeros(2, 3)
    assert R.partition_function(p) == 32.0
    assert R.joint_probability(p, [0, 1], [1, 1, 0]) == 1 / 32


def test_enumeration_guard():
    big = R.RbmParams.zeros(20, 10)
    with pytest.raises(ValueError, match="enumeration"):
        R.partition_function(big)
    with pytest.raises(ValueError):
        R.joint_probability(big, np.zeros(20), np.zeros(10))


def test_conditional_examples():
    p = R.RbmParams.zeros(3, 4)
    assert np.array_equal(R.hidden_given_visible(p, [1, 0, 1]), np.full(4, 0.5))
    p = R.RbmParams(np.zeros((2, 1)), np.zeros(2), [1000.0])
    assert R.hidden_given_visible(p, [0, 0])[0] == 1.0
    with pytest.raises(ValueError, match="width"):
        R.hidden_given_visible(p, [0, 0, 0])
    with pytest.raises(ValueError, match="width"):
        R.visible_given_hidden(p, [0, 0])


@given(tiny_rbms())
def test_conditionals_match_enumerated_marginals(p):
    table, _ = oracles.joint(p.W.tolist(), p.b.tolist(), p.c.tolist())
    for v in oracles.states(p.n_visible):
        got = R.hidden_given_visible(p, v)
        for j in range(p.n_hidden):
            assert abs(got[j] - oracles.hidden_marginal(table, v, j)) < 1e-10
    for h in oracles.states(p.n_hidden):
        got = R.visible_given_hidden(p, h)
        for i in range(p.n_visible):
            assert abs(got[i] - oracles.visible_marginal(table, h, i)) < 1e-10


@given(tiny_rbms(max_units=10))
def test_joint_table_normalized(p):
    _, _, P = R.joint_table(p)
    assert abs(P.sum() - 1.0) < 1e-12
    assert np.all(P >= 0)


@given(tiny_rbms())
def test_free_energy_gives_visible_marginal(p):
    V, _, P = R.joint_table(p)
    f = R.free_energy(p, V)
    w = np.exp(-(f - f.min()))
    assert np.allclose(w / w.sum(), P.sum(axis=1), atol=1e-12)


def test_batch_conditionals_match_rows():
    p = small_params()
    batch = np.array([[1, 0, 1], [0, 1, 1.0]])
    rows = np.array([R.hidden_given_visible(p, v) for v in batch])
    assert np.allclose(R.hidden_given_visible(p, batch), rows, atol=0, rtol=0)


def two_patterns(n=200):
    a = np.array([1, 1, 1, 0, 0, 0.0])
    return np.array([a if i % 2 else 1 - a for i in range(n)])


def test_zero_learning_rate_is_identity():
    start = R.init_rbm(6, 4, make_rng(0))
    cfg = R.CdConfig(learning_rate=0.0, epochs=3, batch_size=7)
    out = R.train_rbm(two_patterns(), 4, cfg, make_rng(1), init=start)
    assert np.array_equal(out.params.W, start.W)
    assert np.array_equal(out.params.b, start.b)
    assert np.array_equal(out.params.c, start.c)


def test_cd_reduces_reconstruction_error():
    cfg = R.CdConfig(learning_rate=0.9, momentum=0.05, epochs=100, batch_size=100)
    out = R.train_rbm(two_patterns(), 4, cfg, make_rng(2))
    assert len(out.errors) == 100
    assert out.errors[-1] <= 0.5 * out.errors[0]


def test_train_rbm_deterministic():
    cfg = R.CdConfig(epochs=5, batch_size=30)
    a = R.train_rbm(two_patterns(), 3, cfg, make_rng(4))
    b = R.train_rbm(two_patterns(), 3, cfg, make_rng(4))
    assert np.array_equal(a.params.W, b.params.W)
    assert a.errors == b.errors


def test_cd_update_on_degenerate_batch_only_moves_towards_it():
    # identical rows: the positive statistics are fixed, CD still returns finite params
    p = R.init_rbm(4, 3, make_rng(0))
    batch = np.tile([1.0, 0, 1, 0], (10, 1))
    new, err = R.cd_update(p, batch, R.CdConfig(), make_rng(1), R.Velocity.zeros_like(p))
    assert new.is_finite() and 0 <= err <= 1
    assert np.all(np.sign(new.b - p.b)[[0, 2]] >= 0)


def test_cd_momentum_accumulates():
    p = R.RbmParams.zeros(2, 2)
    vel = R.Velocity.zeros_like(p)
    cfg = R.CdConfig(learning_rate=0.5, momentum=0.5)
    batch = np.array([[1.0, 1.0]])
    p1, _ = R.cd_update(p, batch, cfg, make_rng(0), vel)
    first = vel.b.copy()
    # from zero parameters every probability is 1/2: db = 0.5 * (1 - 0.5)
    assert np.allclose(first, 0.25)
    R.cd_update(p1, batch, cfg, make_rng(0), vel)
    assert np.all(vel.b > 0.5 * first)


def test_cd1_expectation_tracks_exact_gradient():
    # with probabilities in the statistics and k=1 the expected CD-1 direction
    # is well aligned with the true gradient for a weakly coupled RBM
    rng = make_rng(5)
    p = R.RbmParams(rng.normal(0, 0.1, (4, 3)), np.zeros(4), np.zeros(3))
    data = (rng.random((400, 4)) < [0.9, 0.8, 0.2, 0.1]).astype(float)
    exact = R.log_likelihood_gradient(p, data)
    cfg = R.CdConfig(learning_rate=1.0, momentum=0.0)
    steps = []
    for s in range(200):
        new, _ = R.cd_update(p, data, cfg, make_rng(100 + s), R.Velocity.zeros_like(p))
        steps.append(np.concatenate([(new.W - p.W).ravel(), new.b - p.b, new.c - p.c]))
    cd = np.mean(steps, axis=0)
    g = np.concatenate([exact.W.ravel(), exact.b, exact.c])
    cosine = cd @ g / (np.linalg.norm(cd) * np.linalg.norm(g))
    assert cosine > 0.9


def test_exact_gradient_matches_finite_difference():
    p = small_params()
    data = np.array([[1, 0, 1], [1, 1, 0], [0, 0, 1.0]])

    def loglik():
        V, H, P = R.joint_table(p)
        z = R.partition_function(p)
        return float(np.mean(-R.free_energy(p, data)) - math.log(z))

    g = R.log_likelihood_gradient(p, data)
    for name in ("W", "b", "c"):
        fd = oracles.central_difference(loglik, getattr(p, name))
        assert np.allclose(fd, getattr(g, name), atol=1e-7)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported_with_location():
    p = R.RbmParams(np.full((2, 2), 1e308), np.zeros(2), np.zeros(2))
    vel = R.Velocity.zeros_like(p)
    vel.W = np.full((2, 2), 1e308)
    cfg = R.CdConfig(learning_rate=1.0, momentum=0.9)
    with pytest.raises(R.TrainingDivergedError, match="epoch 3, batch 2"):
        R.cd_update(p, np.array([[1.0, 1.0]]), cfg, make_rng(0), vel, where=" at epoch 3, batch 2")


def test_config_validation():
    with pytest.raises(ValueError):
        R.CdConfig(learning_rate=1.5)
    with pytest.raises(ValueError):
        R.CdConfig(momentum=1.0)
    with pytest.raises(ValueError):
        R.CdConfig(k=0)
    with pytest.raises(ValueError):
        R.train_rbm(np.array([[2.0, 0.0]]), 2, R.CdConfig(), make_rng(0))


def test_sampled_statistics_variant_runs():
    cfg = R.CdConfig(epochs=20, batch_size=50, positive_hidden_as_probability=False,
                     reconstruction_as_probability=False, final_hidden_as_probability=False, k=2)
    out = R.train_rbm(two_patterns(), 4, cfg, make_rng(6))
    assert out.params.is_finite()
    assert out.errors[-1] < out.errors[0]
