import numpy as np
import pytest

from igasil.buffers import Transition
from igasil.gasil import (
    Discriminator,
    ImitationSchedule,
    RunningNorm,
    reward_from_d,
    reward_from_logit,
    shape_rewards,
)


def make_disc(obs_dim=3, act_dim=2, seed=0, **kw):
    return Discriminator(obs_dim, act_dim, hidden=16,
                         init_rng=np.random.default_rng(seed), **kw)


def pairs_from(rng, n, obs_dim, act_dim, shift=0.0):
    return [(rng.normal(size=obs_dim) + shift, rng.normal(size=act_dim) + shift)
            for _ in range(n)]


# ----------------------------------------------------------- reward function


def test_reward_zero_at_half():
    assert abs(reward_from_d(0.5)) <= 1e-12


def test_reward_reference_value():
    assert reward_from_d(0.9) == pytest.approx(2.197224577336219, rel=1e-12)


def test_reward_antisymmetry():
    rng = np.random.default_rng(0)
    p = rng.uniform(1e-6, 1 - 1e-6, size=1000)
    assert np.max(np.abs(reward_from_d(p) + reward_from_d(1 - p))) <= 1e-12


def test_reward_strictly_increasing_in_d():
    grid = np.linspace(1e-9, 1 - 1e-9, 10_001)
    vals = reward_from_d(grid)
    assert np.all(np.diff(vals) > 0)


def test_reward_forms_signs():
    z = np.linspace(-19, 19, 101)
    assert np.all(reward_from_logit(z, "pos_biased") > 0)
    assert np.all(reward_from_logit(z, "neg_biased") < 0)
    np.testing.assert_allclose(reward_from_logit(z, "unbiased"), z)
    with pytest.raises(ValueError):
        reward_from_logit(z, "fancy")


def test_reward_clamped_finite_for_extreme_logits():
    assert reward_from_logit(1e9) == 20.0
    assert reward_from_logit(-1e9) == -20.0
    assert np.isfinite(reward_from_logit(np.array([1e9]), "pos_biased")).all()


# ----------------------------------------------------------- discriminator


def test_disc_uncertain_objective_is_two_log_half():
    d = make_disc()
    for p in d.net.params():
        p[...] = 0.0  # D == 0.5 everywhere
    rng = np.random.default_rng(1)
    e = pairs_from(rng, 8, 3, 2)
    p = pairs_from(rng, 8, 3, 2)
    eo = np.stack([x[0] for x in e])
    ea = np.stack([x[1] for x in e])
    po = np.stack([x[0] for x in p])
    pa = np.stack([x[1] for x in p])
    assert d.objective(eo, ea, po, pa) == pytest.approx(-1.3862943611198906, rel=1e-12)


def test_disc_gradients_match_finite_differences():
    d = make_disc(normalize_obs=False)
    rng = np.random.default_rng(2)
    e = pairs_from(rng, 4, 3, 2)
    p = pairs_from(rng, 4, 3, 2, shift=0.5)
    eo, ea = np.stack([x[0] for x in e]), np.stack([x[1] for x in e])
    po, pa = np.stack([x[0] for x in p]), np.stack([x[1] for x in p])
    ex = d._stack(eo, ea)
    px = d._stack(po, pa)
    _, grads = d._ascent_grads(ex, px)
    grads = grads.arrays()
    h = 1e-5
    for pi, (param, g) in enumerate(zip(d.net.params(), grads)):
        flat, gflat = param.ravel(), g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = d.objective(eo, ea, po, pa)
            flat[i] = orig - h
            down = d.objective(eo, ea, po, pa)
            flat[i] = orig
            num = (up - down) / (2 * h)
            denom = max(abs(num), abs(gflat[i]), 1e-6)
            assert abs(gflat[i] - num) / denom <= 1e-4, f"param {pi} entry {i}"


def test_disc_separates_disjoint_classes():
    d = make_disc(seed=3)
    rng = np.random.default_rng(3)
    expert = [(rng.normal(size=3) + 3.0, rng.normal(size=2) + 3.0) for _ in range(64)]
    policy = [(rng.normal(size=3) - 3.0, rng.normal(size=2) - 3.0) for _ in range(64)]
    for _ in range(500):
        d.update(expert, policy, steps=1)
    eo, ea = np.stack([x[0] for x in expert]), np.stack([x[1] for x in expert])
    po, pa = np.stack([x[0] for x in policy]), np.stack([x[1] for x in policy])
    assert d.predict_d(eo, ea).mean() > 0.9
    assert d.predict_d(po, pa).mean() < 0.1


def test_disc_stays_uncertain_on_identical_distributions():
    d = make_disc(seed=4)
    rng = np.random.default_rng(4)
    for _ in range(300):
        e = pairs_from(rng, 32, 3, 2)
        p = pairs_from(rng, 32, 3, 2)
        d.update(e, p, steps=1)
    held = pairs_from(rng, 256, 3, 2)
    ho, ha = np.stack([x[0] for x in held]), np.stack([x[1] for x in held])
    dvals = d.predict_d(ho, ha)
    assert abs(dvals.mean() - 0.5) < 0.2
    eo, ea = ho[:128], ha[:128]
    po, pa = ho[128:], ha[128:]
    assert d.objective(eo, ea, po, pa) >= 2 * np.log(0.5) - 0.2


def test_disc_update_improves_objective():
    d = make_disc(seed=5)
    rng = np.random.default_rng(5)
    expert = [(rng.normal(size=3) + 2.0, rng.normal(size=2)) for _ in range(32)]
    policy = [(rng.normal(size=3) - 2.0, rng.normal(size=2)) for _ in range(32)]
    before, after = d.update(expert, policy, steps=50)
    assert after > before


def test_disc_one_hot_encoding():
    d = Discriminator(2, 4, hidden=8, init_rng=np.random.default_rng(0))
    np.testing.assert_array_equal(d.encode_action(2), [0, 0, 1, 0])
    np.testing.assert_array_equal(d.encode_action(np.int64(0)), [1, 0, 0, 0])
    cont = Discriminator(2, 2, hidden=8, init_rng=np.random.default_rng(0))
    np.testing.assert_array_equal(cont.encode_action(np.array([0.3, -0.5])), [0.3, -0.5])


def test_disc_mismatched_batch_sizes_rejected():
    d = make_disc()
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        d.update(pairs_from(rng, 4, 3, 2), pairs_from(rng, 5, 3, 2))


def test_disc_empty_batch_is_noop():
    d = make_disc()
    assert d.update([], []) is None


def test_disc_d_strictly_inside_unit_interval():
    d = make_disc(seed=6)
    for p in d.net.params():
        p[...] = 100.0  # saturate the logits
    obs = np.ones((4, 3)) * 50
    act = np.ones((4, 2))
    dv = d.predict_d(obs, act)
    assert np.all(dv > 0) and np.all(dv < 1)


def test_disc_save_load_round_trip(tmp_path):
    d = make_disc(seed=7)
    rng = np.random.default_rng(7)
    d.update(pairs_from(rng, 8, 3, 2), pairs_from(rng, 8, 3, 2), steps=3)
    path = tmp_path / "disc.mlp"
    d.save(path)
    d2 = make_disc(seed=99)
    d2.load_weights(path)
    obs, act = rng.normal(size=(5, 3)), rng.normal(size=(5, 2))
    np.testing.assert_array_equal(d.imitation_reward(obs, act), d2.imitation_reward(obs, act))


# ----------------------------------------------------------- reward shaping


def _transition(reward, obs=None, action=None):
    o = np.zeros(3) if obs is None else obs
    a = np.zeros(2) if action is None else action
    return Transition(o, a, reward, o, False, None)


def test_shape_rewards_arithmetic():
    d = make_disc()
    for p in d.net.params():
        p[...] = 0.0  # r_imit == 0 everywhere
    batch = [_transition(-15.0)]
    out = shape_rewards(batch, d, 1.0)
    assert out[0].reward == -15.0


def test_shape_rewards_lambda_zero_is_identity():
    d = make_disc(seed=8)
    batch = [_transition(r) for r in (-2.0, 0.0, 3.5)]
    out = shape_rewards(batch, d, 0.0)
    assert [t.reward for t in out] == [-2.0, 0.0, 3.5]


def test_shape_rewards_preserves_other_fields_and_buffers():
    d = make_disc(seed=9)
    rng = np.random.default_rng(9)
    batch = [_transition(1.0, rng.normal(size=3), rng.normal(size=2)) for _ in range(4)]
    out = shape_rewards(batch, d, 0.7)
    for orig, new in zip(batch, out):
        assert new.obs is orig.obs and new.next_obs is orig.next_obs
        assert new.action is orig.action and new.done == orig.done
        assert orig.reward == 1.0  # source batch untouched
        expected = 1.0 + 0.7 * d.imitation_reward(orig.obs[None], orig.action[None])[0]
        assert new.reward == pytest.approx(expected, rel=1e-12)


def test_shape_rewards_known_value():
    # r=0, lambda=0.5, r_imit forced to 2 via a bias-only net
    d = make_disc()
    for p in d.net.params():
        p[...] = 0.0
    d.net.biases[-1][0] = 2.0
    out = shape_rewards([_transition(0.0)], d, 0.5)
    assert out[0].reward == pytest.approx(1.0, rel=1e-12)


# ----------------------------------------------------------- schedule


def test_schedule_start_and_constant():
    s = ImitationSchedule(0.25, 1.0, 2.0)
    assert s.value(0) == 0.25
    assert s.value(10_000) == 0.25


def test_schedule_saturation_episode():
    s = ImitationSchedule(0.1, 1.0005, 1.0)
    first = next(n for n in range(20_000) if s.value(n) >= s.lambda_max)
    assert first == 4607  # solve 0.1 * 1.0005^n = 1.0
    assert s.value(first - 1) < 1.0
    assert s.value(first) == 1.0


def test_schedule_monotone_and_bounded():
    s = ImitationSchedule(0.01, 1.001, 0.75)
    vals = [s.value(n) for n in range(0, 30_000, 250)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert max(vals) <= 0.75


def test_schedule_auto_reaches_max_at_30_percent():
    s = ImitationSchedule.auto(0.1, 1.0, episodes=20_000)
    assert s.value(5999) <= 1.0
    assert s.value(6000) == pytest.approx(1.0)
    assert s.value(20_000) == 1.0


def test_schedule_overflow_safe():
    s = ImitationSchedule(0.1, 1.01, 1.0)
    assert s.value(10_000_000) == 1.0


# ----------------------------------------------------------- running norm


def test_running_norm_whitens():
    rng = np.random.default_rng(0)
    data = rng.normal(loc=5.0, scale=3.0, size=(2000, 4))
    norm = RunningNorm(4)
    norm.update(data)
    out = (data - norm.mean) / norm.std()
    assert np.all(np.abs(out.mean(axis=0)) < 0.1)
    assert np.all(np.abs(out.std(axis=0) - 1.0) < 0.1)


def test_running_norm_constant_feature_safe():
    norm = RunningNorm(2)
    norm.update(np.ones((50, 2)))
    out = norm.normalize(np.ones(2))
    assert np.all(np.isfinite(out))


def test_running_norm_save_load(tmp_path):
    norm = RunningNorm(3)
    norm.update(np.random.default_rng(1).normal(size=(100, 3)))
    norm.save(tmp_path / "s.norm")
    loaded = RunningNorm.load(tmp_path / "s.norm")
    x = np.array([0.5, -1.0, 2.0])
    np.testing.assert_array_equal(norm.normalize(x), loaded.normalize(x))
