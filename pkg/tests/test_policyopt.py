import math

import numpy as np
import pytest

from gacl import policyopt
from gacl.gridnav import NavConfig
from gacl.policyopt import ActorCritic, PPOConfig, collect, empirical_value, gae, make_agent
from gacl.rng import stream

from conftest import empty_task
from oracles import grad_check


def scripted_agent(v=5.0, w=0.0, log_std=-5.0):
    agent = make_agent(rng=stream(0, "init"))
    for wt in agent.policy.weights:
        wt[...] = 0.0
    agent.policy.biases[-1][...] = [v, w]
    agent.log_std[...] = log_std
    return agent


def diagonal_task():
    return empty_task(start=(2.5, 2.5, math.pi / 4))


def test_scripted_policy_reaches_goal():
    batch = collect(scripted_agent(), [diagonal_task()], 4, 128, stream(0, "c"))
    assert batch.status == ["reached_goal"] * 4


def test_horizon_one():
    batch = collect(make_agent(rng=stream(1, "i")), [empty_task()], 5, 1, stream(0, "c"))
    assert list(batch.lengths) == [1] * 5
    assert all(s in ("timed_out", "collided", "reached_goal") for s in batch.status)
    assert batch.dones[:, 0].all()


def test_collect_deterministic_in_seed():
    agent = make_agent(rng=stream(1, "i"))
    a = collect(agent, [empty_task()], 6, 64, stream(7, "c"))
    b = collect(agent, [empty_task()], 6, 64, stream(7, "c"))
    assert np.array_equal(a.obs, b.obs) and np.array_equal(a.rewards, b.rewards) and a.status == b.status


def test_collect_prefix_consistent():
    agent = make_agent(rng=stream(1, "i"))
    big = collect(agent, [empty_task()], 16, 128, stream(7, "c"))
    small = collect(agent, [empty_task()], 8, 128, stream(7, "c"))
    assert np.array_equal(big.rewards[:8], small.rewards)
    assert np.array_equal(big.discounted_returns(0.99)[:8], small.discounted_returns(0.99))


def test_logprobs_recorded_pre_clip():
    agent = scripted_agent(v=5.0, log_std=0.0)
    batch = collect(agent, [empty_task()], 2, 4, stream(0, "c"))
    assert np.all(batch.actions[:, 0, 0] > 2.0) or np.any(batch.actions[:, :, 0] > 2.0)
    assert np.all(batch.speeds[batch.mask] <= 2.0)
    from gacl.tensorcore import gaussian_logprob

    mean = agent.policy(batch.obs[0, 0])
    assert batch.logp[0, 0] == pytest.approx(float(gaussian_logprob(mean, agent.log_std, batch.actions[0, 0])))


def test_tasks_cycle_across_envs(small_refs):
    batch = collect(make_agent(rng=stream(1, "i")), small_refs.tasks[:3], 7, 2, stream(0, "c"))
    assert [batch.tasks.index(t) for t in batch.tasks] == [0, 1, 2, 0, 1, 2, 0]


def test_gae_lambda_zero_is_td():
    r = np.array([1.0, -0.5, 2.0])
    v = np.array([0.3, 0.1, -0.2])
    d = np.array([False, False, True])
    adv, _ = gae(r, v, d, 0.9, 0.0)
    np.testing.assert_allclose(adv, [1.0 + 0.9 * 0.1 - 0.3, -0.5 + 0.9 * -0.2 - 0.1, 2.0 + 0.2], atol=1e-15)


def test_gae_returns_geometric():
    _, ret = gae([1.0, 1.0, 1.0], [0.0, 0.0, 0.0], [False, False, True], 0.99, 1.0)
    assert ret[0] == pytest.approx(2.9701, abs=1e-12)


def test_gae_length_mismatch():
    with pytest.raises(ValueError):
        gae([1.0], [0.0, 0.0], [True], 0.99, 0.95)


def test_discounted_return_closed_form():
    rng = np.random.default_rng(0)
    for _ in range(20):
        t_len = int(rng.integers(1, 200))
        c = float(rng.normal())
        g = float(rng.uniform(0.5, 0.999))
        want = c * (1 - g**t_len) / (1 - g)
        assert abs(policyopt.discounted_return(np.full(t_len, c), g) - want) < 1e-12


def test_normalize_moments():
    rng = np.random.default_rng(1)
    a = policyopt.normalize(rng.normal(3.0, 5.0, size=1000))
    assert abs(a.mean()) < 1e-10 and abs(a.std() - 1.0) < 1e-8
    assert np.all(policyopt.normalize(np.full(5, 2.0)) == 0.0)


def _ppo_inputs(agent, rng, n=32):
    obs = rng.normal(size=(n, agent.obs_dim))
    mean = agent.policy(obs)
    act = mean + rng.normal(scale=0.5, size=mean.shape)
    logp_old = policyopt.gaussian_logprob(mean, agent.log_std, act) + rng.normal(scale=0.1, size=n)
    return obs, act, logp_old, rng.normal(size=n), rng.normal(size=n)


def test_ppo_loss_gradients_match_finite_differences():
    rng = np.random.default_rng(2)
    for draw in range(5):
        agent = make_agent(rng=stream(draw, "init"))
        agent.log_std[...] = rng.normal(scale=0.3, size=2)
        for w in agent.policy.weights:
            w *= 20.0  # move the policy off its near-zero init
        obs, act, logp_old, adv, ret = _ppo_inputs(agent, rng)
        _, grads, _ = policyopt.ppo_loss_and_grads(agent, obs, act, logp_old, adv, ret)

        def f():
            return policyopt.ppo_loss_and_grads(agent, obs, act, logp_old, adv, ret)[0]

        assert grad_check(f, agent.named_params(), grads, rng, max_per_tensor=30) < 1e-4


def test_zero_advantages_leave_policy_gradient_zero():
    rng = np.random.default_rng(3)
    agent = make_agent(rng=stream(0, "init"))
    obs, act, logp_old, _, ret = _ppo_inputs(agent, rng)
    _, grads, _ = policyopt.ppo_loss_and_grads(agent, obs, act, logp_old, np.zeros(len(obs)), ret)
    assert all(np.all(g == 0) for k, g in grads.items() if k.startswith("pi."))
    assert np.all(grads["log_std"] == -agent.cfg.c_entropy)
    assert any(np.any(g != 0) for k, g in grads.items() if k.startswith("vf."))


def test_ratio_one_surrogate_is_mean_advantage():
    rng = np.random.default_rng(4)
    agent = make_agent(rng=stream(0, "init"))
    obs, act, _, adv, ret = _ppo_inputs(agent, rng)
    logp = policyopt.gaussian_logprob(agent.policy(obs), agent.log_std, act)
    _, _, info = policyopt.ppo_loss_and_grads(agent, obs, act, logp, adv, ret)
    assert -info["policy_loss"] == pytest.approx(adv.mean(), abs=1e-12)
    assert info["clip_frac"] == 0.0


def test_ppo_update_keeps_ratios_finite():
    agent = make_agent(rng=stream(0, "init"))
    batch = collect(agent, [empty_task()], 8, 64, stream(0, "c"))
    policyopt.ppo_update(agent, batch, stream(0, "u"))
    mask = batch.mask
    logp = policyopt.gaussian_logprob(agent.policy(batch.obs[mask]), agent.log_std, batch.actions[mask])
    assert np.all(np.isfinite(np.exp(logp - batch.logp[mask])))


def test_immediate_collision_value():
    nav = NavConfig(dt=1.0)
    agent = scripted_agent(v=5.0, log_std=-5.0)
    task = empty_task(start=(2.5, 2.5, math.pi))
    value = empirical_value(agent, task, 4, 0.99, stream(0, "v"), nav=nav)
    d0 = math.hypot(11, 11)
    d1 = math.hypot(13.5 - 0.5, 11)
    assert value == pytest.approx(d0 - d1 - 0.01 - 10.0, abs=1e-9)


def test_near_deterministic_value_has_no_spread():
    agent = scripted_agent()
    one = empirical_value(agent, diagonal_task(), 1, 0.99, stream(0, "v"))
    many = empirical_value(agent, diagonal_task(), 64, 0.99, stream(1, "v"))
    assert many == pytest.approx(one, rel=1e-3)


def test_small_value_estimate_within_two_standard_errors():
    agent = make_agent(rng=stream(3, "init"))
    task = empty_task()
    big = collect(agent, [task], 256, 128, stream(0, "big")).discounted_returns(0.99)
    est = empirical_value(agent, task, 8, 0.99, stream(0, "small"))
    se = big.std() / math.sqrt(8)
    assert abs(est - big.mean()) <= 2 * se


def test_empirical_value_reuses_matching_batch():
    agent = make_agent(rng=stream(3, "init"))
    task = empty_task()
    batch = collect(agent, [task], 16, 128, stream(0, "s"))
    reused = empirical_value(agent, task, 8, 0.99, stream(99, "unused"), batch=batch)
    fresh = empirical_value(agent, task, 8, 0.99, stream(0, "s"))
    assert reused == fresh


def test_student_and_antagonist_share_construction():
    cfg = PPOConfig()
    a = make_agent(cfg=cfg, rng=stream(0, "a"))
    b = make_agent(cfg=cfg, rng=stream(0, "b"))
    assert a.cfg is b.cfg
    assert a.policy.sizes == b.policy.sizes == (23, 64, 64, 2)
    assert a.value.sizes == (23, 64, 64, 1)


def test_agent_checkpoint_roundtrip(tmp_path):
    a = make_agent(rng=stream(0, "a"))
    a.save(tmp_path / "s.ckpt")
    b = make_agent(rng=stream(1, "a")).load(tmp_path / "s.ckpt")
    x = np.random.default_rng(0).normal(size=23)
    assert np.array_equal(a.policy(x), b.policy(x)) and np.array_equal(a.log_std, b.log_std)
