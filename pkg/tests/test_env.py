import numpy as np
import pytest

from platoonsc import env as envm
from platoonsc import semantics as sem
from platoonsc.channel import SLOT_S, ScenarioConfig
from platoonsc.env import (AgentAction, PlatoonEnv, RewardConfig, decode_action,
                           delivery_delay_ms, pair_members)


def small_env(**kw):
    scenario = kw.pop("scenario", None) or ScenarioConfig(
        n_platoons=2, platoon_size=2, n_subchannels=2)
    return PlatoonEnv(scenario, kw.pop("semantic", None),
                      kw.pop("reward", None), seed=kw.pop("seed", 0), **kw)


def v2v_action(sub=0, p_text=0.8, p_image=0.1, u=10, members=1):
    return AgentAction(subchannel=sub, v2v=True, power_text_w=p_text,
                       power_image_w=p_image,
                       u_text=np.full(members, u, dtype=int),
                       u_image=np.full(members, u, dtype=int))


# decoding -----------------------------------------------------------------

def test_decode_argmax_and_tie_break():
    raw = np.zeros(envm.action_dim(4, 5))
    raw[:4] = [0.2, 0.9, -0.3, 0.1]
    a = decode_action(raw, 4, 5, 1.0, 30, 30)
    assert a.subchannel == 1
    raw[:4] = [0.5, 0.5, 0.5, 0.5]
    assert decode_action(raw, 4, 5, 1.0, 30, 30).subchannel == 0


def test_decode_power_endpoints_and_rescale():
    d = envm.action_dim(2, 2)
    raw = np.zeros(d)
    raw[2] = 1.0   # v2v mode
    raw[3] = -1.0  # text power at the low endpoint
    raw[4] = 1.0   # image power at the high endpoint
    a = decode_action(raw, 2, 2, 1.0, 30, 30)
    assert a.power_text_w == 0.0
    assert a.power_image_w == 1.0
    raw[3] = 1.0   # both at maximum: jointly rescaled onto the budget
    a = decode_action(raw, 2, 2, 1.0, 30, 30)
    assert a.power_text_w + a.power_image_w == pytest.approx(1.0)
    assert a.power_text_w == pytest.approx(0.5)


def test_decode_mode_and_uplink_power():
    d = envm.action_dim(2, 2)
    raw = np.zeros(d)
    raw[2] = -0.2  # uplink mode
    raw[4] = 1.0   # image power entry is ignored in uplink mode
    a = decode_action(raw, 2, 2, 1.0, 30, 30)
    assert not a.v2v
    assert a.power_image_w == 0.0


def test_decode_u_midpoint_and_bounds():
    d = envm.action_dim(2, 2)
    raw = np.zeros(d)
    a = decode_action(raw, 2, 2, 1.0, 30, 30)
    assert a.u_text[0] == 16  # round-half-up midpoint of [1, 30]
    raw[5] = -1.0
    raw[6] = 1.0
    a = decode_action(raw, 2, 2, 1.0, 30, 30)
    assert a.u_text[0] == 1
    assert a.u_image[0] == 30


def test_decode_rejects_wrong_dimension():
    with pytest.raises(ValueError):
        decode_action(np.zeros(5), 2, 2, 1.0, 30, 30)


def test_decoded_actions_always_feasible():
    rng = np.random.default_rng(0)
    for _ in range(500):
        raw = rng.uniform(-1, 1, envm.action_dim(4, 5))
        a = decode_action(raw, 4, 5, 1.0, 30, 30)
        a.validate(4, 1.0, 30, 30)


# pairing -----------------------------------------------------------------------

def test_pair_members_even_odd_single():
    assert pair_members(4).pairs == ((0, 1), (2, 3))
    assert pair_members(4).singles == ()
    assert pair_members(3).pairs == ((0, 1),)
    assert pair_members(3).singles == (2,)
    assert pair_members(1).pairs == ()
    assert pair_members(1).singles == (0,)
    assert pair_members(0) == pair_members(0)


# reset ---------------------------------------------------------------------------

def test_reset_deterministic_and_dimensions():
    e = small_env()
    a = e.reset(123)
    b = e.reset(123)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)
    assert len(a) == 2
    assert all(o.shape == (e.obs_dim,) for o in a)
    assert all(np.all(np.isfinite(o)) for o in a)


def test_reset_payload_component_full():
    e = small_env()
    obs = e.reset(5)
    for o in obs:
        assert o[-1] == pytest.approx(1.0)


def test_observation_dim_formula():
    for k, m in ((2, 2), (4, 5), (3, 4)):
        expected = k + k * (m - 1) + (m - 1) * k + k + 1
        assert envm.observation_dim(k, m) == expected


# stepping -------------------------------------------------------------------------

def test_step_distinct_subchannels_no_interference():
    e = small_env()
    e.reset(7)
    real = e._realization
    actions = [v2v_action(sub=0), v2v_action(sub=1)]
    outcome = e._evaluate_slot(actions)
    # against a co-channel joint action, separate channels can only help
    clash = e._evaluate_slot([v2v_action(sub=0), v2v_action(sub=0)])
    assert np.all(outcome.member_similarity >= clash.member_similarity - 1e-12)
    assert outcome.collisions == 0
    assert clash.collisions == 1


def test_step_zero_power_delivers_but_scores_floor():
    e = small_env()
    e.reset(9)
    a = [v2v_action(p_text=0.0, p_image=0.0, u=10),
         v2v_action(sub=1, u=10)]
    _, rewards, _, info = e.step(a)
    # the semantic rate is SINR-independent, so payload still flows
    assert info["delivered_suts"][0] == pytest.approx(72_000.0 * SLOT_S)
    assert info["slot_rate_suts"][0] == pytest.approx(72_000.0)
    # but the similarity hits its floor at zero SINR
    assert e._evaluate_slot(a).member_similarity[0, 0] == 0.0


def test_global_reward_is_mean_of_locals():
    e = small_env()
    e.reset(11)
    for _ in range(5):
        _, rewards, _, _ = e.step([v2v_action(), v2v_action(sub=1)])
        assert rewards.global_reward == pytest.approx(
            float(np.mean(rewards.local)), abs=1e-12)


def test_payload_accounting_monotone_and_bounded():
    e = small_env()
    e.reset(13)
    prev = e.residual_suts.copy()
    done = False
    while not done:
        _, _, done, info = e.step([v2v_action(u=5), v2v_action(sub=1, u=5)])
        assert np.all(info["residual_suts"] <= prev + 1e-12)
        assert np.all(info["residual_suts"] >= 0)
        prev = info["residual_suts"]
    assert np.all(info["hard_srs"] == 1.0)  # u=5 delivers 14400 > 4000 suts
    assert np.all(info["delay_ms"] <= 100.0)


def test_episode_length_and_done_flag():
    e = small_env()
    e.reset(15)
    for t in range(e.slots_per_episode):
        _, _, done, _ = e.step([v2v_action(), v2v_action(sub=1)])
    assert done
    assert e.slots_per_episode == 100


def test_hard_srs_implies_delay_within_budget():
    e = small_env()
    e.reset(17)
    done = False
    while not done:
        _, _, done, info = e.step([v2v_action(u=16), v2v_action(sub=1, u=30)])
    # u=30 cannot deliver 4000 suts in the window, u=16 can
    assert info["hard_srs"][0] == 1.0
    assert info["delay_ms"][0] < 100.0
    assert info["hard_srs"][1] == 0.0
    assert info["delay_ms"][1] == 100.0


def test_reward_bounds():
    e = small_env()
    e.reset(19)
    members = e.members
    bound = 0.5 + 0.5 * members
    for _ in range(20):
        _, rewards, _, _ = e.step([v2v_action(u=8), v2v_action(sub=1, u=8)])
        assert np.all(rewards.local >= 0.0)
        assert np.all(rewards.local <= bound + 1e-12)


def test_legacy_negative_delivery_sign():
    e = small_env(reward=RewardConfig(legacy_negative_delivery=True))
    e.reset(21)
    actions = [v2v_action(u=5), v2v_action(sub=1, u=5)]
    done = False
    while not done:
        _, rewards, done, info = e.step(actions)
    # once delivery saturates the logistic, the legacy form subtracts it
    expected = -0.5 * info["delivery_logistic"] + 0.5 * info["qoe"]
    assert np.allclose(rewards.local, expected)


def test_episode_bit_exact_reproducibility():
    seqs = []
    for _ in range(2):
        e = small_env(seed=3)
        obs = e.reset(99)
        trace = [np.concatenate(obs)]
        rew = []
        done = False
        while not done:
            obs, rewards, done, _ = e.step([v2v_action(), v2v_action(sub=1)])
            trace.append(np.concatenate(obs))
            rew.append(rewards.local.copy())
        seqs.append((np.stack(trace), np.stack(rew)))
    assert np.array_equal(seqs[0][0], seqs[1][0])
    assert np.array_equal(seqs[0][1], seqs[1][1])


def test_observations_track_previous_interference():
    e = small_env()
    obs0 = e.reset(23)
    k = e.scenario.n_subchannels
    # co-channel full-power slot must raise the interference block above
    # the noise-floor value observed initially
    base_interf = obs0[0][k + k * e.members: k + 2 * k * e.members + k]
    e.step([v2v_action(sub=0, p_text=1.0, p_image=0.0),
            v2v_action(sub=0, p_text=1.0, p_image=0.0)])
    obs1 = e._observations()
    new_interf = obs1[0][k + k * e.members: k + 2 * k * e.members + k]
    assert np.max(new_interf) > np.max(base_interf)


def test_uplink_mode_no_delivery_but_scores():
    e = small_env()
    e.reset(25)
    uplink = AgentAction(subchannel=0, v2v=False, power_text_w=1.0,
                         power_image_w=0.0, u_text=np.array([10]),
                         u_image=np.array([10]))
    _, rewards, _, info = e.step([uplink, v2v_action(sub=1)])
    assert info["delivered_suts"][0] == 0.0
    assert info["qoe"][0] > 0.0


def test_semantic_disabled_ignores_u_and_uses_bit_rate():
    e = small_env(reward=RewardConfig(semantic_enabled=False))
    e.reset(27)
    r1 = e._evaluate_slot([v2v_action(u=5), v2v_action(sub=1, u=5)])
    r2 = e._evaluate_slot([v2v_action(u=30), v2v_action(sub=1, u=30)])
    assert np.allclose(r1.qoe, r2.qoe)
    assert np.allclose(r1.slot_rate_suts, r2.slot_rate_suts)
    assert r1.slot_rate_suts[0] == pytest.approx(
        sem.traditional_rate(180e3, 4.0, 40))
    assert np.all(r1.member_similarity == 1.0)


def test_u_fixed_pins_symbol_lengths():
    e = small_env(reward=RewardConfig(u_fixed=7))
    e.reset(29)
    raw = np.zeros(e.act_dim)
    raw[2] = 1.0
    a = e.decode(raw)
    assert np.all(a.u_text == 7)
    assert np.all(a.u_image == 7)


def test_single_slot_objective_pure():
    e = small_env()
    e.reset(31)
    actions = [v2v_action(), v2v_action(sub=1)]
    before = e._realization.member_gain.copy()
    v1 = e.single_slot_objective(actions)
    v2 = e.single_slot_objective(actions)
    assert v1 == v2
    assert np.array_equal(e._realization.member_gain, before)
    assert e.slot_in_episode == 0


def test_multimodal_members_use_both_streams():
    scenario = ScenarioConfig(n_platoons=2, platoon_size=3, n_subchannels=2)
    e = PlatoonEnv(scenario, seed=1)
    e.reset(33)
    assert e.members == 2
    assert e.pairing.pairs == ((0, 1),)
    a = [v2v_action(members=2, u=10), v2v_action(sub=1, members=2, u=10)]
    outcome = e._evaluate_slot(a)
    # text 4 suts/word + image 6 suts/word at u=10 across 180 kHz
    per_member = (180e3 * 4 / 10 + 180e3 * 6 / 10) / 1000
    assert np.allclose(outcome.member_rate_ksuts[0], per_member)
    # members time-share the subchannel
    assert outcome.slot_rate_suts[0] == pytest.approx(per_member * 1000)


# delay measurement -----------------------------------------------------------------

def test_delivery_delay_cases():
    assert delivery_delay_ms(np.array([5000.0]), 4000.0) == 1.0
    assert delivery_delay_ms(np.full(100, 10.0), 4000.0) == 100.0
    ramp = np.cumsum(np.full(100, 40.0))  # exactly B_s at the final slot
    assert delivery_delay_ms(ramp, 4000.0) == 100.0
    assert delivery_delay_ms(np.cumsum(np.full(100, 80.0)), 4000.0) == 50.0


def test_wrong_action_count_raises():
    e = small_env()
    e.reset(35)
    with pytest.raises(ValueError):
        e.step([v2v_action()])
