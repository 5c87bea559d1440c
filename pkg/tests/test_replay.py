import numpy as np
import pytest

from platoonsc.replay import ReplayBuffer


def _add(buf, tag, n_agents=2, obs_dim=3, act_dim=2):
    obs = np.full((n_agents, obs_dim), float(tag))
    act = np.full((n_agents, act_dim), float(tag))
    buf.add(obs, act, np.full(n_agents, float(tag)), float(tag), obs + 1, False)


def test_fifo_eviction():
    buf = ReplayBuffer(capacity=10, rng=np.random.default_rng(0))
    for i in range(13):
        _add(buf, i)
    assert len(buf) == 10
    stored = set(buf._storage["global_rewards"].astype(int))
    # the oldest three records are gone, the newest ten remain
    assert stored == set(range(3, 13))


def test_size_tracks_until_capacity():
    buf = ReplayBuffer(capacity=5, rng=np.random.default_rng(1))
    for i in range(4):
        _add(buf, i)
        assert len(buf) == i + 1
    for i in range(10):
        _add(buf, i)
    assert len(buf) == 5


def test_sample_shapes_and_contents():
    buf = ReplayBuffer(capacity=100, rng=np.random.default_rng(2))
    for i in range(20):
        _add(buf, i)
    batch = buf.sample(8)
    assert batch.obs.shape == (8, 2, 3)
    assert batch.actions.shape == (8, 2, 2)
    assert batch.local_rewards.shape == (8, 2)
    assert batch.global_rewards.shape == (8,)
    # every sampled row is one of the stored records, internally consistent
    for b in range(8):
        tag = batch.global_rewards[b]
        assert 0 <= tag < 20
        assert np.all(batch.obs[b] == tag)
        assert np.all(batch.next_obs[b] == tag + 1)


def test_sampling_is_uniform_chi_square():
    buf = ReplayBuffer(capacity=64, rng=np.random.default_rng(3))
    for i in range(64):
        _add(buf, i)
    draws = 100_000
    counts = np.zeros(64)
    for _ in range(100):
        batch = buf.sample(1000)
        idx, c = np.unique(batch.global_rewards.astype(int), return_counts=True)
        counts[idx] += c
    expected = draws / 64
    stat = float(np.sum((counts - expected) ** 2 / expected))
    # chi-square critical value, 63 dof at the 0.1% level
    assert stat < 103.45


def test_empty_sample_and_bad_capacity():
    buf = ReplayBuffer(capacity=4, rng=np.random.default_rng(4))
    with pytest.raises(ValueError):
        buf.sample(1)
    with pytest.raises(ValueError):
        ReplayBuffer(capacity=0, rng=np.random.default_rng(5))
