"""Actor-critic learners for the platoon resource-allocation environment.

Four learners share one environment interface:

* ``samramarl`` -- per-agent actors and local critics plus twin global
  critics over the joint state/action with a min target, delayed policy
  and local-critic updates, and soft target tracking.
* ``ddpg``      -- one centralised actor-critic over the joint
  observation and action, trained on the global reward.
* ``td3``       -- the centralised learner with twin critics, target
  policy smoothing and delayed policy updates.
* ``ddpg_no_sc`` -- ``ddpg`` trained against the bit-pipe reward (the
  environment swap happens in :func:`train`).

Critics always consume raw pre-decode actions in [-1, 1]^d so the action
gradient chain stays differentiable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from . import channel as ch
from . import semantics as sem
from .env import PlatoonEnv, RewardConfig
from .nets import Adam, Mlp, flatten_grads, soft_update
from .replay import ReplayBuffer, TransitionBatch

ALGORITHMS = ("samramarl", "ddpg", "td3", "ddpg_no_sc")


@dataclass(frozen=True)
class LearnerConfig:
    """Network sizes, optimisation constants and loop lengths."""

    algorithm: str = "samramarl"
    actor_hidden: tuple[int, ...] = (1024, 512)
    critic_hidden: tuple[int, ...] = (1024, 512, 256)
    critic_lr: float = 0.001
    actor_lr: float = 0.0001
    gamma: float = 0.99
    tau: float = 0.005
    policy_delay: int = 2
    batch_size: int = 64
    buffer_capacity: int = 1_000_000
    buffer_threshold: int = 64      # updates start once the buffer exceeds this
    noise_std: float = 0.2
    smoothing_std: float = 0.2      # target-policy smoothing (td3)
    smoothing_clip: float = 0.5
    actor_final_scale: float = 0.01  # shrunk output init keeps tanh unsaturated
    actor_preactivation_reg: float = 0.0  # optional penalty on tanh inputs
    episodes: int = 500
    slots_per_episode: int = 100
    local_critic_delayed: bool = True   # update local critics on the delay clock
    local_critic_weight: float = 1.0    # weight of the local term in the gradient

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; "
                             f"expected one of {ALGORITHMS}")
        if self.episodes < 0 or self.slots_per_episode < 1:
            raise ValueError("episode counts must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.policy_delay < 1 or self.batch_size < 1:
            raise ValueError("policy_delay and batch_size must be >= 1")


def select_action(actor: Mlp, observation: np.ndarray, noise_std: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Deterministic policy output plus exploration noise, clipped to the box."""
    if noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    a = actor.forward(observation)
    if noise_std > 0:
        a = a + rng.normal(0.0, noise_std, size=a.shape)
    return np.clip(a, -1.0, 1.0)


def _critic_regress(critic: Mlp, opt: Adam, inputs: np.ndarray,
                    targets: np.ndarray) -> float:
    """One squared-error regression step; returns the batch loss."""
    q, cache = critic.forward_cached(inputs)
    err = q[:, 0] - targets
    loss = float(np.mean(err ** 2))
    upstream = (2.0 * err / err.size)[:, None]
    grads, _ = critic.backward(cache, upstream)
    opt.step(critic.parameters(), flatten_grads(grads))
    return loss


def _ascend_actor(actor: Mlp, opt: Adam, cache, action_grad: np.ndarray,
                  preact_reg: float = 0.0) -> float:
    """Ascend the actor along d(objective)/d(action); returns gradient norm.

    preact_reg adds -reg*mean(z^2) on the output pre-activation to the
    ascended objective, holding the tanh head inside its active region.
    """
    preact = None
    if preact_reg > 0.0:
        z = cache[0][-1]
        preact = -2.0 * preact_reg * z / z.shape[0]
    grads, _ = actor.backward(cache, action_grad, output_preact_grad=preact)
    flat = flatten_grads(grads)
    opt.step(actor.parameters(), [-g for g in flat])
    return float(np.sqrt(sum(np.sum(g * g) for g in flat)))


class Samramarl:
    """Per-agent actors/local critics plus twin delayed global critics."""

    def __init__(self, n_agents: int, obs_dim: int, act_dim: int,
                 cfg: LearnerConfig, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        self.n_agents = n_agents
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        ss = np.random.SeedSequence(seed).spawn(3)
        init = np.random.default_rng(ss[0])
        self._rng_noise = np.random.default_rng(ss[1])

        actor_sizes = (obs_dim, *cfg.actor_hidden, act_dim)
        local_sizes = (obs_dim + act_dim, *cfg.critic_hidden, 1)
        joint = n_agents * (obs_dim + act_dim)
        global_sizes = (joint, *cfg.critic_hidden, 1)

        self.actors = [Mlp(actor_sizes, "tanh", init,
                           final_scale=cfg.actor_final_scale)
                       for _ in range(n_agents)]
        self.actor_targets = [a.copy() for a in self.actors]
        self.local_critics = [Mlp(local_sizes, "identity", init)
                              for _ in range(n_agents)]
        self.local_targets = [c.copy() for c in self.local_critics]
        self.global_critics = [Mlp(global_sizes, "identity", init)
                               for _ in range(2)]
        self.global_targets = [c.copy() for c in self.global_critics]

        self.actor_opts = [Adam(a.parameters(), cfg.actor_lr) for a in self.actors]
        self.local_opts = [Adam(c.parameters(), cfg.critic_lr)
                           for c in self.local_critics]
        self.global_opts = [Adam(c.parameters(), cfg.critic_lr)
                            for c in self.global_critics]
        self.updates = 0

    # acting ----------------------------------------------------------------

    def select_actions(self, obs_list, noise_std: float | None = None) -> np.ndarray:
        std = self.cfg.noise_std if noise_std is None else noise_std
        return np.stack([select_action(a, o, std, self._rng_noise)
                         for a, o in zip(self.actors, obs_list)])

    def greedy_actions(self, obs_list) -> np.ndarray:
        return self.select_actions(obs_list, noise_std=0.0)

    # learning ----------------------------------------------------------------

    def _joint(self, obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
        b = obs.shape[0]
        return np.concatenate([obs.reshape(b, -1), actions.reshape(b, -1)], axis=1)

    def _target_joint_action(self, next_obs: np.ndarray) -> np.ndarray:
        return np.stack([t.forward(next_obs[:, n, :])
                         for n, t in enumerate(self.actor_targets)], axis=1)

    def update(self, buffer: ReplayBuffer) -> dict | None:
        cfg = self.cfg
        if len(buffer) <= cfg.buffer_threshold:
            return None
        batch = buffer.sample(cfg.batch_size)
        stats = {"global_loss": self.update_global_critics(batch)}
        self.updates += 1
        run_delayed = self.updates % cfg.policy_delay == 0
        if not cfg.local_critic_delayed:
            stats["local_loss"] = [self.update_local_critic(batch, n)
                                   for n in range(self.n_agents)]
        if run_delayed:
            if cfg.local_critic_delayed:
                stats["local_loss"] = [self.update_local_critic(batch, n)
                                       for n in range(self.n_agents)]
            stats["actor_grad_norm"] = [self.update_actor(batch, n)
                                        for n in range(self.n_agents)]
            for n in range(self.n_agents):
                soft_update(self.actor_targets[n], self.actors[n], cfg.tau)
                soft_update(self.local_targets[n], self.local_critics[n], cfg.tau)
        return stats

    def update_global_critics(self, batch: TransitionBatch) -> list[float]:
        cfg = self.cfg
        next_actions = self._target_joint_action(batch.next_obs)
        target_in = self._joint(batch.next_obs, next_actions)
        q_next = np.minimum(self.global_targets[0].forward(target_in)[:, 0],
                            self.global_targets[1].forward(target_in)[:, 0])
        y = batch.global_rewards + cfg.gamma * (1.0 - batch.done) * q_next
        inputs = self._joint(batch.obs, batch.actions)
        losses = [_critic_regress(c, o, inputs, y)
                  for c, o in zip(self.global_critics, self.global_opts)]
        for c, t in zip(self.global_critics, self.global_targets):
            soft_update(t, c, cfg.tau)
        return losses

    def update_local_critic(self, batch: TransitionBatch, n: int) -> float:
        cfg = self.cfg
        s_next = batch.next_obs[:, n, :]
        a_next = self.actor_targets[n].forward(s_next)
        q_next = self.local_targets[n].forward(
            np.concatenate([s_next, a_next], axis=1))[:, 0]
        y = batch.local_rewards[:, n] + cfg.gamma * (1.0 - batch.done) * q_next
        inputs = np.concatenate([batch.obs[:, n, :], batch.actions[:, n, :]],
                                axis=1)
        return _critic_regress(self.local_critics[n], self.local_opts[n],
                               inputs, y)

    def update_actor(self, batch: TransitionBatch, n: int) -> float:
        """Deterministic policy gradient through global critic 1 + local critic.

        Only agent n's slice of the joint action is re-evaluated through
        its current policy; the other agents' actions stay as sampled.
        """
        cfg = self.cfg
        b = batch.obs.shape[0]
        s_n = batch.obs[:, n, :]
        a_n, actor_cache = self.actors[n].forward_cached(s_n)

        joint_actions = batch.actions.copy()
        joint_actions[:, n, :] = a_n
        joint_in = self._joint(batch.obs, joint_actions)
        _, g_cache = self.global_critics[0].forward_cached(joint_in)
        ones = np.full((b, 1), 1.0 / b)
        _, d_joint = self.global_critics[0].backward(g_cache, ones)
        a_start = self.n_agents * self.obs_dim + n * self.act_dim
        da_global = d_joint[:, a_start:a_start + self.act_dim]

        local_in = np.concatenate([s_n, a_n], axis=1)
        _, l_cache = self.local_critics[n].forward_cached(local_in)
        _, d_local = self.local_critics[n].backward(l_cache, ones)
        da_local = d_local[:, self.obs_dim:]

        da = da_global + cfg.local_critic_weight * da_local
        return _ascend_actor(self.actors[n], self.actor_opts[n], actor_cache,
                             da, cfg.actor_preactivation_reg)

    # persistence ----------------------------------------------------------

    def named_networks(self) -> dict[str, Mlp]:
        out = {}
        for n in range(self.n_agents):
            out[f"actor_{n}"] = self.actors[n]
            out[f"actor_target_{n}"] = self.actor_targets[n]
            out[f"local_critic_{n}"] = self.local_critics[n]
            out[f"local_target_{n}"] = self.local_targets[n]
        for j in range(2):
            out[f"global_critic_{j}"] = self.global_critics[j]
            out[f"global_target_{j}"] = self.global_targets[j]
        return out


class Ddpg:
    """Centralised actor-critic over the joint observation/action."""

    n_critics = 1
    delay = 1
    smoothing = False

    def __init__(self, n_agents: int, obs_dim: int, act_dim: int,
                 cfg: LearnerConfig, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        self.n_agents = n_agents
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.joint_obs = n_agents * obs_dim
        self.joint_act = n_agents * act_dim
        ss = np.random.SeedSequence(seed).spawn(3)
        init = np.random.default_rng(ss[0])
        self._rng_noise = np.random.default_rng(ss[1])
        self._rng_smooth = np.random.default_rng(ss[2])

        self.actor = Mlp((self.joint_obs, *cfg.actor_hidden, self.joint_act),
                         "tanh", init, final_scale=cfg.actor_final_scale)
        self.actor_target = self.actor.copy()
        critic_sizes = (self.joint_obs + self.joint_act, *cfg.critic_hidden, 1)
        self.critics = [Mlp(critic_sizes, "identity", init)
                        for _ in range(self.n_critics)]
        self.critic_targets = [c.copy() for c in self.critics]
        self.actor_opt = Adam(self.actor.parameters(), cfg.actor_lr)
        self.critic_opts = [Adam(c.parameters(), cfg.critic_lr)
                            for c in self.critics]
        self.updates = 0

    def select_actions(self, obs_list, noise_std: float | None = None) -> np.ndarray:
        std = self.cfg.noise_std if noise_std is None else noise_std
        joint = select_action(self.actor, np.concatenate(obs_list), std,
                              self._rng_noise)
        return joint.reshape(self.n_agents, self.act_dim)

    def greedy_actions(self, obs_list) -> np.ndarray:
        return self.select_actions(obs_list, noise_std=0.0)

    def _target_action(self, s_next: np.ndarray) -> np.ndarray:
        a = self.actor_target.forward(s_next)
        if self.smoothing:
            eps = np.clip(self._rng_smooth.normal(0.0, self.cfg.smoothing_std,
                                                  size=a.shape),
                          -self.cfg.smoothing_clip, self.cfg.smoothing_clip)
            a = np.clip(a + eps, -1.0, 1.0)
        return a

    def update(self, buffer: ReplayBuffer) -> dict | None:
        cfg = self.cfg
        if len(buffer) <= cfg.buffer_threshold:
            return None
        batch = buffer.sample(cfg.batch_size)
        b = batch.obs.shape[0]
        s = batch.obs.reshape(b, -1)
        a = batch.actions.reshape(b, -1)
        s_next = batch.next_obs.reshape(b, -1)

        a_next = self._target_action(s_next)
        next_in = np.concatenate([s_next, a_next], axis=1)
        q_next = self.critic_targets[0].forward(next_in)[:, 0]
        if self.n_critics == 2:
            q_next = np.minimum(q_next,
                                self.critic_targets[1].forward(next_in)[:, 0])
        y = batch.global_rewards + cfg.gamma * (1.0 - batch.done) * q_next
        inputs = np.concatenate([s, a], axis=1)
        stats = {"critic_loss": [
            _critic_regress(c, o, inputs, y)
            for c, o in zip(self.critics, self.critic_opts)]}

        self.updates += 1
        if self.updates % self.delay == 0:
            a_pi, cache = self.actor.forward_cached(s)
            pi_in = np.concatenate([s, a_pi], axis=1)
            _, c_cache = self.critics[0].forward_cached(pi_in)
            ones = np.full((b, 1), 1.0 / b)
            _, d_in = self.critics[0].backward(c_cache, ones)
            da = d_in[:, self.joint_obs:]
            stats["actor_grad_norm"] = _ascend_actor(
                self.actor, self.actor_opt, cache, da,
                cfg.actor_preactivation_reg)
            soft_update(self.actor_target, self.actor, cfg.tau)
            for c, t in zip(self.critics, self.critic_targets):
                soft_update(t, c, cfg.tau)
        return stats

    def named_networks(self) -> dict[str, Mlp]:
        out = {"actor": self.actor, "actor_target": self.actor_target}
        for j, (c, t) in enumerate(zip(self.critics, self.critic_targets)):
            out[f"critic_{j}"] = c
            out[f"critic_target_{j}"] = t
        return out


class Td3(Ddpg):
    """Centralised twin-critic learner with smoothing and delayed policy."""

    n_critics = 2
    delay = 2
    smoothing = True


def baseline_variants(algorithm: str):
    """Learner class and environment overrides for an algorithm id."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; "
                         f"expected one of {ALGORITHMS}")
    learner_cls = {"samramarl": Samramarl, "ddpg": Ddpg, "td3": Td3,
                   "ddpg_no_sc": Ddpg}[algorithm]
    env_overrides = {}
    if algorithm == "ddpg_no_sc":
        env_overrides["semantic_enabled"] = False
    return learner_cls, env_overrides


@dataclass
class TrainingMetrics:
    """Per-episode series emitted by one training run."""

    episode: np.ndarray
    global_reward: np.ndarray
    mean_qoe: np.ndarray
    srs_rate: np.ndarray
    mean_delay_ms: np.ndarray
    collisions: np.ndarray
    score_violations: np.ndarray

    COLUMNS = ("episode", "global_reward", "mean_qoe", "srs_rate",
               "mean_delay_ms", "collisions", "score_violations")

    def rows(self):
        for i in range(len(self.episode)):
            yield (int(self.episode[i]), self.global_reward[i],
                   self.mean_qoe[i], self.srs_rate[i], self.mean_delay_ms[i],
                   int(self.collisions[i]), int(self.score_violations[i]))

    @staticmethod
    def from_lists(records: list[dict]) -> "TrainingMetrics":
        cols = {k: np.array([r[k] for r in records])
                for k in TrainingMetrics.COLUMNS}
        return TrainingMetrics(**cols)


def _check_finite(learner) -> None:
    for name, net in learner.named_networks().items():
        for p in net.parameters():
            if not np.all(np.isfinite(p)):
                raise FloatingPointError(f"non-finite parameter in {name}")


def trace_record(slot: int, agent: int, action, info, local_reward: float,
                 global_reward: float) -> dict:
    """One newline-delimited trace record: action, SINRs, metrics, rewards."""
    return {
        "slot": slot, "agent": agent,
        "subchannel": int(action.subchannel), "v2v": bool(action.v2v),
        "power_text_w": float(action.power_text_w),
        "power_image_w": float(action.power_image_w),
        "u_text": np.asarray(action.u_text).tolist(),
        "u_image": np.asarray(action.u_image).tolist(),
        "sinr_text": info["member_sinr_text"][agent].tolist(),
        "sinr_image": info["member_sinr_image"][agent].tolist(),
        "bs_sinr": float(info["bs_sinr"][agent]),
        "similarity": info["member_similarity"][agent].tolist(),
        "rate_ksuts": info["member_rate_ksuts"][agent].tolist(),
        "residual_suts": float(info["residual_suts"][agent]),
        "local_reward": float(local_reward),
        "global_reward": float(global_reward),
    }


def run_episode(env: PlatoonEnv, learner, buffer: ReplayBuffer | None,
                noise_std: float | None, seed: int | None = None,
                update: bool = True, trace_file=None) -> dict:
    """Roll one episode; optionally store transitions and update the learner.

    trace_file, when given, receives one JSON line per (slot, agent).
    """
    obs = env.reset(seed)
    totals = {"reward": 0.0, "qoe": 0.0, "collisions": 0,
              "score_violations": 0}
    done = False
    info = {}
    slots = 0
    while not done:
        raw = learner.select_actions(obs, noise_std)
        actions = [env.decode(r) for r in raw]
        next_obs, rewards, done, info = env.step(actions)
        if buffer is not None:
            buffer.add(np.stack(obs), raw, rewards.local,
                       rewards.global_reward, np.stack(next_obs), done)
            if update:
                learner.update(buffer)
        if trace_file is not None:
            for n, action in enumerate(actions):
                trace_file.write(json.dumps(trace_record(
                    slots + 1, n, action, info, rewards.local[n],
                    rewards.global_reward)) + "\n")
        totals["reward"] += rewards.global_reward
        totals["qoe"] += float(np.mean(info["qoe"]))
        totals["collisions"] += info["collisions"]
        totals["score_violations"] += info["score_violations"]
        obs = next_obs
        slots += 1
    return {
        "global_reward": totals["reward"] / slots,
        "mean_qoe": totals["qoe"] / slots,
        "srs_rate": float(np.mean(info["hard_srs"])),
        "mean_delay_ms": float(np.mean(info["delay_ms"])),
        "collisions": totals["collisions"],
        "score_violations": totals["score_violations"],
    }


def train(algorithm: str, scenario: ch.ScenarioConfig,
          semantic: sem.SemanticConfig | None = None,
          reward: RewardConfig | None = None,
          learner_cfg: LearnerConfig | None = None,
          seed: int = 0, surrogate=None):
    """Run the training loop of one algorithm; fully seeded.

    Returns (learner, TrainingMetrics, env). The environment is returned
    still live so callers can evaluate the trained policy on it.
    """
    learner_cls, overrides = baseline_variants(algorithm)
    learner_cfg = learner_cfg or LearnerConfig(algorithm=algorithm)
    learner_cfg.validate()
    reward = reward or RewardConfig()
    if overrides:
        reward = replace(reward, **overrides)

    ss = np.random.SeedSequence(seed).spawn(3)
    env = PlatoonEnv(scenario, semantic, reward, surrogate,
                     seed=int(ss[0].generate_state(1)[0]))
    learner = learner_cls(env.n_agents, env.obs_dim, env.act_dim, learner_cfg,
                          seed=int(ss[1].generate_state(1)[0]))
    buffer = ReplayBuffer(learner_cfg.buffer_capacity,
                          np.random.default_rng(ss[2]))

    records = []
    for ep in range(learner_cfg.episodes):
        stats = run_episode(env, learner, buffer, noise_std=None)
        stats["episode"] = ep
        records.append(stats)
        _check_finite(learner)
    if not records:
        # zero-episode runs still report the random policy's behaviour
        stats = run_episode(env, learner, None, noise_std=0.0)
        stats["episode"] = 0
        records.append(stats)
    return learner, TrainingMetrics.from_lists(records), env


def evaluate_policy(env: PlatoonEnv, learner, episodes: int,
                    seeds: list[int] | None = None) -> TrainingMetrics:
    """Greedy (noise-free) evaluation over fresh episodes; no learning."""
    records = []
    for ep in range(episodes):
        seed = seeds[ep] if seeds is not None else None
        stats = run_episode(env, learner, None, noise_std=0.0, seed=seed)
        stats["episode"] = ep
        records.append(stats)
    return TrainingMetrics.from_lists(records)
