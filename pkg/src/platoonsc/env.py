"""Multi-agent slot-level environment for platoon resource allocation.

Each platoon leader is one agent. Per 1 ms slot an agent picks a
subchannel, a link mode (intra-platoon broadcast vs. uplink to the base
station), text/image transmit powers and per-member symbol lengths. The
environment turns the joint choice into interference, SINR, similarity
and semantic rate, accounts delivered payload against the per-window
demand, and returns local rewards plus their mean as the global reward.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import channel as ch
from . import semantics as sem

# fixed affine observation normalisation (no per-episode statistics)
OBS_GAIN_OFFSET_DB = 80.0
OBS_GAIN_SCALE_DB = 50.0
OBS_INTERF_OFFSET_DB = 100.0
OBS_INTERF_SCALE_DB = 50.0


@dataclass(frozen=True)
class RewardConfig:
    """Reward weights and the mode switches of the slot reward."""

    w_delivery: float = 0.5            # weight of the delivery logistic
    w_qoe: float = 0.5                 # weight of the platoon QoE
    legacy_negative_delivery: bool = False  # subtract the logistic instead
    gate_delivery_on_similarity: bool = False
    semantic_enabled: bool = True      # False = bit-pipe baseline rewards
    transform_factor_bits: int = 40    # bits/word for the bit-pipe baseline
    u_fixed: int | None = None         # pin all symbol lengths to one value
    score_threshold: float = 0.5       # G_th for the constraint audit

    def validate(self) -> None:
        if self.w_delivery < 0 or self.w_qoe < 0:
            raise ValueError("reward weights must be >= 0")
        if self.transform_factor_bits < 1:
            raise ValueError("transform_factor_bits must be >= 1")
        if self.u_fixed is not None and self.u_fixed < 1:
            raise ValueError("u_fixed must be >= 1")


@dataclass
class AgentAction:
    """One platoon leader's decoded decision for a slot."""

    subchannel: int
    v2v: bool
    power_text_w: float
    power_image_w: float
    u_text: np.ndarray     # (members,) symbols/word, int
    u_image: np.ndarray    # (members,)

    def validate(self, n_subchannels: int, max_power_w: float,
                 u_max_text: int, u_max_image: int) -> None:
        if not 0 <= self.subchannel < n_subchannels:
            raise ValueError("subchannel out of range")
        if self.power_text_w < 0 or self.power_image_w < 0:
            raise ValueError("powers must be >= 0")
        if self.power_text_w + self.power_image_w > max_power_w * (1 + 1e-9):
            raise ValueError("total power exceeds the power budget")
        if not self.v2v and self.power_image_w != 0.0:
            raise ValueError("uplink mode carries no image stream")
        for u, hi in ((self.u_text, u_max_text), (self.u_image, u_max_image)):
            u = np.asarray(u)
            if u.size and (np.any(u < 1) or np.any(u > hi)
                           or np.any(u != np.round(u))):
                raise ValueError("symbol lengths must be integers in bounds")


def action_dim(n_subchannels: int, platoon_size: int) -> int:
    return n_subchannels + 3 + 2 * (platoon_size - 1)


def observation_dim(n_subchannels: int, platoon_size: int) -> int:
    k, m = n_subchannels, platoon_size
    return k + k * (m - 1) + (m - 1) * k + k + 1


def _round_half_up(x):
    return np.floor(np.asarray(x, dtype=float) + 0.5)


def decode_action(raw: np.ndarray, n_subchannels: int, platoon_size: int,
                  max_power_w: float, u_max_text: int,
                  u_max_image: int) -> AgentAction:
    """Map an actor output in [-1, 1]^d onto the feasible action box.

    Subchannel by argmax (ties to the lowest index), mode by sign, powers
    affinely onto [0, p_max] with joint rescaling when their sum exceeds
    the budget, symbol lengths rounded half-up onto [1, u_max].
    """
    k, members = n_subchannels, platoon_size - 1
    d = action_dim(n_subchannels, platoon_size)
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (d,):
        raise ValueError(f"raw action must have shape ({d},), got {raw.shape}")
    raw = np.clip(raw, -1.0, 1.0)

    sub = int(np.argmax(raw[:k]))
    v2v = bool(raw[k] >= 0.0)
    p_text = (raw[k + 1] + 1.0) / 2.0 * max_power_w
    p_image = (raw[k + 2] + 1.0) / 2.0 * max_power_w if v2v else 0.0
    total = p_text + p_image
    if total > max_power_w:
        scale = max_power_w / total
        p_text *= scale
        p_image *= scale

    u_raw = raw[k + 3:]
    u_text = _round_half_up(1.0 + (u_raw[:members] + 1.0) / 2.0 * (u_max_text - 1))
    u_image = _round_half_up(1.0 + (u_raw[members:] + 1.0) / 2.0 * (u_max_image - 1))
    return AgentAction(subchannel=sub, v2v=v2v, power_text_w=float(p_text),
                       power_image_w=float(p_image),
                       u_text=u_text.astype(int), u_image=u_image.astype(int))


@dataclass(frozen=True)
class PairingPlan:
    """Which members exchange jointly (text+image) and which text-only."""

    pairs: tuple[tuple[int, int], ...]
    singles: tuple[int, ...]

    @property
    def multimodal(self) -> tuple[int, ...]:
        return tuple(i for p in self.pairs for i in p)


def pair_members(member_count: int) -> PairingPlan:
    """Pair members for joint text+image exchange.

    An even count pairs everyone; an odd count leaves the last member (by
    platoon order) on text-only exchange.
    """
    if member_count < 0:
        raise ValueError("member_count must be >= 0")
    n_pairs = member_count // 2
    pairs = tuple((2 * i, 2 * i + 1) for i in range(n_pairs))
    singles = tuple(range(2 * n_pairs, member_count))
    return PairingPlan(pairs=pairs, singles=singles)


@dataclass
class Rewards:
    """Per-agent local rewards and their mean as the shared global reward."""

    local: np.ndarray
    global_reward: float


@dataclass
class SlotOutcome:
    """Everything one joint action produces in one slot, before accounting."""

    qoe: np.ndarray              # (N,) platoon QoE sums
    slot_rate_suts: np.ndarray   # (N,) intra-platoon delivery rate, suts/s
    member_rate_ksuts: np.ndarray     # (N, members) per-member semantic rate
    member_similarity: np.ndarray     # (N, members)
    member_sinr_text: np.ndarray      # (N, members) linear
    member_sinr_image: np.ndarray     # (N, members) linear
    bs_sinr: np.ndarray               # (N,) linear; 0 unless uplink mode
    score_violations: int        # member scores below the audit threshold
    collisions: int              # co-channel platoon pairs beyond one per channel

    def objective(self, semantic: sem.SemanticConfig) -> float:
        """Single-slot relaxed objective: sum of QoE + weighted delivery terms."""
        logistic = sem.srs_logistic(self.slot_rate_suts, semantic.payload_suts,
                                    semantic.window_s, semantic.srs_alpha)
        return float(np.sum(self.qoe) + semantic.objective_weight * np.sum(logistic))


def delivery_delay_ms(cumulative_by_slot: np.ndarray, payload_suts: float,
                      slot_ms: float = 1.0, cap_ms: float = 100.0) -> float:
    """First slot (1-based, in ms) at which delivery completes, capped."""
    cum = np.asarray(cumulative_by_slot, dtype=float)
    hit = np.nonzero(cum >= payload_suts)[0]
    if hit.size == 0:
        return float(cap_ms)
    return float(min((hit[0] + 1) * slot_ms, cap_ms))


class PlatoonEnv:
    """Slot-stepped multi-agent environment over the platoon channel."""

    def __init__(self, scenario: ch.ScenarioConfig,
                 semantic: sem.SemanticConfig | None = None,
                 reward: RewardConfig | None = None,
                 surrogate=None, seed: int = 0):
        scenario.validate()
        self.scenario = scenario
        self.semantic = semantic or sem.SemanticConfig()
        self.semantic.validate()
        self.reward_cfg = reward or RewardConfig()
        self.reward_cfg.validate()
        self.surrogate = surrogate or sem.AnalyticSurrogate()
        self.n_agents = scenario.n_platoons
        self.members = scenario.members_per_platoon
        self.pairing = pair_members(self.members)
        self.slots_per_episode = int(round(self.semantic.window_s / ch.SLOT_S))
        self._mm = np.zeros(self.members, dtype=bool)
        self._mm[list(self.pairing.multimodal)] = True
        self._root_ss = np.random.SeedSequence(seed)
        self._channel: ch.ChannelModel | None = None

    # episode lifecycle ---------------------------------------------------

    @property
    def obs_dim(self) -> int:
        return observation_dim(self.scenario.n_subchannels, self.scenario.platoon_size)

    @property
    def act_dim(self) -> int:
        return action_dim(self.scenario.n_subchannels, self.scenario.platoon_size)

    def reset(self, seed: int | None = None) -> list[np.ndarray]:
        """Start a fresh episode: topology, channels, profiles, payload."""
        ss = (np.random.SeedSequence(seed) if seed is not None
              else self._root_ss.spawn(1)[0])
        ch_ss, prof_ss, pay_ss = ss.spawn(3)
        self._channel = ch.ChannelModel(self.scenario, ch_ss)
        self._realization = self._channel.realize()
        rng = np.random.default_rng(prof_ss)
        self._sample_profiles(rng)
        pay_rng = np.random.default_rng(pay_ss)
        lo_hi = self.semantic.payload_range_suts
        self.payload_suts = (float(pay_rng.uniform(*lo_hi)) if lo_hi
                             else self.semantic.payload_suts)
        self.slot_in_episode = 0
        self.residual_suts = np.full(self.n_agents, self.payload_suts)
        self.cumulative_suts = np.zeros(self.n_agents)
        self.delivery_slot = np.zeros(self.n_agents, dtype=int)  # 0 = pending
        self._member_interf = np.zeros(
            (self.n_agents, self.members, self.scenario.n_subchannels))
        self._bs_interf = np.zeros((self.n_agents, self.scenario.n_subchannels))
        return self._observations()

    def _sample_profiles(self, rng: np.random.Generator) -> None:
        """Draw per-vehicle preference profiles for the episode.

        Joint-exchange members target the summed text+image rate band;
        text-only members and the leader's uplink stream target the text
        band alone.
        """
        def profile(rate_target):
            return sem.QoEProfile(
                rate_weight=float(rng.uniform(0.0, 1.0)),
                rate_target_ksuts=float(rate_target),
                rate_slope=float(max(rng.normal(0.1, 0.02), 0.01)),
                sim_target=float(rng.uniform(0.8, 0.9)),
                sim_slope=float(max(rng.normal(55.0, 2.5), 1.0)),
            )

        self.member_profiles: list[list[sem.QoEProfile]] = []
        self.leader_profiles: list[sem.QoEProfile] = []
        for _ in range(self.n_agents):
            members = []
            for m in range(self.members):
                target = rng.uniform(50.0, 70.0)
                if self._mm[m]:
                    target += rng.uniform(80.0, 100.0)
                members.append(profile(target))
            self.member_profiles.append(members)
            self.leader_profiles.append(profile(rng.uniform(50.0, 70.0)))

    # decoding ------------------------------------------------------------

    def decode(self, raw: np.ndarray) -> AgentAction:
        action = decode_action(raw, self.scenario.n_subchannels,
                               self.scenario.platoon_size,
                               self.scenario.max_power_w,
                               self.semantic.u_max_text,
                               self.semantic.u_max_image)
        if self.reward_cfg.u_fixed is not None:
            action.u_text[:] = min(self.reward_cfg.u_fixed, self.semantic.u_max_text)
            action.u_image[:] = min(self.reward_cfg.u_fixed, self.semantic.u_max_image)
        return action

    # slot physics ---------------------------------------------------------

    def _evaluate_slot(self, actions: Sequence[AgentAction]) -> SlotOutcome:
        """Pure evaluation of one joint action on the current realization."""
        if len(actions) != self.n_agents:
            raise ValueError(f"need {self.n_agents} actions, got {len(actions)}")
        cfg, semc, rc = self.scenario, self.semantic, self.reward_cfg
        real = self._realization
        n, members = self.n_agents, self.members
        sub = np.array([a.subchannel for a in actions])
        v2v = np.array([a.v2v for a in actions], dtype=bool)
        p_text = np.array([a.power_text_w for a in actions])
        p_image = np.array([a.power_image_w for a in actions])
        member_power = p_text + p_image      # total radiated on the subchannel
        sigma2 = real.sigma2_w

        qoe = np.zeros(n)
        slot_rate = np.zeros(n)
        member_rate_ksuts = np.zeros((n, members))
        member_sim = np.zeros((n, members))
        member_sinr_t = np.zeros((n, members))
        member_sinr_i = np.zeros((n, members))
        bs_sinr = np.zeros(n)
        violations = 0

        if rc.semantic_enabled:
            bit_rate = None
        else:
            bit_rate = sem.traditional_rate(
                semc.bandwidth_hz, semc.entropy_single, rc.transform_factor_bits)

        for i, a in enumerate(actions):
            if a.v2v and members > 0:
                gains = real.member_gain[i, i, :, a.subchannel]
                interf = np.array([
                    ch.compute_interference(real, sub, v2v, member_power,
                                            ("member", i, m), a.subchannel)
                    for m in range(members)])
                sinr_t = ch.compute_sinr(a.power_text_w, gains, interf, sigma2)
                sinr_i = ch.compute_sinr(a.power_image_w, gains, interf, sigma2)
                member_sinr_t[i] = sinr_t
                member_sinr_i[i] = sinr_i
                rates = np.zeros(members)
                sims = np.zeros(members)
                for m in range(members):
                    if not rc.semantic_enabled:
                        rates[m] = bit_rate
                        sims[m] = 1.0
                    elif self._mm[m]:
                        rates[m] = (sem.semantic_rate(semc.bandwidth_hz,
                                                      semc.entropy_multi_text,
                                                      a.u_text[m])
                                    + sem.semantic_rate(semc.bandwidth_hz,
                                                        semc.entropy_multi_image,
                                                        a.u_image[m]))
                        sims[m] = sem.similarity_multi(
                            self.surrogate, a.u_text[m], a.u_image[m],
                            sinr_t[m], sinr_i[m])
                    else:
                        rates[m] = sem.semantic_rate(
                            semc.bandwidth_hz, semc.entropy_single, a.u_text[m])
                        sims[m] = sem.similarity_single(
                            self.surrogate, a.u_text[m], sinr_t[m])
                member_rate_ksuts[i] = rates / 1000.0
                member_sim[i] = sims
                profiles = self.member_profiles[i]
                qoe[i] = sem.qoe_platoon(profiles, rates / 1000.0, sims)
                violations += self._count_score_violations(
                    profiles, rates / 1000.0, sims)
                # members time-share the platoon's single subchannel
                delivered = rates.copy()
                if rc.gate_delivery_on_similarity:
                    ok = np.array([s >= p.sim_target
                                   for s, p in zip(sims, profiles)])
                    delivered = delivered * ok
                slot_rate[i] = float(np.sum(delivered)) / members
            else:
                # uplink: single text stream from the leader to the base station
                gain = real.bs_gain[i, a.subchannel]
                interf = ch.compute_interference(real, sub, v2v, p_text,
                                                 ("bs", i), a.subchannel)
                sinr = ch.compute_sinr(a.power_text_w, gain, interf, sigma2)
                bs_sinr[i] = sinr
                u_bs = int(a.u_text[0]) if members > 0 else semc.u_max_text
                if rc.semantic_enabled:
                    rate = sem.semantic_rate(semc.bandwidth_hz,
                                             semc.entropy_single, u_bs)
                    sim = float(sem.similarity_single(self.surrogate, u_bs, sinr))
                else:
                    rate = bit_rate
                    sim = 1.0
                prof = self.leader_profiles[i]
                qoe[i] = prof.score(rate / 1000.0, sim)
                violations += self._count_score_violations([prof], [rate / 1000.0],
                                                           [sim])
                # no intra-platoon delivery this slot

        counts = np.bincount(sub, minlength=cfg.n_subchannels)
        collisions = int(np.sum(np.maximum(counts - 1, 0)))
        return SlotOutcome(qoe=qoe, slot_rate_suts=slot_rate,
                           member_rate_ksuts=member_rate_ksuts,
                           member_similarity=member_sim,
                           member_sinr_text=member_sinr_t,
                           member_sinr_image=member_sinr_i, bs_sinr=bs_sinr,
                           score_violations=violations, collisions=collisions)

    def _count_score_violations(self, profiles, rates_ksuts, sims) -> int:
        th = self.reward_cfg.score_threshold
        count = 0
        for p, r, s in zip(profiles, rates_ksuts, sims):
            sr = sem.score_sigmoid(r, p.rate_target_ksuts, p.rate_slope)
            sa = sem.score_sigmoid(s, p.sim_target, p.sim_slope)
            if sr < th or sa < th:
                count += 1
        return count

    def single_slot_objective(self, actions: Sequence[AgentAction]) -> float:
        """Objective of the frozen current slot; does not advance state."""
        return self._evaluate_slot(actions).objective(self.semantic)

    # stepping -------------------------------------------------------------

    def step(self, actions: Sequence[AgentAction]):
        """Advance one slot. Returns (observations, rewards, done, info)."""
        if self._channel is None:
            raise RuntimeError("call reset() before step()")
        semc, rc = self.semantic, self.reward_cfg
        outcome = self._evaluate_slot(actions)
        self.slot_in_episode += 1

        delivered = outcome.slot_rate_suts * ch.SLOT_S
        self.cumulative_suts += delivered
        self.residual_suts = np.maximum(self.residual_suts - delivered, 0.0)
        just_done = (self.delivery_slot == 0) & (self.cumulative_suts
                                                 >= self.payload_suts)
        self.delivery_slot[just_done] = self.slot_in_episode

        window_rate = self.cumulative_suts / semc.window_s
        logistic = sem.srs_logistic(window_rate, self.payload_suts,
                                    semc.window_s, semc.srs_alpha)
        sign = -1.0 if rc.legacy_negative_delivery else 1.0
        local = sign * rc.w_delivery * logistic + rc.w_qoe * outcome.qoe
        rewards = Rewards(local=local, global_reward=float(np.mean(local)))

        # interference the agents will observe next slot (this slot's actions)
        sub = np.array([a.subchannel for a in actions])
        v2v = np.array([a.v2v for a in actions], dtype=bool)
        p_text = np.array([a.power_text_w for a in actions])
        p_total = p_text + np.array([a.power_image_w for a in actions])
        self._member_interf, self._bs_interf = ch.interference_map(
            self._realization, sub, v2v, p_total, p_text)

        self._channel.advance_slot()
        self._realization = self._channel.realize()

        done = self.slot_in_episode >= self.slots_per_episode
        info = {
            "qoe": outcome.qoe,
            "delivery_logistic": logistic,
            "delivered_suts": delivered,
            "residual_suts": self.residual_suts.copy(),
            "slot_rate_suts": outcome.slot_rate_suts,
            "member_rate_ksuts": outcome.member_rate_ksuts,
            "member_similarity": outcome.member_similarity,
            "member_sinr_text": outcome.member_sinr_text,
            "member_sinr_image": outcome.member_sinr_image,
            "bs_sinr": outcome.bs_sinr,
            "collisions": outcome.collisions,
            "score_violations": outcome.score_violations,
            "slot_objective": outcome.objective(semc),
        }
        if done:
            delay = np.where(self.delivery_slot > 0,
                             self.delivery_slot.astype(float),
                             float(self.slots_per_episode))
            info["delay_ms"] = delay * ch.SLOT_S * 1000.0
            info["hard_srs"] = sem.srs_hard(self.cumulative_suts, self.payload_suts)
        return self._observations(), rewards, done, info

    # observations ----------------------------------------------------------

    def _observations(self) -> list[np.ndarray]:
        real = self._realization
        obs = []
        for i in range(self.n_agents):
            bs_gain = _norm_gain_db(real.bs_gain[i])
            mem_gain = _norm_gain_db(real.member_gain[i, i]).ravel()
            mem_int = _norm_interf_db(self._member_interf[i] + real.sigma2_w).ravel()
            bs_int = _norm_interf_db(self._bs_interf[i] + real.sigma2_w)
            residual = np.array([self.residual_suts[i] / max(self.payload_suts, 1.0)])
            obs.append(np.concatenate([bs_gain, mem_gain, mem_int, bs_int,
                                       residual]))
        return obs


def _norm_gain_db(gain_lin):
    g = 10.0 * np.log10(np.maximum(np.asarray(gain_lin, float), 1e-30))
    return (g + OBS_GAIN_OFFSET_DB) / OBS_GAIN_SCALE_DB


def _norm_interf_db(power_w):
    p = 10.0 * np.log10(np.maximum(np.asarray(power_w, float), 1e-30))
    return (p + OBS_INTERF_OFFSET_DB) / OBS_INTERF_SCALE_DB
