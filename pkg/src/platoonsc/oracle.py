"""Brute-force reference solvers for frozen single-slot instances.

A StaticInstance freezes one slot of channel gains together with the
profiles, surrogate and discretisation grids. evaluate_objective scores a
joint assignment on it (independently of the environment's step
machinery, which the test suite cross-checks against), enumerate_optimum
exhaustively searches the grids, and relaxation_gap evaluates the
continuous-subchannel relaxation against its thresholded rounding.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import semantics as sem
from .env import AgentAction, PlatoonEnv, pair_members

DEFAULT_ENUMERATION_CAP = 10 ** 7


@dataclass
class StaticInstance:
    """One slot of frozen channel state plus the decision grids."""

    member_gain: np.ndarray      # (N, N, members, K) linear
    bs_gain: np.ndarray          # (N, K)
    sigma2_w: float
    max_power_w: float
    semantic: sem.SemanticConfig
    surrogate: object            # AnalyticSurrogate or TableSurrogate
    member_profiles: list[list[sem.QoEProfile]]
    leader_profiles: list[sem.QoEProfile]
    power_levels: np.ndarray = field(default=None)
    u_levels: np.ndarray = field(default=None)
    payload_max_suts: float = 6000.0
    score_threshold: float = 0.5
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP

    def __post_init__(self):
        self.member_gain = np.asarray(self.member_gain, dtype=float)
        self.bs_gain = np.asarray(self.bs_gain, dtype=float)
        if self.power_levels is None:
            p = self.max_power_w
            self.power_levels = np.array([0.0, p / 3.0, 2.0 * p / 3.0, p])
        if self.u_levels is None:
            self.u_levels = np.array([5, 10, 20, 30])
        self.power_levels = np.asarray(self.power_levels, dtype=float)
        self.u_levels = np.asarray(self.u_levels, dtype=int)
        if self.power_levels.size == 0 or self.u_levels.size == 0:
            raise ValueError("grids must be non-empty")
        if np.any(self.power_levels < 0) or np.any(self.power_levels
                                                   > self.max_power_w):
            raise ValueError("power levels must lie in [0, max_power]")
        u_cap = max(self.semantic.u_max_text, self.semantic.u_max_image)
        if np.any(self.u_levels < 1) or np.any(self.u_levels > u_cap):
            raise ValueError("u levels must lie in [1, u_max]")

    @property
    def n_agents(self) -> int:
        return self.member_gain.shape[0]

    @property
    def members(self) -> int:
        return self.member_gain.shape[2]

    @property
    def n_subchannels(self) -> int:
        return self.member_gain.shape[3]

    @property
    def multimodal_mask(self) -> np.ndarray:
        mask = np.zeros(self.members, dtype=bool)
        mask[list(pair_members(self.members).multimodal)] = True
        return mask


def instance_from_env(env: PlatoonEnv, power_levels=None, u_levels=None,
                      enumeration_cap: int = DEFAULT_ENUMERATION_CAP
                      ) -> StaticInstance:
    """Freeze the environment's current slot into a StaticInstance."""
    real = env._realization
    return StaticInstance(
        member_gain=real.member_gain.copy(), bs_gain=real.bs_gain.copy(),
        sigma2_w=real.sigma2_w, max_power_w=env.scenario.max_power_w,
        semantic=env.semantic, surrogate=env.surrogate,
        member_profiles=[list(p) for p in env.member_profiles],
        leader_profiles=list(env.leader_profiles),
        power_levels=power_levels, u_levels=u_levels,
        enumeration_cap=enumeration_cap)


@dataclass
class ObjectiveBreakdown:
    """Objective value of one joint assignment, decomposed per platoon."""

    total: float
    qoe: np.ndarray                # (N,)
    delivery_logistic: np.ndarray  # (N,)
    objective_weight: float
    violations: dict

    def recompute_total(self) -> float:
        return float(np.sum(self.qoe)
                     + self.objective_weight * np.sum(self.delivery_logistic))


def _on_grid(value, levels, tol=1e-12) -> bool:
    return bool(np.any(np.abs(levels - value) <= tol))


def _check_grid_membership(inst: StaticInstance, actions) -> None:
    mm = inst.multimodal_mask
    for i, a in enumerate(actions):
        if not 0 <= a.subchannel < inst.n_subchannels:
            raise ValueError(f"agent {i}: subchannel {a.subchannel} off grid")
        if not _on_grid(a.power_text_w, inst.power_levels):
            raise ValueError(f"agent {i}: text power {a.power_text_w} off grid")
        if a.v2v:
            if not _on_grid(a.power_image_w, inst.power_levels):
                raise ValueError(f"agent {i}: image power off grid")
            for m in range(inst.members):
                if not _on_grid(a.u_text[m], inst.u_levels):
                    raise ValueError(f"agent {i}: u_text[{m}] off grid")
                if mm[m] and not _on_grid(a.u_image[m], inst.u_levels):
                    raise ValueError(f"agent {i}: u_image[{m}] off grid")
        else:
            if a.power_image_w != 0.0:
                raise ValueError(f"agent {i}: uplink carries no image power")
            if inst.members > 0 and not _on_grid(a.u_text[0], inst.u_levels):
                raise ValueError(f"agent {i}: uplink u off grid")


def evaluate_objective(inst: StaticInstance, actions,
                       check_grid: bool = True) -> ObjectiveBreakdown:
    """Score a joint assignment on the frozen slot.

    Constraint violations are flagged in the breakdown, never raised;
    only off-grid values raise.
    """
    if len(actions) != inst.n_agents:
        raise ValueError(f"need {inst.n_agents} actions")
    if check_grid:
        _check_grid_membership(inst, actions)
    semc = inst.semantic
    n, members = inst.n_agents, inst.members
    mm = inst.multimodal_mask
    qoe = np.zeros(n)
    logistic = np.zeros(n)
    score_violations = 0
    power_violations = 0

    for i, a in enumerate(actions):
        k = a.subchannel
        if a.power_text_w + a.power_image_w > inst.max_power_w * (1 + 1e-9) or \
                min(a.power_text_w, a.power_image_w) < 0:
            power_violations += 1
        if a.v2v and members > 0:
            interference = np.zeros(members)
            for j, b in enumerate(actions):
                if j != i and b.v2v and b.subchannel == k:
                    interference += ((b.power_text_w + b.power_image_w)
                                     * inst.member_gain[j, i, :, k])
            denom = interference + inst.sigma2_w
            gains = inst.member_gain[i, i, :, k]
            sinr_t = a.power_text_w * gains / denom
            sinr_i = a.power_image_w * gains / denom
            rates = np.zeros(members)
            sims = np.zeros(members)
            for m in range(members):
                if mm[m]:
                    rates[m] = (semc.bandwidth_hz * semc.entropy_multi_text
                                / a.u_text[m]
                                + semc.bandwidth_hz * semc.entropy_multi_image
                                / a.u_image[m])
                    sims[m] = float(sem.similarity_multi(
                        inst.surrogate, a.u_text[m], a.u_image[m],
                        sinr_t[m], sinr_i[m]))
                else:
                    rates[m] = semc.bandwidth_hz * semc.entropy_single / a.u_text[m]
                    sims[m] = float(sem.similarity_single(
                        inst.surrogate, a.u_text[m], sinr_t[m]))
            profiles = inst.member_profiles[i]
            for p, r, s in zip(profiles, rates / 1000.0, sims):
                qoe[i] += p.score(r, s)
                if (sem.score_sigmoid(r, p.rate_target_ksuts, p.rate_slope)
                        < inst.score_threshold
                        or sem.score_sigmoid(s, p.sim_target, p.sim_slope)
                        < inst.score_threshold):
                    score_violations += 1
            slot_rate = float(np.sum(rates)) / members
        else:
            interference = 0.0
            for j, b in enumerate(actions):
                if j != i and not b.v2v and b.subchannel == k:
                    interference += b.power_text_w * inst.bs_gain[j, k]
            u_bs = int(a.u_text[0]) if members > 0 else semc.u_max_text
            sinr = (a.power_text_w * inst.bs_gain[i, k]
                    / (interference + inst.sigma2_w))
            rate = semc.bandwidth_hz * semc.entropy_single / u_bs
            sim = float(sem.similarity_single(inst.surrogate, u_bs, sinr))
            p = inst.leader_profiles[i]
            qoe[i] = p.score(rate / 1000.0, sim)
            if (sem.score_sigmoid(rate / 1000.0, p.rate_target_ksuts,
                                  p.rate_slope) < inst.score_threshold
                    or sem.score_sigmoid(sim, p.sim_target, p.sim_slope)
                    < inst.score_threshold):
                score_violations += 1
            slot_rate = 0.0
        logistic[i] = sem.srs_logistic(slot_rate, semc.payload_suts,
                                       semc.window_s, semc.srs_alpha)

    counts = np.bincount([a.subchannel for a in actions],
                         minlength=inst.n_subchannels)
    violations = {
        "subchannel_shared": int(np.sum(np.maximum(counts - 1, 0))),
        "power_box": power_violations,
        "score_threshold": score_violations,
        "payload_limit": int(semc.payload_suts > inst.payload_max_suts),
    }
    total = float(np.sum(qoe) + semc.objective_weight * np.sum(logistic))
    return ObjectiveBreakdown(total=total, qoe=qoe, delivery_logistic=logistic,
                              objective_weight=semc.objective_weight,
                              violations=violations)


# enumeration -------------------------------------------------------------


def _agent_candidates(inst: StaticInstance) -> list[AgentAction]:
    """All feasible grid actions of one agent, in deterministic lexicographic
    order (subchannel, mode, text power, image power, symbol lengths)."""
    members = inst.members
    mm = inst.multimodal_mask
    u0 = int(inst.u_levels[0])
    out = []
    for k in range(inst.n_subchannels):
        for v2v in (False, True):
            for p_t in inst.power_levels:
                if not v2v:
                    u_image = np.full(members, u0)
                    for u_bs in (inst.u_levels if members > 0 else [u0]):
                        u_text = np.full(members, u0)
                        if members > 0:
                            u_text[0] = u_bs
                        out.append(AgentAction(k, False, float(p_t), 0.0,
                                               u_text, u_image))
                    continue
                for p_i in inst.power_levels:
                    if p_t + p_i > inst.max_power_w * (1 + 1e-9):
                        continue
                    mm_idx = np.nonzero(mm)[0]
                    for ut in itertools.product(inst.u_levels, repeat=members):
                        for ui in itertools.product(inst.u_levels,
                                                    repeat=len(mm_idx)):
                            u_image = np.full(members, u0)
                            u_image[mm_idx] = ui
                            out.append(AgentAction(
                                k, True, float(p_t), float(p_i),
                                np.array(ut, dtype=int), u_image))
    return out


def joint_space_size(inst: StaticInstance) -> int:
    return len(_agent_candidates(inst)) ** inst.n_agents


def enumerate_optimum(inst: StaticInstance):
    """Exhaustive search of the joint grid; ties break to the first
    assignment in enumeration order. Returns (assignment, breakdown)."""
    candidates = _agent_candidates(inst)
    size = len(candidates) ** inst.n_agents
    if size > inst.enumeration_cap:
        raise ValueError(
            f"joint space of {size} assignments exceeds the enumeration cap "
            f"{inst.enumeration_cap}; coarsen the power/u grids")
    best = None
    best_value = -np.inf
    for joint in itertools.product(candidates, repeat=inst.n_agents):
        bd = evaluate_objective(inst, joint, check_grid=False)
        if bd.total > best_value:
            best_value = bd.total
            best = (list(joint), bd)
    return best


def random_feasible_assignment(inst: StaticInstance,
                               rng: np.random.Generator) -> list[AgentAction]:
    """One uniformly random feasible grid assignment."""
    candidates = _agent_candidates(inst)
    return [candidates[int(rng.integers(len(candidates)))]
            for _ in range(inst.n_agents)]


# continuous-subchannel relaxation -----------------------------------------


@dataclass
class RelaxationReport:
    relaxed_value: float
    thresholded_value: float
    gap: float                      # relaxed - thresholded; sign not asserted
    thresholded_subchannels: np.ndarray


def relaxation_gap(inst: StaticInstance, beta: np.ndarray, actions,
                   threshold: str = "argmax") -> RelaxationReport:
    """Evaluate fractional subchannel weights, then their binary rounding.

    The relaxed objective weights each platoon's per-subchannel QoE and
    delivery rate by beta[n, k] and makes interference bilinear in the
    interferers' beta rows; binary rows reproduce evaluate_objective
    exactly. ``threshold`` is "argmax" (ties to the lowest index) or
    "half" (entries >= 0.5, falling back to argmax when that is not
    one-hot).
    """
    beta = np.asarray(beta, dtype=float)
    n, kk = inst.n_agents, inst.n_subchannels
    if beta.shape != (n, kk):
        raise ValueError(f"beta must have shape ({n}, {kk})")
    if np.any(beta < 0) or np.any(beta > 1):
        raise ValueError("beta entries must lie in [0, 1]")
    semc = inst.semantic
    members = inst.members
    mm = inst.multimodal_mask

    relaxed = 0.0
    for i, a in enumerate(actions):
        qoe_k = np.zeros(kk)
        rate_k = np.zeros(kk)
        for k in range(kk):
            if a.v2v and members > 0:
                interference = np.zeros(members)
                for j, b in enumerate(actions):
                    if j != i and b.v2v:
                        interference += (beta[j, k]
                                         * (b.power_text_w + b.power_image_w)
                                         * inst.member_gain[j, i, :, k])
                denom = interference + inst.sigma2_w
                gains = inst.member_gain[i, i, :, k]
                rates = np.zeros(members)
                sims = np.zeros(members)
                for m in range(members):
                    if mm[m]:
                        rates[m] = (semc.bandwidth_hz * semc.entropy_multi_text
                                    / a.u_text[m]
                                    + semc.bandwidth_hz * semc.entropy_multi_image
                                    / a.u_image[m])
                        sims[m] = float(sem.similarity_multi(
                            inst.surrogate, a.u_text[m], a.u_image[m],
                            a.power_text_w * gains[m] / denom[m],
                            a.power_image_w * gains[m] / denom[m]))
                    else:
                        rates[m] = (semc.bandwidth_hz * semc.entropy_single
                                    / a.u_text[m])
                        sims[m] = float(sem.similarity_single(
                            inst.surrogate, a.u_text[m],
                            a.power_text_w * gains[m] / denom[m]))
                qoe_k[k] = sem.qoe_platoon(inst.member_profiles[i],
                                           rates / 1000.0, sims)
                rate_k[k] = float(np.sum(rates)) / members
            else:
                interference = 0.0
                for j, b in enumerate(actions):
                    if j != i and not b.v2v:
                        interference += (beta[j, k] * b.power_text_w
                                         * inst.bs_gain[j, k])
                u_bs = int(a.u_text[0]) if members > 0 else semc.u_max_text
                sinr = (a.power_text_w * inst.bs_gain[i, k]
                        / (interference + inst.sigma2_w))
                rate = semc.bandwidth_hz * semc.entropy_single / u_bs
                sim = float(sem.similarity_single(inst.surrogate, u_bs, sinr))
                qoe_k[k] = inst.leader_profiles[i].score(rate / 1000.0, sim)
                rate_k[k] = 0.0
        relaxed += float(beta[i] @ qoe_k)
        relaxed += semc.objective_weight * float(sem.srs_logistic(
            float(beta[i] @ rate_k), semc.payload_suts, semc.window_s,
            semc.srs_alpha))

    if threshold == "argmax":
        chosen = np.argmax(beta, axis=1)
    elif threshold == "half":
        chosen = np.empty(n, dtype=int)
        for i in range(n):
            ones = np.nonzero(beta[i] >= 0.5)[0]
            chosen[i] = ones[0] if ones.size == 1 else int(np.argmax(beta[i]))
    else:
        raise ValueError(f"unknown threshold rule {threshold!r}")
    rounded = [AgentAction(int(chosen[i]), a.v2v, a.power_text_w,
                           a.power_image_w, a.u_text, a.u_image)
               for i, a in enumerate(actions)]
    thresholded = evaluate_objective(inst, rounded, check_grid=False).total
    return RelaxationReport(relaxed_value=relaxed, thresholded_value=thresholded,
                            gap=relaxed - thresholded,
                            thresholded_subchannels=chosen)


# serialization -------------------------------------------------------------


def _surrogate_to_dict(s) -> dict:
    if isinstance(s, sem.AnalyticSurrogate):
        return {"kind": "analytic", "sinr_slope": s.sinr_slope,
                "midpoint_db": s.midpoint_db, "midpoint_per_u": s.midpoint_per_u,
                "length_rate": s.length_rate}
    if isinstance(s, sem.TableSurrogate):
        return {"kind": "table", "u_values": s.u_values.tolist(),
                "sinr_db_values": s.sinr_db_values.tolist(),
                "table": s.table.tolist()}
    raise TypeError(f"cannot serialise surrogate {type(s).__name__}")


def _surrogate_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "analytic":
        return sem.AnalyticSurrogate(
            sinr_slope=d["sinr_slope"], midpoint_db=d["midpoint_db"],
            midpoint_per_u=d["midpoint_per_u"], length_rate=d["length_rate"])
    if kind == "table":
        return sem.TableSurrogate(
            u_values=np.array(d["u_values"]),
            sinr_db_values=np.array(d["sinr_db_values"]),
            table=np.array(d["table"]))
    raise ValueError(f"unknown surrogate kind {kind!r}")


def instance_to_dict(inst: StaticInstance) -> dict:
    semd = asdict(inst.semantic)
    if semd.get("payload_range_suts") is not None:
        semd["payload_range_suts"] = list(semd["payload_range_suts"])
    return {
        "member_gain": inst.member_gain.tolist(),
        "bs_gain": inst.bs_gain.tolist(),
        "sigma2_w": inst.sigma2_w,
        "max_power_w": inst.max_power_w,
        "semantic": semd,
        "surrogate": _surrogate_to_dict(inst.surrogate),
        "member_profiles": [[asdict(p) for p in row]
                            for row in inst.member_profiles],
        "leader_profiles": [asdict(p) for p in inst.leader_profiles],
        "power_levels": inst.power_levels.tolist(),
        "u_levels": inst.u_levels.tolist(),
        "payload_max_suts": inst.payload_max_suts,
        "score_threshold": inst.score_threshold,
        "enumeration_cap": inst.enumeration_cap,
    }


def instance_from_dict(d: dict) -> StaticInstance:
    semd = dict(d["semantic"])
    if semd.get("payload_range_suts") is not None:
        semd["payload_range_suts"] = tuple(semd["payload_range_suts"])
    return StaticInstance(
        member_gain=np.array(d["member_gain"]),
        bs_gain=np.array(d["bs_gain"]),
        sigma2_w=d["sigma2_w"], max_power_w=d["max_power_w"],
        semantic=sem.SemanticConfig(**semd),
        surrogate=_surrogate_from_dict(d["surrogate"]),
        member_profiles=[[sem.QoEProfile(**p) for p in row]
                         for row in d["member_profiles"]],
        leader_profiles=[sem.QoEProfile(**p) for p in d["leader_profiles"]],
        power_levels=np.array(d["power_levels"]),
        u_levels=np.array(d["u_levels"]),
        payload_max_suts=d["payload_max_suts"],
        score_threshold=d["score_threshold"],
        enumeration_cap=d["enumeration_cap"])


def save_instance(inst: StaticInstance, path) -> None:
    with open(path, "w") as f:
        json.dump(instance_to_dict(inst), f, indent=1, sort_keys=True)


def load_instance(path) -> StaticInstance:
    with open(path) as f:
        return instance_from_dict(json.load(f))


def assignment_record(actions, breakdown: ObjectiveBreakdown) -> dict:
    """JSON-ready record of an assignment and its objective breakdown."""
    return {
        "assignment": [{
            "subchannel": int(a.subchannel), "v2v": bool(a.v2v),
            "power_text_w": float(a.power_text_w),
            "power_image_w": float(a.power_image_w),
            "u_text": np.asarray(a.u_text).tolist(),
            "u_image": np.asarray(a.u_image).tolist(),
        } for a in actions],
        "total": breakdown.total,
        "qoe": breakdown.qoe.tolist(),
        "delivery_logistic": breakdown.delivery_logistic.tolist(),
        "violations": breakdown.violations,
    }
