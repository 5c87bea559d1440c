"""Urban-grid mobility and the radio channel for platoon V2X simulation.

Vehicles drive on a Manhattan-style lane grid. Each link combines
log-distance path loss, spatially correlated log-normal shadowing and
Rayleigh fast fading into a linear power gain; interference and SINR are
computed per subchannel from the platoons' channel/mode/power choices.

Two update clocks drive the channel: path loss and shadowing refresh every
``SLOW_UPDATE_SLOTS`` slots (100 ms), fast fading refreshes every slot
(1 ms).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

SLOT_S = 0.001              # one simulation slot = 1 ms
SLOW_UPDATE_SLOTS = 100     # path loss / shadowing / position period, in slots

GAP_RANGE_M = (5.0, 35.0)   # permissible intra-platoon spacing
PLATOON_HEADWAY_M = 50.0    # clearance reserved between platoons on one lane


@dataclass(frozen=True)
class LinkParams:
    """Large-scale fading parameters of one link class."""

    decorrelation_m: float
    shadow_std_db: float


# V2V: vehicle to vehicle inside a platoon; V2I: platoon leader to base station.
LINKS = {
    "v2v": LinkParams(decorrelation_m=10.0, shadow_std_db=3.0),
    "v2i": LinkParams(decorrelation_m=50.0, shadow_std_db=8.0),
}


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x_lin):
    return 10.0 * np.log10(np.asarray(x_lin, dtype=float))


def dbm_to_watts(p_dbm):
    return 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """Geometry, traffic and radio constants of one simulated scenario."""

    map_width_m: float = 1299.0
    map_height_m: float = 750.0
    lane_width_m: float = 3.5
    intersection_spacing_m: float = 433.0
    n_platoons: int = 4
    platoon_size: int = 5
    gap_m: float = 20.0
    speed_mps: float = 10.0               # 36 km/h
    n_subchannels: int = 4
    subchannel_bandwidth_hz: float = 180e3
    carrier_hz: float = 2e9
    max_power_dbm: float = 30.0
    noise_dbm: float = -114.0
    bs_antenna_height_m: float = 25.0
    vehicle_antenna_height_m: float = 1.5
    bs_antenna_gain_dbi: float = 8.0
    vehicle_antenna_gain_dbi: float = 3.0
    bs_noise_figure_db: float = 5.0
    vehicle_noise_figure_db: float = 9.0
    min_link_distance_m: float = 1.0      # floor avoiding the log singularity
    bs_position_m: tuple[float, float] | None = None  # None = map centre

    @property
    def max_power_w(self) -> float:
        return float(dbm_to_watts(self.max_power_dbm))

    @property
    def noise_w(self) -> float:
        return float(dbm_to_watts(self.noise_dbm))

    @property
    def members_per_platoon(self) -> int:
        return self.platoon_size - 1

    def validate(self) -> None:
        if self.n_platoons < 1 or self.platoon_size < 1:
            raise ValueError("need at least one platoon of at least one vehicle")
        if not (GAP_RANGE_M[0] <= self.gap_m <= GAP_RANGE_M[1]):
            raise ValueError(
                f"gap_m={self.gap_m} outside permitted range {GAP_RANGE_M}"
            )
        if self.n_subchannels < 1:
            raise ValueError("n_subchannels must be >= 1")
        if self.noise_dbm >= 60.0:
            raise ValueError("noise_dbm implausibly large")


@dataclass
class Topology:
    """Vehicle placement on the lane grid.

    Vehicles are indexed platoon-major: platoon p occupies indices
    [p*M, (p+1)*M), index p*M being the platoon leader. ``axis`` is the
    coordinate a vehicle moves along (0 = x, 1 = y) and ``heading`` the
    sign of motion. Motion wraps toroidally at the map edge.
    """

    positions: np.ndarray          # (n_vehicles, 2) metres
    axis: np.ndarray               # (n_vehicles,) int, 0 or 1
    heading: np.ndarray            # (n_vehicles,) int, +1 or -1
    lane_id: np.ndarray            # (n_vehicles,) int
    platoon_of: np.ndarray         # (n_vehicles,) int
    n_platoons: int
    platoon_size: int
    gap_m: float
    extent_m: np.ndarray           # (2,) map width, height
    bs_position_m: np.ndarray      # (2,)

    @property
    def n_vehicles(self) -> int:
        return self.positions.shape[0]

    def platoon_members(self, p: int) -> np.ndarray:
        """Vehicle indices of platoon p, leader first."""
        m = self.platoon_size
        return np.arange(p * m, (p + 1) * m)

    def leader(self, p: int) -> int:
        return p * self.platoon_size

    def toroidal_distance(self, i: int, j: int) -> float:
        """Vehicle-to-vehicle distance on the wrapped map."""
        return _wrapped_distance(self.positions[i], self.positions[j], self.extent_m)

    def distance_to_bs(self, i: int) -> float:
        return _wrapped_distance(self.positions[i], self.bs_position_m, self.extent_m)


def _wrapped_distance(p: np.ndarray, q: np.ndarray, extent: np.ndarray) -> float:
    d = np.abs(np.asarray(p, float) - np.asarray(q, float))
    d = np.minimum(d, extent - d)
    return float(math.hypot(d[0], d[1]))


def _grid_lanes(cfg: ScenarioConfig) -> list[tuple[int, float, int]]:
    """Enumerate lanes as (axis, fixed transverse coordinate, heading).

    Each road carries four lanes, two per direction, offset +-0.5 and
    +-1.5 lane widths from the road centreline; negative-side lanes run
    against the positive axis direction (right-hand traffic).
    """
    lanes = []
    lw = cfg.lane_width_m
    offsets = [(-1.5 * lw, -1), (-0.5 * lw, -1), (0.5 * lw, +1), (1.5 * lw, +1)]
    # vertical roads: fixed x, motion along y (axis 1)
    x = cfg.intersection_spacing_m
    while x < cfg.map_width_m:
        for off, head in offsets:
            lanes.append((1, x + off, head))
        x += cfg.intersection_spacing_m
    # horizontal roads: fixed y, motion along x (axis 0)
    y = cfg.intersection_spacing_m
    while y < cfg.map_height_m:
        for off, head in offsets:
            lanes.append((0, y + off, head))
        y += cfg.intersection_spacing_m
    return lanes


def build_topology(cfg: ScenarioConfig, seed: int) -> Topology:
    """Place n_platoons platoons of platoon_size vehicles on the lane grid.

    Platoons are assigned to lanes round-robin; followers sit exactly
    gap_m behind their predecessor along the lane. Placement is
    deterministic for a fixed (config, seed) pair.
    """
    cfg.validate()
    lanes = _grid_lanes(cfg)
    if not lanes:
        raise ValueError("map too small for the configured intersection spacing")

    n, m = cfg.n_platoons, cfg.platoon_size
    extent = np.array([cfg.map_width_m, cfg.map_height_m], dtype=float)
    footprint = (m - 1) * cfg.gap_m + PLATOON_HEADWAY_M
    per_lane = -(-n // len(lanes))  # ceil division: platoons sharing one lane
    lane_extent = min(extent[0], extent[1])
    if per_lane * footprint > lane_extent:
        raise ValueError(
            f"{n} platoons of {m} vehicles exceed lane capacity: "
            f"{per_lane} platoons/lane x {footprint:.0f} m footprint "
            f"> {lane_extent:.0f} m lane extent"
        )

    rng = np.random.default_rng(_seed_sequence(seed).spawn(1)[0])
    positions = np.zeros((n * m, 2))
    axis = np.zeros(n * m, dtype=int)
    heading = np.zeros(n * m, dtype=int)
    lane_id = np.zeros(n * m, dtype=int)
    platoon_of = np.repeat(np.arange(n), m)

    lane_load = [0] * len(lanes)
    for p in range(n):
        li = p % len(lanes)
        ax, coord, head = lanes[li]
        along_extent = extent[ax]
        # carve the lane into equal slots so same-lane platoons never overlap
        slot = lane_load[li]
        lane_load[li] += 1
        slot_len = along_extent / per_lane
        leader_at = slot * slot_len + footprint + rng.uniform(
            0.0, max(slot_len - footprint, 0.0)
        )
        for k in range(m):
            v = p * m + k
            # followers trail the leader relative to the travel direction
            along = (leader_at - head * k * cfg.gap_m) % along_extent
            positions[v, ax] = along
            positions[v, 1 - ax] = coord
            axis[v] = ax
            heading[v] = head
            lane_id[v] = li

    bs = (np.asarray(cfg.bs_position_m, float) if cfg.bs_position_m is not None
          else extent / 2.0)
    return Topology(
        positions=positions, axis=axis, heading=heading, lane_id=lane_id,
        platoon_of=platoon_of, n_platoons=n, platoon_size=m, gap_m=cfg.gap_m,
        extent_m=extent, bs_position_m=bs,
    )


def advance_mobility(topo: Topology, dt_s: float, speed_mps: float = 10.0) -> Topology:
    """Move every vehicle speed*dt along its lane, wrapping at map edges."""
    if dt_s < 0:
        raise ValueError("dt_s must be >= 0")
    pos = topo.positions.copy()
    step = speed_mps * dt_s * topo.heading
    idx = np.arange(topo.n_vehicles)
    pos[idx, topo.axis] = (pos[idx, topo.axis] + step) % topo.extent_m[topo.axis]
    return replace(topo, positions=pos)


def pathloss_db(distance_m, link_type: str = "v2v", min_distance_m: float = 1.0):
    """Log-distance path loss 128.1 + 37.6 log10(d_km).

    Applied identically to V2V and V2I links; distances below the floor
    are clamped to it before evaluation.
    """
    if link_type not in LINKS:
        raise ValueError(f"unknown link_type {link_type!r}")
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance_m must be > 0")
    d = np.maximum(d, min_distance_m)
    out = 128.1 + 37.6 * np.log10(d / 1000.0)
    return float(out) if np.isscalar(distance_m) else out


def update_shadowing(prev_db, moved_m, link_type: str, rng: np.random.Generator):
    """One correlated-shadowing step.

    New value = rho*prev + sqrt(1-rho^2)*eps with rho = exp(-moved/d_corr)
    and eps ~ N(0, sigma^2); the stationary standard deviation equals the
    link's configured sigma.
    """
    params = LINKS[link_type]
    moved = np.asarray(moved_m, dtype=float)
    if np.any(moved < 0):
        raise ValueError("moved_m must be >= 0")
    rho = np.exp(-moved / params.decorrelation_m)
    prev = np.asarray(prev_db, dtype=float)
    eps = rng.normal(0.0, params.shadow_std_db, size=prev.shape)
    out = rho * prev + np.sqrt(1.0 - rho**2) * eps
    return float(out) if np.isscalar(prev_db) else out


def sample_fast_fading(rng: np.random.Generator, size=None):
    """Rayleigh-fading power factor: |CN(0,1)|^2, i.e. Exponential(mean 1)."""
    return rng.exponential(1.0, size=size)


def compose_gain(pathloss_db, shadow_db, fading_lin, tx_gain_dbi, rx_gain_dbi,
                 noise_figure_db):
    """Linear link power gain from its dB factors and the fading factor."""
    net_db = (np.asarray(tx_gain_dbi, float) + rx_gain_dbi
              - np.asarray(pathloss_db, float) - shadow_db - noise_figure_db)
    return np.asarray(fading_lin, float) * 10.0 ** (net_db / 10.0)


@dataclass(frozen=True)
class LinkGain:
    """One link's gain together with the factors it was composed from."""

    pathloss_db: float
    shadow_db: float
    fading_lin: float
    tx_gain_dbi: float
    rx_gain_dbi: float
    noise_figure_db: float
    gain: float

    @classmethod
    def compose(cls, pathloss_db, shadow_db, fading_lin, tx_gain_dbi,
                rx_gain_dbi, noise_figure_db) -> "LinkGain":
        g = compose_gain(pathloss_db, shadow_db, fading_lin, tx_gain_dbi,
                         rx_gain_dbi, noise_figure_db)
        return cls(pathloss_db, shadow_db, fading_lin, tx_gain_dbi,
                   rx_gain_dbi, noise_figure_db, float(g))

    def validate(self) -> None:
        if self.fading_lin < 0:
            raise ValueError("fading factor must be >= 0")
        if not self.gain > 0 and self.fading_lin > 0:
            raise ValueError("composed gain must be > 0 for nonzero fading")
        expected = compose_gain(self.pathloss_db, self.shadow_db,
                                self.fading_lin, self.tx_gain_dbi,
                                self.rx_gain_dbi, self.noise_figure_db)
        if abs(self.gain - expected) > 1e-12 * max(abs(expected), 1e-300):
            raise ValueError("gain does not match its dB factor composition")


@dataclass
class ChannelRealization:
    """Linear power gains of every modelled link at one slot.

    member_gain[t, r, m, k]: gain from platoon t's leader to member m of
    platoon r on subchannel k (the t == r diagonal are the intended
    broadcast links, the rest are interference paths).
    bs_gain[t, k]: gain from platoon t's leader to the base station.
    """

    member_gain: np.ndarray   # (N, N, M-1, K)
    bs_gain: np.ndarray       # (N, K)
    sigma2_w: float
    slot: int = 0

    def validate(self) -> None:
        for name, g in (("member_gain", self.member_gain), ("bs_gain", self.bs_gain)):
            if not np.all(np.isfinite(g)) or np.any(g < 0):
                raise ValueError(f"{name} must be finite and >= 0")
        if not self.sigma2_w > 0:
            raise ValueError("sigma2_w must be > 0")


class ChannelModel:
    """Stateful channel over a topology with split two-clock updates.

    Holds the correlated shadowing state of every link and per-purpose RNG
    streams so fading, shadowing and placement draws never perturb each
    other. All gains are linear power ratios in watts-per-watt.
    """

    def __init__(self, cfg: ScenarioConfig, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        self.reset(seed)

    def reset(self, seed) -> None:
        ss = _seed_sequence(seed).spawn(3)
        self._rng_fading = np.random.default_rng(ss[0])
        self._rng_shadow = np.random.default_rng(ss[1])
        self.topology = build_topology(self.cfg, ss[2])
        n, mm = self.cfg.n_platoons, self.cfg.members_per_platoon
        # stationary initialisation keeps the configured std from slot 0
        self._shadow_member = self._rng_shadow.normal(
            0.0, LINKS["v2v"].shadow_std_db, size=(n, n, mm))
        self._shadow_bs = self._rng_shadow.normal(
            0.0, LINKS["v2i"].shadow_std_db, size=(n,))
        self.slot = 0
        self._refresh_large_scale()
        self._draw_fading()

    # link distances -----------------------------------------------------

    def _member_distances(self) -> np.ndarray:
        """(N, N, M-1) distance from each leader to each platoon's members."""
        cfg, topo = self.cfg, self.topology
        n, mm = cfg.n_platoons, cfg.members_per_platoon
        out = np.empty((n, n, mm))
        for t in range(n):
            lead = topo.leader(t)
            for r in range(n):
                members = topo.platoon_members(r)[1:]
                for j, v in enumerate(members):
                    out[t, r, j] = topo.toroidal_distance(lead, v)
        return out

    def _bs_distances(self) -> np.ndarray:
        cfg, topo = self.cfg, self.topology
        dh = cfg.bs_antenna_height_m - cfg.vehicle_antenna_height_m
        out = np.empty(cfg.n_platoons)
        for t in range(cfg.n_platoons):
            ground = topo.distance_to_bs(topo.leader(t))
            out[t] = math.hypot(ground, dh)
        return out

    # update clocks ------------------------------------------------------

    def _refresh_large_scale(self, moved_m: float = 0.0) -> None:
        cfg = self.cfg
        if moved_m > 0.0:
            # both endpoints of a V2V link move; the BS end is static
            self._shadow_member = update_shadowing(
                self._shadow_member, 2.0 * moved_m, "v2v", self._rng_shadow)
            self._shadow_bs = update_shadowing(
                self._shadow_bs, moved_m, "v2i", self._rng_shadow)
        self._pl_member = pathloss_db(
            self._member_distances(), "v2v", cfg.min_link_distance_m)
        self._pl_bs = pathloss_db(
            self._bs_distances(), "v2i", cfg.min_link_distance_m)

    def _draw_fading(self) -> None:
        n, mm, k = (self.cfg.n_platoons, self.cfg.members_per_platoon,
                    self.cfg.n_subchannels)
        self._fading_member = sample_fast_fading(self._rng_fading, (n, n, mm, k))
        self._fading_bs = sample_fast_fading(self._rng_fading, (n, k))

    def advance_slot(self) -> None:
        """Advance one 1 ms slot: fading always, large-scale every 100 ms."""
        self.slot += 1
        if self.slot % SLOW_UPDATE_SLOTS == 0:
            dt = SLOW_UPDATE_SLOTS * SLOT_S
            self.topology = advance_mobility(self.topology, dt, self.cfg.speed_mps)
            self._refresh_large_scale(moved_m=self.cfg.speed_mps * dt)
        self._draw_fading()

    def realize(self) -> ChannelRealization:
        """Compose current path loss, shadowing and fading into link gains."""
        cfg = self.cfg
        vg, bg = cfg.vehicle_antenna_gain_dbi, cfg.bs_antenna_gain_dbi
        member = compose_gain(
            self._pl_member[..., None], self._shadow_member[..., None],
            self._fading_member, vg, vg, cfg.vehicle_noise_figure_db)
        bs = compose_gain(
            self._pl_bs[:, None], self._shadow_bs[:, None],
            self._fading_bs, vg, bg, cfg.bs_noise_figure_db)
        return ChannelRealization(
            member_gain=member, bs_gain=bs, sigma2_w=cfg.noise_w, slot=self.slot)


# interference / SINR ---------------------------------------------------


def compute_interference(realization: ChannelRealization,
                         subchannel: np.ndarray, v2v: np.ndarray,
                         power_w: np.ndarray, receiver: tuple, k: int) -> float:
    """Interference power at one receiver on subchannel k.

    receiver is ("member", platoon, member_index) or ("bs", platoon).
    At a member receiver only platoons in V2V mode contribute; at the base
    station only platoons in V2I mode contribute (each weighted by its
    subchannel indicator), mirroring how the mode indicators gate the
    interference sums.
    """
    subchannel = np.asarray(subchannel)
    v2v = np.asarray(v2v, dtype=bool)
    power_w = np.asarray(power_w, dtype=float)
    kind = receiver[0]
    n_rx = receiver[1]
    total = 0.0
    for t in range(len(subchannel)):
        if t == n_rx or subchannel[t] != k:
            continue
        if kind == "member" and v2v[t]:
            total += power_w[t] * realization.member_gain[t, n_rx, receiver[2], k]
        elif kind == "bs" and not v2v[t]:
            total += power_w[t] * realization.bs_gain[t, k]
    return total


def interference_map(realization: ChannelRealization,
                     subchannel: np.ndarray, v2v: np.ndarray,
                     member_power_w: np.ndarray, bs_power_w: np.ndarray):
    """Interference at every receiver on every subchannel.

    member_power_w is the total radiated power of each platoon relevant at
    member receivers (text + image), bs_power_w the text power relevant at
    the base station. Returns (member_I (N, M-1, K), bs_I (N, K)) in watts.
    """
    n, _, mm, kk = realization.member_gain.shape
    subchannel = np.asarray(subchannel)
    v2v = np.asarray(v2v, dtype=bool)
    member_i = np.zeros((n, mm, kk))
    bs_i = np.zeros((n, kk))
    for t in range(n):
        k = subchannel[t]
        if v2v[t]:
            w = member_power_w[t]
            for r in range(n):
                if r != t:
                    member_i[r, :, k] += w * realization.member_gain[t, r, :, k]
        else:
            w = bs_power_w[t]
            for r in range(n):
                if r != t:
                    bs_i[r, k] += w * realization.bs_gain[t, k]
    return member_i, bs_i


def compute_sinr(signal_power_w, gain, interference_w, sigma2_w):
    """p*h / (I + sigma^2)."""
    if np.any(np.asarray(sigma2_w) <= 0):
        raise ValueError("sigma2_w must be > 0")
    return (np.asarray(signal_power_w, float) * np.asarray(gain, float)
            / (np.asarray(interference_w, float) + sigma2_w))
