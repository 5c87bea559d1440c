"""Semantic-communication metric layer.

Similarity surrogates stand in for trained semantic transceivers: they map
(symbol length, SINR) to a similarity score in [0, 1], nondecreasing in
both arguments. The analytic default multiplies a length-saturation term
1 - exp(-c*u) by an SINR logistic; a CSV-backed table surrogate with
bilinear interpolation can replace it so measured transceiver curves drop
in. On top of the surrogates sit the semantic rate, QoE scoring, and the
delivery-success terms (hard indicator and logistic relaxation).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


def _expit(z):
    """Numerically stable logistic 1/(1+exp(-z)) for scalars or arrays."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _sinr_db(sinr_linear):
    """Linear SINR to dB; zero maps to -inf (similarity floor)."""
    s = np.asarray(sinr_linear, dtype=float)
    if np.any(s < 0):
        raise ValueError("sinr must be >= 0")
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(s)


@dataclass
class AnalyticSurrogate:
    """Length-saturation x SINR-logistic similarity model.

    similarity(u, sinr) = (1 - exp(-length_rate*u))
                          * logistic(sinr_slope*(SINR_dB - midpoint(u)))
    with midpoint(u) = midpoint_db + midpoint_per_u * u. Longer symbol
    sequences saturate the first factor and (for midpoint_per_u <= 0)
    shift the logistic left, so the score is nondecreasing in both u and
    SINR.
    """

    sinr_slope: float = 0.5        # logistic steepness per dB
    midpoint_db: float = 10.0      # logistic midpoint at u = 0
    midpoint_per_u: float = -0.2   # midpoint shift per symbol of length
    length_rate: float = 0.3       # saturation rate of the length term

    def __post_init__(self):
        if self.sinr_slope <= 0 or self.length_rate <= 0:
            raise ValueError("sinr_slope and length_rate must be > 0")
        if self.midpoint_per_u > 0:
            raise ValueError("midpoint_per_u must be <= 0 to keep the score "
                             "nondecreasing in symbol length")

    def similarity(self, u, sinr_linear):
        u = np.asarray(u, dtype=float)
        if np.any(u < 1):
            raise ValueError("symbol length u must be >= 1")
        sat = 1.0 - np.exp(-self.length_rate * u)
        mid = self.midpoint_db + self.midpoint_per_u * u
        return sat * _expit(self.sinr_slope * (_sinr_db(sinr_linear) - mid))


@dataclass
class TableSurrogate:
    """Similarity from a measured (u, SINR_dB) grid, bilinear interpolated.

    Queries outside the grid are clamped to the edge and counted in
    clamp_count so silent extrapolation is visible to callers.
    """

    u_values: np.ndarray        # ascending, (nu,)
    sinr_db_values: np.ndarray  # ascending, (ns,)
    table: np.ndarray           # (nu, ns) similarities in [0, 1]
    clamp_count: int = 0

    def __post_init__(self):
        self.u_values = np.asarray(self.u_values, dtype=float)
        self.sinr_db_values = np.asarray(self.sinr_db_values, dtype=float)
        self.table = np.asarray(self.table, dtype=float)
        validate_similarity_table(self.u_values, self.sinr_db_values, self.table)

    def similarity(self, u, sinr_linear):
        u = np.asarray(u, dtype=float)
        if np.any(u < 1):
            raise ValueError("symbol length u must be >= 1")
        s_db = np.asarray(_sinr_db(sinr_linear), dtype=float)
        clamped = ((u < self.u_values[0]) | (u > self.u_values[-1])
                   | (s_db < self.sinr_db_values[0])
                   | (s_db > self.sinr_db_values[-1]))
        self.clamp_count += int(np.count_nonzero(clamped))
        return _bilinear(self.u_values, self.sinr_db_values, self.table, u, s_db)


def _bilinear(xs, ys, grid, x, y):
    x = np.clip(x, xs[0], xs[-1])
    y = np.clip(y, ys[0], ys[-1])
    i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(xs) - 2)
    j = np.clip(np.searchsorted(ys, y, side="right") - 1, 0, len(ys) - 2)
    x0, x1 = xs[i], xs[i + 1]
    y0, y1 = ys[j], ys[j + 1]
    tx = np.where(x1 > x0, (x - x0) / (x1 - x0), 0.0)
    ty = np.where(y1 > y0, (y - y0) / (y1 - y0), 0.0)
    g00, g01 = grid[i, j], grid[i, j + 1]
    g10, g11 = grid[i + 1, j], grid[i + 1, j + 1]
    return ((1 - tx) * (1 - ty) * g00 + (1 - tx) * ty * g01
            + tx * (1 - ty) * g10 + tx * ty * g11)


def validate_similarity_table(u_values, sinr_db_values, table) -> None:
    """Reject grids violating range or monotonicity, naming the offender."""
    u_values = np.asarray(u_values, float)
    sinr_db_values = np.asarray(sinr_db_values, float)
    table = np.asarray(table, float)
    if table.shape != (len(u_values), len(sinr_db_values)):
        raise ValueError(f"table shape {table.shape} does not match "
                         f"{len(u_values)} u rows x {len(sinr_db_values)} SINR columns")
    if len(u_values) < 2 or len(sinr_db_values) < 2:
        raise ValueError("similarity table needs at least a 2x2 grid")
    if np.any(np.diff(u_values) <= 0):
        raise ValueError("u breakpoints must be strictly increasing")
    if np.any(np.diff(sinr_db_values) <= 0):
        raise ValueError("SINR breakpoints must be strictly increasing")
    bad = (table < 0) | (table > 1)
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise ValueError(
            f"similarity {table[i, j]} outside [0, 1] at row u={u_values[i]}, "
            f"column SINR={sinr_db_values[j]} dB")
    drop = np.diff(table, axis=1) < 0
    if np.any(drop):
        i, j = np.argwhere(drop)[0]
        raise ValueError(
            f"row u={u_values[i]}: similarity decreases between SINR "
            f"{sinr_db_values[j]} and {sinr_db_values[j + 1]} dB")
    drop = np.diff(table, axis=0) < 0
    if np.any(drop):
        i, j = np.argwhere(drop)[0]
        raise ValueError(
            f"column SINR={sinr_db_values[j]} dB: similarity decreases between "
            f"u={u_values[i]} and u={u_values[i + 1]}")


def load_similarity_table(path) -> TableSurrogate:
    """Load a CSV similarity grid.

    Layout: header row = label cell followed by SINR_dB breakpoints; each
    following row = u value followed by the similarity per breakpoint.
    """
    with open(path, newline="") as f:
        rows = [r for r in csv.reader(f) if r and any(c.strip() for c in r)]
    if len(rows) < 3:
        raise ValueError("similarity table needs a header row and >= 2 data rows")
    try:
        sinr = np.array([float(c) for c in rows[0][1:]])
        u = np.array([float(r[0]) for r in rows[1:]])
        grid = np.array([[float(c) for c in r[1:]] for r in rows[1:]])
    except (ValueError, IndexError) as e:
        raise ValueError(f"malformed similarity table {path}: {e}") from e
    return TableSurrogate(u_values=u, sinr_db_values=sinr, table=grid)


# metric operations -----------------------------------------------------


def similarity_single(surrogate, u, sinr_linear):
    """Text-only (single-modal) similarity in [0, 1]."""
    return surrogate.similarity(u, sinr_linear)


def similarity_multi(surrogate, u_text, u_image, sinr_text, sinr_image):
    """Joint text+image similarity: geometric mean of the stream scores.

    The geometric mean keeps the annihilator semantics of a fused task:
    either stream failing destroys the joint score.
    """
    a = surrogate.similarity(u_text, sinr_text)
    b = surrogate.similarity(u_image, sinr_image)
    return np.sqrt(a * b)


def semantic_rate(bandwidth_hz, entropy_suts_per_word, symbols_per_word):
    """Semantic throughput W*H/u in suts/s."""
    u = np.asarray(symbols_per_word, dtype=float)
    if np.any(u < 1):
        raise ValueError("symbols_per_word must be >= 1")
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth_hz must be > 0")
    if np.any(np.asarray(entropy_suts_per_word, float) < 0):
        raise ValueError("entropy must be >= 0")
    out = bandwidth_hz * np.asarray(entropy_suts_per_word, float) / u
    return float(out) if np.isscalar(symbols_per_word) else out


def traditional_rate(bandwidth_hz, entropy, bits_per_word):
    """Bit-pipe equivalent W*H/u with u the bits/word transform factor.

    Feeds the same scoring machinery for the no-semantics baseline.
    """
    return semantic_rate(bandwidth_hz, entropy, bits_per_word)


def score_sigmoid(x, target, slope):
    """1/(1+exp(slope*(target-x))): 0.5 at the target, increasing in x."""
    if slope <= 0:
        raise ValueError("slope must be > 0")
    out = _expit(slope * (np.asarray(x, float) - target))
    return float(out) if np.isscalar(x) else out


@dataclass(frozen=True)
class QoEProfile:
    """Per-vehicle preference weights and targets.

    Rate quantities are expressed in ksuts/s (the scale the rate-score
    slope is calibrated to); similarity quantities are unitless in [0, 1].
    """

    rate_weight: float           # omega: emphasis on rate vs accuracy
    rate_target_ksuts: float
    rate_slope: float            # per ksuts/s
    sim_target: float
    sim_slope: float

    def __post_init__(self):
        if not 0.0 <= self.rate_weight <= 1.0:
            raise ValueError("rate_weight must lie in [0, 1]")
        if min(self.rate_target_ksuts, self.rate_slope,
               self.sim_target, self.sim_slope) <= 0:
            raise ValueError("targets and slopes must be > 0")

    def score(self, rate_ksuts: float, similarity: float) -> float:
        """Weighted member term in [0, 1]."""
        sr = score_sigmoid(rate_ksuts, self.rate_target_ksuts, self.rate_slope)
        sa = score_sigmoid(similarity, self.sim_target, self.sim_slope)
        return self.rate_weight * sr + (1.0 - self.rate_weight) * sa


def qoe_platoon(profiles, rates_ksuts, similarities) -> float:
    """Sum of per-member weighted rate/accuracy scores; range [0, len(profiles)]."""
    if not (len(profiles) == len(rates_ksuts) == len(similarities)):
        raise ValueError(
            f"mismatched member counts: {len(profiles)} profiles, "
            f"{len(rates_ksuts)} rates, {len(similarities)} similarities")
    return float(sum(p.score(r, s)
                     for p, r, s in zip(profiles, rates_ksuts, similarities)))


def srs_logistic(delivered_rate_suts, payload_suts, window_s, alpha):
    """Smooth delivery-success term: logistic around the rate B_s/dT."""
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if window_s <= 0:
        raise ValueError("window_s must be > 0")
    out = _expit(alpha * (np.asarray(delivered_rate_suts, float)
                          - payload_suts / window_s))
    return float(out) if np.isscalar(delivered_rate_suts) else out


def srs_hard(delivered_suts, payload_suts):
    """Hard delivery indicator: 1 iff the window delivered >= the payload."""
    out = (np.asarray(delivered_suts, float) >= payload_suts).astype(float)
    return float(out) if np.isscalar(delivered_suts) else out


@dataclass(frozen=True)
class SemanticConfig:
    """Entropy constants, symbol-length bounds and the delivery budget."""

    bandwidth_hz: float = 180e3
    entropy_single: float = 4.0        # suts/word, text-only exchange
    entropy_multi_text: float = 4.0    # suts/word, text stream of a pair
    entropy_multi_image: float = 6.0   # suts/word, image stream of a pair
    u_max_text: int = 30
    u_max_image: int = 30
    payload_suts: float = 4000.0       # B_s per delivery window
    payload_range_suts: tuple[float, float] | None = None  # sample B_s per episode
    window_s: float = 0.1              # delivery budget (= 100 slots)
    srs_alpha: float = 1.0             # logistic sharpness (per suts/s)
    objective_weight: float = 1.0      # lambda mixing QoE and delivery terms

    def validate(self) -> None:
        numeric = (self.bandwidth_hz, self.entropy_single,
                   self.entropy_multi_text, self.entropy_multi_image,
                   self.payload_suts, self.window_s, self.srs_alpha,
                   self.objective_weight)
        if any(v <= 0 for v in numeric):
            raise ValueError("semantic config values must be positive")
        if self.u_max_text < 1 or self.u_max_image < 1:
            raise ValueError("u bounds must be integers >= 1")
        if self.payload_range_suts is not None:
            lo, hi = self.payload_range_suts
            if not 0 < lo <= hi:
                raise ValueError("payload_range_suts must satisfy 0 < lo <= hi")
