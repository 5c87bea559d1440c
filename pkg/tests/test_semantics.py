import numpy as np
import pytest

from platoonsc import semantics as sem


# analytic surrogate -------------------------------------------------------

def test_analytic_surrogate_reference_value():
    s = sem.AnalyticSurrogate(sinr_slope=0.5, midpoint_db=10.0,
                              midpoint_per_u=-0.2, length_rate=0.3)
    # u=10 puts the logistic midpoint at 8 dB, so SINR 8 dB scores 0.5 there
    xi = s.similarity(10, 10 ** 0.8)
    assert xi == pytest.approx((1 - np.exp(-3.0)) * 0.5, abs=1e-12)
    assert xi == pytest.approx(0.4751, abs=1e-4)


def test_analytic_surrogate_limits():
    s = sem.AnalyticSurrogate()
    assert s.similarity(30, 1e12) > 0.999
    assert s.similarity(10, 0.0) == 0.0
    with pytest.raises(ValueError):
        s.similarity(0, 1.0)
    with pytest.raises(ValueError):
        sem.AnalyticSurrogate(midpoint_per_u=0.1)


def test_analytic_surrogate_monotone_and_bounded():
    s = sem.AnalyticSurrogate()
    us = np.arange(1, 31)
    sinrs = 10 ** np.linspace(-3, 3, 41)
    grid = np.array([[float(s.similarity(u, snr)) for snr in sinrs] for u in us])
    assert np.all(grid >= 0) and np.all(grid <= 1)
    assert np.all(np.diff(grid, axis=0) >= -1e-12)  # nondecreasing in u
    assert np.all(np.diff(grid, axis=1) >= -1e-12)  # nondecreasing in SINR


def test_multi_modal_fusion():
    ones = sem.TableSurrogate(u_values=[1, 30], sinr_db_values=[-20, 30],
                              table=np.ones((2, 2)))
    assert sem.similarity_multi(ones, 5, 5, 1.0, 1.0) == pytest.approx(1.0)
    s = sem.AnalyticSurrogate()
    assert sem.similarity_multi(s, 10, 10, 0.0, 10.0) == 0.0
    # symmetric streams reduce to the single-stream value
    xi = sem.similarity_multi(s, 10, 10, 5.0, 5.0)
    assert xi == pytest.approx(float(sem.similarity_single(s, 10, 5.0)))


# semantic rate -------------------------------------------------------------

def test_semantic_rate_values():
    assert sem.semantic_rate(180e3, 4.0, 10) == pytest.approx(72_000.0)
    assert sem.semantic_rate(180e3, 4.0, 20) == pytest.approx(36_000.0)
    assert sem.semantic_rate(180e3, 0.0, 10) == 0.0
    with pytest.raises(ValueError):
        sem.semantic_rate(180e3, 4.0, 0)
    with pytest.raises(ValueError):
        sem.semantic_rate(0.0, 4.0, 10)


def test_rate_length_product_conservation():
    wh = 180e3 * 4.0
    # product is exact whenever the quotient is representable
    for u in (1, 2, 4, 5, 8, 10, 16, 20, 30):
        assert sem.semantic_rate(180e3, 4.0, u) * u == wh
    for u in range(1, 31):
        assert sem.semantic_rate(180e3, 4.0, u) * u == pytest.approx(wh, rel=1e-15)


def test_traditional_rate():
    assert sem.traditional_rate(180e3, 4.0, 40) == pytest.approx(18_000.0)
    assert sem.traditional_rate(180e3, 4.0, 80) == pytest.approx(9_000.0)


# scoring --------------------------------------------------------------------

def test_score_sigmoid_midpoint_exact():
    assert sem.score_sigmoid(60.0, 60.0, 0.1) == 0.5
    assert sem.score_sigmoid(0.85, 0.85, 55.0) == 0.5


def test_score_sigmoid_reference_and_limits():
    assert sem.score_sigmoid(110.0, 60.0, 0.1) == pytest.approx(0.99331, abs=1e-5)
    assert sem.score_sigmoid(-1e9, 60.0, 0.1) == 0.0
    xs = np.linspace(-10, 10, 101)
    ys = sem.score_sigmoid(xs, 0.0, 1.3)
    assert np.all(np.diff(ys) > 0)
    with pytest.raises(ValueError):
        sem.score_sigmoid(1.0, 0.0, 0.0)


def _profile(weight=0.5):
    return sem.QoEProfile(rate_weight=weight, rate_target_ksuts=60.0,
                          rate_slope=0.1, sim_target=0.85, sim_slope=55.0)


def test_qoe_platoon_values_and_bounds():
    profiles = [_profile() for _ in range(4)]
    at_target = sem.qoe_platoon(profiles, [60.0] * 4, [0.85] * 4)
    assert at_target == pytest.approx(0.5 * 4)
    maxed = sem.qoe_platoon([_profile(1.0)], [1e6], [0.0])
    assert maxed == pytest.approx(1.0, abs=1e-9)
    member = _profile(0.5).score(110.0, 0.85)
    assert member == pytest.approx(0.74665, abs=1e-4)
    assert 0.0 <= sem.qoe_platoon(profiles, [10, 200, 55, 70],
                                  [0.1, 0.99, 0.8, 0.9]) <= 4.0


def test_qoe_platoon_permutation_invariant_and_errors():
    profiles = [_profile() for _ in range(3)]
    rates = [40.0, 70.0, 90.0]
    sims = [0.5, 0.9, 0.95]
    a = sem.qoe_platoon(profiles, rates, sims)
    b = sem.qoe_platoon(profiles, rates[::-1], sims[::-1])
    assert a == pytest.approx(b, abs=1e-12)
    with pytest.raises(ValueError):
        sem.qoe_platoon(profiles, rates[:2], sims)


# delivery terms -----------------------------------------------------------------

def test_srs_logistic_threshold_and_symmetry():
    assert sem.srs_logistic(40_000.0, 4000.0, 0.1, 1.0) == 0.5
    th = 4000.0 / 0.1
    for x in (0.0, 1e4, 3.9e4, 4.05e4, 8e4):
        total = (sem.srs_logistic(x, 4000.0, 0.1, 2e-4)
                 + sem.srs_logistic(2 * th - x, 4000.0, 0.1, 2e-4))
        assert total == pytest.approx(1.0, abs=1e-12)
    xs = np.linspace(3.8e4, 4.2e4, 50)
    ys = sem.srs_logistic(xs, 4000.0, 0.1, 1e-3)
    assert np.all(np.diff(ys) > 0)


def test_srs_logistic_sharp_alpha_is_step():
    assert sem.srs_logistic(40_001.0, 4000.0, 0.1, 1e6) == pytest.approx(1.0)
    assert sem.srs_logistic(39_999.0, 4000.0, 0.1, 1e6) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        sem.srs_logistic(1.0, 1.0, 0.1, 0.0)


def test_srs_hard_boundaries():
    assert sem.srs_hard(4000.0, 4000.0) == 1.0
    assert sem.srs_hard(3999.999, 4000.0) == 0.0
    assert sem.srs_hard(0.0, 4000.0) == 0.0
    assert sem.srs_hard(0.0, 0.0) == 1.0


# table surrogate -----------------------------------------------------------------

def _write_table(tmp_path, rows):
    path = tmp_path / "table.csv"
    path.write_text("\n".join(",".join(str(c) for c in row) for row in rows))
    return path


def test_load_table_constant(tmp_path):
    path = _write_table(tmp_path, [["u/sinr", -10, 10],
                                   [1, 1.0, 1.0],
                                   [30, 1.0, 1.0]])
    surr = sem.load_similarity_table(path)
    assert surr.similarity(7, 3.3) == pytest.approx(1.0)


def test_table_grid_point_and_bilinear_midpoint(tmp_path):
    path = _write_table(tmp_path, [["u", 0, 10],
                                   [1, 0.0, 1.0],
                                   [3, 0.0, 1.0]])
    surr = sem.load_similarity_table(path)
    # exact at grid points (sinr given linear: 10 dB -> 10.0, 0 dB -> 1.0)
    assert surr.similarity(1, 10.0) == pytest.approx(1.0)
    assert surr.similarity(3, 1.0) == pytest.approx(0.0)
    # centred query averages the four surrounding cells
    assert surr.similarity(2, 10 ** 0.5) == pytest.approx(0.5)


def test_table_rejects_bad_grids(tmp_path):
    path = _write_table(tmp_path, [["u", 0, 10],
                                   [1, 0.8, 0.2],   # drops along SINR
                                   [3, 0.8, 0.9]])
    with pytest.raises(ValueError, match="u=1.0.*decreases"):
        sem.load_similarity_table(path)
    path = _write_table(tmp_path, [["u", 0, 10],
                                   [1, 0.2, 1.4],
                                   [3, 0.3, 1.5]])
    with pytest.raises(ValueError, match="outside"):
        sem.load_similarity_table(path)


def test_table_clamp_counter(tmp_path):
    path = _write_table(tmp_path, [["u", 0, 10],
                                   [5, 0.1, 0.5],
                                   [10, 0.2, 0.6]])
    surr = sem.load_similarity_table(path)
    assert surr.clamp_count == 0
    surr.similarity(20, 1.0)          # u beyond the grid
    assert surr.clamp_count == 1
    edge = surr.similarity(30, 10 ** 5)
    assert edge == pytest.approx(0.6)  # clamped to the far corner
    assert surr.clamp_count == 2


def test_semantic_config_validation():
    sem.SemanticConfig().validate()
    with pytest.raises(ValueError):
        sem.SemanticConfig(window_s=0.0).validate()
    with pytest.raises(ValueError):
        sem.SemanticConfig(u_max_text=0).validate()
    with pytest.raises(ValueError):
        sem.SemanticConfig(payload_range_suts=(0.0, 10.0)).validate()
