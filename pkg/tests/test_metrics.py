import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slicesim import metrics as mx
from slicesim.domain import QosProfile, ResourceGrid
from slicesim.scheduler import UtilizationSeries

GRID = ResourceGrid()
QOS_E = QosProfile(min_rate_bps=16e6, max_delay_s=0.010)


def test_user_mean_rate_counts_idle_ttis():
    assert mx.user_mean_rate_bps([1000.0, 2000.0], 4) == 750.0
    assert mx.user_mean_rate_bps([], 10) == 0.0


def test_normalizations():
    assert mx.normalized_rate(8e6, 16e6) == 0.5
    # 2 ms against a 10 ms ceiling
    assert mx.normalized_delay(0.002, 0.010) == pytest.approx(0.2)


def test_qos_satisfied_rules():
    assert mx.qos_satisfied(1.0, 1.0, True)
    assert mx.qos_satisfied(1.2, 0.3, True)
    assert not mx.qos_satisfied(0.99, 0.3, True)
    assert not mx.qos_satisfied(1.2, 1.01, True)
    assert not mx.qos_satisfied(5.0, 0.0, False)  # nothing completed


def test_qos_literal_flips_delay_comparison():
    assert mx.qos_satisfied(1.2, 1.5, True, literal=True)
    assert not mx.qos_satisfied(1.2, 0.5, True, literal=True)
    assert mx.qos_satisfied(1.2, 1.0, True, literal=True)  # boundary both ways
    assert mx.qos_satisfied(1.2, 1.0, True, literal=False)


def test_eccdf_small():
    got = mx.eccdf([1.0, 2.0, 2.0, 3.0])
    assert got == [(1.0, 0.75), (2.0, 0.25), (3.0, 0.0)]


def test_eccdf_single_value():
    assert mx.eccdf([5.0, 5.0]) == [(5.0, 0.0)]


def test_eccdf_matches_counting_oracle():
    rng = np.random.default_rng(12)
    samples = rng.integers(0, 20, size=500).astype(float)
    for v, frac in mx.eccdf(samples):
        assert frac == pytest.approx(np.sum(samples > v) / samples.size)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=60))
def test_eccdf_monotone_nonincreasing(samples):
    pts = mx.eccdf(samples)
    fracs = [f for _, f in pts]
    assert fracs == sorted(fracs, reverse=True)
    assert pts[-1][1] == 0.0  # nothing exceeds the maximum
    assert all(0.0 <= f <= 1.0 for f in fracs)


def _naive_stabilization(x, w=50, span=100, tol=0.05):
    if len(x) < w + span:
        return None
    ma = [sum(x[i:i + w]) / w for i in range(len(x) - w + 1)]
    for i in range(len(ma) - span + 1):
        ref = ma[i]
        if ref == 0.0:
            continue
        if all(abs(v - ref) <= tol * abs(ref) for v in ma[i:i + span]):
            return i + w - 1
    return None


def test_stabilization_constant_series():
    x = [7.0] * 200
    assert mx.stabilization_index(x) == 49  # first full moving-average point


def test_stabilization_short_series_none():
    assert mx.stabilization_index([1.0] * 149) is None


def test_stabilization_diverging_series_none():
    x = [2.0 ** i for i in range(200)]
    assert mx.stabilization_index(x) is None


def test_stabilization_after_transient():
    x = list(np.linspace(0.0, 100.0, 100)) + [100.0] * 200
    got = mx.stabilization_index(x)
    assert got == _naive_stabilization(x)
    assert got is not None
    assert got >= 99  # cannot settle during the ramp


def test_stabilization_matches_naive_on_noise():
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = (100.0 + np.cumsum(rng.normal(0, 1.0, size=300))).tolist()
        assert mx.stabilization_index(x) == _naive_stabilization(x)


def _window():
    acc = mx.SliceAccumulator("E", [1, 2], budget_rbs=30)
    acc.add_tti({1: 16e6, 2: 8e6}, 300.0)
    acc.add_tti({1: 16e6, 2: 8e6}, 200.0)
    acc.add_completion(1, 0.002, expired=False)
    return acc


def test_accumulator_window_stats():
    acc = _window()
    st_ = acc.finalize(QOS_E, UtilizationSeries(), GRID,
                       backlog_age_s={2: 0.005})
    assert st_.slice == "E"
    assert st_.rate_avg == pytest.approx(0.75)           # (1.0 + 0.5) / 2
    assert st_.rate_avg_raw_bps == pytest.approx(12e6)
    assert st_.rate_sum_raw_bps == pytest.approx(24e6)
    assert st_.delay_avg == pytest.approx(0.2)           # only user 1 completed
    assert st_.delay_avg_raw_s == pytest.approx(0.002)
    # starved user 2 contributes its 5 ms head age to the penalty only
    assert st_.delay_penalty == pytest.approx((0.2 + 0.5) / 2)
    assert st_.qos_fraction == 0.5
    assert st_.umax == 300.0
    assert st_.u_hat == pytest.approx(300.0 / 3360.0)
    assert st_.mu == 300.0
    assert st_.delta == 0.0
    assert st_.expired == 0
    assert st_.expired_hat == 0.0
    assert st_.completed == 1


def test_penalty_equals_delay_avg_when_all_complete():
    acc = mx.SliceAccumulator("E", [1, 2], budget_rbs=30)
    acc.add_tti({1: 16e6, 2: 16e6}, 100.0)
    acc.add_completion(1, 0.002, expired=False)
    acc.add_completion(2, 0.004, expired=False)
    st_ = acc.finalize(QOS_E, UtilizationSeries(), GRID,
                       backlog_age_s={1: 0.009, 2: 0.009})
    assert st_.delay_penalty == st_.delay_avg == pytest.approx(0.3)


def test_penalty_zero_for_idle_user():
    acc = mx.SliceAccumulator("E", [1], budget_rbs=30)
    acc.add_tti({1: 0.0}, 0.0)
    st_ = acc.finalize(QOS_E, UtilizationSeries(), GRID, backlog_age_s={})
    assert st_.delay_penalty == 0.0
    assert st_.delay_avg == 0.0


def test_penalty_saturates_under_overload():
    # 2 s head age against a 10 ms ceiling would score 200 unclamped
    acc = mx.SliceAccumulator("E", [1], budget_rbs=30)
    acc.add_tti({1: 0.0}, 0.0)
    st_ = acc.finalize(QOS_E, UtilizationSeries(), GRID,
                       backlog_age_s={1: 2.0})
    assert st_.delay_penalty == mx.PENALTY_SATURATION
    # the reporting KPI keeps the true value
    acc2 = mx.SliceAccumulator("E", [1], budget_rbs=30)
    acc2.add_tti({1: 0.0}, 0.0)
    acc2.add_completion(1, 2.0, expired=True)
    st2 = acc2.finalize(QOS_E, UtilizationSeries(), GRID, backlog_age_s={})
    assert st2.delay_avg == pytest.approx(200.0)
    assert st2.delay_penalty == mx.PENALTY_SATURATION


def test_expired_ratio():
    acc = mx.SliceAccumulator("U", [3], budget_rbs=30)
    acc.add_tti({3: 4e6}, 50.0)
    acc.add_completion(3, 0.001, expired=False)
    acc.add_completion(3, 0.003, expired=True)
    st_ = acc.finalize(QosProfile(3.8e6, 0.002), UtilizationSeries(), GRID)
    assert st_.expired == 1
    assert st_.completed == 2
    assert st_.expired_hat == 0.5


def test_finalize_literal_qos():
    acc = mx.SliceAccumulator("E", [1], budget_rbs=30)
    acc.add_tti({1: 20e6}, 10.0)
    acc.add_completion(1, 0.002, expired=False)
    normal = acc.finalize(QOS_E, UtilizationSeries(), GRID)
    assert normal.qos_fraction == 1.0
    literal = acc.finalize(QOS_E, UtilizationSeries(), GRID, literal_qos=True)
    assert literal.qos_fraction == 0.0  # 0.2 fails the flipped >= test


def test_running_mean_and_drift_across_windows():
    acc = _window()
    series = UtilizationSeries()
    acc.finalize(QOS_E, series, GRID)
    acc.reset(budget_rbs=30)
    acc.add_tti({1: 0.0, 2: 0.0}, 900.0)
    st2 = acc.finalize(QOS_E, series, GRID)
    assert st2.mu == pytest.approx(600.0)   # mean of 300 and 900
    assert st2.delta == pytest.approx(0.5)


def test_reset_clears_state_and_rebinds_budget():
    acc = _window()
    acc.reset(budget_rbs=12)
    assert acc.n_ttis == 0
    assert acc.umax == 0.0
    assert acc.expired == 0
    assert all(v == 0.0 for v in acc.rate_sum.values())
    assert all(v == 0 for v in acc.delay_cnt.values())
    st_ = acc.finalize(QOS_E, UtilizationSeries(), GRID)
    assert st_.rate_avg == 0.0
    assert st_.completed == 0
    acc.add_tti({1: 1.0, 2: 1.0}, 1344.0)
    # u_hat now normalizes by the smaller budget: 12 * 14 * 8 = 1344
    st2 = acc.finalize(QOS_E, UtilizationSeries(), GRID)
    assert st2.u_hat == pytest.approx(1.0)


def test_utilization_capacity():
    assert mx.utilization_capacity(30, GRID) == 3360.0
    assert mx.utilization_capacity(24, GRID) == 2688.0
    assert mx.utilization_capacity(0, GRID) == 0.0
