"""KPIs, QoS satisfaction and distribution summaries.

Rates are averaged per user over a horizon of TTIs and normalized by the
slice rate floor; delays are averaged over completed packets and normalized
by the slice delay ceiling.  A user satisfies QoS when its normalized rate
reaches 1 and its normalized delay stays within 1.  The literal switch
flips the delay comparison to >= for compatibility with the uncorrected
reading of the satisfaction rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def user_mean_rate_bps(per_tti_rates_bps, n_ttis: int) -> float:
    """Average rate over the horizon; TTIs without grants count as zero."""
    return float(sum(per_tti_rates_bps)) / n_ttis


def normalized_rate(mean_rate_bps: float, min_rate_bps: float) -> float:
    return mean_rate_bps / min_rate_bps


def normalized_delay(mean_delay_s: float, max_delay_s: float) -> float:
    return mean_delay_s / max_delay_s


# saturation for the reward-facing delay penalty: under overload head-of-line
# ages grow without bound, which would swamp every other reward term and blow
# up Q targets; 10x the QoS ceiling keeps the gradient where it is useful
PENALTY_SATURATION = 10.0


def qos_satisfied(rate_norm: float, delay_norm: float, has_completions: bool,
                  literal: bool = False) -> bool:
    """Rate floor reached and delay ceiling respected.

    Users with no completed packets cannot demonstrate their delay and count
    as unsatisfied.
    """
    if not has_completions:
        return False
    if literal:
        return rate_norm >= 1.0 and delay_norm >= 1.0
    return rate_norm >= 1.0 and delay_norm <= 1.0


def eccdf(samples) -> list[tuple[float, float]]:
    """Empirical complementary CDF: sorted unique values paired with the
    fraction of samples strictly greater."""
    arr = np.asarray(list(samples), dtype=float)
    n = arr.size
    values = np.unique(arr)
    out = []
    for v in values:
        out.append((float(v), float(np.count_nonzero(arr > v)) / n))
    return out


def stabilization_index(series, ma_window: int = 50, span: int = 100,
                        rel_tol: float = 0.05) -> int | None:
    """First index (into the series) where the moving average stays within
    rel_tol of its value over the next `span` points; None if never."""
    x = np.asarray(list(series), dtype=float)
    if x.size < ma_window + span:
        return None
    kernel = np.ones(ma_window) / ma_window
    ma = np.convolve(x, kernel, mode="valid")  # ma[i] ends at series[i+w-1]
    for i in range(ma.size - span + 1):
        ref = ma[i]
        if ref == 0.0:
            continue
        seg = ma[i:i + span]
        if np.max(np.abs(seg - ref)) <= rel_tol * abs(ref):
            return i + ma_window - 1
    return None


@dataclass
class SliceWindowStats:
    """Aggregates of one slice over one reporting window."""

    slice: str
    rate_avg: float          # mean over users of normalized mean rate
    delay_avg: float         # mean over users with completions, normalized
    delay_penalty: float     # like delay_avg, but starvation counts: a user
                             # with backlog and no completion contributes its
                             # head-of-line age instead of being skipped;
                             # saturated at PENALTY_SATURATION
    qos_fraction: float      # share of users satisfying QoS
    umax: float              # peak per-TTI utilization in the window
    u_hat: float             # umax / capacity bound of the slice budget
    mu: float                # running mean of window peaks
    delta: float             # (umax - mu) / mu
    expired: int             # completions at or past the delay budget
    expired_hat: float       # expired / completions (0 when none)
    completed: int
    rate_avg_raw_bps: float  # mean over users, before normalization
    rate_sum_raw_bps: float  # summed over users
    delay_avg_raw_s: float   # mean over users with completions, seconds


class SliceAccumulator:
    """Collects per-TTI contributions of one slice over one window."""

    def __init__(self, slice_id: str, user_ids: list[int], budget_rbs: int):
        self.slice = slice_id
        self.user_ids = list(user_ids)
        self.budget_rbs = budget_rbs
        self.n_ttis = 0
        self.rate_sum = {k: 0.0 for k in user_ids}   # sum of per-TTI rates
        self.delay_sum = {k: 0.0 for k in user_ids}  # sum of completion delays
        self.delay_cnt = {k: 0 for k in user_ids}
        self.umax = 0.0
        self.expired = 0

    def add_tti(self, rates_bps: dict[int, float], utilization: float) -> None:
        self.n_ttis += 1
        for k, r in rates_bps.items():
            self.rate_sum[k] += r
        if utilization > self.umax:
            self.umax = utilization

    def add_completion(self, user: int, delay_s: float, expired: bool) -> None:
        self.delay_sum[user] += delay_s
        self.delay_cnt[user] += 1
        if expired:
            self.expired += 1

    def finalize(self, qos, series, grid, literal_qos: bool = False,
                 backlog_age_s: dict[int, float] | None = None) -> SliceWindowStats:
        """Close the window and produce its stats; the caller resets after.

        backlog_age_s: head-of-line packet age per user at window close.  A
        starved user (backlog, nothing completed) would otherwise vanish from
        the delay mean; its reward-facing penalty term uses this age, a lower
        bound on the delay of whatever completes next.
        """
        n = max(self.n_ttis, 1)
        rate_norms, rate_raws, delay_norms, delay_raws = [], [], [], []
        penalty_norms = []
        satisfied = 0
        completed = sum(self.delay_cnt.values())
        for k in self.user_ids:
            mean_rate = self.rate_sum[k] / n
            r_norm = normalized_rate(mean_rate, qos.min_rate_bps)
            rate_norms.append(r_norm)
            rate_raws.append(mean_rate)
            has = self.delay_cnt[k] > 0
            if has:
                mean_delay = self.delay_sum[k] / self.delay_cnt[k]
                d_norm = normalized_delay(mean_delay, qos.max_delay_s)
                delay_norms.append(d_norm)
                delay_raws.append(mean_delay)
                penalty_norms.append(min(d_norm, PENALTY_SATURATION))
            else:
                d_norm = 0.0
                age = (backlog_age_s or {}).get(k, 0.0)
                if age > 0.0:
                    penalty_norms.append(
                        min(normalized_delay(age, qos.max_delay_s),
                            PENALTY_SATURATION))
            if qos_satisfied(r_norm, d_norm, has, literal_qos):
                satisfied += 1
        n_users = len(self.user_ids)
        umax, mu, delta = series.record(self.umax)
        bound = utilization_capacity(self.budget_rbs, grid)
        return SliceWindowStats(
            slice=self.slice,
            rate_avg=float(np.mean(rate_norms)) if rate_norms else 0.0,
            delay_avg=float(np.mean(delay_norms)) if delay_norms else 0.0,
            delay_penalty=float(np.mean(penalty_norms)) if penalty_norms else 0.0,
            qos_fraction=satisfied / n_users if n_users else 0.0,
            umax=umax,
            u_hat=umax / bound if bound > 0 else 0.0,
            mu=mu,
            delta=delta,
            expired=self.expired,
            expired_hat=self.expired / completed if completed else 0.0,
            completed=completed,
            rate_avg_raw_bps=float(np.mean(rate_raws)) if rate_raws else 0.0,
            rate_sum_raw_bps=float(np.sum(rate_raws)) if rate_raws else 0.0,
            delay_avg_raw_s=float(np.mean(delay_raws)) if delay_raws else 0.0,
        )

    def reset(self, budget_rbs: int) -> None:
        self.budget_rbs = budget_rbs
        self.n_ttis = 0
        for k in self.user_ids:
            self.rate_sum[k] = 0.0
            self.delay_sum[k] = 0.0
            self.delay_cnt[k] = 0
        self.umax = 0.0
        self.expired = 0


def utilization_capacity(budget_rbs: int, grid, layers: int = 1,
                         max_order: int = 8) -> float:
    """Utilization bound of a budget: every RB at the top modulation order."""
    return budget_rbs * grid.symbols_per_tti * layers * max_order
