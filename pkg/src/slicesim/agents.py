"""State, action and reward definitions for the two control loops.

Each slice runs an intra-slice agent that retunes the scheduling timeout
every reporting window from the slice's channel gains and buffer levels.
One inter-slice agent repartitions the RBG pool across slices on a slower
cadence from per-slice KPI summaries.  The TDDQN baseline shares the intra
machinery but scores windows on throughput and expiry only.
"""

from __future__ import annotations

import numpy as np

from .domain import SLICES, RewardWeights, ThresholdRange


def threshold_grid(rng: ThresholdRange) -> np.ndarray:
    """Equally spaced timeout values, endpoints included."""
    return np.linspace(rng.tau_min_s, rng.tau_max_s, rng.levels)


def enumerate_allocations(total_rbgs: int, n_slices: int = 3) -> list[tuple[int, ...]]:
    """All nonnegative integer splits of the pool, lexicographic order."""
    if n_slices == 1:
        return [(total_rbgs,)]
    out = []
    for head in range(total_rbgs + 1):
        for tail in enumerate_allocations(total_rbgs - head, n_slices - 1):
            out.append((head,) + tail)
    return out


def log_normalized_gain(gain, bounds=(-12.0, 0.0)) -> np.ndarray:
    """Clamp log10 of the linear gain into [0, 1] between the bounds."""
    lo, hi = bounds
    g = np.maximum(np.asarray(gain, dtype=float), 1e-300)
    x = (np.log10(g) - lo) / (hi - lo)
    return np.clip(x, 0.0, 1.0)


def intra_state(gains_mk: np.ndarray, buffer_bits, running_max,
                bounds=(-12.0, 0.0)) -> np.ndarray:
    """Flatten the slice's (ORU x user) gain matrix, log-normalized, and
    append per-user buffer levels scaled by their running maxima."""
    h = log_normalized_gain(gains_mk, bounds).ravel()
    b = np.asarray(buffer_bits, dtype=float)
    m = np.maximum(np.asarray(running_max, dtype=float), 1.0)
    return np.concatenate([h, b / m])


def intra_state_dim(n_orus: int, n_users: int) -> int:
    return n_orus * n_users + n_users


def intra_reward(u_hat: float, rate_avg: float, expired_hat: float,
                 w: RewardWeights, literal_sign: bool = False) -> float:
    """Utilization-aware window score.  The utilization term is a penalty;
    literal_sign flips it positive to reproduce the uncorrected form."""
    sign = 1.0 if literal_sign else -1.0
    return sign * w.alpha * u_hat + w.beta * rate_avg - w.gamma * expired_hat


def tddqn_reward(rate_avg: float, expired_hat: float, w: RewardWeights) -> float:
    """Baseline window score: throughput and expiry only, with the
    utilization weight folded into the rate term to keep scales close."""
    return (w.beta + w.alpha) * rate_avg - w.gamma * expired_hat


def inter_state(stats_by_slice) -> np.ndarray:
    """Concatenate (rate_avg, u_hat, delta, expired_hat) per slice in the
    fixed E, U, M order."""
    parts = []
    for s in SLICES:
        st = stats_by_slice[s]
        parts.extend([st.rate_avg, st.u_hat, st.delta, st.expired_hat])
    return np.array(parts, dtype=float)


INTER_STATE_DIM = 4 * len(SLICES)


def inter_reward(stats_by_slice) -> float:
    """Sum over slices of normalized rate minus normalized delay.

    The delay term is the starvation-aware penalty: a slice that completed
    nothing while holding backlog is charged its head-of-line age, so the
    learner cannot zero the term by refusing to allocate.
    """
    total = 0.0
    for s in SLICES:
        st = stats_by_slice[s]
        total += st.rate_avg - st.delay_penalty
    return total
