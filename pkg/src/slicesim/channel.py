"""Radio propagation and user mobility.

Log-distance pathloss anchored at a free-space reference, Rayleigh block
fading that is flat across the band and redrawn every TTI, and a random-walk
mobility model with heading hold and reflecting boundaries.  Interference is
counted per RB from the radio units actually transmitting on that RB.
"""

from __future__ import annotations

import math

import numpy as np

from .domain import SPEED_OF_LIGHT, ChannelParams, RadioUnit, UserEquipment


def free_space_ref_db(carrier_hz: float, ref_distance_m: float = 1.0) -> float:
    """Free-space pathloss at the reference distance, in dB."""
    return 20.0 * math.log10(4.0 * math.pi * ref_distance_m * carrier_hz
                             / SPEED_OF_LIGHT)


def pathloss_db(distance_m, exponent: float, carrier_hz: float,
                ref_distance_m: float = 1.0):
    """Log-distance pathloss; distances inside the reference are clamped."""
    d = np.maximum(np.asarray(distance_m, dtype=float), ref_distance_m)
    return (free_space_ref_db(carrier_hz, ref_distance_m)
            + 10.0 * exponent * np.log10(d / ref_distance_m))


def sample_fading(rng: np.random.Generator) -> complex:
    """One circularly-symmetric complex Gaussian coefficient, E[|h|^2] = 1."""
    re, im = rng.standard_normal(2)
    return complex(re, im) / math.sqrt(2.0)


def fading_matrix(rng: np.random.Generator, n_users: int, n_orus: int) -> np.ndarray:
    """Fresh per-link fading for one TTI, shape (n_users, n_orus)."""
    re = rng.standard_normal((n_users, n_orus))
    im = rng.standard_normal((n_users, n_orus))
    return (re + 1j * im) / math.sqrt(2.0)


def channel_gain(h, pl_db):
    """Composite linear power gain |h|^2 * 10^(-PL/10)."""
    return (np.abs(h) ** 2) * 10.0 ** (-np.asarray(pl_db, dtype=float) / 10.0)


def noise_power_w(density_dbm_hz: float, noise_figure_db: float,
                  bandwidth_hz: float) -> float:
    """Thermal noise power over the occupied bandwidth, in watts."""
    dbm = density_dbm_hz + noise_figure_db + 10.0 * math.log10(bandwidth_hz)
    return 10.0 ** (dbm / 10.0) / 1000.0


def interference_w(per_oru_rx_w, serving: int, active) -> float:
    """Received power summed over the radio units transmitting on this RB,
    the serving one excluded.

    per_oru_rx_w: received power from each ORU were it transmitting (W)
    active: boolean mask of ORUs actually transmitting on the RB
    """
    total = 0.0
    for m, rx in enumerate(per_oru_rx_w):
        if m != serving and active[m]:
            total += rx
    return total


def sinr(signal_w: float, interference: float, noise_w: float) -> float:
    return signal_w / (interference + noise_w)


def rb_rate_bps(bandwidth_hz: float, gamma: float) -> float:
    """Shannon rate of one RB at linear SINR gamma."""
    return bandwidth_hz * math.log2(1.0 + gamma)


def step_mobility(users: list[UserEquipment], region, dt_s: float,
                  rng: np.random.Generator, redraw_heading: bool) -> None:
    """Advance every user by dt at its speed; reflect off the region edges.

    Headings are redrawn uniformly on [0, 2pi) when redraw_heading is set,
    otherwise held.  One rng draw per user per redraw keeps the stream
    independent of position state.
    """
    xmin, ymin, xmax, ymax = region
    for u in users:
        if redraw_heading:
            u.heading_rad = float(rng.uniform(0.0, 2.0 * math.pi))
        if u.speed_mps == 0.0 or dt_s == 0.0:
            continue
        x = u.x + u.speed_mps * dt_s * math.cos(u.heading_rad)
        y = u.y + u.speed_mps * dt_s * math.sin(u.heading_rad)
        cos_h, sin_h = math.cos(u.heading_rad), math.sin(u.heading_rad)
        if x < xmin:
            x, cos_h = 2.0 * xmin - x, -cos_h
        elif x > xmax:
            x, cos_h = 2.0 * xmax - x, -cos_h
        if y < ymin:
            y, sin_h = 2.0 * ymin - y, -sin_h
        elif y > ymax:
            y, sin_h = 2.0 * ymax - y, -sin_h
        u.x, u.y = x, y
        u.heading_rad = math.atan2(sin_h, cos_h)


def place_users(users: list[UserEquipment], region,
                rng: np.random.Generator) -> None:
    """Drop users uniformly inside the region."""
    xmin, ymin, xmax, ymax = region
    for u in users:
        u.x = float(rng.uniform(xmin, xmax))
        u.y = float(rng.uniform(ymin, ymax))


def distances(users: list[UserEquipment], orus: list[RadioUnit]) -> np.ndarray:
    """Euclidean user-to-ORU distances, shape (n_users, n_orus)."""
    up = np.array([[u.x, u.y] for u in users])
    op = np.array([[o.x, o.y] for o in orus])
    diff = up[:, None, :] - op[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=2))


def reassociate(users: list[UserEquipment], orus: list[RadioUnit],
                params: ChannelParams) -> None:
    """Point each user at the ORU with the least pathloss (ties: lowest id)."""
    d = distances(users, orus)
    pl = pathloss_db(d, params.pathloss_exponent, params.carrier_hz,
                     params.ref_distance_m)
    best = np.argmin(pl, axis=1)  # argmin takes the first (lowest id) on ties
    for u, m in zip(users, best):
        u.serving_oru = int(m)


class ChannelState:
    """Per-TTI propagation snapshot for all users and radio units."""

    def __init__(self, cfg):
        self.params = cfg.channel
        self.grid = cfg.grid
        self.orus = cfg.orus
        n_rbs_total = cfg.grid.total_rbs
        # equal split of each ORU's power across every RB of the pool
        self.p_rb_w = np.array([o.tx_power_w / n_rbs_total for o in cfg.orus])
        self.noise_w = noise_power_w(self.params.noise_density_dbm_hz,
                                     self.params.noise_figure_db,
                                     cfg.grid.rb_bandwidth_hz)
        self.h = None        # complex fading, (K, M)
        self.pl_db = None    # pathloss in dB, (K, M)
        self.gain = None     # composite linear gain, (K, M)
        self.rx_w = None     # received power per link at full activity, (K, M)

    def refresh(self, users: list[UserEquipment], rng: np.random.Generator) -> None:
        """Redraw fading and recompute pathloss for the current positions."""
        self.h = fading_matrix(rng, len(users), len(self.orus))
        d = distances(users, self.orus)
        self.pl_db = pathloss_db(d, self.params.pathloss_exponent,
                                 self.params.carrier_hz,
                                 self.params.ref_distance_m)
        self.gain = channel_gain(self.h, self.pl_db)
        self.rx_w = self.gain * self.p_rb_w[None, :]

    def planning_sinr(self, user: int, serving: int) -> float:
        """Worst-case SINR assuming every other ORU transmits on the RB."""
        rx = self.rx_w[user]
        interf = float(rx.sum() - rx[serving])
        return sinr(float(rx[serving]), interf, self.noise_w)

    def realized_sinr(self, user: int, serving: int, active) -> float:
        """SINR given the actual per-ORU activity on the RB."""
        rx = self.rx_w[user]
        interf = interference_w(rx, serving, active)
        return sinr(float(rx[serving]), interf, self.noise_w)
