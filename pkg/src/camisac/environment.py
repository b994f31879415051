"""Joint RAT-selection / precoding environment.

One episode holds user positions, blockage and activities fixed; the
small-scale fading of both RATs is redrawn every slot. The reward is the sum
rate when every constraint holds and a flat penalty otherwise. The transmit
power constraint never triggers the penalty because decoded precoders are
projected onto the power ball.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import vision
from .channel import ChannelParams, db_to_linear, generate_channels, rate_lte, rate_mmwave, sinr_db_all
from .numerics import frobenius_norm_sq
from .sensing import SensingConfig, generate_sensing_channel, sensing_mi

PENALTY = -100.0


@dataclass
class Scenario:
    n_users: int = 10
    n_antennas: int = 16
    mm: ChannelParams = field(default_factory=lambda: ChannelParams(wavelength=0.002, n_paths=5))
    lte: ChannelParams = field(default_factory=lambda: ChannelParams(wavelength=0.1, n_paths=9))
    sensing: SensingConfig = field(default_factory=SensingConfig)
    p_max: float = 1.0
    mi_min: float = 90.0
    p_block: float = 0.2
    area_radius: float = 100.0
    mm_coverage_radius: float = 80.0
    mm_outage: bool = True
    episode_length: int = 50
    interference_exponent: int = 2
    sinr_floor_db: float = -200.0
    rate_table: np.ndarray = field(default_factory=vision.default_rate_table)
    n_activities: int = 60
    camera: vision.CameraPose = field(
        default_factory=lambda: vision.CameraPose(roll=math.pi, focal_length=0.004, position=(0.0, 0.0, 25.0)))
    detector: vision.DetectorNoise = field(default_factory=vision.DetectorNoise)
    user_height: float = 1.7
    user_width: float = 0.5
    radar_noise_std: float = 0.0

    def __post_init__(self):
        if self.n_users < 1 or self.n_antennas < 1:
            raise ValueError("n_users and n_antennas must be >= 1")
        if not self.p_max > 0:
            raise ValueError("p_max must be positive")
        if not self.mi_min >= 0:
            raise ValueError("mi_min must be >= 0")
        if not 0 <= self.p_block <= 1:
            raise ValueError("p_block must lie in [0, 1]")
        if self.episode_length < 1:
            raise ValueError("episode_length must be >= 1")
        if self.interference_exponent not in (1, 2):
            raise ValueError("interference_exponent must be 1 or 2")
        if len(self.rate_table) != self.n_activities:
            raise ValueError("rate table must have one entry per activity class")
        for p in (self.mm, self.lte):
            if p.n_antennas != self.n_antennas:
                raise ValueError("channel antenna count differs from scenario")
        if self.sensing.n_antennas != self.n_antennas:
            raise ValueError("sensing antenna count differs from scenario")

    @property
    def action_dim(self):
        return self.n_users + 2 * self.n_users * self.n_antennas

    @property
    def state_dim(self):
        return 4 * self.n_users * self.n_antennas + 3 * self.n_users


@dataclass
class Action:
    x: np.ndarray
    W: np.ndarray


@dataclass
class StepMetrics:
    x: np.ndarray
    sinr_db: np.ndarray
    rates: np.ndarray
    min_rates: np.ndarray
    sum_rate: float
    mi: float
    rate_ok: np.ndarray
    mi_ok: bool
    power: float
    reward: float

    @property
    def feasible(self):
        return bool(self.mi_ok and self.rate_ok.all())


@dataclass
class WorldState:
    positions: np.ndarray
    true_distances: np.ndarray
    los: np.ndarray
    in_coverage: np.ndarray
    detected: np.ndarray
    true_activities: np.ndarray
    activities: np.ndarray
    boxes: list
    distances: np.ndarray
    loc_failed: np.ndarray
    min_rates: np.ndarray
    H_mm: np.ndarray
    H_lte: np.ndarray
    t: int = 0


def decode_action(raw, n_users, n_antennas, p_max):
    """Map a raw action in [0, 1]^(N + 2NM) to (x, W).

    ``raw[:N]`` thresholds at 0.5 into x; the next N*M entries are the real
    parts and the last N*M the imaginary parts of W (row-major), each mapped
    affinely to [-1, 1]. W is scaled down onto the power ball if needed.
    """
    raw = np.asarray(raw, dtype=float).ravel()
    nm = n_users * n_antennas
    if raw.size != n_users + 2 * nm:
        raise ValueError(f"raw action has {raw.size} entries, expected {n_users + 2 * nm}")
    x = (raw[:n_users] >= 0.5).astype(int)
    body = 2.0 * raw[n_users:] - 1.0
    W = (body[:nm] + 1j * body[nm:]).reshape(n_users, n_antennas)
    power = frobenius_norm_sq(W)
    if power > p_max:
        W = W * math.sqrt(p_max / power)
    return Action(x, W)


def encode_x(raw, x):
    """Overwrite the RAT part of a raw action so that it decodes to ``x``."""
    out = np.array(raw, dtype=float, copy=True)
    out[:len(x)] = np.where(np.asarray(x) > 0, 1.0, 0.0)
    return out


class IsacEnv:
    """Episodic environment over a fixed :class:`Scenario`.

    The sensing channel depends only on ``seed`` (the sensed scene is
    static); users, blockage, activities and fading come from a separate
    stream selected by ``(seed, stream)``, so an evaluation environment can
    share the training scene while seeing fresh episodes.
    """

    def __init__(self, scenario, seed=0, stream=0):
        self.scenario = scenario
        self.seed = seed
        self.sigma_g = generate_sensing_channel(scenario.sensing, np.random.default_rng([seed, 0]))
        self.rng = np.random.default_rng([seed, 1, stream])
        self.world = None
        self.done = True
        self._last_distance = np.full(scenario.n_users, scenario.area_radius)

    # -- world construction -------------------------------------------------

    @property
    def bs_position(self):
        return np.asarray(self.scenario.camera.position, dtype=float)

    def _draw_fading(self, mask_mm):
        sc, rng = self.scenario, self.rng
        H_mm = generate_channels(sc.mm, sc.n_users, rng)
        H_lte = generate_channels(sc.lte, sc.n_users, rng)
        H_mm[~mask_mm] = 0.0
        return H_mm, H_lte

    def mm_usable(self, world=None):
        w = world or self.world
        if not self.scenario.mm_outage:
            return np.ones(self.scenario.n_users, dtype=bool)
        return w.los & w.in_coverage

    def localize(self, n, world=None):
        """Distance estimate for user ``n`` and whether localization failed.

        Radar ranging when the user is in LoS and inside mmWave coverage,
        camera ranging otherwise; a user seen by neither keeps its last
        known distance.
        """
        sc = self.scenario
        w = world or self.world
        if w.los[n] and w.in_coverage[n]:
            noise = sc.radar_noise_std * self.rng.standard_normal() if sc.radar_noise_std > 0 else 0.0
            return max(w.true_distances[n] + noise, 1e-3), False
        if w.detected[n]:
            return vision.estimate_range(w.boxes[n], sc.camera.focal_length, sc.user_height), False
        return float(self._last_distance[n]), True

    def reset(self):
        sc, rng = self.scenario, self.rng
        n = sc.n_users
        r = sc.area_radius * np.sqrt(rng.random(n))
        theta = rng.uniform(0, 2 * np.pi, n)
        positions = np.column_stack([r * np.cos(theta), r * np.sin(theta), np.full(n, sc.user_height / 2)])
        true_d = np.linalg.norm(positions - self.bs_position, axis=1)
        los = rng.random(n) >= sc.p_block
        in_cov = r <= sc.mm_coverage_radius
        true_act = rng.integers(1, sc.n_activities + 1, n)
        boxes, profile, detected = vision.detect_activities(
            positions, true_act, sc.camera, sc.detector, rng,
            heights=sc.user_height, widths=sc.user_width, n_classes=sc.n_activities)
        world = WorldState(
            positions=positions, true_distances=true_d, los=los, in_coverage=in_cov,
            detected=detected, true_activities=true_act, activities=profile.activities,
            boxes=boxes, distances=np.zeros(n), loc_failed=np.zeros(n, dtype=bool),
            min_rates=np.array([vision.min_rate_for_activity(a, sc.rate_table) for a in profile.activities]),
            H_mm=None, H_lte=None)
        for i in range(n):
            world.distances[i], world.loc_failed[i] = self.localize(i, world)
        self._last_distance = world.distances.copy()
        world.H_mm, world.H_lte = self._draw_fading(self.mm_usable(world))
        self.world = world
        self.done = False
        return self.observe()

    def observe(self):
        sc, w = self.scenario, self.world
        return np.concatenate([
            w.H_mm.real.ravel(), w.H_mm.imag.ravel(),
            w.H_lte.real.ravel(), w.H_lte.imag.ravel(),
            w.activities / sc.n_activities,
            w.distances / sc.area_radius,
            w.min_rates / max(float(np.max(sc.rate_table)), 1.0),
        ])

    # -- reward -------------------------------------------------------------

    def decode(self, raw):
        sc = self.scenario
        return decode_action(raw, sc.n_users, sc.n_antennas, sc.p_max)

    def evaluate(self, action, world=None):
        """Reward and metrics of ``action`` in the current (or given) world state."""
        sc = self.scenario
        w = world or self.world
        x = np.asarray(action.x).astype(int) & ~w.loc_failed
        xb = x.astype(bool)
        H_own = np.where(xb[:, None], w.H_mm, w.H_lte)
        sinr = sinr_db_all(H_own, action.W, x, (sc.mm, sc.lte), w.distances,
                           sc.interference_exponent, sc.sinr_floor_db)
        gamma = db_to_linear(sinr)
        rates = np.array([
            rate_mmwave(g, sc.mm) if xi else rate_lte(g, sc.lte.bandwidth)
            for g, xi in zip(gamma, xb)])
        total = float(np.sum(rates))
        mi = sensing_mi(action.W, x, self.sigma_g, sc.sensing)
        rate_ok = rates >= w.min_rates
        mi_ok = mi >= sc.mi_min
        reward = total if (mi_ok and rate_ok.all()) else PENALTY
        return reward, StepMetrics(
            x=x, sinr_db=sinr, rates=rates, min_rates=w.min_rates.copy(), sum_rate=total,
            mi=mi, rate_ok=rate_ok, mi_ok=bool(mi_ok), power=frobenius_norm_sq(action.W), reward=reward)

    def step(self, action):
        """Apply ``action`` (an :class:`Action` or raw vector) for one slot.

        Returns ``(next_state, reward, metrics, done)``.
        """
        if self.world is None or self.done:
            raise RuntimeError("episode is over; call reset() first")
        if not isinstance(action, Action):
            action = self.decode(action)
        reward, metrics = self.evaluate(action)
        w = self.world
        w.t += 1
        w.H_mm, w.H_lte = self._draw_fading(self.mm_usable())
        self.done = w.t >= self.scenario.episode_length
        return self.observe(), reward, metrics, self.done
