"""Comparison policies and the evaluation harness for user-count sweeps."""

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .ddpg import train
from .environment import Action, IsacEnv, encode_x
from .sensing import probe_mi_ceiling

EVAL_STREAM = 1


class PolicyKind(enum.Enum):
    PROPOSED = "Proposed"
    RANDOM_RAT = "RandomRAT"
    ALL_MMWAVE = "AllMmWave"
    ALL_LTE = "AllLTE"

    @classmethod
    def parse(cls, name):
        for k in cls:
            if k.value.lower() == str(name).strip().lower():
                return k
        raise ValueError(f"unknown policy {name!r}; expected one of {[k.value for k in cls]}")


class RatClamp:
    """Forces the RAT part of every action for the fixed-RAT baselines.

    RandomRAT draws a fresh uniform x at every episode start.
    """

    def __init__(self, kind, n_users, rng):
        self.kind = kind
        self.n_users = n_users
        self.rng = rng
        self.x = None
        self.on_reset()

    def on_reset(self):
        if self.kind is PolicyKind.ALL_MMWAVE:
            self.x = np.ones(self.n_users, dtype=int)
        elif self.kind is PolicyKind.ALL_LTE:
            self.x = np.zeros(self.n_users, dtype=int)
        elif self.kind is PolicyKind.RANDOM_RAT:
            self.x = self.rng.integers(0, 2, self.n_users)
        else:
            self.x = None

    def __call__(self, raw):
        if self.x is None:
            return raw
        return encode_x(raw, self.x)


def action_filter_for(kind, n_users, seed):
    if kind is PolicyKind.PROPOSED:
        return None
    return RatClamp(kind, n_users, np.random.default_rng([seed, 7]))


def matched_filter_precoder(world, x, p_max):
    """Rows proportional to each user's own-RAT channel, equal power split."""
    w = world
    H = np.where(np.asarray(x, bool)[:, None], w.H_mm, w.H_lte)
    norms = np.linalg.norm(H, axis=1)
    norms[norms == 0] = 1.0
    return H / norms[:, None] * np.sqrt(p_max / H.shape[0])


@dataclass
class EvalRecord:
    kind: PolicyKind
    n_users: int
    seed: int
    mean_rate: float
    std_rate: float
    mean_mi: float
    mean_reward: float
    feasible_fraction: float
    sum_rates: np.ndarray = field(repr=False, default=None)
    mis: np.ndarray = field(repr=False, default=None)
    x_history: np.ndarray = field(repr=False, default=None)
    usable_history: np.ndarray = field(repr=False, default=None)
    all_mmwave_formula: bool = field(repr=False, default=True)
    curve: object = field(repr=False, default=None)


def with_probe_threshold(scenario, seed, fraction, n_samples=10_000):
    """Scenario whose MI threshold is ``fraction`` of the probed MI ceiling."""
    env = IsacEnv(scenario, seed)
    ceiling = probe_mi_ceiling(env.sigma_g, scenario.n_users, scenario.p_max, scenario.sensing,
                               np.random.default_rng([seed, 3]), n_samples)
    return replace(scenario, mi_min=max(fraction * ceiling, 0.0)), ceiling


def evaluate_policy(kind, scenario, seed, agent=None, episodes=10, precoder="ddpg"):
    """Roll out a (trained or random) policy on fresh episodes of the seed's scene."""
    env = IsacEnv(scenario, seed, stream=EVAL_STREAM)
    clamp = action_filter_for(kind, scenario.n_users, seed + 1_000_003)
    rng = np.random.default_rng([seed, 11])
    rates, mis, rewards, feas, xs, usable = [], [], [], [], [], []
    mm_formula = True
    for _ in range(episodes):
        state = env.reset()
        if clamp is not None:
            clamp.on_reset()
        while not env.done:
            if precoder == "matched_filter" and clamp is not None:
                action = Action(clamp.x.copy(), matched_filter_precoder(env.world, clamp.x, scenario.p_max))
            else:
                raw = agent.act(state, explore=False) if agent is not None else rng.random(scenario.action_dim)
                if clamp is not None:
                    raw = clamp(raw)
                action = env.decode(raw)
            usable.append(env.mm_usable())
            state, reward, m, _ = env.step(action)
            rates.append(m.sum_rate)
            mis.append(m.mi)
            rewards.append(reward)
            feas.append(m.feasible)
            xs.append(m.x)
            if kind is PolicyKind.ALL_MMWAVE and not np.all(m.x == 1):
                mm_formula = False
    rates = np.asarray(rates)
    return EvalRecord(kind, scenario.n_users, seed, float(rates.mean()), float(rates.std()),
                      float(np.mean(mis)), float(np.mean(rewards)), float(np.mean(feas)),
                      rates, np.asarray(mis), np.asarray(xs), np.asarray(usable), mm_formula)


def run_baseline(kind, scenario, hp, seed, episodes=10, precoder="ddpg"):
    """Train (unless ``hp.max_steps == 0``) and evaluate one policy.

    With zero training steps the policy is uniform random over raw actions,
    still subject to the RAT clamp of the fixed-RAT baselines.
    """
    agent, curve = None, None
    skip_training = hp.max_steps == 0 or (precoder == "matched_filter" and kind is not PolicyKind.PROPOSED)
    if not skip_training:
        env = IsacEnv(scenario, seed)
        clamp = action_filter_for(kind, scenario.n_users, seed)
        agent, curve = train(env, hp, seed, action_filter=clamp)
    record = evaluate_policy(kind, scenario, seed, agent, episodes, precoder)
    record.curve = curve
    return record


@dataclass
class SweepRow:
    n_users: int
    policy: PolicyKind
    mean_rate: float
    std_rate: float
    mean_mi: float


def aggregate(records):
    """Collapse per-seed records to one row per (N, policy); std is across seeds."""
    groups = {}
    for r in records:
        groups.setdefault((r.n_users, r.kind), []).append(r)
    rows = []
    for (n, kind), recs in groups.items():
        means = np.array([r.mean_rate for r in recs])
        rows.append(SweepRow(n, kind, float(means.mean()), float(means.std()),
                             float(np.mean([r.mean_mi for r in recs]))))
    return rows


def sweep_users(kinds, n_list, seeds, scenario_for, hp, episodes=10, precoder="ddpg", progress=None):
    """Full factorial over (N, policy, seed); returns ``(rows, records)``.

    ``scenario_for(n, seed)`` builds the scenario for each cell.
    """
    if not seeds:
        raise ValueError("need at least one seed")
    records = []
    for n in n_list:
        for seed in seeds:
            scenario = scenario_for(n, seed)
            for kind in kinds:
                rec = run_baseline(kind, scenario, hp, seed, episodes, precoder)
                records.append(rec)
                if progress is not None:
                    progress(rec)
    return aggregate(records), records
