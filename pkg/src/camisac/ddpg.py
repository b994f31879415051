"""Deep deterministic policy gradient in plain numpy.

Both networks are two fully connected layers. The actor ends in a sigmoid
so raw actions live in (0, 1); the critic reads the concatenated
state/action and ends linearly.
"""

import io
import math
import struct
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "sigmoid", "linear")
CHECKPOINT_MAGIC = b"DDPGCKPT"


class DivergenceError(RuntimeError):
    pass


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    return z


def _act_grad(name, z, out):
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "sigmoid":
        return out * (1.0 - out)
    return np.ones_like(z)


class Mlp:
    """Two dense layers ``act2(act1(x @ W1 + b1) @ W2 + b2)``.

    ``forward`` caches what ``backward`` needs; ``backward`` returns the
    parameter gradients (same order as :attr:`params`) and the gradient with
    respect to the input.
    """

    def __init__(self, n_in, n_hidden, n_out, activations=("relu", "linear"), rng=None, final_scale=3e-3):
        for a in activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        rng = rng if rng is not None else np.random.default_rng()
        self.activations = tuple(activations)
        lim1 = 1.0 / math.sqrt(n_in)
        self.W1 = rng.uniform(-lim1, lim1, (n_in, n_hidden))
        self.b1 = rng.uniform(-lim1, lim1, n_hidden)
        self.W2 = rng.uniform(-final_scale, final_scale, (n_hidden, n_out))
        self.b2 = rng.uniform(-final_scale, final_scale, n_out)
        self._cache = None

    @property
    def params(self):
        return [self.W1, self.b1, self.W2, self.b2]

    @property
    def shape(self):
        return self.W1.shape[0], self.W1.shape[1], self.W2.shape[1]

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.W1.shape[0]:
            raise ValueError(f"input has {x.shape[-1]} features, network expects {self.W1.shape[0]}")
        z1 = x @ self.W1 + self.b1
        h = _act(self.activations[0], z1)
        z2 = h @ self.W2 + self.b2
        out = _act(self.activations[1], z2)
        self._cache = (x, z1, h, z2, out)
        return out

    __call__ = forward

    def backward(self, grad_out):
        if self._cache is None:
            raise RuntimeError("backward called without a preceding forward pass")
        x, z1, h, z2, out = self._cache
        g2 = np.asarray(grad_out, dtype=float) * _act_grad(self.activations[1], z2, out)
        batched = x.ndim > 1
        dW2 = (h.T @ g2) if batched else np.outer(h, g2)
        db2 = g2.sum(axis=0) if batched else g2
        gh = g2 @ self.W2.T
        g1 = gh * _act_grad(self.activations[0], z1, h)
        dW1 = (x.T @ g1) if batched else np.outer(x, g1)
        db1 = g1.sum(axis=0) if batched else g1
        dx = g1 @ self.W1.T
        self._cache = None
        return [dW1, db1, dW2, db2], dx

    def copy(self):
        other = Mlp.__new__(Mlp)
        other.activations = self.activations
        other.W1, other.b1, other.W2, other.b2 = (p.copy() for p in self.params)
        other._cache = None
        return other


def soft_update(target, online, tau):
    """In place: target <- tau * online + (1 - tau) * target."""
    if target.shape != online.shape or target.activations != online.activations:
        raise ValueError("target and online networks differ in architecture")
    for t, o in zip(target.params, online.params):
        t *= 1.0 - tau
        t += tau * o
    return target


class Adam:
    def __init__(self, params, lr, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class ReplayBuffer:
    """Fixed-capacity ring buffer; the oldest transition is overwritten first."""

    def __init__(self, capacity, state_dim, action_dim):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.terminal = np.zeros(capacity, dtype=bool)
        self.size = 0
        self._next = 0

    def __len__(self):
        return self.size

    def add(self, state, action, reward, next_state, terminal=False):
        i = self._next
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.terminal[i] = terminal
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size, rng):
        if self.size < batch_size:
            raise ValueError(f"buffer holds {self.size} transitions, need {batch_size}")
        idx = rng.integers(0, self.size, batch_size)
        return (self.states[idx], self.actions[idx], self.rewards[idx],
                self.next_states[idx], self.terminal[idx])


@dataclass
class Hyperparams:
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    discount: float = 0.99
    tau: float = 0.005
    buffer_size: int = 10_000
    batch_size: int = 64
    max_steps: int = 3000
    noise: float = 0.2
    noise_is_variance: bool = False
    hidden: int = 0
    warmup: int = 1000
    reward_norm: bool = True
    loss_limit: float = 1e12

    def __post_init__(self):
        for name in ("actor_lr", "critic_lr", "buffer_size", "batch_size"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        if not 0 <= self.discount <= 1:
            raise ValueError("discount must lie in [0, 1]")
        if self.max_steps < 0 or self.warmup < 0 or self.hidden < 0:
            raise ValueError("max_steps, warmup and hidden must be >= 0")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")

    @property
    def noise_std(self):
        return math.sqrt(self.noise) if self.noise_is_variance else self.noise

    def hidden_for(self, action_dim):
        if self.hidden:
            return self.hidden
        return 256 if action_dim <= 256 else 512


def add_exploration_noise(action, std, rng):
    """Gaussian perturbation clipped back to [0, 1]."""
    action = np.asarray(action, dtype=float)
    if std == 0:
        return action.copy()
    return np.clip(action + std * rng.standard_normal(action.shape), 0.0, 1.0)


class Agent:
    def __init__(self, state_dim, action_dim, hp, rng):
        self.hp = hp
        self.rng = rng
        hidden = hp.hidden_for(action_dim)
        self.actor = Mlp(state_dim, hidden, action_dim, ("relu", "sigmoid"), rng)
        self.critic = Mlp(state_dim + action_dim, hidden, 1, ("relu", "linear"), rng)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.actor_opt = Adam(self.actor.params, hp.actor_lr)
        self.critic_opt = Adam(self.critic.params, hp.critic_lr)
        self.reward_scale = 0.0
        self.updates = 0

    @property
    def state_dim(self):
        return self.actor.shape[0]

    @property
    def action_dim(self):
        return self.actor.shape[2]

    def act(self, state, explore=True):
        a = self.actor.forward(state)
        self.actor._cache = None
        if explore:
            a = add_exploration_noise(a, self.hp.noise_std, self.rng)
        return a

    def observe_reward(self, reward):
        self.reward_scale = max(self.reward_scale, abs(float(reward)))

    def normalize(self, rewards):
        if not self.hp.reward_norm or self.reward_scale == 0:
            return rewards
        return rewards / self.reward_scale

    def update(self, buffer):
        """One critic regression step and one actor ascent step; returns critic loss."""
        hp = self.hp
        s, a, r, s2, term = buffer.sample(hp.batch_size, self.rng)
        B = s.shape[0]
        sd = self.state_dim

        a2 = self.actor_target.forward(s2)
        q2 = self.critic_target.forward(np.hstack([s2, a2]))[:, 0]
        y = self.normalize(r) + hp.discount * np.where(term, 0.0, q2)

        q = self.critic.forward(np.hstack([s, a]))[:, 0]
        diff = q - y
        loss = float(np.mean(diff ** 2))
        if not math.isfinite(loss) or loss > hp.loss_limit:
            raise DivergenceError(f"critic loss {loss:.3g} exceeded limit after {self.updates} updates")
        grads, _ = self.critic.backward((2.0 / B) * diff[:, None])
        self.critic_opt.step(grads)

        a_pi = self.actor.forward(s)
        self.critic.forward(np.hstack([s, a_pi]))
        _, dx = self.critic.backward(np.full((B, 1), -1.0 / B))
        actor_grads, _ = self.actor.backward(dx[:, sd:])
        self.actor_opt.step(actor_grads)

        soft_update(self.critic_target, self.critic, hp.tau)
        soft_update(self.actor_target, self.actor, hp.tau)
        self.updates += 1
        return loss

    # -- checkpoints --------------------------------------------------------

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(checkpoint_bytes(self))

    @classmethod
    def load(cls, path, hp=None):
        with open(path, "rb") as fh:
            return agent_from_bytes(fh.read(), hp)


def checkpoint_bytes(agent):
    """Flat layout: magic, 4 x int64 header, then float64 tensors, little endian."""
    sd, ah, ad = agent.actor.shape
    ch = agent.critic.shape[1]
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<4q", sd, ad, ah, ch))
    for net in (agent.actor, agent.critic):
        for p in net.params:
            buf.write(np.ascontiguousarray(p, dtype="<f8").tobytes())
    return buf.getvalue()


def agent_from_bytes(data, hp=None):
    if data[:8] != CHECKPOINT_MAGIC:
        raise ValueError("not a DDPG checkpoint")
    sd, ad, ah, ch = struct.unpack_from("<4q", data, 8)
    hp = hp or Hyperparams()
    agent = Agent.__new__(Agent)
    agent.hp = hp
    agent.rng = np.random.default_rng()
    agent.actor = Mlp(sd, ah, ad, ("relu", "sigmoid"), agent.rng)
    agent.critic = Mlp(sd + ad, ch, 1, ("relu", "linear"), agent.rng)
    offset = 8 + 32
    for net in (agent.actor, agent.critic):
        for p in net.params:
            n = p.size
            p[...] = np.frombuffer(data, dtype="<f8", count=n, offset=offset).reshape(p.shape)
            offset += 8 * n
    if offset != len(data):
        raise ValueError("checkpoint size does not match its header")
    agent.actor_target = agent.actor.copy()
    agent.critic_target = agent.critic.copy()
    agent.actor_opt = Adam(agent.actor.params, hp.actor_lr)
    agent.critic_opt = Adam(agent.critic.params, hp.critic_lr)
    agent.reward_scale = 0.0
    agent.updates = 0
    return agent


@dataclass
class Curve:
    step: list = field(default_factory=list)
    raw_reward: list = field(default_factory=list)
    normalized_reward: list = field(default_factory=list)
    mi: list = field(default_factory=list)
    feasible: list = field(default_factory=list)
    sum_rate: list = field(default_factory=list)

    def append(self, step, reward, normalized, mi, feasible, sum_rate):
        self.step.append(step)
        self.raw_reward.append(reward)
        self.normalized_reward.append(normalized)
        self.mi.append(mi)
        self.feasible.append(feasible)
        self.sum_rate.append(sum_rate)

    def rewards(self):
        return np.asarray(self.raw_reward, dtype=float)


def _info_fields(info):
    mi = getattr(info, "mi", float("nan"))
    feasible = getattr(info, "feasible", True)
    sum_rate = getattr(info, "sum_rate", float("nan"))
    return mi, feasible, sum_rate


def train(env, hp, seed, action_filter=None, agent=None):
    """Run ``hp.max_steps`` DDPG steps on ``env``; returns ``(agent, curve)``.

    ``env`` needs ``reset() -> state`` and ``step(raw) -> (state, reward,
    info, done)`` plus ``state_dim``/``action_dim`` (on itself or on a
    ``scenario`` attribute). ``action_filter`` may rewrite each noisy action
    before it is executed and stored; it gets ``on_reset()`` at every episode
    start.
    """
    dims = getattr(env, "scenario", env)
    rng = np.random.default_rng(seed)
    if agent is None:
        agent = Agent(dims.state_dim, dims.action_dim, hp, rng)
    buffer = ReplayBuffer(hp.buffer_size, dims.state_dim, dims.action_dim)
    curve = Curve()
    state = None
    done = True
    start_updates = max(hp.warmup, hp.batch_size)
    for step in range(hp.max_steps):
        if done:
            state = env.reset()
            if action_filter is not None:
                action_filter.on_reset()
        action = agent.act(state)
        if action_filter is not None:
            action = action_filter(action)
        next_state, reward, info, done = env.step(action)
        terminal = bool(getattr(env, "terminal_on_done", False) and done)
        buffer.add(state, action, reward, next_state, terminal)
        agent.observe_reward(reward)
        if len(buffer) >= start_updates:
            agent.update(buffer)
        mi, feasible, rate = _info_fields(info)
        curve.append(step, float(reward), float(agent.normalize(np.float64(reward))), mi, feasible, rate)
        state = next_state
    return agent, curve
