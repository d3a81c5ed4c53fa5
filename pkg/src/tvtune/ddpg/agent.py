"""Actor/critic updates, exploration and the DDPG training loop."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingAborted, UsageError
from .mlp import Adam, Mlp, soft_update
from .replay import ReplayBuffer

log = logging.getLogger(__name__)

HIDDEN = (100, 100)
# forces [N], moment [N m], speeds [m/s], angles [rad], positions [m]
OBS_SCALE = np.array([1000.0, 1000.0, 1000.0, 40.0, 40.0, 1.0, 1.0, 500.0, 500.0])


@dataclass(frozen=True)
class Hyperparams:
    gamma: float = 0.99
    critic_lr: float = 1e-3
    actor_lr: float = 1e-4
    tau: float = 1e-3
    minibatch: int = 70
    noise_variance: float = 30.0
    variance_decay: float = 1e-3
    buffer_capacity: int = 1_000_000
    episodes: int = 650
    # Positive constant applied to rewards before the critic sees them. It
    # leaves the optimal policy unchanged and keeps Q targets near unit scale.
    reward_scale: float = 1e-5

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if self.minibatch < 1 or self.buffer_capacity < self.minibatch:
            raise ValueError("buffer must hold at least one minibatch")
        if self.noise_variance < 0 or not 0.0 <= self.variance_decay < 1.0:
            raise ValueError("bad exploration schedule")
        if self.reward_scale <= 0:
            raise ValueError("reward_scale must be positive")


class Policy:
    """Greedy actor: normalised observation in, bounded action out."""

    def __init__(self, net: Mlp, obs_scale, low, high):
        self.net = net
        self.obs_scale = np.asarray(obs_scale, dtype=float)
        self.low = float(low)
        self.high = float(high)

    @property
    def mid(self):
        return 0.5 * (self.low + self.high)

    @property
    def half(self):
        return 0.5 * (self.high - self.low)

    def normalize_obs(self, obs):
        return np.asarray(obs, dtype=float) / self.obs_scale

    def normalize_action(self, a):
        return (np.asarray(a, dtype=float) - self.mid) / self.half

    def __call__(self, obs) -> np.ndarray:
        a = actor_forward(obs, self.net, self.obs_scale, self.low, self.high)
        return a[0] if np.ndim(obs) == 1 else a


def actor_forward(obs, net: Mlp, obs_scale=OBS_SCALE, low=40.0, high=1000.0):
    """a = low + (tanh(z) + 1)/2 * (high - low), row-wise."""
    x = np.atleast_2d(np.asarray(obs, dtype=float)) / obs_scale
    y = net(x)
    return low + 0.5 * (y + 1.0) * (high - low)


def critic_forward(obs, action, net: Mlp, obs_scale=OBS_SCALE, low=40.0, high=1000.0):
    x = _critic_input(obs, action, obs_scale, low, high)
    return net(x)[:, 0]


def _critic_input(obs, action, obs_scale, low, high):
    o = np.atleast_2d(np.asarray(obs, dtype=float)) / obs_scale
    a = np.atleast_2d(np.asarray(action, dtype=float))
    a = (a - 0.5 * (low + high)) / (0.5 * (high - low))
    return np.hstack([o, a])


@dataclass
class Networks:
    actor: Mlp
    critic: Mlp
    actor_target: Mlp
    critic_target: Mlp
    actor_opt: Adam
    critic_opt: Adam
    obs_scale: np.ndarray
    low: float = 40.0
    high: float = 1000.0

    @classmethod
    def build(cls, obs_dim, act_dim, hp: Hyperparams, rng, obs_scale=None,
              low=40.0, high=1000.0, hidden=HIDDEN) -> "Networks":
        actor = Mlp((obs_dim, *hidden, act_dim), ("relu",) * len(hidden) + ("tanh",),
                    rng, final_scale=1e-3)
        critic = Mlp((obs_dim + act_dim, *hidden, 1), ("relu",) * len(hidden) + ("linear",), rng)
        scale = np.ones(obs_dim) if obs_scale is None else np.asarray(obs_scale, float)
        return cls(actor, critic, actor.copy(), critic.copy(),
                   Adam(actor.params, hp.actor_lr), Adam(critic.params, hp.critic_lr),
                   scale, float(low), float(high))

    def policy(self) -> Policy:
        return Policy(self.actor.copy(), self.obs_scale.copy(), self.low, self.high)


def critic_targets(batch, nets: Networks, hp: Hyperparams) -> np.ndarray:
    """y = scale * r + gamma * Q'(s', pi'(s')), with no bootstrap on terminal samples."""
    _, _, r, s2, done = batch
    a2 = actor_forward(s2, nets.actor_target, nets.obs_scale, nets.low, nets.high)
    q2 = critic_forward(s2, a2, nets.critic_target, nets.obs_scale, nets.low, nets.high)
    return hp.reward_scale * np.asarray(r, float) + hp.gamma * (1.0 - np.asarray(done, float)) * q2


def critic_loss_grad(batch, nets: Networks, hp: Hyperparams):
    """Mean squared TD error and its gradient (left in the critic's buffers)."""
    s, a = batch[0], batch[1]
    y = critic_targets(batch, nets, hp)
    x = _critic_input(s, a, nets.obs_scale, nets.low, nets.high)
    q, _ = nets.critic.forward(x)
    diff = q[:, 0] - y
    n = diff.shape[0]
    nets.critic.backward((2.0 / n) * diff[:, None])
    return float(np.mean(diff * diff))


def critic_update(batch, nets: Networks, hp: Hyperparams) -> float:
    loss = critic_loss_grad(batch, nets, hp)
    if not math.isfinite(loss):
        raise TrainingAborted(f"critic loss became non-finite ({loss})")
    nets.critic_opt.step(nets.critic.grads)
    return loss


def actor_objective_grad(batch, nets: Networks) -> float:
    """Mean Q(s, pi(s)); the actor's buffers get the gradient of its negative."""
    s = batch[0]
    o = np.atleast_2d(np.asarray(s, float)) / nets.obs_scale
    y, _ = nets.actor.forward(o)          # y = tanh(z) is already the normalised action
    x = np.hstack([o, y])
    q, _ = nets.critic.forward(x)
    n = q.shape[0]
    gx = nets.critic.backward(np.full((n, 1), 1.0 / n))
    ga = gx[:, o.shape[1]:]
    nets.actor.backward(-ga)
    return float(np.mean(q))


def actor_update(batch, nets: Networks, hp: Hyperparams) -> float:
    obj = actor_objective_grad(batch, nets)
    if not math.isfinite(obj):
        raise TrainingAborted(f"actor objective became non-finite ({obj})")
    nets.actor_opt.step(nets.actor.grads)
    return obj


def noise_std(step_index: int, hp: Hyperparams) -> float:
    return math.sqrt(hp.noise_variance * (1.0 - hp.variance_decay) ** step_index)


def explore(action, step_index: int, hp: Hyperparams, rng: np.random.Generator,
            low=40.0, high=1000.0) -> np.ndarray:
    a = np.asarray(action, dtype=float)
    noisy = a + rng.normal(0.0, noise_std(step_index, hp), size=a.shape)
    return np.clip(noisy, low, high)


@dataclass
class TrainResult:
    policy: Policy
    rewards: np.ndarray
    steps: int
    nets: Networks = field(repr=False)


def _terminated(info, done):
    if info is None:
        return bool(done)
    if isinstance(info, dict):
        return bool(info.get("terminated", done))
    return bool(getattr(info, "terminated", done))


def train(env_factory, hp: Hyperparams = Hyperparams(), seed: int = 0,
          episodes: int | None = None, progress=None) -> TrainResult:
    """Run DDPG and return the greedy policy plus per-episode reward history.

    ``env_factory(seed)`` must return an object with ``reset() -> obs`` and
    ``step(a) -> (obs, reward, done, info)`` plus ``obs_dim``, ``act_dim``,
    ``action_low``, ``action_high`` and ``obs_scale`` attributes.
    ``progress(episode, reward)`` is called after every episode if given.
    """
    ss = np.random.SeedSequence(seed)
    env_seed, net_seed, noise_seed, buf_seed = ss.generate_state(4)
    env = env_factory(int(env_seed))
    obs_dim, act_dim = int(env.obs_dim), int(env.act_dim)
    low, high = float(env.action_low), float(env.action_high)
    nets = Networks.build(obs_dim, act_dim, hp, np.random.default_rng(net_seed),
                          getattr(env, "obs_scale", None), low, high)
    noise_rng = np.random.default_rng(noise_seed)
    buf = ReplayBuffer(hp.buffer_capacity, obs_dim, act_dim, seed=int(buf_seed))
    n_episodes = hp.episodes if episodes is None else int(episodes)
    history = np.zeros(n_episodes)
    k = 0
    for ep in range(n_episodes):
        obs = np.asarray(env.reset(), dtype=float)
        total = 0.0
        done = False
        while not done:
            a = actor_forward(obs, nets.actor, nets.obs_scale, low, high)[0]
            a = explore(a, k, hp, noise_rng, low, high)
            obs2, r, done, info = env.step(a)
            obs2 = np.asarray(obs2, dtype=float)
            if not (np.all(np.isfinite(obs2)) and math.isfinite(r)):
                raise TrainingAborted(f"environment returned non-finite data in episode {ep}")
            buf.push(obs, a, r, obs2, _terminated(info, done))
            total += r
            k += 1
            if len(buf) >= hp.minibatch:
                batch = buf.sample(hp.minibatch)
                try:
                    critic_update(batch, nets, hp)
                    actor_update(batch, nets, hp)
                except TrainingAborted as exc:
                    raise TrainingAborted(f"{exc} at episode {ep}, step {k}") from None
                soft_update(nets.actor_target, nets.actor, hp.tau)
                soft_update(nets.critic_target, nets.critic, hp.tau)
            obs = obs2
        history[ep] = total
        if progress is not None:
            progress(ep, total)
        log.debug("episode %d reward %.6g", ep, total)
    if not all(np.all(np.isfinite(p)) for p in nets.actor.params):
        raise TrainingAborted("actor parameters are non-finite after training")
    return TrainResult(nets.policy(), history, k, nets)


def check_architecture(net: Mlp, n_in: int, n_out: int) -> None:
    if net.sizes[0] != n_in or net.sizes[-1] != n_out:
        raise UsageError(f"network maps {net.sizes[0]}->{net.sizes[-1]}, expected {n_in}->{n_out}")
