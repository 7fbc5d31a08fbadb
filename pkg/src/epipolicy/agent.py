"""Deep Q-learning for the stringency-control environment.

The learner is generic over the environment and the network: it needs an
environment with ``reset()``, ``step(state, action)`` and ``n_actions``, and
an encoder turning a state into a tuple of float arrays that the network
takes as separate inputs. The defaults build the two-branch recurrent
network used for the epidemic environment.

Checkpoints are JSON (``format = "epipolicy-qnet"``): the network layout,
the training config and every parameter tensor as a flat list with its
shape. Training logs are CSV with columns ``step, episode, epsilon, loss,
episode_reward, episode_discounted``.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import ConfigurationError, DomainError, ModelHealthError, ParseError

QNET_FORMAT = "epipolicy-qnet"
QNET_VERSION = 1
LOG_COLUMNS = ("step", "episode", "epsilon", "loss", "episode_reward", "episode_discounted")
R_EFF_SCALE = 3.0


@dataclass(frozen=True)
class TrainConfig:
    discount: float = 0.99
    total_steps: int = 2742
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.6
    batch_size: int = 64
    learning_rate: float = 1e-3
    target_sync: int = 250
    replay_capacity: int = 10000
    learning_starts: int = 64
    reward_scale: float = 0.01
    loss_ceiling: float = 1e8
    divergence_patience: int = 50
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.discount <= 1.0:
            raise ConfigurationError("discount must lie in [0, 1]")
        if self.total_steps < 1:
            raise ConfigurationError("total_steps must be >= 1")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ConfigurationError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if not 0.0 < self.epsilon_decay_fraction <= 1.0:
            raise ConfigurationError("epsilon_decay_fraction must lie in (0, 1]")
        if self.batch_size < 1 or self.replay_capacity < self.batch_size:
            raise ConfigurationError("need 1 <= batch_size <= replay_capacity")
        if self.target_sync < 1 or self.learning_rate <= 0 or self.reward_scale <= 0:
            raise ConfigurationError("target_sync, learning_rate and reward_scale must be positive")

    def epsilon(self, step):
        """Linear decay from start to end over the first fraction of steps, then flat."""
        decay = max(1, round(self.epsilon_decay_fraction * self.total_steps))
        frac = min(1.0, step / decay)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)

    @classmethod
    def from_dict(cls, d):
        names = {f.name: f.type for f in fields(cls)}
        unknown = set(d) - set(names)
        if unknown:
            raise ConfigurationError(f"unknown train keys: {', '.join(sorted(unknown))}")
        ints = {"total_steps", "batch_size", "target_sync", "replay_capacity", "learning_starts", "divergence_patience", "seed"}
        return cls(**{k: (int(v) if k in ints else float(v)) for k, v in d.items()})


@dataclass(frozen=True)
class Transition:
    state: tuple
    action: int
    reward: float
    next_state: tuple
    done: bool


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform sampling (no repeats within a batch)."""

    def __init__(self, capacity):
        if capacity < 1:
            raise DomainError("capacity must be >= 1")
        self.capacity = capacity
        self._items = []
        self._next = 0

    def __len__(self):
        return len(self._items)

    def add(self, transition):
        if not 0 <= transition.action:
            raise DomainError("negative action index")
        if not math.isfinite(transition.reward):
            raise DomainError("reward must be finite")
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._next] = transition
        self._next = (self._next + 1) % self.capacity

    def sample_indices(self, batch_size, rng):
        if batch_size > len(self._items):
            raise DomainError(f"cannot sample {batch_size} from {len(self._items)} transitions")
        return rng.choice(len(self._items), size=batch_size, replace=False)

    def sample(self, batch_size, rng):
        return [self._items[k] for k in self.sample_indices(batch_size, rng)]


class QNetwork(nn.Module):
    """LSTM over the day history plus a dense branch over current features."""

    def __init__(self, history_features=4, static_features=6, lstm_hidden=64, static_hidden=32, head_hidden=64, n_actions=7):
        super().__init__()
        self.layout = dict(
            history_features=history_features,
            static_features=static_features,
            lstm_hidden=lstm_hidden,
            static_hidden=static_hidden,
            head_hidden=head_hidden,
            n_actions=n_actions,
        )
        self.lstm = nn.LSTM(history_features, lstm_hidden, batch_first=True)
        self.static = nn.Sequential(nn.Linear(static_features, static_hidden), nn.ReLU())
        self.head = nn.Sequential(
            nn.Linear(lstm_hidden + static_hidden, head_hidden), nn.ReLU(), nn.Linear(head_hidden, n_actions)
        )

    def forward(self, history, static):
        _, (h, _) = self.lstm(history)
        return self.head(torch.cat([h[-1], self.static(static)], dim=1))


class TabularQ(nn.Module):
    """One value per (state, action) from a one-hot state input."""

    def __init__(self, n_states, n_actions):
        super().__init__()
        self.layout = dict(n_states=n_states, n_actions=n_actions)
        self.table = nn.Linear(n_states, n_actions, bias=False)
        nn.init.zeros_(self.table.weight)

    def forward(self, onehot):
        return self.table(onehot)


class EpidemicEncoder:
    """State -> (history[K, 4], static[6]) with features scaled to roughly unit range.

    Static features are the compartment proportions (infected relative to the
    penalty threshold) plus the current stringency, GDP and R_e, which the
    zero-padded history does not yet hold at the start of an episode.
    """

    def __init__(self, history_length=30, infect_threshold=0.003):
        self.history_length = history_length
        self.infect_threshold = infect_threshold
        self._hist_scale = np.array([100.0, 1.0, R_EFF_SCALE, 10.0])

    def __call__(self, state):
        hist = (state.history_array(self.history_length) / self._hist_scale).astype(np.float32)
        static = np.array(
            [
                state.s_prop,
                state.i_prop / self.infect_threshold,
                state.r_prop,
                state.stringency / 100.0,
                state.norm_gdp,
                state.r_eff / R_EFF_SCALE,
            ],
            dtype=np.float32,
        )
        return hist, static

    def to_dict(self):
        return {"kind": "epidemic", "history_length": self.history_length, "infect_threshold": self.infect_threshold}


class QFunction:
    """A network plus the encoder that feeds it."""

    def __init__(self, network, encoder):
        self.network = network
        self.encoder = encoder

    def values_encoded(self, encoded):
        with torch.no_grad():
            out = self.network(*(torch.from_numpy(x[None]) for x in encoded))
        return out[0].numpy().astype(np.float64)

    def values(self, state):
        return self.values_encoded(self.encoder(state))


def greedy_action(qvalues):
    """Argmax with ties going to the lowest index."""
    q = np.asarray(qvalues, dtype=np.float64)
    if not np.all(np.isfinite(q)):
        raise ModelHealthError(f"non-finite action-values {q.tolist()}")
    return int(np.argmax(q))


def act(q, state, epsilon, rng):
    """Epsilon-greedy choice; ``q`` is anything with ``values(state)`` and ``n_actions``-long output."""
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError("epsilon must lie in [0, 1]")
    qvalues = q.values(state)
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(len(qvalues)))
    return greedy_action(qvalues)


def bootstrap_targets(rewards, next_max, dones, discount):
    """One-step targets ``r + discount * max_a Q_target(s', a)``, no bootstrap at episode end."""
    return rewards + discount * next_max * (1.0 - dones)


def _stack(batch_states):
    return tuple(torch.from_numpy(np.stack(col)) for col in zip(*batch_states))


def _check_finite(network):
    for name, p in network.named_parameters():
        if not torch.isfinite(p).all():
            raise ModelHealthError(f"parameter {name} became non-finite")


def train(env, cfg=TrainConfig(), network=None, encoder=None):
    """Train a Q-function; returns ``(QFunction, log rows)``.

    One environment step and (once the buffer holds ``learning_starts``
    transitions) one replay update per step. Episodes restart from
    ``env.reset()`` when done. Rewards are multiplied by ``reward_scale``
    for learning only; logged rewards are unscaled.
    """
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    if encoder is None:
        encoder = EpidemicEncoder(env.config.history_length, env.config.reward.infect_threshold)
    if network is None:
        hist, static = encoder(env.reset())
        network = QNetwork(hist.shape[1], static.size, n_actions=env.n_actions)
    target = copy.deepcopy(network)
    optim = torch.optim.Adam(network.parameters(), lr=cfg.learning_rate)
    loss_fn = nn.HuberLoss(delta=1.0)
    q = QFunction(network, encoder)
    buffer = ReplayBuffer(cfg.replay_capacity)

    log = []
    state = env.reset()
    enc = encoder(state)
    episode, ep_reward, ep_disc, ep_len = 0, 0.0, 0.0, 0
    updates, over = 0, 0
    for step in range(cfg.total_steps):
        eps = cfg.epsilon(step)
        if rng.random() < eps:
            action = int(rng.integers(env.n_actions))
        else:
            action = greedy_action(q.values_encoded(enc))
        out = env.step(state, action)
        next_enc = encoder(out.state)
        buffer.add(Transition(enc, action, out.reward * cfg.reward_scale, next_enc, out.done))
        ep_reward += out.reward
        ep_disc += cfg.discount**ep_len * out.reward
        ep_len += 1

        loss_value = math.nan
        if len(buffer) >= max(cfg.learning_starts, cfg.batch_size):
            batch = buffer.sample(cfg.batch_size, rng)
            states = _stack([t.state for t in batch])
            next_states = _stack([t.next_state for t in batch])
            actions = torch.tensor([t.action for t in batch], dtype=torch.int64)
            rewards = torch.tensor([t.reward for t in batch], dtype=torch.float32)
            dones = torch.tensor([float(t.done) for t in batch], dtype=torch.float32)
            with torch.no_grad():
                next_max = target(*next_states).max(dim=1).values
            y = bootstrap_targets(rewards, next_max, dones, cfg.discount)
            pred = network(*states).gather(1, actions[:, None])[:, 0]
            loss = loss_fn(pred, y)
            optim.zero_grad()
            loss.backward()
            optim.step()
            _check_finite(network)
            loss_value = loss.item()
            updates += 1
            over = over + 1 if loss_value > cfg.loss_ceiling else 0
            if over >= cfg.divergence_patience:
                raise ModelHealthError(
                    f"loss above {cfg.loss_ceiling:g} for {over} consecutive updates (step {step}, last {loss_value:g})"
                )
            if updates % cfg.target_sync == 0:
                target.load_state_dict(network.state_dict())

        log.append((step, episode, eps, loss_value, ep_reward, ep_disc))
        if out.done:
            episode += 1
            ep_reward, ep_disc, ep_len = 0.0, 0.0, 0
            state = env.reset()
            enc = encoder(state)
        else:
            state, enc = out.state, next_enc
    return q, log


def rollout(q, env, greedy=True, epsilon=0.0, rng=None):
    """Run one full episode; returns ``(outcomes, undiscounted cumulative reward)``."""
    eps = 0.0 if greedy else epsilon
    rng = rng if rng is not None else np.random.default_rng(0)
    state = env.reset()
    outcomes = []
    while not state.done:
        out = env.step(state, act(q, state, eps, rng))
        outcomes.append(out)
        state = out.state
    return outcomes, float(sum(o.reward for o in outcomes))


class _UniformPolicy:
    def __init__(self, n_actions):
        self.n = n_actions

    def values(self, state):
        return np.zeros(self.n)


def random_policy_rewards(env, episodes=5, seed=0):
    """Cumulative rewards of uniform-random policies, one per episode."""
    rng = np.random.default_rng(seed)
    pol = _UniformPolicy(env.n_actions)
    return [rollout(pol, env, greedy=False, epsilon=1.0, rng=rng)[1] for _ in range(episodes)]


def median_filter(series, k):
    """Sliding median of odd width ``k`` with edge replication."""
    x = np.asarray(series, dtype=np.float64)
    if k < 1 or k % 2 == 0:
        raise DomainError("k must be an odd integer >= 1")
    if x.ndim != 1 or k > x.size:
        raise DomainError("need a 1-D series at least k long")
    half = k // 2
    padded = np.concatenate([np.full(half, x[0]), x, np.full(half, x[-1])])
    return np.median(np.lib.stride_tricks.sliding_window_view(padded, k), axis=1)


def write_log_csv(rows, path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOG_COLUMNS)
    for step, ep, eps, loss, rew, disc in rows:
        w.writerow([step, ep, repr(float(eps)), "" if math.isnan(loss) else repr(loss), repr(float(rew)), repr(float(disc))])
    Path(path).write_text(buf.getvalue())


def checkpoint_dict(q, cfg):
    if not isinstance(q.encoder, EpidemicEncoder):
        raise ConfigurationError("only epidemic-encoder Q-functions can be checkpointed")
    tensors = {
        name: {"shape": list(t.shape), "data": t.detach().reshape(-1).double().tolist()}
        for name, t in q.network.state_dict().items()
    }
    return {
        "format": QNET_FORMAT,
        "version": QNET_VERSION,
        "layout": q.network.layout,
        "encoder": q.encoder.to_dict(),
        "train_config": asdict(cfg),
        "tensors": tensors,
    }


def save_checkpoint(q, cfg, path):
    Path(path).write_text(json.dumps(checkpoint_dict(q, cfg), sort_keys=True) + "\n")


def load_checkpoint(path):
    """Returns ``(QFunction, TrainConfig)``."""
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    if d.get("format") != QNET_FORMAT or d.get("version") != QNET_VERSION:
        raise ParseError(f"{path}: not a version-{QNET_VERSION} Q-network checkpoint")
    net = QNetwork(**d["layout"])
    state = {
        name: torch.tensor(t["data"], dtype=torch.float32).reshape(t["shape"]) for name, t in d["tensors"].items()
    }
    net.load_state_dict(state)
    enc = d["encoder"]
    encoder = EpidemicEncoder(int(enc["history_length"]), float(enc["infect_threshold"]))
    return QFunction(net, encoder), TrainConfig.from_dict(d["train_config"])
