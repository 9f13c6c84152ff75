"""Epsilon-greedy Q-learning controllers with per-UAV replay memories."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import neural
from .errors import EmptyMemory, NonFiniteGradient
from .gridworld import N_ACTIONS

CONTROLLER_MODES = ("global", "per-uav")
MEMORY_CAPACITY = 60


@dataclass(frozen=True)
class Transition:
    observation: np.ndarray
    action: int
    reward: float
    next_observation: np.ndarray
    terminal: bool


class ReplayMemory:
    """Bounded FIFO of one UAV's own transitions; the oldest entry is evicted first."""

    def __init__(self, capacity: int = MEMORY_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.entries: deque[Transition] = deque(maxlen=capacity)

    def record(self, t: Transition) -> None:
        self.entries.append(t)

    def sample(self, n: int, rng) -> list[Transition]:
        """Uniform sample of min(n, len) entries without replacement."""
        if not self.entries:
            raise EmptyMemory("replay memory is empty")
        size = min(n, len(self.entries))
        idx = rng.choice(len(self.entries), size=size, replace=False)
        return [self.entries[i] for i in idx]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def record(memory: ReplayMemory, t: Transition) -> None:
    memory.record(t)


@dataclass
class EpsilonSchedule:
    initial: float = 0.47
    factor: float = 0.93
    floor: float = 0.05
    k: int = 0

    def __post_init__(self):
        if not 0 <= self.floor <= self.initial <= 1:
            raise ValueError("need 0 <= floor <= initial <= 1")
        if not 0 < self.factor <= 1:
            raise ValueError("factor must be in (0, 1]")

    def at(self, k: int) -> float:
        return max(self.floor, self.initial * self.factor ** k)

    @property
    def value(self) -> float:
        return self.at(self.k)


def decay_epsilon(schedule: EpsilonSchedule) -> float:
    """Advance the schedule by one finished episode and return the new epsilon."""
    schedule.k += 1
    return schedule.value


def select_action(net, obs, epsilon: float, rng) -> int:
    """Uniform random action with probability ``epsilon``, else argmax Q (lowest index on ties)."""
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must be in [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    return int(np.argmax(net.forward(obs)))


def q_target(reward: float, next_q, terminal: bool, gamma: float) -> float:
    if terminal:
        return float(reward)
    return float(reward + gamma * np.max(next_q))


@dataclass(frozen=True)
class ControllerConfig:
    mode: str = "global"
    gamma: float = 0.91
    minibatch_size: int = 16
    head: str = "linear"
    learning_rate: float = 0.1
    rho: float = 0.9
    eps: float = 1e-8
    memory_capacity: int = MEMORY_CAPACITY
    hidden: int = neural.HIDDEN_UNITS

    def __post_init__(self):
        if self.mode not in CONTROLLER_MODES:
            raise ValueError(f"mode must be one of {CONTROLLER_MODES}, got {self.mode!r}")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must be in [0, 1]")
        if self.minibatch_size < 1:
            raise ValueError("minibatch_size must be >= 1")
        if self.head not in neural.HEAD_MODES:
            raise ValueError(f"head must be one of {neural.HEAD_MODES}")


class Controller:
    """Networks, optimizers and memories for a swarm.

    In ``global`` mode every UAV maps to network 0; in ``per-uav`` mode UAV i owns
    network i. Memories are always per UAV.
    """

    def __init__(self, config: ControllerConfig, input_dim: int, n_uavs: int,
                 seed_seq: np.random.SeedSequence, backend=None,
                 epsilon: EpsilonSchedule | None = None):
        self.config = config
        self.epsilon = epsilon if epsilon is not None else EpsilonSchedule()
        self.n_uavs = n_uavs
        n_nets = 1 if config.mode == "global" else n_uavs
        net_seeds = seed_seq.spawn(n_nets)
        self.networks = [
            neural.init_network(input_dim, config.head, np.random.default_rng(s), config.hidden, backend)
            for s in net_seeds
        ]
        self.optimizers = [
            neural.RmsPropState.for_network(n, config.learning_rate, config.rho, config.eps)
            for n in self.networks
        ]
        self.memories = [ReplayMemory(config.memory_capacity) for _ in range(n_uavs)]

    def net_index(self, uav: int) -> int:
        return 0 if self.config.mode == "global" else uav

    def network_for(self, uav: int) -> neural.QNetwork:
        return self.networks[self.net_index(uav)]

    def act(self, uav: int, obs, epsilon: float, rng) -> int:
        return select_action(self.network_for(uav), obs, epsilon, rng)

    def learn(self, uav: int, rng) -> float:
        return learn(self, uav, rng)


def learn(controller: Controller, uav: int, rng) -> float:
    """One minibatch RMSprop step on the network owning ``uav``, from that UAV's memory."""
    memory = controller.memories[uav]
    if len(memory) == 0:
        raise EmptyMemory(f"UAV {uav} has no recorded transitions")
    cfg = controller.config
    batch = memory.sample(cfg.minibatch_size, rng)
    i = controller.net_index(uav)
    net, opt = controller.networks[i], controller.optimizers[i]
    X = np.stack([t.observation for t in batch])
    next_q = net.forward_batch(np.stack([t.next_observation for t in batch]))
    actions = np.array([t.action for t in batch], dtype=np.intp)
    rewards = np.array([t.reward for t in batch])
    terminal = np.array([t.terminal for t in batch])
    # vectorized q_target
    targets = np.where(terminal, rewards, rewards + cfg.gamma * next_q.max(axis=1))
    if not np.isfinite(targets).all():
        raise NonFiniteGradient("non-finite Q target; lower the learning rate")
    return neural.train_arrays(net, opt, X, actions, targets)
