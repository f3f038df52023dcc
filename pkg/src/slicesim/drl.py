"""Value-based learning on a plain numpy MLP.

A deep Q-network with ReLU hidden layers and a linear output head, trained
by vanilla SGD on the squared temporal-difference error against a target
network that hard-syncs every fixed number of steps.  Experience is stored
in a bounded ring and sampled uniformly without replacement.  Everything is
seeded and pure numpy, so identical seeds give bit-identical trajectories.
"""

from __future__ import annotations

import json
import math

import numpy as np


class Mlp:
    """Fully connected net: given widths [d_in, h1, ..., d_out]."""

    def __init__(self, widths, rng: np.random.Generator | None = None,
                 dtype=np.float64):
        self.widths = [int(w) for w in widths]
        self.dtype = np.dtype(dtype)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.widths[:-1], self.widths[1:]):
            if rng is None:
                w = np.zeros((fan_in, fan_out))
            else:
                # uniform Glorot: +-sqrt(6 / (fan_in + fan_out))
                limit = np.sqrt(6.0 / (fan_in + fan_out))
                w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            self.weights.append(w.astype(self.dtype))
            self.biases.append(np.zeros(fan_out, dtype=self.dtype))

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Q-values; accepts a single state (1d) or a batch (2d)."""
        single = x.ndim == 1
        a = np.atleast_2d(np.asarray(x, dtype=self.dtype))
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w + b
            if i != last:
                np.maximum(a, 0.0, out=a)
        return a[0] if single else a

    def forward_cached(self, x: np.ndarray):
        """Batch forward keeping pre-activations for backprop."""
        a = np.asarray(x, dtype=self.dtype)
        acts = [a]
        zs = []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ w + b
            zs.append(z)
            acts.append(np.maximum(z, 0.0) if i != last else z)
        return zs, acts

    def copy_from(self, other: "Mlp") -> None:
        for i in range(len(self.weights)):
            self.weights[i] = other.weights[i].copy()
            self.biases[i] = other.biases[i].copy()

    def clone(self) -> "Mlp":
        twin = Mlp(self.widths, rng=None, dtype=self.dtype)
        twin.copy_from(self)
        return twin

    # flat parameter access, used by the finite-difference checks
    def get_flat(self) -> np.ndarray:
        parts = [w.ravel() for w in self.weights] + [b for b in self.biases]
        return np.concatenate(parts)

    def set_flat(self, flat: np.ndarray) -> None:
        i = 0
        for idx, w in enumerate(self.weights):
            n = w.size
            self.weights[idx] = flat[i:i + n].reshape(w.shape).astype(self.dtype)
            i += n
        for idx, b in enumerate(self.biases):
            n = b.size
            self.biases[idx] = flat[i:i + n].astype(self.dtype)
            i += n


def td_targets(target_net: Mlp, rewards, next_states, discount: float,
               terminal=None) -> np.ndarray:
    """r + discount * max_a Q_target(s', a); just r on terminal steps."""
    q_next = target_net.forward(np.asarray(next_states))
    boot = q_next.max(axis=1)
    r = np.asarray(rewards, dtype=target_net.dtype)
    if terminal is None:
        return r + discount * boot
    t = np.asarray(terminal, dtype=bool)
    return r + discount * boot * ~t

def loss_and_grads(net: Mlp, states, actions, targets):
    """Mean squared TD error over the chosen actions, with gradients.

    Only the output unit of the taken action receives error signal; the
    rest of the backward pass is standard dense backprop.
    """
    states = np.asarray(states, dtype=net.dtype)
    actions = np.asarray(actions, dtype=int)
    targets = np.asarray(targets, dtype=net.dtype)
    batch = states.shape[0]
    zs, acts = net.forward_cached(states)
    q = zs[-1]
    chosen = q[np.arange(batch), actions]
    err = chosen - targets
    loss = float(np.mean(err ** 2))

    delta = np.zeros_like(q)
    delta[np.arange(batch), actions] = 2.0 * err / batch
    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.biases)
    for layer in range(len(net.weights) - 1, -1, -1):
        grads_w[layer] = acts[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ net.weights[layer].T) * (zs[layer - 1] > 0.0)
    return loss, grads_w, grads_b


def clip_gradients(grads_w, grads_b, max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is <= max_norm.

    Returns the pre-clip norm.  Keeps parameter updates finite when TD
    errors are large (e.g. unbounded queueing delay in the reward).
    """
    sq = 0.0
    for g in grads_w:
        sq += float(np.sum(np.square(g, dtype=np.float64)))
    for g in grads_b:
        sq += float(np.sum(np.square(g, dtype=np.float64)))
    norm = math.sqrt(sq)
    if norm > max_norm > 0.0:
        scale = max_norm / norm
        for g in grads_w:
            g *= scale
        for g in grads_b:
            g *= scale
    return norm


def sgd_step(net: Mlp, grads_w, grads_b, lr: float) -> None:
    for i in range(len(net.weights)):
        net.weights[i] -= lr * grads_w[i]
        net.biases[i] -= lr * grads_b[i]


def greedy_action(q_values: np.ndarray) -> int:
    """Argmax with ties resolved to the lowest index."""
    return int(np.argmax(q_values))


class ReplayBuffer:
    """Bounded FIFO of transitions with uniform batch sampling.

    Preallocated ring storage; the oldest transition is overwritten once
    capacity is reached.
    """

    def __init__(self, capacity: int = 10000, dtype=np.float32):
        self.capacity = capacity
        self.dtype = dtype
        self.states = None
        self.next_states = None
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity, dtype=dtype)
        self.head = 0
        self.size = 0

    def push(self, state, action: int, reward: float, next_state) -> None:
        s = np.asarray(state, dtype=self.dtype)
        if self.states is None:
            self.states = np.zeros((self.capacity, s.size), dtype=self.dtype)
            self.next_states = np.zeros_like(self.states)
        i = self.head
        self.states[i] = s
        self.next_states[i] = np.asarray(next_state, dtype=self.dtype)
        self.actions[i] = action
        self.rewards[i] = reward
        self.head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def __len__(self) -> int:
        return self.size

    def sample(self, batch: int, rng: np.random.Generator):
        """Uniform without replacement within one batch."""
        idx = rng.choice(self.size, size=batch, replace=False)
        return (self.states[idx], self.actions[idx], self.rewards[idx],
                self.next_states[idx])


class DqnLearner:
    """One agent: online net, target net, replay, epsilon schedule.

    The epsilon schedule is linear from eps_start to eps_end over the first
    eps_decay_frac of `total_invocations` action picks, flat afterwards.
    The continuing control task has no terminal states, so bootstrap is
    never cut off.
    """

    def __init__(self, widths, params, total_invocations: int,
                 init_rng: np.random.Generator, dtype=np.float32):
        self.params = params
        self.net = Mlp(widths, rng=init_rng, dtype=dtype)
        self.target = self.net.clone()
        self.buffer = ReplayBuffer(params.replay_capacity, dtype=dtype)
        self.total_invocations = max(int(total_invocations), 1)
        self.invocations = 0
        self.train_steps = 0

    @property
    def n_actions(self) -> int:
        return self.net.widths[-1]

    def epsilon(self) -> float:
        p = self.params
        decay_len = max(1.0, p.eps_decay_frac * self.total_invocations)
        frac = min(self.invocations / decay_len, 1.0)
        return p.eps_start + (p.eps_end - p.eps_start) * frac

    def choose(self, state, rng: np.random.Generator) -> tuple[int, float]:
        """Epsilon-greedy pick; returns (action, epsilon used)."""
        eps = self.epsilon()
        self.invocations += 1
        if rng.random() < eps:
            return int(rng.integers(self.n_actions)), eps
        return greedy_action(self.net.forward(np.asarray(state))), eps

    def observe(self, state, action: int, reward: float, next_state) -> None:
        self.buffer.push(state, action, reward, next_state)

    def train_once(self, rng: np.random.Generator) -> float | None:
        """One SGD step on one replay batch; None while the buffer is short."""
        p = self.params
        if len(self.buffer) < p.batch_size:
            return None
        states, actions, rewards, nexts = self.buffer.sample(p.batch_size, rng)
        targets = td_targets(self.target, rewards, nexts, p.discount)
        loss, gw, gb = loss_and_grads(self.net, states, actions, targets)
        if p.grad_clip_norm > 0.0:
            clip_gradients(gw, gb, p.grad_clip_norm)
        sgd_step(self.net, gw, gb, p.learning_rate)
        self.train_steps += 1
        if self.train_steps % p.target_sync_steps == 0:
            self.target.copy_from(self.net)
        return loss


CHECKPOINT_VERSION = 1


def checkpoint_dict(learner: DqnLearner) -> dict:
    """Flat, versioned dump of both networks and the counters."""
    return {
        "version": CHECKPOINT_VERSION,
        "widths": learner.net.widths,
        "dtype": learner.net.dtype.name,
        "weights": [w.astype(np.float64).ravel().tolist()
                    for w in learner.net.weights],
        "biases": [b.astype(np.float64).tolist() for b in learner.net.biases],
        "target_weights": [w.astype(np.float64).ravel().tolist()
                           for w in learner.target.weights],
        "target_biases": [b.astype(np.float64).tolist()
                          for b in learner.target.biases],
        "invocations": learner.invocations,
        "train_steps": learner.train_steps,
        "total_invocations": learner.total_invocations,
    }


def save_checkpoint(learner: DqnLearner, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(checkpoint_dict(learner), fh, sort_keys=True)


def load_checkpoint(path: str, params, total_invocations: int | None = None) -> DqnLearner:
    with open(path) as fh:
        data = json.load(fh)
    if data.get("version") != CHECKPOINT_VERSION:
        raise ValueError("unsupported checkpoint version: %r" % data.get("version"))
    widths = data["widths"]
    learner = DqnLearner(widths, params,
                         total_invocations or data["total_invocations"],
                         init_rng=None, dtype=np.dtype(data["dtype"]))
    for i, w in enumerate(data["weights"]):
        learner.net.weights[i] = np.array(w, dtype=learner.net.dtype).reshape(
            widths[i], widths[i + 1])
    for i, b in enumerate(data["biases"]):
        learner.net.biases[i] = np.array(b, dtype=learner.net.dtype)
    for i, w in enumerate(data["target_weights"]):
        learner.target.weights[i] = np.array(w, dtype=learner.net.dtype).reshape(
            widths[i], widths[i + 1])
    for i, b in enumerate(data["target_biases"]):
        learner.target.biases[i] = np.array(b, dtype=learner.net.dtype)
    learner.invocations = data["invocations"]
    learner.train_steps = data["train_steps"]
    return learner
