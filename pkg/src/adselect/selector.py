"""Detector selection as an MDP plus the DQN agent that learns it.

At step t the agent sees row t of the signal table, picks one of the six
detectors, and is rewarded for the quality of that detector's label on the
window.  Where ground truth is masked out, a truth surrogate is inferred
from the detector's correctness classifier: if the classifier calls the
label right the label is taken at face value, otherwise it is flipped.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .detectors import POOL
from .signals import N_FEATURES, SignalTable

N_ACTIONS = len(POOL)
COUNTER_PERIOD = 100
CONSTANT_EPSILONS = (0.9, 0.5, 0.05)
OUTCOMES = ("TP", "TN", "FP", "FN")
REWARD_KINDS = ("Original", "R1", "R2", "AdapInc", "AdapDec")
REWARD_MODES = ("mixed", "gtruth_only", "class_only")
POLICY_FORMAT = 1

# (r_TN, r_FN, r_TP, r_FP) per reward kind; adaptive kinds scale by C^2
_REWARD_TABLE = {
    "Original": (0.5, -3.0, 1.0, -1.5),
    "R1": (0.15, -3.0, 1.0, 0.1),
    "R2": (1.0, 0.1, 0.15, -3.0),
    "AdapInc": (0.05, -0.03, 0.01, -0.015),
    "AdapDec": (0.5, -3.0, 1.0, -1.5),
}


class SelectorError(ValueError):
    pass


@dataclass(frozen=True)
class RewardSpec:
    kind: str
    r_tn: float
    r_fn: float
    r_tp: float
    r_fp: float
    counter_period: int = COUNTER_PERIOD
    mode: str = "mixed"

    def __post_init__(self):
        if self.kind not in REWARD_KINDS:
            raise SelectorError(f"unknown reward kind {self.kind!r}; expected one of {REWARD_KINDS}")
        if self.mode not in REWARD_MODES:
            raise SelectorError(f"unknown reward mode {self.mode!r}; expected one of {REWARD_MODES}")

    @classmethod
    def named(cls, kind, mode="mixed") -> "RewardSpec":
        if kind not in _REWARD_TABLE:
            raise SelectorError(f"unknown reward kind {kind!r}; expected one of {REWARD_KINDS}")
        tn, fn, tp, fp = _REWARD_TABLE[kind]
        return cls(kind=kind, r_tn=tn, r_fn=fn, r_tp=tp, r_fp=fp, mode=mode)


def reward_value(spec: RewardSpec, outcome, step_index) -> float:
    """Reward for one confusion outcome at a within-episode step index."""
    if outcome not in OUTCOMES:
        raise SelectorError(f"unknown outcome {outcome!r}")
    base = {"TN": spec.r_tn, "FN": spec.r_fn, "TP": spec.r_tp, "FP": spec.r_fp}[outcome]
    if spec.kind == "AdapInc":
        c = 1 + step_index // spec.counter_period
        return base * c * c
    if spec.kind == "AdapDec":
        c = 1 + step_index // spec.counter_period
        return base / (c * c)
    return base


def outcome_of(predicted, truth) -> str:
    if predicted == 1:
        return "TP" if truth == 1 else "FP"
    return "FN" if truth == 1 else "TN"


@dataclass(frozen=True)
class EpsilonSchedule:
    kind: str  # "decaying" or "constant"
    start: float = 1.0
    end: float = 0.05
    fraction: float = 0.7
    value: float = 0.05

    def __post_init__(self):
        if self.kind == "constant":
            if self.value not in CONSTANT_EPSILONS:
                raise SelectorError(
                    f"constant epsilon must be one of {CONSTANT_EPSILONS}, got {self.value}"
                )
        elif self.kind == "decaying":
            if not 0 < self.fraction <= 1:
                raise SelectorError(f"fraction must be in (0, 1], got {self.fraction}")
            if self.end > self.start:
                raise SelectorError("decaying schedule needs end <= start")
        else:
            raise SelectorError(f"unknown schedule kind {self.kind!r}")

    def epsilon(self, step, total_steps) -> float:
        if self.kind == "constant":
            return self.value
        horizon = self.fraction * total_steps
        if horizon <= 0:
            return self.end
        frac = min(1.0, step / horizon)
        return self.start + (self.end - self.start) * frac


class SelectionEnv:
    """One pass over the signal table; episode length = number of windows."""

    def __init__(self, table: SignalTable, tsf_predictions=None, gt_mask=None,
                 reward_spec: RewardSpec | None = None):
        self.table = table
        n = len(table)
        self.states = np.ascontiguousarray(table.features, dtype=np.float32)
        self.labels = table.detector_labels()
        self.truth = table.ground_truth
        self.reward_spec = reward_spec if reward_spec is not None else RewardSpec.named("Original")

        mode = self.reward_spec.mode
        if tsf_predictions is None:
            if mode != "gtruth_only":
                raise SelectorError(f"mode {mode!r} needs tsf_predictions")
            self.tsf = None
        else:
            self.tsf = np.asarray(tsf_predictions, dtype=np.int64)
            if self.tsf.shape != (n, N_ACTIONS):
                raise SelectorError(
                    f"tsf_predictions must be ({n}, {N_ACTIONS}), got {self.tsf.shape}"
                )
        if gt_mask is None:
            if mode == "mixed":
                raise SelectorError("mixed mode needs gt_mask")
            self.gt_mask = np.zeros(n, dtype=np.int64)
        else:
            self.gt_mask = np.asarray(gt_mask, dtype=np.int64)
            if self.gt_mask.shape != (n,):
                raise SelectorError(f"gt_mask must be ({n},), got {self.gt_mask.shape}")
        self.cursor = 0
        self._done = n == 0

    def __len__(self):
        return len(self.states)

    @property
    def done(self):
        return self._done

    def reset(self) -> np.ndarray:
        if len(self.states) == 0:
            raise SelectorError("empty environment")
        self.cursor = 0
        self._done = False
        return self.states[0]

    def _truth_for(self, t, action):
        mode = self.reward_spec.mode
        if mode == "gtruth_only" or (mode == "mixed" and self.gt_mask[t] == 1):
            return int(self.truth[t])
        p = int(self.labels[t, action])
        return p if self.tsf[t, action] == 1 else 1 - p

    def step(self, action):
        if self._done:
            raise SelectorError("episode is done; call reset()")
        if not 0 <= action < N_ACTIONS:
            raise SelectorError(f"action must be in 0..{N_ACTIONS - 1}, got {action}")
        t = self.cursor
        p = int(self.labels[t, action])
        outcome = outcome_of(p, self._truth_for(t, action))
        reward = reward_value(self.reward_spec, outcome, t)
        self.cursor += 1
        if self.cursor >= len(self.states):
            self._done = True
            next_state = np.zeros(N_FEATURES, dtype=np.float32)
        else:
            next_state = self.states[self.cursor]
        return next_state, reward, self._done


def _q_network():
    return nn.Sequential(
        nn.Linear(N_FEATURES, 64),
        nn.ReLU(),
        nn.Linear(64, 64),
        nn.ReLU(),
        nn.Linear(64, N_ACTIONS),
    )


class ReplayBuffer:
    def __init__(self, capacity, state_dim=N_FEATURES):
        self.capacity = int(capacity)
        self.states = np.zeros((self.capacity, state_dim), dtype=np.float32)
        self.actions = np.zeros(self.capacity, dtype=np.int64)
        self.rewards = np.zeros(self.capacity, dtype=np.float32)
        self.next_states = np.zeros((self.capacity, state_dim), dtype=np.float32)
        self.dones = np.zeros(self.capacity, dtype=np.float32)
        self.size = 0
        self._head = 0

    def __len__(self):
        return self.size

    def push(self, state, action, reward, next_state, done):
        i = self._head
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = float(done)
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size, rng):
        idx = rng.integers(0, self.size, size=batch_size)
        return (
            self.states[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_states[idx],
            self.dones[idx],
        )


@dataclass
class DqnConfig:
    replay_capacity: int = 100_000
    batch_size: int = 32
    lr: float = 1e-4
    gamma: float = 1.0
    target_sync: int = 1000
    seed: int = 0


class DqnPolicy:
    def __init__(self, config: DqnConfig | None = None):
        self.config = config if config is not None else DqnConfig()
        torch.manual_seed(self.config.seed)
        self.online = _q_network()
        self.target = _q_network()
        self.target.load_state_dict(self.online.state_dict())
        self.optimizer = torch.optim.Adam(self.online.parameters(), lr=self.config.lr)
        self.updates = 0

    def q_values(self, state) -> np.ndarray:
        with torch.no_grad():
            q = self.online(torch.as_tensor(state, dtype=torch.float32).unsqueeze(0))
        return q.squeeze(0).numpy()

    def act_greedy(self, state) -> int:
        return int(np.argmax(self.q_values(state)))

    def update(self, batch) -> float:
        states, actions, rewards, next_states, dones = batch
        states_t = torch.as_tensor(states)
        actions_t = torch.as_tensor(actions)
        rewards_t = torch.as_tensor(rewards)
        next_t = torch.as_tensor(next_states)
        dones_t = torch.as_tensor(dones)

        q = self.online(states_t).gather(1, actions_t.unsqueeze(1)).squeeze(1)
        with torch.no_grad():
            next_q = self.target(next_t).max(dim=1).values
            target = rewards_t + self.config.gamma * next_q * (1.0 - dones_t)
        loss = nn.functional.smooth_l1_loss(q, target)
        self.optimizer.zero_grad()
        loss.backward()
        self.optimizer.step()
        self.updates += 1
        if self.updates % self.config.target_sync == 0:
            self.target.load_state_dict(self.online.state_dict())
        return float(loss.detach())


@dataclass
class TrainingLog:
    rows: list = field(default_factory=list)  # (step, epsilon, loss|None, episode_return|None)

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "epsilon", "loss", "episode_return"])
            for step, eps, loss, ep_ret in self.rows:
                writer.writerow([
                    step,
                    repr(float(eps)),
                    "" if loss is None else repr(float(loss)),
                    "" if ep_ret is None else repr(float(ep_ret)),
                ])


def train(env: SelectionEnv, policy: DqnPolicy, total_steps, schedule: EpsilonSchedule,
          seed=None, log_every=1) -> TrainingLog:
    """Epsilon-greedy DQN training; deterministic for a fixed seed."""
    if total_steps < len(env):
        raise SelectorError(f"total_steps {total_steps} below one episode length {len(env)}")
    rng = np.random.default_rng(policy.config.seed if seed is None else seed)
    buffer = ReplayBuffer(policy.config.replay_capacity)
    log = TrainingLog()
    state = env.reset()
    episode_return = 0.0
    for step in range(total_steps):
        eps = schedule.epsilon(step, total_steps)
        if rng.random() < eps:
            action = int(rng.integers(N_ACTIONS))
        else:
            action = policy.act_greedy(state)
        next_state, reward, done = env.step(action)
        buffer.push(state, action, reward, next_state, done)
        episode_return += reward

        loss = None
        if len(buffer) >= policy.config.batch_size:
            loss = policy.update(buffer.sample(policy.config.batch_size, rng))

        finished_return = None
        if done:
            finished_return = episode_return
            episode_return = 0.0
            state = env.reset()
        else:
            state = next_state
        if step % log_every == 0 or finished_return is not None:
            log.rows.append((step, eps, loss, finished_return))
    return log


def evaluate(env: SelectionEnv, policy: DqnPolicy):
    """Greedy pass; returns (chosen detector index, emitted label) per window."""
    actions = np.empty(len(env), dtype=np.int64)
    labels = np.empty(len(env), dtype=np.int64)
    for t in range(len(env)):
        a = policy.act_greedy(env.states[t])
        actions[t] = a
        labels[t] = env.labels[t, a]
    return actions, labels


def save_evaluation_csv(path, actions, labels):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_index", "chosen_detector", "label"])
        for i, (a, lab) in enumerate(zip(actions, labels)):
            writer.writerow([i, POOL[a], int(lab)])


def save_policy(policy: DqnPolicy, path, config_hash=""):
    blob = {
        "format_version": POLICY_FORMAT,
        "config": vars(policy.config),
        "config_hash": config_hash,
        "updates": policy.updates,
        "online": policy.online.state_dict(),
        "target": policy.target.state_dict(),
    }
    torch.save(blob, path)


def load_policy(path) -> DqnPolicy:
    blob = torch.load(path, weights_only=False)
    if blob.get("format_version") != POLICY_FORMAT:
        raise SelectorError(f"unrecognized policy file {path}")
    policy = DqnPolicy(DqnConfig(**blob["config"]))
    policy.online.load_state_dict(blob["online"])
    policy.target.load_state_dict(blob["target"])
    policy.updates = blob["updates"]
    return policy
