"""Per-agent experience memories.

Each independent learner owns two of these: a plain FIFO ring buffer used
for off-policy updates and as the discriminator's "current behavior" class,
and a min-heap positive buffer that keeps the latest top-k-return
trajectories and sub-trajectories as self-generated expert data.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np


class BufferNotReady(Exception):
    """Raised when a positive buffer has nothing to sample from yet."""


@dataclass
class Transition:
    obs: np.ndarray
    action: object          # np.ndarray (continuous) or int (discrete)
    reward: float
    next_obs: np.ndarray
    done: bool
    behavior_logp: float | None = None


def discounted_return(rewards, gamma):
    """Sum of gamma^t * r_t over the sequence; empty sequence gives 0."""
    total = 0.0
    for r in reversed(list(rewards)):
        total = r + gamma * total
    return total


def subtrajectory_candidates(length):
    """Number of distinct contiguous segments of a length-n trajectory (full one included)."""
    if length < 1:
        raise ValueError("trajectory length must be >= 1")
    return length * (length + 1) // 2


class Trajectory:
    """An ordered run of transitions with its discounted return cached."""

    __slots__ = ("transitions", "discounted_return")

    def __init__(self, transitions, gamma):
        if not transitions:
            raise ValueError("trajectory must contain at least one transition")
        for t in transitions[:-1]:
            if t.done:
                raise ValueError("only the final transition may be terminal")
        self.transitions = list(transitions)
        self.discounted_return = discounted_return((t.reward for t in self.transitions), gamma)

    def __len__(self):
        return len(self.transitions)

    def rewards(self):
        return [t.reward for t in self.transitions]


class RingReplay:
    """Fixed-capacity FIFO transition store with uniform sampling.

    Fields live in preallocated circular arrays so a sampled minibatch is a
    single fancy-index gather instead of restacking objects.
    """

    def __init__(self, capacity):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self._size = 0
        self._cursor = 0
        self._obs = None  # allocated lazily from the first transition's shapes
        self.discrete = None

    def __len__(self):
        return self._size

    def _allocate(self, t):
        obs = np.asarray(t.obs, dtype=float)
        self._obs = np.empty((self.capacity, obs.size))
        self._next_obs = np.empty((self.capacity, obs.size))
        self._rewards = np.empty(self.capacity)
        self._dones = np.empty(self.capacity)
        self._logps = np.empty(self.capacity)
        self.discrete = np.isscalar(t.action) or np.asarray(t.action).ndim == 0
        act_dim = 1 if self.discrete else np.asarray(t.action).size
        self._actions = np.empty((self.capacity, act_dim))

    def push(self, t):
        if self._obs is None:
            self._allocate(t)
        i = self._cursor
        self._obs[i] = t.obs
        self._next_obs[i] = t.next_obs
        self._rewards[i] = t.reward
        self._dones[i] = 1.0 if t.done else 0.0
        self._logps[i] = np.nan if t.behavior_logp is None else t.behavior_logp
        self._actions[i] = t.action
        self._cursor = (self._cursor + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _transition_at(self, i):
        logp = self._logps[i]
        action = int(self._actions[i, 0]) if self.discrete else self._actions[i].copy()
        return Transition(
            self._obs[i].copy(), action, float(self._rewards[i]),
            self._next_obs[i].copy(), bool(self._dones[i]),
            None if np.isnan(logp) else float(logp),
        )

    def items(self):
        """Contents oldest-first (test/debug helper)."""
        start = self._cursor if self._size == self.capacity else 0
        return [self._transition_at((start + k) % self.capacity)
                for k in range(self._size)]

    def sample_uniform(self, batch, rng):
        if self._size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        idx = rng.integers(0, self._size, size=batch)
        return [self._transition_at(i) for i in idx]

    def sample_arrays(self, batch, rng):
        """(obs, actions, rewards, next_obs, dones, logps) gathered in one pass."""
        if self._size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        idx = rng.integers(0, self._size, size=batch)
        actions = self._actions[idx]
        if self.discrete:
            actions = actions[:, 0].astype(int)
        return (self._obs[idx], actions, self._rewards[idx],
                self._next_obs[idx], self._dones[idx], self._logps[idx])


class SubCurriculumReplay:
    """Capacity-k min-heap of (return, trajectory) keeping the latest top-k offers.

    Ties on return go to the newer item: heap entries are
    (return, insertion_seq, trajectory) and an offer replaces the current
    minimum exactly when its (return, seq) pair is lexicographically larger.
    """

    def __init__(self, capacity):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self._heap = []
        self._seq = 0
        self._n_transitions = 0

    def __len__(self):
        return len(self._heap)

    @property
    def transition_count(self):
        return self._n_transitions

    def stored_returns(self):
        return [entry[0] for entry in self._heap]

    def max_return(self):
        return max(self.stored_returns()) if self._heap else 0.0

    def mean_return(self):
        return float(np.mean(self.stored_returns())) if self._heap else 0.0

    def offer(self, trajectory):
        """Insert, or displace the current minimum if this one ranks higher."""
        entry = (trajectory.discounted_return, self._seq, trajectory)
        self._seq += 1
        if len(self._heap) < self.capacity:
            heapq.heappush(self._heap, entry)
            self._n_transitions += len(trajectory)
        elif entry[:2] > self._heap[0][:2]:
            evicted = heapq.heapreplace(self._heap, entry)
            self._n_transitions += len(trajectory) - len(evicted[2])

    def insert(self, trajectory, gamma, n_subs, rng):
        """Offer the full trajectory plus up to n_subs distinct sub-trajectories.

        Sub-trajectories are contiguous segments drawn without repetition
        within this call (the full segment counts as already taken); each is
        scored by its own discounted return so short high-reward suffixes can
        outrank the episode that produced them.
        """
        self.offer(trajectory)
        length = len(trajectory)
        available = subtrajectory_candidates(length) - 1
        seen = {(0, length - 1)}
        for _ in range(min(int(n_subs), available)):
            while True:
                start = int(rng.integers(0, length))
                end = int(rng.integers(start, length))
                if (start, end) not in seen:
                    break
            seen.add((start, end))
            self.offer(Trajectory(trajectory.transitions[start:end + 1], gamma))

    def _sample_transitions(self, batch, rng):
        if self._n_transitions == 0:
            raise BufferNotReady("positive buffer holds no transitions yet")
        bounds = np.cumsum([len(entry[2]) for entry in self._heap])
        flat = rng.integers(0, self._n_transitions, size=batch)
        traj_idx = np.searchsorted(bounds, flat, side="right")
        starts = bounds - np.asarray([len(entry[2]) for entry in self._heap])
        return [
            self._heap[ti][2].transitions[f - starts[ti]]
            for ti, f in zip(traj_idx, flat)
        ]

    def sample_pairs(self, batch, rng):
        """Batch of (obs, action) pairs uniform over all stored transitions."""
        return [(t.obs, t.action) for t in self._sample_transitions(batch, rng)]

    def sample_pair_arrays(self, batch, rng, encode_actions):
        """Stacked (obs, encoded action) arrays; same distribution as sample_pairs."""
        ts = self._sample_transitions(batch, rng)
        obs = np.stack([t.obs for t in ts])
        if ts and np.isscalar(ts[0].action):
            acts = encode_actions(np.array([t.action for t in ts]))
        else:
            acts = encode_actions(np.stack([t.action for t in ts]))
        return obs, acts

    def check_heap_property(self):
        """True iff every parent priority <= both children (test hook)."""
        h = self._heap
        for i in range(len(h)):
            for c in (2 * i + 1, 2 * i + 2):
                if c < len(h) and h[c][:2] < h[i][:2]:
                    return False
        return True
