"""N-step transition construction and prioritized replay.

The sum tree is a flat array holding a complete binary tree: leaves carry
priorities, internal nodes carry subtree sums. Writes refresh every
affected ancestor from its children, so the root never drifts from the
true leaf sum by more than accumulated rounding of a single pass.

Thread model: many actor threads insert, one learner samples and updates
priorities. A single lock makes each operation atomic; the deterministic
single-threaded mode simply never contends for it.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, NotEnoughData

DEFAULT_PRIORITY_FLOOR = 1e-3


@dataclass
class Transition:
    """One N-step experience record.

    cumulative_reward is sum_{n<k} gamma^n r_{i+n} for horizon k <= N;
    effective_discount is gamma^k, or 0.0 if the episode terminated
    before the horizon completed.
    """

    x: np.ndarray
    a: np.ndarray
    cumulative_reward: float
    bootstrap_x: np.ndarray
    effective_discount: float


class NStepAccumulator:
    """Builds N-step transitions from an in-order stream of env steps.

    Each emitted record recomputes its reward sum from the raw per-step
    rewards it covers, left to right, so a brute-force pass over the
    recorded trajectory reproduces the exact same floating point values.
    """

    def __init__(self, n: int, gamma: float):
        if n < 1:
            raise ContractError(f"N must be >= 1, got {n}")
        self.n = n
        self.gamma = gamma
        self._window = deque()
        self._closed = False

    def __len__(self) -> int:
        return len(self._window)

    def _emit(self, count: int, bootstrap_x, terminal: bool) -> list:
        out = []
        for _ in range(count):
            x, a, _ = self._window[0]
            total = 0.0
            g = 1.0
            for _, _, r in self._window:
                total += g * r
                g *= self.gamma
            out.append(
                Transition(
                    x=x,
                    a=a,
                    cumulative_reward=total,
                    bootstrap_x=bootstrap_x,
                    effective_discount=0.0 if terminal else g,
                )
            )
            self._window.popleft()
        return out

    def push(self, x, a, r, x_next, terminal: bool) -> list:
        """Record one env step; returns zero or more completed transitions."""
        if self._closed:
            raise ContractError("accumulator saw a terminal step; call reset() first")
        self._window.append((np.asarray(x, dtype=np.float64),
                             np.asarray(a, dtype=np.float64), float(r)))
        x_next = np.asarray(x_next, dtype=np.float64)
        if terminal:
            self._closed = True
            return self._emit(len(self._window), x_next, terminal=True)
        if len(self._window) == self.n:
            return self._emit(1, x_next, terminal=False)
        return []

    def flush_truncated(self, bootstrap_x) -> list:
        """Emit all pending steps at a time-limit boundary.

        Unlike a true terminal, the bootstrap survives: each record keeps
        effective_discount gamma^k for its shortened horizon k.
        """
        out = self._emit(len(self._window), np.asarray(bootstrap_x, dtype=np.float64),
                         terminal=False)
        self._closed = False
        return out

    def reset(self) -> None:
        self._window.clear()
        self._closed = False


class SumTree:
    """Array-backed complete binary tree over a power-of-two leaf count.

    Node 1 is the root; leaves live at [capacity, 2*capacity). All updates
    recompute ancestor sums from both children (no delta accumulation).
    """

    def __init__(self, capacity: int):
        if capacity < 1 or capacity & (capacity - 1):
            raise ContractError(f"capacity must be a positive power of two, got {capacity}")
        self.capacity = capacity
        self.depth = capacity.bit_length() - 1
        self.nodes = np.zeros(2 * capacity)

    def total(self) -> float:
        return float(self.nodes[1])

    def leaf(self, idx):
        return self.nodes[self.capacity + np.asarray(idx)]

    def leaves(self) -> np.ndarray:
        return self.nodes[self.capacity:]

    def set_leaves(self, idx, values) -> None:
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        values = np.atleast_1d(np.asarray(values, dtype=np.float64))
        self.nodes[self.capacity + idx] = values
        parents = np.unique(self.capacity + idx) >> 1
        while parents.size and parents[0] >= 1:
            self.nodes[parents] = self.nodes[2 * parents] + self.nodes[2 * parents + 1]
            parents = np.unique(parents >> 1)
            if parents[0] == 0:
                break

    def find(self, mass) -> np.ndarray:
        """Descend to the leaves holding the given cumulative masses."""
        mass = np.atleast_1d(np.asarray(mass, dtype=np.float64)).copy()
        idx = np.ones(len(mass), dtype=np.int64)
        for _ in range(self.depth):
            left = self.nodes[2 * idx]
            go_left = mass < left
            idx = 2 * idx + np.where(go_left, 0, 1)
            mass = np.where(go_left, mass, mass - left)
        return idx - self.capacity


@dataclass
class SampledBatch:
    transitions: list
    indices: np.ndarray
    probabilities: np.ndarray
    weights: np.ndarray
    generations: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


class PrioritizedReplay:
    """Ring buffer of capacity R with priority-proportional sampling.

    With prioritized=False the buffer samples uniformly and every
    importance weight is exactly 1 (the ablation mode); priorities are
    still tracked so switching modes never changes any other code path.
    """

    def __init__(self, capacity: int, prioritized: bool = True,
                 priority_floor: float = DEFAULT_PRIORITY_FLOOR):
        if capacity < 1:
            raise ContractError("capacity must be >= 1")
        self.capacity = capacity
        self.prioritized = prioritized
        self.priority_floor = priority_floor
        tree_cap = 1
        while tree_cap < capacity:
            tree_cap *= 2
        self.tree = SumTree(tree_cap)
        self._slots = [None] * capacity
        self._generations = np.zeros(capacity, dtype=np.int64)
        self.size = 0
        self.insert_cursor = 0
        self.max_priority_seen = 1.0
        self.stale_update_skips = 0
        self.insert_count = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return self.size

    def insert(self, t: Transition) -> None:
        with self._lock:
            slot = self.insert_cursor
            self._slots[slot] = t
            self.insert_count += 1
            self._generations[slot] = self.insert_count
            self.tree.set_leaves(slot, self.max_priority_seen)
            self.insert_cursor = (slot + 1) % self.capacity
            if self.size < self.capacity:
                self.size += 1

    def extend(self, transitions) -> None:
        for t in transitions:
            self.insert(t)

    def sample(self, m: int, rng: np.random.Generator, stratified: bool = True) -> SampledBatch:
        with self._lock:
            if self.size < m:
                raise NotEnoughData(f"replay holds {self.size} < batch {m}")
            if not self.prioritized:
                idx = rng.integers(0, self.size, size=m)
                probs = np.full(m, 1.0 / self.size)
                weights = np.ones(m)
            else:
                root = self.tree.total()
                if stratified:
                    u = (np.arange(m) + rng.random(m)) / m
                else:
                    u = rng.random(m)
                idx = self.tree.find(u * root)
                np.minimum(idx, self.size - 1, out=idx)
                leaves = self.tree.leaf(idx)
                probs = leaves / root
                weights = root / (self.size * leaves)
            return SampledBatch(
                transitions=[self._slots[i] for i in idx],
                indices=idx,
                probabilities=probs,
                weights=weights,
                generations=self._generations[idx].copy(),
            )

    def update_priorities(self, indices, new_priorities, generations=None) -> None:
        with self._lock:
            idx = np.asarray(indices, dtype=np.int64)
            prios = np.maximum(np.asarray(new_priorities, dtype=np.float64),
                               self.priority_floor)
            if generations is not None:
                fresh = self._generations[idx] == np.asarray(generations, dtype=np.int64)
                self.stale_update_skips += int((~fresh).sum())
                idx = idx[fresh]
                prios = prios[fresh]
            if idx.size:
                self.tree.set_leaves(idx, prios)
                self.max_priority_seen = max(self.max_priority_seen, float(prios.max()))

    def state_arrays(self) -> dict:
        """Snapshot of everything needed to rebuild the buffer (checkpointing)."""
        with self._lock:
            return {
                "size": self.size,
                "cursor": self.insert_cursor,
                "max_priority_seen": self.max_priority_seen,
                "insert_count": self.insert_count,
                "stale_update_skips": self.stale_update_skips,
                "transitions": [self._slots[i] for i in range(self.size)],
                "priorities": self.tree.leaves()[: self.size].copy(),
                "generations": self._generations[: self.size].copy(),
            }

    def restore(self, state: dict) -> None:
        with self._lock:
            self.size = state["size"]
            self.insert_cursor = state["cursor"]
            self.max_priority_seen = state["max_priority_seen"]
            self.insert_count = state["insert_count"]
            self.stale_update_skips = state["stale_update_skips"]
            for i, t in enumerate(state["transitions"]):
                self._slots[i] = t
            self._generations[: self.size] = state["generations"]
            if self.size:
                self.tree.set_leaves(np.arange(self.size), state["priorities"])
