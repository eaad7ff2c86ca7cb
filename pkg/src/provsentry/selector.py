"""Per-relation neighbor filtering driven by a two-armed bandit.

Each (relation, GNN layer) slot owns a keep-fraction threshold p. Every
epoch the slot observes the average selected-neighbor distance over the
training nodes; shrinking the threshold is rewarded when that average did
not increase. Actions move p by +-tau greedily (keep the direction after a
reward, flip after a penalty). A slot freezes once the last ten rewards
roughly cancel, and its p becomes the permanent filter threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

REWARD_WINDOW = 10
REWARD_BAND = 2


def reward(prev_state: float, cur_state: float) -> int:
    """+1 when the average distance did not increase, else -1."""
    return 1 if prev_state - cur_state >= 0.0 else -1


def is_terminal(rewards: list[int], epochs: int) -> bool:
    """True once >= 10 rewards exist and the last 10 roughly cancel."""
    if epochs < REWARD_WINDOW or len(rewards) < REWARD_WINDOW:
        return False
    return abs(sum(rewards[-REWARD_WINDOW:])) <= REWARD_BAND


@dataclass
class SelectorSlot:
    """Bandit state for one (relation, layer) pair."""

    rel_id: int
    layer: int
    tau: float
    p_min: float
    p: float = 0.5
    direction: int = -1            # start by tightening
    rewards: list[int] = field(default_factory=list)
    epochs: int = 0                # rewards recorded so far
    last_state: float | None = None
    frozen: bool = False

    def apply_action(self, r: int) -> None:
        if self.frozen:
            raise RuntimeError(f"selector slot (rel={self.rel_id}, layer={self.layer}) is frozen")
        if r < 0:
            self.direction = -self.direction
        self.p = float(min(1.0, max(self.p_min, self.p + self.direction * self.tau)))

    def step(self, state: float) -> None:
        """Advance one epoch with the freshly observed average distance."""
        if self.frozen:
            return
        if self.last_state is None:
            self.last_state = state
            self.p = float(min(1.0, max(self.p_min, self.p + self.direction * self.tau)))
            return
        r = reward(self.last_state, state)
        self.rewards.append(r)
        self.rewards = self.rewards[-REWARD_WINDOW:]
        self.epochs += 1
        self.last_state = state
        if is_terminal(self.rewards, self.epochs):
            self.frozen = True
            return
        self.apply_action(r)


def keep_count(p: float, n_neighbors: int) -> int:
    """How many closest neighbors survive the filter: max(1, ceil(p * n))."""
    if n_neighbors <= 0:
        return 0
    return max(1, math.ceil(p * n_neighbors - 1e-12))


def top_p_select(distances: np.ndarray, neighbor_ids: np.ndarray, p: float) -> np.ndarray:
    """Reference selection: keep the closest max(1, ceil(p*|N|)) neighbors.

    Ties in distance break toward the smaller neighbor id. Returns the kept
    neighbor ids in selection order.
    """
    distances = np.asarray(distances, dtype=np.float64)
    neighbor_ids = np.asarray(neighbor_ids)
    if len(distances) != len(neighbor_ids):
        raise ValueError("distances and neighbor_ids must align")
    if len(distances) == 0:
        return neighbor_ids[:0]
    order = np.lexsort((neighbor_ids, distances))
    return neighbor_ids[order[: keep_count(p, len(distances))]]


def average_selected_distance(edge_centers: np.ndarray, edge_distances: np.ndarray,
                              selected: np.ndarray, train_mask: np.ndarray) -> float:
    """Average over |V_train| of each training node's summed selected distances."""
    n_train = int(train_mask.sum())
    if n_train == 0:
        raise ValueError("average selected distance needs at least one training node")
    if len(edge_centers) == 0:
        return 0.0
    keep = selected & train_mask[edge_centers]
    return float(edge_distances[keep].sum() / n_train)
