"""Table-driven client selection.

Two integer tables per client column drive the choice of which client trains a
given pool entry:

* the curiosity table (3 x clients) counts how often a size level was sent to
  or returned by a client; its bonus is ``1 / sqrt(count)``;
* the resource table ((2p+1) x clients, rows in pool order) scores how well a
  client handled each pool entry; successes raise it, local pruning lowers the
  rows above what the client could manage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .pruning import LEVELS, ModelPool

LEVEL_ROW = {lvl: i for i, lvl in enumerate(LEVELS)}

# reward modes: combined (+CS), curiosity only (+C), resource only (+S), uniform
REWARD_MODES = ("combined", "curiosity", "resource", "uniform")


@dataclass
class Tables:
    curiosity: np.ndarray  # (3, n_clients)
    resource: np.ndarray  # (2p + 1, n_clients)
    p: int

    @classmethod
    def create(cls, n_clients: int, p: int) -> "Tables":
        return cls(
            np.ones((3, n_clients), dtype=np.int64),
            np.ones((2 * p + 1, n_clients), dtype=np.int64),
            p,
        )

    def copy(self) -> "Tables":
        return Tables(self.curiosity.copy(), self.resource.copy(), self.p)

    def to_dict(self) -> dict:
        return {"curiosity": self.curiosity.tolist(), "resource": self.resource.tolist()}


def resource_reward(pool_index: int, client: int, resource: np.ndarray, pool: ModelPool) -> float:
    """Share of the client's score mass sitting at or above each variant of the entry's level.

    Divided by ``p`` times the column total, including for the single-variant
    L level. A column that sums to zero yields 0.
    """
    col = resource[:, client]
    total = int(col.sum())
    if total == 0:
        return 0.0
    suffix = np.cumsum(col[::-1])[::-1]
    level = pool[pool_index].level
    num = int(sum(suffix[k] for k in pool.level_rows(level)))
    return num / (pool.p * total)


def curiosity_reward(level: str, client: int, curiosity: np.ndarray) -> float:
    count = curiosity[LEVEL_ROW[level], client]
    if count < 1:
        raise ValueError("curiosity counts start at 1")
    return float(1.0 / np.sqrt(float(count)))


def combine(resource_r: float, curiosity_r: float) -> float:
    return min(0.5, resource_r) * curiosity_r


def combined_reward(pool_index: int, client: int, tables: Tables, pool: ModelPool) -> float:
    return combine(
        resource_reward(pool_index, client, tables.resource, pool),
        curiosity_reward(pool[pool_index].level, client, tables.curiosity),
    )


def client_rewards(
    pool_index: int,
    clients: Sequence[int],
    tables: Tables,
    pool: ModelPool,
    mode: str = "combined",
) -> np.ndarray:
    if mode == "uniform":
        return np.ones(len(clients))
    level = pool[pool_index].level
    out = np.empty(len(clients))
    for j, c in enumerate(clients):
        if mode == "combined":
            out[j] = combined_reward(pool_index, c, tables, pool)
        elif mode == "curiosity":
            out[j] = curiosity_reward(level, c, tables.curiosity)
        elif mode == "resource":
            out[j] = resource_reward(pool_index, c, tables.resource, pool)
        else:
            raise ValueError(f"unknown reward mode {mode!r}")
    return out


def selection_probabilities(
    pool_index: int,
    clients: Sequence[int],
    tables: Tables,
    pool: ModelPool,
    mode: str = "combined",
) -> np.ndarray:
    """Rewards normalized over ``clients``; uniform if every reward is zero."""
    r = client_rewards(pool_index, clients, tables, pool, mode)
    total = r.sum()
    if total <= 0:
        return np.full(len(clients), 1.0 / len(clients))
    return r / total


def select_clients(
    dispatch: Sequence[int],
    eligible: Sequence[int],
    tables: Tables,
    pool: ModelPool,
    rng: np.random.Generator,
    mode: str = "combined",
) -> list[int]:
    """Pick a distinct client for each pool index in ``dispatch``, in order.

    Each pick samples from the normalized rewards over the clients still
    unassigned this round.
    """
    remaining = list(eligible)
    if len(remaining) < len(dispatch):
        raise ValueError(f"{len(dispatch)} dispatches but only {len(remaining)} eligible clients")
    chosen = []
    for idx in dispatch:
        probs = selection_probabilities(idx, remaining, tables, pool, mode)
        j = int(rng.choice(len(remaining), p=probs))
        chosen.append(remaining.pop(j))
    return chosen


def update_tables(sent: int, returned: int, client: int, tables: Tables, pool: ModelPool) -> None:
    """Apply one dispatch outcome to ``tables`` in place.

    ``sent`` and ``returned`` are pool indices (0 = smallest entry).
    """
    if not pool[sent].contains(pool[returned]):
        raise ValueError(f"{pool[returned].label} is not a sub-model of {pool[sent].label}")
    tc, tr, p, top = tables.curiosity, tables.resource, tables.p, pool.top
    tc[LEVEL_ROW[pool[sent].level], client] += 1
    tc[LEVEL_ROW[pool[returned].level], client] += 1
    if sent == returned:
        tr[sent:top + 1, client] += 1
        tr[top, client] += p - 1
    else:
        tr[returned, client] += p
        penalty = 0
        for t in range(returned, top + 1):
            tr[t, client] = max(tr[t, client] - penalty, 0)
            penalty += 1
