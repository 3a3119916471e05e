"""Tabular Q-learning: action spaces, epsilon-greedy selection, TD updates.

Three live agents plus a static baseline:

* fee-only     - 3 actions, fee level -1/0/+1
* leverage-only - 3 actions, leverage -2/0/+2
* combined     - 9 actions, the cross product
* baseline     - a single no-op, never updated; fee 0.17%, leverage 42

Q-values live in a sparse table keyed by the environment observation; missing
keys read as zeros.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Hashable, NamedTuple, Sequence

import numpy as np

from ammtuner.curve import (
    FEE_LEVELS,
    LEVERAGE_MAX,
    LEVERAGE_MIN,
    CurveParams,
)


class ActionEffect(NamedTuple):
    delta_fee_levels: int
    delta_leverage: int


class AgentKind(Enum):
    FEE_ONLY = "fee"
    LEVERAGE_ONLY = "leverage"
    COMBINED = "combined"
    BASELINE = "baseline"

    @classmethod
    def parse(cls, name: str) -> "AgentKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown agent kind {name!r}; "
                         f"expected one of {[k.value for k in cls]}")


ACTION_SETS: dict[AgentKind, tuple[ActionEffect, ...]] = {
    AgentKind.FEE_ONLY: tuple(ActionEffect(df, 0) for df in (-1, 0, 1)),
    AgentKind.LEVERAGE_ONLY: tuple(ActionEffect(0, da) for da in (-2, 0, 2)),
    AgentKind.COMBINED: tuple(ActionEffect(df, da)
                              for df in (-1, 0, 1) for da in (-2, 0, 2)),
    AgentKind.BASELINE: (ActionEffect(0, 0),),
}

BASELINE_PARAMS = CurveParams(leverage_coeff=42, fee_rate=0.17)


@dataclass(frozen=True)
class Hyperparams:
    alpha: float = 0.1
    gamma: float = 0.99
    eps_max: float = 1.0
    eps_min: float = 0.01
    eta: float = 0.0015

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must be in [0, 1]")
        if not 0 <= self.eps_min <= self.eps_max <= 1:
            raise ValueError("need 0 <= eps_min <= eps_max <= 1")
        if self.eta <= 0:
            raise ValueError("eta must be positive")


def epsilon_at(epoch: int, hyper: Hyperparams) -> float:
    """Exploration rate at an epoch: eps_min + (eps_max - eps_min) * e^(-eta * epoch)."""
    return hyper.eps_min + (hyper.eps_max - hyper.eps_min) * math.exp(
        -hyper.eta * epoch)


class QTable:
    """Sparse observation -> action-value vector map, zero by default.

    Reads never allocate: untouched cells stay exactly zero and unvisited
    observations take no memory.
    """

    def __init__(self, n_actions: int):
        self.n_actions = n_actions
        self._table: dict[Hashable, np.ndarray] = {}
        self._zeros = np.zeros(n_actions)
        self._zeros.flags.writeable = False

    def values(self, obs: Hashable) -> np.ndarray:
        """Action values for an observation (read-only zeros if unseen)."""
        return self._table.get(obs, self._zeros)

    def _cell(self, obs: Hashable) -> np.ndarray:
        vec = self._table.get(obs)
        if vec is None:
            vec = np.zeros(self.n_actions)
            self._table[obs] = vec
        return vec

    def __len__(self) -> int:
        return len(self._table)

    def items(self):
        return self._table.items()


def select_action(qtable: QTable, obs: Hashable, eps: float, kind: AgentKind,
                  rng) -> int:
    """Epsilon-greedy choice with uniform random tie-breaking on the argmax."""
    if kind is AgentKind.BASELINE:
        return 0
    if eps > 0 and rng.random() < eps:
        return int(rng.integers(qtable.n_actions))
    values = qtable.values(obs)
    best = np.flatnonzero(values == values.max())
    return int(best[rng.integers(len(best))])


def td_update(qtable: QTable, obs: Hashable, action: int, reward: float,
              next_obs: Hashable, hyper: Hyperparams) -> None:
    """One temporal-difference step:
    Q(s,a) += alpha * (R + gamma * max_a' Q(s',a') - Q(s,a))."""
    cell = qtable._cell(obs)
    target = reward + hyper.gamma * float(qtable.values(next_obs).max())
    cell[action] += hyper.alpha * (target - cell[action])


def apply_action(params: CurveParams, effect: ActionEffect) -> CurveParams:
    """Move the protocol parameters by the action deltas, clamped to the
    control ranges (fee levels 0..26, leverage 0..85)."""
    level = params.fee_level + effect.delta_fee_levels
    level = min(max(level, 0), FEE_LEVELS - 1)
    leverage = params.leverage_coeff + effect.delta_leverage
    leverage = min(max(leverage, LEVERAGE_MIN), LEVERAGE_MAX)
    return CurveParams.from_levels(level, int(leverage))


def action_stddev(action_history: Sequence[Sequence[int]]) -> tuple[list[float], float]:
    """Population standard deviation of action indices within each epoch,
    and the mean across epochs."""
    if not action_history:
        raise ValueError("action history is empty")
    per_epoch = [float(np.std(np.asarray(epoch, dtype=float)))
                 for epoch in action_history]
    return per_epoch, float(np.mean(per_epoch))


SNAPSHOT_VERSION = 1


def save_qtable(qtable: QTable, kind: AgentKind, hyper: Hyperparams,
                path) -> None:
    """Write a Q-table snapshot: JSON with "bucket,feeLevel,leverage" keys.

    Floats are serialized with repr semantics, so load() round-trips
    bit-exactly.
    """
    entries = {",".join(str(part) for part in obs): [float(v) for v in vec]
               for obs, vec in qtable.items()}
    payload = {
        "version": SNAPSHOT_VERSION,
        "agent_kind": kind.value,
        "n_actions": qtable.n_actions,
        "hyperparams": {
            "alpha": hyper.alpha,
            "gamma": hyper.gamma,
            "eps_max": hyper.eps_max,
            "eps_min": hyper.eps_min,
            "eta": hyper.eta,
        },
        "q": {key: entries[key] for key in sorted(entries)},
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def load_qtable(path) -> tuple[QTable, AgentKind, Hyperparams]:
    payload = json.loads(Path(path).read_text())
    kind = AgentKind.parse(payload["agent_kind"])
    hyper = Hyperparams(**payload["hyperparams"])
    qtable = QTable(payload["n_actions"])
    for key, vec in payload["q"].items():
        obs = tuple(int(part) for part in key.split(","))
        cell = qtable._cell(obs)
        cell[:] = vec
    return qtable, kind, hyper
