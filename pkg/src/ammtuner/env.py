"""Queue-driven market environment the tuning agents interact with.

One epoch: the pool is reset to its initial liquidity with a random fee level
and leverage, a fresh population of users is minted, and a queue of swap
orders is generated.  Each step services the order at the head of the queue
and rewards the protocol: the collected fee on success, 0 on hold, -1 on
cancel.  Held orders re-enter the queue a few places back; orders visited
more than `max_tries` times are canceled by the environment.  The epoch ends
when the queue is empty, so every generated order resolves.

The observation is the discretized fee-exclusive slippage quoted for the next
order, plus the current fee level and leverage value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import NamedTuple

from ammtuner.curve import (
    CurveParams,
    PoolState,
    QuoteInfeasibleError,
    compute_d,
    quote_swap_with_d,
)
from ammtuner.errors import ConfigError
from ammtuner.market import (
    NORMAL_TOLERANCE,
    SwapStatus,
    ToleranceSpec,
    attempt_swap,
    generate_swaps,
    generate_users,
    tolerance_mode,
)

SLIPPAGE_BUCKETS = 500
SLIPPAGE_RANGE = 20.0  # buckets span [-20%, +20%]
BUCKET_WIDTH = 2 * SLIPPAGE_RANGE / SLIPPAGE_BUCKETS
ZERO_BUCKET = 250


def discretize_slippage(slippage_pct: float) -> int:
    """Map a slippage percentage onto one of 500 uniform buckets, clamped."""
    bucket = math.floor((slippage_pct + SLIPPAGE_RANGE) / BUCKET_WIDTH)
    return min(max(bucket, 0), SLIPPAGE_BUCKETS - 1)


class EnvObservation(NamedTuple):
    slippage_bucket: int
    fee_level: int
    leverage_value: int


@dataclass(frozen=True)
class StepInfo:
    status: SwapStatus | None
    fee: float
    done: bool


@dataclass(frozen=True)
class EnvConfig:
    """Scenario configuration; see README for the config-file schema."""

    num_users: int = 20
    swaps_per_epoch: int = 400
    user_balance: float = 1_000.0
    pool_reserve: float = 20_000.0
    tolerance: ToleranceSpec = NORMAL_TOLERANCE
    amount_min: float = 100.0
    amount_max: float = 1_000.0
    max_tries: int = 15
    pushback: int = 10

    def __post_init__(self):
        if self.num_users <= 0:
            raise ConfigError("num_users must be positive")
        if self.swaps_per_epoch <= 0:
            raise ConfigError("swaps_per_epoch must be positive")
        if self.amount_min <= 0 or self.amount_max < self.amount_min:
            raise ConfigError("amount_min/amount_max must satisfy "
                              "0 < amount_min <= amount_max")
        if self.pool_reserve <= 0:
            raise ConfigError("pool_reserve must be positive")

    @classmethod
    def from_dict(cls, raw: dict) -> "EnvConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown env config key(s): {sorted(unknown)}")
        kwargs = dict(raw)
        tol = kwargs.get("tolerance")
        if isinstance(tol, str):
            kwargs["tolerance"] = tolerance_mode(tol)
        elif isinstance(tol, dict):
            try:
                kwargs["tolerance"] = ToleranceSpec(**tol)
            except TypeError as exc:
                raise ConfigError(f"bad tolerance spec: {exc}") from None
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        tol = out["tolerance"]
        out["tolerance"] = {"mu": tol.mu, "sigma": tol.sigma,
                            "lower": tol.lower, "upper": tol.upper}
        return out


class SwapMarketEnv:
    """Single-threaded environment instance; pair distinct seeds for
    parallel runs."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self.pool: PoolState | None = None
        self.users = []
        self.queue = None
        self._params: CurveParams | None = None
        self._d = 0.0
        self._rng = None
        # fresh orders are observed with a representative trade size
        self._hint_amount = 0.5 * (config.amount_min + config.amount_max)

    @property
    def params(self) -> CurveParams:
        return self._params

    def set_params(self, params: CurveParams) -> None:
        leverage_changed = (self._params is None
                            or params.leverage_coeff != self._params.leverage_coeff)
        self._params = params
        if leverage_changed:
            self._refresh_d()

    def _refresh_d(self) -> None:
        self._d = compute_d(self.pool.reserves,
                            self._params.leverage_coeff).d_value

    @property
    def done(self) -> bool:
        return not self.queue

    def reset(self, rng, params: CurveParams | None = None,
              tolerance: ToleranceSpec | None = None) -> EnvObservation:
        """Start a new epoch: fresh pool, users, queue, and random protocol
        parameters (uniform fee level, uniform integer leverage).  `params`
        overrides the random draw (the static baseline); `tolerance`
        overrides the scenario's tolerance spec (behavior-change runs)."""
        cfg = self.config
        self._rng = rng
        fee_level = int(rng.integers(27))
        leverage = int(rng.integers(86))
        drawn = CurveParams.from_levels(fee_level, leverage)
        self.pool = PoolState.balanced(cfg.pool_reserve)
        self.users = generate_users(cfg.num_users, cfg.user_balance, rng)
        self.queue = generate_swaps(cfg.swaps_per_epoch,
                                    tolerance or cfg.tolerance,
                                    cfg.num_users, rng)
        self._params = params if params is not None else drawn
        self._refresh_d()
        return self._observe()

    def step(self) -> tuple[EnvObservation, float, StepInfo]:
        """Service the head order; returns (observation, reward, info).

        Stepping an exhausted queue is a terminal no-op, not an error.
        """
        if not self.queue:
            return self._observe(), 0.0, StepInfo(status=None, fee=0.0, done=True)

        order = self.queue.popleft()
        user = self.users[order.user_id]
        fee = 0.0
        if order.tries >= self.config.max_tries:
            status = SwapStatus.CANCELED
            reward = -1.0
        else:
            result, pool = attempt_swap(
                order, user, self.pool, self._params, self._d, self._rng,
                (self.config.amount_min, self.config.amount_max))
            status = result.status
            if status is SwapStatus.SUCCESS:
                self.pool = pool
                self._refresh_d()
                fee = result.fee
                reward = fee
            elif status is SwapStatus.HOLDING:
                self.queue.insert(min(self.config.pushback, len(self.queue)),
                                  order)
                reward = 0.0
            else:
                reward = -1.0

        return self._observe(), reward, StepInfo(status=status, fee=fee,
                                                 done=not self.queue)

    def _observe(self) -> EnvObservation:
        if not self.queue:
            bucket = ZERO_BUCKET
        else:
            head = self.queue[0]
            amt = head.amt if head.amt is not None else self._hint_amount
            idx = head.idx if head.idx is not None else 0
            try:
                quote = quote_swap_with_d(self.pool, self._params, self._d,
                                          idx, 1 - idx, amt)
                bucket = discretize_slippage(quote.slippage_pct)
            except QuoteInfeasibleError:
                bucket = SLIPPAGE_BUCKETS - 1
        return EnvObservation(slippage_bucket=bucket,
                              fee_level=self._params.fee_level,
                              leverage_value=int(self._params.leverage_coeff))

    def token_totals(self) -> tuple[float, ...]:
        """Per-token sum of user balances, pool reserves, and held fees;
        conserved over an epoch."""
        n = len(self.pool.reserves)
        totals = []
        for i in range(n):
            total = self.pool.reserves[i] + self.pool.accrued_fees[i]
            total += math.fsum(u.balances[i] for u in self.users)
            totals.append(total)
        return tuple(totals)
