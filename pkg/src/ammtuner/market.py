"""User population and swap-order dynamics.

Each epoch the environment mints a population of users and a queue of swap
orders.  An order carries a slippage tolerance (percent) and an urgency
log-factor; the effective tolerance a user accepts is tolerance * e^urgency.
A quoted price impact below that goes through; otherwise the user either
cancels (probability 0.4 / e^urgency) or holds, growing 1% more urgent.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum

from ammtuner.curve import (
    CurveParams,
    PoolState,
    QuoteInfeasibleError,
    commit_quote,
    quote_swap_with_d,
)
from ammtuner.sampling import sample_truncated_normal

LN2 = math.log(2.0)

TOLERANCE_LOWER = 0.1
TOLERANCE_UPPER = 5.0
URGENCY_MU = math.log(1.5)
URGENCY_SIGMA = 0.25
CANCEL_CHANCE = 0.4
URGENCY_BUMP = 1.01
LOW_BALANCE_FRACTION = 0.2


@dataclass(frozen=True)
class ToleranceSpec:
    """Truncated-normal parameters for slippage-tolerance generation."""

    mu: float
    sigma: float
    lower: float = TOLERANCE_LOWER
    upper: float = TOLERANCE_UPPER


NORMAL_TOLERANCE = ToleranceSpec(mu=0.25, sigma=0.25)
LOOSE_TOLERANCE = ToleranceSpec(mu=0.75, sigma=0.75)

TOLERANCE_MODES = {"normal": NORMAL_TOLERANCE, "loose": LOOSE_TOLERANCE}


def tolerance_mode(name: str) -> ToleranceSpec:
    try:
        return TOLERANCE_MODES[name]
    except KeyError:
        raise ValueError(f"unknown tolerance mode {name!r}; "
                         f"expected one of {sorted(TOLERANCE_MODES)}") from None


@dataclass
class User:
    id: int
    balances: list[float]


@dataclass
class SwapOrder:
    tolerance: float
    urgency: float
    user_id: int
    amt: float | None = None
    idx: int | None = None
    tries: int = 0
    fresh: bool = True


class SwapStatus(IntEnum):
    """Outcome codes a swap attempt reports back to the environment."""

    SUCCESS = 1
    HOLDING = 0
    CANCELED = -1


@dataclass(frozen=True)
class AttemptResult:
    status: SwapStatus
    amount_out: float = 0.0
    fee: float = 0.0


HELD = AttemptResult(SwapStatus.HOLDING)
CANCELED = AttemptResult(SwapStatus.CANCELED)


def generate_users(count, initial_balance, rng) -> list[User]:
    """Mint `count` users, each holding `initial_balance` of both tokens."""
    if count <= 0:
        raise ValueError("user count must be positive")
    return [User(id=k, balances=[float(initial_balance), float(initial_balance)])
            for k in range(count)]


def generate_swaps(count, tolerance: ToleranceSpec, num_users, rng) -> deque[SwapOrder]:
    """Generate the epoch's order queue.

    Tolerances come from the scenario's truncated normal, urgencies from
    truncated-normal(ln 1.5, 0.25) on [ln 1, ln 2], and each order is
    assigned to a uniformly random user.
    """
    if count <= 0:
        raise ValueError("swap count must be positive")
    queue: deque[SwapOrder] = deque()
    for _ in range(count):
        tol = sample_truncated_normal(tolerance.mu, tolerance.sigma,
                                      tolerance.lower, tolerance.upper, rng)
        urg = sample_truncated_normal(URGENCY_MU, URGENCY_SIGMA, 0.0, LN2, rng)
        queue.append(SwapOrder(tolerance=tol, urgency=urg,
                               user_id=int(rng.integers(num_users))))
    return queue


def choose_trade_side(user: User, rng,
                      low_balance_fraction=LOW_BALANCE_FRACTION) -> int:
    """Pick the input token uniformly, inverting once if the chosen balance
    is below the given fraction of the other.  Keeps either balance from
    drying up."""
    idx = int(rng.integers(2))
    if user.balances[idx] < low_balance_fraction * user.balances[1 - idx]:
        idx = 1 - idx
    return idx


def effective_tolerance(order: SwapOrder) -> float:
    return order.tolerance * math.exp(order.urgency)


def _reject(order: SwapOrder, rng, allow_cancel: bool) -> AttemptResult:
    if allow_cancel and rng.random() < CANCEL_CHANCE / math.exp(order.urgency):
        return CANCELED
    order.urgency = min(order.urgency * URGENCY_BUMP, LN2)
    order.tries += 1
    order.fresh = False
    return HELD


def attempt_swap(order: SwapOrder, user: User, pool: PoolState,
                 params: CurveParams, d_value: float, rng,
                 amount_range: tuple[float, float]) -> tuple[AttemptResult, PoolState]:
    """Run one user decision for the order at the head of the queue.

    On the first visit the user picks a side and an amount (uniform over
    amount_range, capped at their balance) which stick for any retries.  The
    swap executes if the quoted price impact is under the urgency-modified
    tolerance; otherwise the user cancels with probability 0.4 / e^urgency or
    holds with 1% more urgency.  Trades the pool cannot quote, or that the
    user can no longer afford, are held rather than canceled: they may fit
    after the protocol's state moves.

    Returns the outcome and the (possibly updated) pool state.
    """
    if order.user_id != user.id:
        raise ValueError("order dispatched to the wrong user")
    if order.fresh:
        order.idx = choose_trade_side(user, rng)
        lo, hi = amount_range
        amt = lo if lo == hi else float(rng.uniform(lo, hi))
        order.amt = min(amt, user.balances[order.idx])

    in_idx = order.idx
    out_idx = 1 - in_idx
    if order.amt <= 0 or order.amt > user.balances[in_idx]:
        return _reject(order, rng, allow_cancel=False), pool

    try:
        quote = quote_swap_with_d(pool, params, d_value, in_idx, out_idx,
                                  order.amt)
    except QuoteInfeasibleError:
        return _reject(order, rng, allow_cancel=False), pool

    if quote.price_impact_pct < effective_tolerance(order):
        new_pool = commit_quote(pool, quote, in_idx, out_idx)
        user.balances[in_idx] -= quote.gross_in
        user.balances[out_idx] += quote.amount_out
        return AttemptResult(SwapStatus.SUCCESS, amount_out=quote.amount_out,
                             fee=quote.fee), new_pool

    return _reject(order, rng, allow_cancel=True), pool
