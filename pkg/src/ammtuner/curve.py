"""Hybrid bonding-curve math: invariant solving, swap quoting, fee mechanics.

The pool prices trades against the hybrid invariant

    amp * n^n * sum(x_i) + D = amp * D * n^n + D^(n+1) / (n^n * prod(x_i))

which reduces to constant-product at amp = 0 and approaches constant-sum as
amp grows.  Fees are a percent of the gross input, skimmed before the curve:
the curve itself is conservative, so D is unchanged by a swap up to solver
tolerance.

Every quote carries two loss figures:

* ``slippage_pct``: (net_in - amount_out) / net_in * 100, the fee-exclusive
  curve loss.
* ``price_impact_pct``: (gross_in - amount_out) / gross_in * 100, the total
  loss including the fee; this is what a user compares against their
  tolerance.

All functions are pure: pool state goes in, new pool state comes out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from ammtuner import kernels
from ammtuner.errors import QuoteInfeasibleError, SolverError  # noqa: F401

FEE_RATE_MIN = 0.04
FEE_RATE_MAX = 0.30
FEE_LEVELS = 27
LEVERAGE_MIN = 0
LEVERAGE_MAX = 85


def fee_level_to_rate(level: int) -> float:
    """Fee rate in percent for a discrete level 0..26 (0.04 .. 0.30)."""
    if not 0 <= level < FEE_LEVELS:
        raise ValueError(f"fee level {level} outside 0..{FEE_LEVELS - 1}")
    return (4 + level) / 100.0


def fee_rate_to_level(rate: float) -> int:
    level = round(rate * 100.0) - 4
    if not 0 <= level < FEE_LEVELS or abs(fee_level_to_rate(level) - rate) > 1e-9:
        raise ValueError(f"fee rate {rate} is not one of the 27 discrete levels")
    return level


@dataclass(frozen=True)
class CurveParams:
    """Live protocol parameters: curve leverage and fee rate (percent).

    The control paths (agent actions, environment resets) keep
    ``leverage_coeff`` within [0, 85] and ``fee_rate`` on the 27-level grid;
    the math itself accepts any non-negative values so limit cases
    (fee 0, very large leverage) remain expressible.
    """

    leverage_coeff: float
    fee_rate: float
    num_tokens: int = 2

    def __post_init__(self):
        if self.leverage_coeff < 0:
            raise ValueError("leverage_coeff must be non-negative")
        if self.fee_rate < 0:
            raise ValueError("fee_rate must be non-negative")
        if self.num_tokens < 2:
            raise ValueError("num_tokens must be at least 2")

    @classmethod
    def from_levels(cls, fee_level: int, leverage: int) -> "CurveParams":
        if not LEVERAGE_MIN <= leverage <= LEVERAGE_MAX:
            raise ValueError(f"leverage {leverage} outside "
                             f"[{LEVERAGE_MIN}, {LEVERAGE_MAX}]")
        return cls(leverage_coeff=leverage, fee_rate=fee_level_to_rate(fee_level))

    @property
    def fee_level(self) -> int:
        return fee_rate_to_level(self.fee_rate)


@dataclass(frozen=True)
class PoolState:
    """Token reserves plus per-token fee totals held aside from the curve."""

    reserves: tuple[float, ...]
    accrued_fees: tuple[float, ...]

    def __post_init__(self):
        if any(r <= 0 for r in self.reserves):
            raise ValueError("all reserves must be strictly positive")
        if any(f < 0 for f in self.accrued_fees):
            raise ValueError("accrued fees must be non-negative")
        if len(self.reserves) != len(self.accrued_fees):
            raise ValueError("reserves and accrued_fees lengths differ")

    @classmethod
    def balanced(cls, per_token: float, num_tokens: int = 2) -> "PoolState":
        return cls(reserves=(per_token,) * num_tokens,
                   accrued_fees=(0.0,) * num_tokens)


@dataclass(frozen=True)
class SwapQuote:
    gross_in: float
    fee: float
    net_in: float
    amount_out: float
    slippage_pct: float
    price_impact_pct: float


@dataclass(frozen=True)
class InvariantSolution:
    d_value: float
    iterations: int
    residual: float


ZERO_QUOTE = SwapQuote(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def compute_d(reserves, leverage_coeff, rel_tol=kernels.DEFAULT_REL_TOL,
              max_iter=kernels.DEFAULT_MAX_ITER) -> InvariantSolution:
    """Solve the invariant constant D for the given reserves and leverage."""
    if len(reserves) == 2:
        d, iters, residual = kernels.d_solve2(
            reserves[0], reserves[1], leverage_coeff, rel_tol, max_iter)
    else:
        d, iters, residual = kernels.d_solve_n(
            list(reserves), leverage_coeff, rel_tol, max_iter)
    return InvariantSolution(d_value=d, iterations=iters, residual=residual)


def solve_output_reserve(reserves, leverage_coeff, d_value, in_index, out_index,
                         new_in_reserve) -> float:
    """New out-token reserve after the in-token reserve moves, at fixed D."""
    if in_index == out_index:
        raise ValueError("in_index and out_index must differ")
    if new_in_reserve <= 0:
        raise QuoteInfeasibleError("input reserve must stay positive")
    if len(reserves) == 2:
        return kernels.y_solve2(new_in_reserve, leverage_coeff, d_value)
    fixed = [new_in_reserve if k == in_index else reserves[k]
             for k in range(len(reserves)) if k != out_index]
    return kernels.y_solve_n(fixed, leverage_coeff, d_value)


def apply_fee(gross_in: float, fee_rate: float) -> tuple[float, float]:
    """Split a gross input into (fee, net input); fee_rate is in percent."""
    fee = gross_in * fee_rate / 100.0
    return fee, gross_in - fee


def quote_swap(state: PoolState, params: CurveParams, in_index: int,
               out_index: int, gross_in: float) -> SwapQuote:
    """Price a swap against the current pool without touching it."""
    if gross_in == 0:
        return ZERO_QUOTE
    d = compute_d(state.reserves, params.leverage_coeff).d_value
    return quote_swap_with_d(state, params, d, in_index, out_index, gross_in)


def quote_swap_with_d(state: PoolState, params: CurveParams, d_value: float,
                      in_index: int, out_index: int,
                      gross_in: float) -> SwapQuote:
    """quote_swap with a precomputed D (callers that cache the invariant)."""
    if gross_in == 0:
        return ZERO_QUOTE
    if gross_in < 0:
        raise ValueError("gross_in must be non-negative")
    fee, net_in = apply_fee(gross_in, params.fee_rate)
    new_in = state.reserves[in_index] + net_in
    new_out = solve_output_reserve(state.reserves, params.leverage_coeff,
                                   d_value, in_index, out_index, new_in)
    amount_out = state.reserves[out_index] - new_out
    if amount_out <= 0:
        raise QuoteInfeasibleError(
            f"trade of {gross_in} yields no output from reserves "
            f"{state.reserves}")
    slippage_pct = (net_in - amount_out) / net_in * 100.0
    price_impact_pct = (gross_in - amount_out) / gross_in * 100.0
    return SwapQuote(gross_in=gross_in, fee=fee, net_in=net_in,
                     amount_out=amount_out, slippage_pct=slippage_pct,
                     price_impact_pct=price_impact_pct)


def commit_quote(state: PoolState, quote: SwapQuote, in_index: int,
                 out_index: int) -> PoolState:
    """Apply an already-priced swap: net input enters the curve, output
    leaves it, the fee is added to the held-aside totals."""
    if quote.gross_in == 0:
        return state
    reserves = list(state.reserves)
    reserves[in_index] += quote.net_in
    reserves[out_index] -= quote.amount_out
    fees = list(state.accrued_fees)
    fees[in_index] += quote.fee
    return PoolState(reserves=tuple(reserves), accrued_fees=tuple(fees))


def execute_swap(state: PoolState, params: CurveParams, in_index: int,
                 out_index: int, gross_in: float) -> tuple[PoolState, SwapQuote]:
    """Quote and commit a swap; the pool state is untouched on error."""
    quote = quote_swap(state, params, in_index, out_index, gross_in)
    return commit_quote(state, quote, in_index, out_index), quote


def reference_cpmm_quote(reserves, gross_net_in, in_index, out_index) -> float:
    """Constant-product oracle: out = y - x*y / (x + in)."""
    x = reserves[in_index]
    y = reserves[out_index]
    if gross_net_in < 0:
        raise ValueError("trade amount must be non-negative")
    return y - x * y / (x + gross_net_in)


def reference_csmm_quote(reserves, gross_net_in, in_index, out_index) -> float:
    """Constant-sum oracle: out equals in, bounded by the output reserve."""
    if gross_net_in < 0:
        raise ValueError("trade amount must be non-negative")
    if gross_net_in > reserves[out_index]:
        raise QuoteInfeasibleError(
            f"constant-sum trade of {gross_net_in} exceeds output reserve "
            f"{reserves[out_index]}")
    return gross_net_in


def d_lower_bound(reserves) -> float:
    """Geometric lower bound n * (prod x)^(1/n); equals D at amp = 0."""
    n = len(reserves)
    return n * math.prod(reserves) ** (1.0 / n)
