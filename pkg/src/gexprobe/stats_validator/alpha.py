"""Net alpha after transaction costs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

TC_PER_TRADE = 0.0005


@dataclass(frozen=True)
class AlphaInputs:
    strategy_returns: Sequence[float]
    benchmark_returns: Sequence[float]
    tc_per_trade: float = TC_PER_TRADE
    trades: int | None = None  # defaults to one trade per strategy observation

    def __post_init__(self):
        if self.tc_per_trade < 0:
            raise ValueError("tc_per_trade must be >= 0")


def net_alpha(inputs: AlphaInputs) -> float:
    s = list(inputs.strategy_returns)
    b = list(inputs.benchmark_returns)
    if not s:
        raise ValueError("strategy returns must be non-empty")
    if not b:
        raise ValueError("benchmark returns must be non-empty")
    trades = len(s) if inputs.trades is None else inputs.trades
    return sum(s) / len(s) - sum(b) / len(b) - inputs.tc_per_trade * trades / len(s)
