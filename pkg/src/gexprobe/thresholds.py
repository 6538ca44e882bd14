"""Every numeric threshold used by the regime, pattern and outcome rules.

Kept in one frozen block so a sensitivity sweep is a config change, not a
code change. Defaults are calibrated for SPY.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Thresholds:
    # regime classification of net dollar GEX
    regime_negative: float = -2e9
    regime_positive: float = 2e9

    # gamma positioning
    gp_net_gex: float = -2e9
    gp_flip_distance: float = 0.02
    gp_concentration: float = 0.70
    # "dominant": larger of call/put gamma share; "call": call share only
    gp_concentration_side: str = "dominant"

    # stock pinning
    pin_oi_share: float = 0.80
    pin_strike_distance: float = 0.01
    pin_max_dte: int = 5

    # 0DTE hedging
    zdte_dte: int = 0
    zdte_net_gex_abs: float = 3e9
    zdte_concentration: float = 0.75
    zdte_concentration_side: str = "dominant"

    # concentration metrics
    conc_window: float = 0.02
    conc_near_dte: int = 5

    # materialization criteria
    c1_move: float = 0.003
    c3_strike_distance: float = 0.005
    c4_range: float = 0.01

    def __post_init__(self):
        for side in (self.gp_concentration_side, self.zdte_concentration_side):
            if side not in ("dominant", "call"):
                raise ValueError(f"concentration side must be 'dominant' or 'call', got {side!r}")
        if not 0 < self.conc_window <= 0.10:
            raise ValueError("conc_window must lie in (0, 0.10]")
        if self.regime_negative > self.regime_positive:
            raise ValueError("regime_negative must not exceed regime_positive")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, values: dict) -> Thresholds:
        base = cls()
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise KeyError(f"unknown threshold {key!r}")
            default = getattr(base, key)
            kwargs[key] = raw if not isinstance(raw, str) else type(default)(raw)
        return replace(base, **kwargs)


DEFAULT_THRESHOLDS = Thresholds()
