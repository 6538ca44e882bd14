"""Black-Scholes gamma and delta without smile adjustment.

The normal CDF goes through ``math.erfc``. It keeps full relative precision
deep in the tails, which finite-difference checks of delta against gamma
rely on.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from datetime import date

from gexprobe.errors import DegenerateExpiry
from gexprobe.market_data import OptionKind

# one trading hour, in years
SENTINEL_TTE = 1.0 / (252.0 * 6.5)
DAYS_PER_YEAR = 365.0

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)


def norm_pdf(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def year_fraction(as_of: date, expiry: date) -> float:
    """Calendar days / 365."""
    return (expiry - as_of).days / DAYS_PER_YEAR


@dataclass(frozen=True)
class PricingInputs:
    spot: float
    strike: float
    time_to_expiry: float
    implied_vol: float
    rate: float = 0.0

    def __post_init__(self):
        for name in ("spot", "strike", "time_to_expiry", "implied_vol", "rate"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.spot <= 0 or self.strike <= 0:
            raise ValueError("spot and strike must be positive")
        if self.time_to_expiry < 0:
            raise ValueError("time_to_expiry must be non-negative")
        if self.implied_vol <= 0:
            raise ValueError("implied_vol must be positive")

    def d1(self, tte: float | None = None) -> float:
        t = self.time_to_expiry if tte is None else tte
        vol_t = self.implied_vol * math.sqrt(t)
        return (math.log(self.spot / self.strike) + (self.rate + 0.5 * self.implied_vol ** 2) * t) / vol_t


def bs_gamma(inputs: PricingInputs, *, strict: bool = False) -> float:
    """Per-share gamma, identical for calls and puts.

    At expiry the option has no convexity away from the strike, so gamma is
    0. Exactly at the strike it is unbounded; by default the value at
    ``SENTINEL_TTE`` (one trading hour) is returned with a warning, and
    ``strict=True`` raises :class:`DegenerateExpiry` instead.
    """
    t = inputs.time_to_expiry
    if t == 0.0:
        if inputs.spot != inputs.strike:
            return 0.0
        if strict:
            raise DegenerateExpiry(f"gamma is unbounded at expiry with spot == strike == {inputs.spot}")
        warnings.warn("zero time to expiry at the strike; using the one-hour gamma sentinel",
                      RuntimeWarning, stacklevel=2)
        t = SENTINEL_TTE
    d1 = inputs.d1(t)
    return norm_pdf(d1) / (inputs.spot * inputs.implied_vol * math.sqrt(t))


def bs_delta(inputs: PricingInputs, kind: OptionKind) -> float:
    """Call delta is N(d1), put delta is N(d1) - 1.

    The put branch is evaluated as -N(-d1) so it stays accurate when the put
    is far out of the money. At expiry delta is a step function, with the
    at-the-strike case at the midpoint.
    """
    kind = OptionKind(kind)
    if inputs.time_to_expiry == 0.0:
        if inputs.spot == inputs.strike:
            call = 0.5
        else:
            call = 1.0 if inputs.spot > inputs.strike else 0.0
        return call if kind is OptionKind.CALL else call - 1.0
    d1 = inputs.d1()
    if kind is OptionKind.CALL:
        return norm_cdf(d1)
    return -norm_cdf(-d1)
