"""First-order asymptotic predictions used as comparison baselines.

These are the leading-order formulas for the operating characteristics of
the mixture rules as the threshold grows: the m-th delay moment of the MS
rule behaves like (log A / (I + mu))^m, the MSR rule like (log A / I)^m
(the MSR statistic does not collect the prior's exponential-tail credit),
and the best achievable integrated risk like D * c * |log c|^r.

All of them drop o(1) terms, so reports never pass/fail a raw ratio at a
single threshold; convergence is assessed across a threshold ladder via
slope regression (see the montecarlo module).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

FIRST_ORDER_NOTE = "first-order asymptotics; o(1) terms dropped"


@dataclass(frozen=True)
class Prediction:
    """A named first-order prediction with the inputs it was computed from."""

    quantity: str
    value: float
    inputs: dict = field(default_factory=dict)
    note: str = FIRST_ORDER_NOTE

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "value": self.value,
            "inputs": dict(self.inputs),
            "note": self.note,
        }


def _check_common(i: float, m: float) -> None:
    if i <= 0.0:
        raise ValueError("information number must be positive")
    if m < 1.0:
        raise ValueError("moment order m must be >= 1")


def ms_delay_prediction(a: float, i: float, mu: float = 0.0, m: float = 1.0) -> float:
    """(log A / (I + mu))^m: m-th delay moment of the MS rule, to first order."""
    _check_common(i, m)
    if a <= 1.0:
        raise ValueError("threshold A must exceed 1")
    if mu < 0.0:
        raise ValueError("tail exponent mu must be >= 0")
    return (math.log(a) / (i + mu)) ** m


def msr_delay_prediction(a: float, i: float, m: float = 1.0) -> float:
    """(log A / I)^m: m-th delay moment of the MSR rule, to first order.

    No mu in the denominator: the head-started sum drifts at rate I only,
    whatever the prior tail does.
    """
    _check_common(i, m)
    if a <= 1.0:
        raise ValueError("threshold A must exceed 1")
    return (math.log(a) / i) ** m


def integrated_risk_prediction(c: float, r: float, d: float) -> float:
    """D * c * |log c|^r: the first-order optimal integrated risk."""
    if not 0.0 < c < 1.0:
        raise ValueError("cost c must be in (0, 1)")
    if r < 1.0:
        raise ValueError("r must be >= 1")
    if d <= 0.0:
        raise ValueError("D must be positive")
    return d * c * abs(math.log(c)) ** r


def flat_prior_prediction(alpha: float, i: float, m: float = 1.0) -> float:
    """(|log alpha| / I)^m: the mu = 0 delay formula at PFA level alpha.

    This is the limit shared by both rules when the prior flattens (its
    tail exponent vanishing with alpha); no separate machinery is needed.
    """
    _check_common(i, m)
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    return (abs(math.log(alpha)) / i) ** m
