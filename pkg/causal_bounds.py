"""
Causal Bounds Module

Risk ratio and probability-of-causation quantities for the target
individual, from group counts or supplied probabilities.

Responsible for:
1. Treated / untreated success probabilities for the selected model
2. Risk ratio and the lower bound max{0, 1 - 1/RR} on the probability of causation
3. Excess risk ratio and observational risk ratio
4. The two-term observational/experimental formula, as published and in its
   textbook form

Design Decisions:
1. Posterior means (x+1)/(n+2) are the default estimator, coherent with the
   Beta(1,1) likelihood and always defined; MLE x/n is optional
2. The untreated probability pools a00 and a01, mirroring the single
   parameter the likelihood assigns to the matching untreated
3. Zero denominators yield UNDEFINED, never NaN
4. The published two-term formula is evaluated exactly as printed and
   labelled so; the textbook form is reported next to it, never in its place
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterable

from models.inference import (
    CausalEstimates, Estimate, EstimatorKind, GroupCounts, GroupStats, UNDEFINED,
    as_optional, is_defined, safe_ratio,
)

logger = logging.getLogger(__name__)

AS_PRINTED_LABEL = "as-printed two-term formula"
STANDARD_LABEL = "standard two-term formula (under monotonicity)"


def success_probability(group: GroupStats, kind: EstimatorKind) -> Estimate:
    """Estimate of a group's success probability"""
    if kind == EstimatorKind.POSTERIOR_MEAN:
        return (group.x + 1) / (group.n + 2)
    return group.success_ratio


def pc_lower_bound(rr: Estimate) -> Estimate:
    """max{0, 1 - 1/RR}; zero for every RR <= 1"""
    if not is_defined(rr):
        return UNDEFINED
    if rr <= 1:
        return 0.0
    return 1.0 - 1.0 / rr


def risk_ratio(counts: GroupCounts, kind: EstimatorKind = EstimatorKind.POSTERIOR_MEAN) -> CausalEstimates:
    """
    RR for the target's stratum: treated success probability from a11 over
    untreated success probability from the pooled matching untreated.
    """
    kind = EstimatorKind.from_string(kind)
    p_treated = success_probability(counts.a11, kind)
    p_untreated = success_probability(counts.a0, kind)

    if is_defined(p_treated) and is_defined(p_untreated):
        rr = safe_ratio(p_treated, p_untreated)
    else:
        rr = UNDEFINED

    if rr is UNDEFINED:
        logger.debug(f"RR undefined for counts {counts.to_dict()} ({kind.value})")

    return CausalEstimates(
        p_treated=p_treated,
        p_untreated=p_untreated,
        rr=rr,
        pc_lower=pc_lower_bound(rr),
        estimator_kind=kind,
    )


def err(p1: float, p0: float) -> Estimate:
    """Excess risk ratio (p1 - p0) / p1"""
    return safe_ratio(p1 - p0, p1)


def orr(p_t1: float, p_t0: float) -> Estimate:
    """Observational risk ratio form 1 - 1/(p_t1/p_t0) = 1 - p_t0/p_t1"""
    ratio = safe_ratio(p_t0, p_t1)
    return UNDEFINED if ratio is UNDEFINED else 1.0 - ratio


@dataclass(frozen=True)
class TwoTermResult:
    """Probability of causation from observational and experimental inputs"""
    first_term: Estimate
    second_term: Estimate
    label: str

    @property
    def raw(self) -> Estimate:
        if not (is_defined(self.first_term) and is_defined(self.second_term)):
            return UNDEFINED
        return self.first_term + self.second_term

    @property
    def clamped(self) -> Estimate:
        raw = self.raw
        if not is_defined(raw):
            return UNDEFINED
        return min(1.0, max(0.0, raw))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'label': self.label,
            'first_term': as_optional(self.first_term),
            'second_term': as_optional(self.second_term),
            'raw': as_optional(self.raw),
            'clamped': as_optional(self.clamped),
        }


def _check_probabilities(**values: float) -> None:
    for name, value in values.items():
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {value}")


def tian_pearl(p_obs_r1_t1: float, p_obs_r0_t1: float, p_obs_r1_t0: float,
               p_exp_r1_t0: float, p_obs_r1_and_t1: float) -> TwoTermResult:
    """
    The published two-term formula, evaluated literally:

        (P_obs(R=1|T=1) - P_obs(R=0|T=1)) / P_obs(R=1|T=1)
      + (P_obs(R=1|T=0) - P_exp(R=1|T=0)) / P_obs(R=1, T=1)

    The first numerator differs from the textbook result; see
    tian_pearl_standard for that form.
    """
    _check_probabilities(
        p_obs_r1_t1=p_obs_r1_t1, p_obs_r0_t1=p_obs_r0_t1, p_obs_r1_t0=p_obs_r1_t0,
        p_exp_r1_t0=p_exp_r1_t0, p_obs_r1_and_t1=p_obs_r1_and_t1,
    )
    return TwoTermResult(
        first_term=safe_ratio(p_obs_r1_t1 - p_obs_r0_t1, p_obs_r1_t1),
        second_term=safe_ratio(p_obs_r1_t0 - p_exp_r1_t0, p_obs_r1_and_t1),
        label=AS_PRINTED_LABEL,
    )


def tian_pearl_standard(p_obs_r1_t1: float, p_obs_r1_t0: float,
                        p_exp_r1_t0: float, p_obs_r1_and_t1: float) -> TwoTermResult:
    """
    Textbook form under monotonicity:

        (P_obs(R=1|T=1) - P_obs(R=1|T=0)) / P_obs(R=1|T=1)
      + (P_obs(R=1|T=0) - P_exp(R=1|T=0)) / P_obs(R=1, T=1)
    """
    _check_probabilities(
        p_obs_r1_t1=p_obs_r1_t1, p_obs_r1_t0=p_obs_r1_t0,
        p_exp_r1_t0=p_exp_r1_t0, p_obs_r1_and_t1=p_obs_r1_and_t1,
    )
    return TwoTermResult(
        first_term=safe_ratio(p_obs_r1_t1 - p_obs_r1_t0, p_obs_r1_t1),
        second_term=safe_ratio(p_obs_r1_t0 - p_exp_r1_t0, p_obs_r1_and_t1),
        label=STANDARD_LABEL,
    )


@dataclass(frozen=True)
class RRInterval:
    """Range of risk ratios over several target individuals' best models"""
    low: Estimate
    high: Estimate
    defined: int
    total: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'low': as_optional(self.low),
            'high': as_optional(self.high),
            'defined': self.defined,
            'total': self.total,
        }


def rr_interval(estimates: Iterable[CausalEstimates]) -> RRInterval:
    """Min and max RR, skipping undefined ones"""
    estimates = list(estimates)
    values = [e.rr for e in estimates if is_defined(e.rr)]
    if not values:
        return RRInterval(UNDEFINED, UNDEFINED, 0, len(estimates))
    return RRInterval(min(values), max(values), len(values), len(estimates))
