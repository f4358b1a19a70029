"""
Marginal Likelihood Module

Closed-form Beta-Binomial marginal likelihood of a model M_J, computed from
the five group tallies.

Responsible for:
1. The target's predictive factor combined with the a11 group
2. The exchangeable factor for abar11 and abar0
3. The pooled untreated factor for a00 + a01 (hypergeometric shape)
4. Their sum as a LogMarginal with per-group breakdown

Design Decisions:
1. Natural-log space throughout; binomial coefficients via gammaln so group
   sizes in the thousands never overflow
2. Beta(alpha, beta) priors on every group parameter, Beta(1, 1) by default;
   with the default the exchangeable factor is exactly 1/(n+1)
3. Every factor accepts numpy arrays as well as scalars so enumeration can
   score thousands of models per call
4. Factors are probabilities of success COUNTS (not sequences): summing
   exp(log_marginal) over all counts and both target responses gives 1
"""

import logging
from typing import Dict, Tuple, Union

import numpy as np
from scipy.special import betaln, gammaln

from models.inference import GroupCounts, LogMarginal

logger = logging.getLogger(__name__)

ArrayLike = Union[int, float, np.ndarray]


def _result(value: np.ndarray) -> ArrayLike:
    """Plain float for scalar input, array otherwise"""
    value = np.asarray(value, dtype=float)
    return float(value) if value.ndim == 0 else value


def _check_counts(n: ArrayLike, x: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    n = np.asarray(n, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > n):
        raise ValueError("success counts must satisfy 0 <= x <= n")
    return n, x


def log_binomial(n: ArrayLike, x: ArrayLike) -> ArrayLike:
    """log C(n, x) via log-gamma"""
    n = np.asarray(n, dtype=float)
    x = np.asarray(x, dtype=float)
    return _result(gammaln(n + 1) - gammaln(x + 1) - gammaln(n - x + 1))


def _log_beta_binomial(n: np.ndarray, x: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """log P(x successes out of n) with theta ~ Beta(alpha, beta) integrated out"""
    return (
        np.asarray(log_binomial(n, x))
        + betaln(x + alpha, n - x + beta)
        - betaln(alpha, beta)
    )


def factor_a11(n: ArrayLike, x: ArrayLike, r_target: int,
               alpha: float = 1.0, beta: float = 1.0) -> ArrayLike:
    """
    Log factor of the comparable treated group together with the target.

    The target is scored predictively given the group's responses:
    (x+1)/(n+2) for r_target=1, (n-x+1)/(n+2) for r_target=0, times the
    group's own factor 1/(n+1) under Beta(1, 1).
    """
    if r_target not in (0, 1):
        raise ValueError(f"target response must be 0 or 1, got {r_target!r}")
    n, x = _check_counts(n, x)
    if r_target == 1:
        predictive = np.log(x + alpha) - np.log(n + alpha + beta)
    else:
        predictive = np.log(n - x + beta) - np.log(n + alpha + beta)
    return _result(predictive + _log_beta_binomial(n, x, alpha, beta))


def factor_exchangeable(n: ArrayLike, x: ArrayLike,
                        alpha: float = 1.0, beta: float = 1.0) -> ArrayLike:
    """Log factor of a group sharing one success probability (abar11, abar0)"""
    n, x = _check_counts(n, x)
    return _result(_log_beta_binomial(n, x, alpha, beta))


def factor_a0(n00: ArrayLike, x00: ArrayLike, n01: ArrayLike, x01: ArrayLike,
              alpha: float = 1.0, beta: float = 1.0) -> ArrayLike:
    """
    Log factor of the matching untreated, split by desire but pooled under one
    parameter.

    Under Beta(1, 1) this is C(n00,x00) C(n01,x01) / C(N,t) / (N+1) with
    N = n00+n01, t = x00+x01: a hypergeometric term favouring balanced
    success counts across the two desire strata.
    """
    n00, x00 = _check_counts(n00, x00)
    n01, x01 = _check_counts(n01, x01)
    total_n = n00 + n01
    total_x = x00 + x01
    value = (
        np.asarray(log_binomial(n00, x00))
        + np.asarray(log_binomial(n01, x01))
        + betaln(total_x + alpha, total_n - total_x + beta)
        - betaln(alpha, beta)
    )
    return _result(value)


def log_marginal(counts: GroupCounts, r_target: int,
                 alpha: float = 1.0, beta: float = 1.0) -> LogMarginal:
    """Log marginal likelihood of one model from its group counts"""
    return LogMarginal(
        a11=factor_a11(counts.a11.n, counts.a11.x, r_target, alpha, beta),
        abar11=factor_exchangeable(counts.abar11.n, counts.abar11.x, alpha, beta),
        a0=factor_a0(counts.a00.n, counts.a00.x, counts.a01.n, counts.a01.x, alpha, beta),
        abar0=factor_exchangeable(counts.abar0.n, counts.abar0.x, alpha, beta),
    )


def log_marginal_batch(batch: Dict[str, Tuple[np.ndarray, np.ndarray]], r_target: int,
                       alpha: float = 1.0, beta: float = 1.0) -> np.ndarray:
    """
    Log marginal likelihood for many models at once.

    Args:
        batch: output of GroupPartitioner.counts_batch

    Returns:
        float array aligned with the batch
    """
    a11_n, a11_x = batch['a11']
    abar11_n, abar11_x = batch['abar11']
    a00_n, a00_x = batch['a00']
    a01_n, a01_x = batch['a01']
    abar0_n, abar0_x = batch['abar0']
    return (
        np.asarray(factor_a11(a11_n, a11_x, r_target, alpha, beta))
        + np.asarray(factor_exchangeable(abar11_n, abar11_x, alpha, beta))
        + np.asarray(factor_a0(a00_n, a00_x, a01_n, a01_x, alpha, beta))
        + np.asarray(factor_exchangeable(abar0_n, abar0_x, alpha, beta))
    )


def a0_factor_grid(n00: int, n01: int, alpha: float = 1.0, beta: float = 1.0) -> np.ndarray:
    """
    Probability-scale a0 factor over every (x00, x01).

    Returns an (n00+1) x (n01+1) array indexed [x00, x01].
    """
    if n00 < 0 or n01 < 0:
        raise ValueError(f"group sizes must be non-negative, got ({n00}, {n01})")
    x00, x01 = np.meshgrid(np.arange(n00 + 1), np.arange(n01 + 1), indexing='ij')
    grid = np.exp(factor_a0(n00, x00, n01, x01, alpha, beta))
    logger.debug(f"a0 grid for ({n00}, {n01}): max {grid.max():.6f}")
    return grid
