"""
Quadrature Oracle

Independent check of the closed-form likelihood: every group factor is
rebuilt from a numerically integrated Beta-Binomial integral

    C(n, x) * integral_0^1 theta^s (1 - theta)^f pi(theta) dtheta

and composed group by group. Used by tests and debug runs only.

Design Decisions:
1. Binomial coefficients are exact integers (scipy comb with exact=True),
   not log-gamma, so the oracle shares no arithmetic with the closed form
2. Integrals are memoised on (s, f, alpha, beta); a sweep over small groups
   reuses the same few hundred integrals
3. Desk-scale only: any group above the cap is refused
"""

import logging
import math
from functools import lru_cache

from scipy import integrate
from scipy.special import beta as beta_function
from scipy.special import comb

from models.errors import OracleCapError
from models.inference import GroupCounts

logger = logging.getLogger(__name__)

DEFAULT_CAP = 64


@lru_cache(maxsize=None)
def beta_integral(successes: int, failures: int, alpha: float = 1.0, beta: float = 1.0) -> float:
    """integral over [0, 1] of theta^s (1-theta)^f times the Beta(alpha, beta) density"""
    norm = beta_function(alpha, beta)

    def integrand(theta: float) -> float:
        return theta ** (successes + alpha - 1) * (1 - theta) ** (failures + beta - 1) / norm

    value, error = integrate.quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=200)
    logger.debug(f"quad s={successes} f={failures}: {value:.6e} (+/- {error:.1e})")
    return value


def _group(n: int, x: int, alpha: float, beta: float) -> float:
    return comb(n, x, exact=True) * beta_integral(x, n - x, alpha, beta)


def oracle_marginal(counts: GroupCounts, r_target: int, cap: int = DEFAULT_CAP,
                    alpha: float = 1.0, beta: float = 1.0) -> float:
    """
    Log marginal likelihood by quadrature.

    Raises:
        OracleCapError: any group larger than cap
    """
    groups = counts.to_dict()
    largest = max(g['n'] for g in groups.values())
    if largest > cap:
        raise OracleCapError(f"group of size {largest} exceeds oracle cap {cap}")
    if r_target not in (0, 1):
        raise ValueError(f"target response must be 0 or 1, got {r_target!r}")

    a11 = counts.a11
    # target's response joins the a11 integrand
    a11_value = comb(a11.n, a11.x, exact=True) * beta_integral(
        a11.x + r_target, a11.n - a11.x + 1 - r_target, alpha, beta
    )
    pooled = counts.a0
    a0_value = (
        comb(counts.a00.n, counts.a00.x, exact=True)
        * comb(counts.a01.n, counts.a01.x, exact=True)
        * beta_integral(pooled.x, pooled.n - pooled.x, alpha, beta)
    )
    abar11_value = _group(counts.abar11.n, counts.abar11.x, alpha, beta)
    abar0_value = _group(counts.abar0.n, counts.abar0.x, alpha, beta)

    return (
        math.log(a11_value) + math.log(abar11_value)
        + math.log(a0_value) + math.log(abar0_value)
    )
