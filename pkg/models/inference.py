"""
Inference Domain Models

Types shared by the partitioner, the likelihood, the model search and the
causal estimators.

Design Decisions:
1. A model M_J is a bitmask over covariate positions; ordering and
   serialisation go through the sorted index tuple
2. "Undefined" is an explicit singleton, never NaN or a sentinel number, so a
   report can tell "no data" apart from "zero effect"
3. Enums subclass str so they serialise and compare against plain strings
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union


class Undefined:
    """Marker for a ratio whose denominator is zero"""
    _instance: Optional['Undefined'] = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNDEFINED"

    def __bool__(self) -> bool:
        return False

    def __reduce__(self):
        return (Undefined, ())


UNDEFINED = Undefined()

Estimate = Union[float, Undefined]


def is_defined(value: Any) -> bool:
    return value is not UNDEFINED and value is not None


def as_optional(value: Estimate) -> Optional[float]:
    """Serialisation helper: UNDEFINED becomes None (JSON null / empty CSV field)"""
    return None if value is UNDEFINED else float(value)


def safe_ratio(numerator: float, denominator: float) -> Estimate:
    if denominator == 0:
        return UNDEFINED
    return numerator / denominator


class PriorKind(str, Enum):
    """Prior over the model space"""
    UNIFORM = "uniform"      # 1 / 2^k
    CHEN_CHEN = "chen_chen"  # equal mass per size layer, sizes <= floor(k/2)

    @classmethod
    def from_string(cls, value: str) -> 'PriorKind':
        if isinstance(value, cls):
            return value
        normalized = str(value or "").strip().lower().replace('-', '_')
        try:
            return cls(normalized)
        except ValueError:
            raise ValueError(f"unknown prior {value!r}; expected uniform or chen-chen")


class SearchMode(str, Enum):
    """How the model space is explored"""
    ENUMERATE = "enumerate"
    MH = "mh"

    @classmethod
    def from_string(cls, value: str) -> 'SearchMode':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value or "").strip().lower())
        except ValueError:
            raise ValueError(f"unknown search mode {value!r}; expected enumerate or mh")


class EstimatorKind(str, Enum):
    """Estimator for the per-group success probabilities"""
    POSTERIOR_MEAN = "posterior_mean"  # (x+1)/(n+2), always defined
    MLE = "mle"                        # x/n, undefined on empty groups

    @classmethod
    def from_string(cls, value: str) -> 'EstimatorKind':
        if isinstance(value, cls):
            return value
        normalized = str(value or "").strip().lower().replace('-', '_')
        try:
            return cls(normalized)
        except ValueError:
            raise ValueError(f"unknown estimator {value!r}; expected posterior-mean or mle")


class ValidationSeverity(str, Enum):
    """Severity levels for analysis issues"""
    ERROR = "ERROR"      # result should not be relied on
    WARNING = "WARNING"  # review before interpreting
    INFO = "INFO"        # informational only


@dataclass
class ValidationIssue:
    """A single issue raised while checking an analysis"""
    severity: ValidationSeverity
    field: str
    message: str
    suggestion: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'severity': self.severity.value,
            'field': self.field,
            'message': self.message,
            'suggestion': self.suggestion,
        }


@dataclass(frozen=True)
class ModelId:
    """
    A covariate subset J, stored as a bitmask over 0-based positions.

    Bit j set means covariate H_{j+1} is used for matching. Ordering between
    models is lexicographic on the sorted index tuple, so the empty model
    sorts first.
    """
    mask: int
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"k must be non-negative, got {self.k}")
        if not 0 <= self.mask < (1 << self.k):
            raise ValueError(f"mask {self.mask} out of range for k={self.k}")

    @classmethod
    def from_indices(cls, indices: Iterable[int], k: int) -> 'ModelId':
        indices = list(indices)
        if len(set(indices)) != len(indices):
            raise ValueError(f"duplicate covariate indices: {indices}")
        mask = 0
        for j in indices:
            if not 0 <= j < k:
                raise ValueError(f"covariate index {j} out of range 0..{k - 1}")
            mask |= 1 << j
        return cls(mask, k)

    @classmethod
    def empty(cls, k: int) -> 'ModelId':
        return cls(0, k)

    @classmethod
    def full(cls, k: int) -> 'ModelId':
        return cls((1 << k) - 1, k)

    @property
    def indices(self) -> Tuple[int, ...]:
        return tuple(j for j in range(self.k) if self.mask >> j & 1)

    @property
    def size(self) -> int:
        return bin(self.mask).count('1')

    @property
    def sort_key(self) -> Tuple[int, ...]:
        return self.indices

    def flip(self, j: int) -> 'ModelId':
        """Toggle membership of covariate j"""
        return ModelId(self.mask ^ (1 << j), self.k)

    def contains(self, j: int) -> bool:
        return bool(self.mask >> j & 1)

    def is_subset_of(self, other: 'ModelId') -> bool:
        return self.mask & ~other.mask == 0

    def positions(self) -> List[int]:
        """1-based covariate positions, as they appear in the H1..Hk header"""
        return [j + 1 for j in self.indices]

    def names(self, covariate_names: Sequence[str]) -> List[str]:
        return [covariate_names[j] for j in self.indices]

    def __str__(self) -> str:
        return "{" + ",".join(str(p) for p in self.positions()) + "}"


@dataclass(frozen=True)
class GroupStats:
    """Size n and number of successes x of one group"""
    n: int = 0
    x: int = 0

    def __post_init__(self):
        if not 0 <= self.x <= self.n:
            raise ValueError(f"group needs 0 <= x <= n, got n={self.n}, x={self.x}")

    def __add__(self, other: 'GroupStats') -> 'GroupStats':
        return GroupStats(self.n + other.n, self.x + other.x)

    @property
    def success_ratio(self) -> Estimate:
        return safe_ratio(self.x, self.n)

    def to_dict(self) -> Dict[str, int]:
        return {'n': self.n, 'x': self.x}


@dataclass(frozen=True)
class GroupCounts:
    """
    The five group tallies induced by a model relative to the target.

    a11    treated, desire equal to the target's, matching on J
    abar11 remaining treated
    a01    untreated, E=1, matching on J
    a00    untreated, E=0, matching on J
    abar0  untreated, not matching
    """
    a11: GroupStats = field(default_factory=GroupStats)
    abar11: GroupStats = field(default_factory=GroupStats)
    a01: GroupStats = field(default_factory=GroupStats)
    a00: GroupStats = field(default_factory=GroupStats)
    abar0: GroupStats = field(default_factory=GroupStats)

    @property
    def a0(self) -> GroupStats:
        """Matching untreated, pooled over desire (single parameter)"""
        return self.a00 + self.a01

    @property
    def treated_total(self) -> int:
        return self.a11.n + self.abar11.n

    @property
    def untreated_total(self) -> int:
        return self.a01.n + self.a00.n + self.abar0.n

    def to_dict(self) -> Dict[str, Dict[str, int]]:
        return {
            'a11': self.a11.to_dict(),
            'abar11': self.abar11.to_dict(),
            'a01': self.a01.to_dict(),
            'a00': self.a00.to_dict(),
            'abar0': self.abar0.to_dict(),
        }


@dataclass(frozen=True)
class LogMarginal:
    """Natural-log marginal likelihood of a model with its per-group factors"""
    a11: float
    abar11: float
    a0: float
    abar0: float

    @property
    def log_value(self) -> float:
        return self.a11 + self.abar11 + self.a0 + self.abar0

    @property
    def factor_breakdown(self) -> Dict[str, float]:
        return {'a11': self.a11, 'abar11': self.abar11, 'a0': self.a0, 'abar0': self.abar0}


@dataclass(frozen=True)
class PosteriorEntry:
    """
    One row of a posterior table.

    log_marginal is None for models the prior rules out (never evaluated).
    """
    model: ModelId
    log_marginal: Optional[float]
    log_prior: float
    posterior: float

    @property
    def in_support(self) -> bool:
        return math.isfinite(self.log_prior)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'model': self.model.positions(),
            'log_marginal': self.log_marginal,
            'log_prior': self.log_prior if math.isfinite(self.log_prior) else None,
            'posterior': self.posterior,
        }


def canonical_key(entry: PosteriorEntry) -> Tuple[float, Tuple[int, ...]]:
    """Descending posterior, ties broken by lexicographic model"""
    return (-entry.posterior, entry.model.sort_key)


@dataclass(frozen=True)
class PosteriorTable:
    """
    Posterior over models, in canonical order.

    source is "exhaustive" for enumeration or "mcmc" for empirical
    frequencies; sample_size counts post-burn-in visits for the latter.
    """
    entries: Tuple[PosteriorEntry, ...]
    log_normalizer: float
    k: int
    source: str = "exhaustive"
    sample_size: int = 0

    @classmethod
    def build(cls, entries: Iterable[PosteriorEntry], log_normalizer: float, k: int,
              source: str = "exhaustive", sample_size: int = 0) -> 'PosteriorTable':
        ordered = tuple(sorted(entries, key=canonical_key))
        return cls(ordered, log_normalizer, k, source, sample_size)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def support(self) -> Tuple[PosteriorEntry, ...]:
        return tuple(e for e in self.entries if e.in_support)

    @property
    def support_size(self) -> int:
        return len(self.support)

    @property
    def best(self) -> PosteriorEntry:
        return self.entries[0]

    def probability_of(self, model: ModelId) -> float:
        for entry in self.entries:
            if entry.model == model:
                return entry.posterior
        return 0.0

    def as_distribution(self) -> Dict[int, float]:
        """mask -> posterior probability"""
        return {e.model.mask: e.posterior for e in self.entries}

    def to_records(self) -> List[Dict[str, Any]]:
        return [e.to_dict() for e in self.entries]


@dataclass
class ChainState:
    """
    Mutable state of one Metropolis-Hastings chain.

    log_target caches log(marginal * prior) of the current model.
    """
    current: ModelId
    log_target: float
    rng_seed: int
    history: Dict[int, int] = field(default_factory=dict)
    proposed: int = 0
    accepted: int = 0

    def visit(self, count: int = 1) -> None:
        mask = self.current.mask
        self.history[mask] = self.history.get(mask, 0) + count

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0


@dataclass(frozen=True)
class CausalEstimates:
    """Risk ratio and probability-of-causation lower bound for one model"""
    p_treated: Estimate
    p_untreated: Estimate
    rr: Estimate
    pc_lower: Estimate
    estimator_kind: EstimatorKind

    def to_dict(self) -> Dict[str, Any]:
        return {
            'p_treated': as_optional(self.p_treated),
            'p_untreated': as_optional(self.p_untreated),
            'rr': as_optional(self.rr),
            'pc_lower': as_optional(self.pc_lower),
            'estimator': self.estimator_kind.value,
        }
