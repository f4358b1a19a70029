"""
Trial Domain Models

Design Principles:
1. Models represent the randomized study, not the CSV layout
2. All validation happens at construction time (frozen dataclasses)
3. Covariates are small integer-coded categorical levels 0..c-1; binary
   covariates are simply cardinality 2
4. The target individual is never a dataset row; she is scored predictively

Architecture Note:
These models are the contract between:
- Parsers / the simulator (produce Datasets)
- The partitioner (reads records relative to the target)
- Report generators (summaries)
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple, Any

import numpy as np
import pandas as pd

from models.errors import DataError, TrialSchemaError

BINARY = (0, 1)


@dataclass(frozen=True)
class CovariateSchema:
    """Ordered covariate labels H_1..H_k with their number of levels"""
    names: Tuple[str, ...]
    cardinalities: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, 'names', tuple(self.names))
        object.__setattr__(self, 'cardinalities', tuple(int(c) for c in self.cardinalities))

        if len(self.names) < 1:
            raise TrialSchemaError("schema needs at least one covariate")
        if len(self.names) != len(self.cardinalities):
            raise TrialSchemaError(
                f"{len(self.names)} covariate names but {len(self.cardinalities)} cardinalities"
            )
        if any(not str(n).strip() for n in self.names):
            raise TrialSchemaError("covariate names must be non-empty")
        if len(set(self.names)) != len(self.names):
            raise TrialSchemaError(f"covariate names must be unique: {list(self.names)}")
        for name, card in zip(self.names, self.cardinalities):
            if card < 2:
                raise TrialSchemaError(f"covariate {name} needs at least 2 levels, got {card}", column=name)

    @property
    def k(self) -> int:
        return len(self.names)

    @classmethod
    def default(cls, k: int, cardinality: int = 2) -> 'CovariateSchema':
        """H1..Hk, all with the same number of levels"""
        return cls(tuple(f"H{j + 1}" for j in range(k)), tuple([cardinality] * k))

    def check_levels(self, covariates: Sequence[int]) -> Optional[str]:
        """Return a reason string if the vector does not fit the schema, else None"""
        if len(covariates) != self.k:
            return f"expected {self.k} covariates, got {len(covariates)}"
        for name, card, level in zip(self.names, self.cardinalities, covariates):
            if not 0 <= level < card:
                return f"covariate {name} level {level} outside 0..{card - 1}"
        return None


@dataclass(frozen=True)
class TrialRecord:
    """One study subject: treatment T, desire E, response R and covariates H"""
    id: str
    treatment: int
    desire: int
    response: int
    covariates: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, 'covariates', tuple(int(v) for v in self.covariates))
        for label, value in (('T', self.treatment), ('E', self.desire), ('R', self.response)):
            if value not in BINARY:
                raise DataError(f"record {self.id}: {label} must be 0 or 1, got {value!r}")


@dataclass(frozen=True)
class TargetSpec:
    """
    The individual whose case is being assessed.

    desire defaults to 1 (she asked for the treatment) and response to 1
    (the outcome was observed under treatment).
    """
    covariates: Tuple[int, ...]
    desire: int = 1
    response: int = 1
    id: str = "target"

    def __post_init__(self):
        object.__setattr__(self, 'covariates', tuple(int(v) for v in self.covariates))
        if self.desire not in BINARY:
            raise DataError(f"target desire must be 0 or 1, got {self.desire!r}")
        if self.response not in BINARY:
            raise DataError(f"target response must be 0 or 1, got {self.response!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'id': self.id,
            'covariates': list(self.covariates),
            'desire': self.desire,
            'response': self.response,
        }


@dataclass(frozen=True)
class Dataset:
    """
    A validated randomized-trial sample plus the target individual.

    Immutable after construction and safe to share read-only across threads.
    """
    schema: CovariateSchema
    records: Tuple[TrialRecord, ...]
    target: TargetSpec

    def __post_init__(self):
        object.__setattr__(self, 'records', tuple(self.records))
        for i, record in enumerate(self.records, start=1):
            reason = self.schema.check_levels(record.covariates)
            if reason:
                raise DataError(f"record {i} ({record.id}): {reason}")
        reason = self.schema.check_levels(self.target.covariates)
        if reason:
            raise DataError(f"target: {reason}")

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def k(self) -> int:
        return self.schema.k

    def with_target(self, target: TargetSpec) -> 'Dataset':
        """Same records, different individual under assessment"""
        return Dataset(self.schema, self.records, target)

    @cached_property
    def arrays(self) -> Dict[str, np.ndarray]:
        """Column arrays for vectorised work: T, E, R (n,) and H (n, k)"""
        if not self.records:
            return {
                'T': np.zeros(0, dtype=np.int8),
                'E': np.zeros(0, dtype=np.int8),
                'R': np.zeros(0, dtype=np.int8),
                'H': np.zeros((0, self.k), dtype=np.int64),
            }
        return {
            'T': np.array([r.treatment for r in self.records], dtype=np.int8),
            'E': np.array([r.desire for r in self.records], dtype=np.int8),
            'R': np.array([r.response for r in self.records], dtype=np.int8),
            'H': np.array([r.covariates for r in self.records], dtype=np.int64),
        }

    def to_frame(self, id_column: str = 'id', treatment_column: str = 'T',
                 desire_column: str = 'E', response_column: str = 'R') -> pd.DataFrame:
        """Records as a DataFrame in the CSV column layout"""
        columns = [id_column, treatment_column, desire_column, response_column, *self.schema.names]
        rows = [
            [r.id, r.treatment, r.desire, r.response, *r.covariates]
            for r in self.records
        ]
        return pd.DataFrame(rows, columns=columns)

    def summary(self) -> Dict[str, Any]:
        """Headline counts for reports and logs"""
        arrays = self.arrays
        treated = int(arrays['T'].sum())
        return {
            'n': self.n,
            'k': self.k,
            'treated': treated,
            'untreated': self.n - treated,
            'desire_1': int(arrays['E'].sum()),
            'successes': int(arrays['R'].sum()),
            'covariates': list(self.schema.names),
            'cardinalities': list(self.schema.cardinalities),
        }
