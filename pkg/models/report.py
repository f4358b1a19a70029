"""
Report Domain Models

Per-model rows, the single-target analysis report and the multi-target
summary, each with a JSON-ready to_dict.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from models.inference import (
    CausalEstimates, GroupCounts, LogMarginal, ModelId, ValidationIssue, ValidationSeverity,
    as_optional,
)
from models.trial import TargetSpec


@dataclass(frozen=True)
class ModelRow:
    """One explored model with its estimates and diagnostics"""
    rank: int
    model: ModelId
    covariates: List[str]
    posterior: float
    log_marginal: Optional[float]
    log_prior: float
    counts: GroupCounts
    estimates: CausalEstimates
    treated_ratio: Any
    untreated_e_ratio: Any

    def to_dict(self) -> Dict[str, Any]:
        return {
            'rank': self.rank,
            'model': self.model.positions(),
            'covariates': list(self.covariates),
            'posterior': self.posterior,
            'log_marginal': self.log_marginal,
            'log_prior': self.log_prior if math.isfinite(self.log_prior) else None,
            'rr': as_optional(self.estimates.rr),
            'pc_lower': as_optional(self.estimates.pc_lower),
            'p_treated': as_optional(self.estimates.p_treated),
            'p_untreated': as_optional(self.estimates.p_untreated),
            'treated_ratio': as_optional(self.treated_ratio),
            'untreated_e_ratio': as_optional(self.untreated_e_ratio),
            'groups': self.counts.to_dict(),
        }


@dataclass
class AnalysisReport:
    """Everything the pipeline concluded about one target individual"""
    target: TargetSpec
    dataset: Dict[str, Any]
    parameters: Dict[str, Any]
    source: str
    support_size: int
    sample_size: int
    log_normalizer: Optional[float]
    rows: List[ModelRow]
    best_breakdown: LogMarginal
    issues: List[ValidationIssue] = field(default_factory=list)

    @property
    def best(self) -> ModelRow:
        return self.rows[0]

    @property
    def has_errors(self) -> bool:
        return any(i.severity == ValidationSeverity.ERROR for i in self.issues)

    def best_summary(self) -> Dict[str, Any]:
        """Selected characteristics and RR, plus the evidence behind them"""
        best = self.best
        return {
            'model': best.model.positions(),
            'characteristics': list(best.covariates),
            'rr': as_optional(best.estimates.rr),
            'pc_lower': as_optional(best.estimates.pc_lower),
            'posterior': best.posterior,
            'estimator': best.estimates.estimator_kind.value,
            'groups': best.counts.to_dict(),
            'factor_breakdown': self.best_breakdown.factor_breakdown,
        }

    def to_dict(self, schema_version: str) -> Dict[str, Any]:
        return {
            'schema_version': schema_version,
            'target': self.target.to_dict(),
            'dataset': self.dataset,
            'parameters': self.parameters,
            'search': {
                'source': self.source,
                'support_size': self.support_size,
                'sample_size': self.sample_size,
                'log_normalizer': self.log_normalizer,
            },
            'best_model': self.best_summary(),
            'models': [row.to_dict() for row in self.rows],
            'issues': [issue.to_dict() for issue in self.issues],
        }


@dataclass
class BatchReport:
    """Reports for several target individuals and the RR range over their best models"""
    reports: List[AnalysisReport]
    rr_low: Any
    rr_high: Any
    rr_defined: int

    def summary_rows(self) -> List[Dict[str, Any]]:
        """One row per target: selected characteristics and RR"""
        return [
            {
                'target': report.target.id,
                'characteristics': list(report.best.covariates),
                'rr': as_optional(report.best.estimates.rr),
                'pc_lower': as_optional(report.best.estimates.pc_lower),
                'posterior': report.best.posterior,
            }
            for report in self.reports
        ]

    def to_dict(self, schema_version: str) -> Dict[str, Any]:
        return {
            'schema_version': schema_version,
            'summary': self.summary_rows(),
            'rr_interval': {
                'low': as_optional(self.rr_low),
                'high': as_optional(self.rr_high),
                'defined': self.rr_defined,
                'total': len(self.reports),
            },
            'targets': [report.to_dict(schema_version) for report in self.reports],
        }
