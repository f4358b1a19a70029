"""
Main Analysis Pipeline

Orchestrates:
1. Trial loading (one or several target individuals)
2. Model search (exhaustive or Metropolis-Hastings)
3. Causal estimates for the top models
4. Condition checks on the best model
5. Report export (JSON, figure data, workbook)

Design Principles:
1. Pipeline stages are clearly separated
2. Progress can be tracked at each stage
3. Settings are validated before any data is touched
4. Audit trail maintained throughout (workbook only, never the JSON)
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

from causal_bounds import risk_ratio, rr_interval
from classifiers.group_partitioner import sufficiency_diagnostics
from config.settings import Settings
from generators.report_generator import Report, ReportGenerator
from models.errors import DataError
from models.inference import (
    PosteriorEntry, PosteriorTable, SearchMode, ValidationIssue, ValidationSeverity, as_optional,
    is_defined,
)
from models.report import AnalysisReport, BatchReport, ModelRow
from models.trial import Dataset
from parsers.trial_parser import TargetSource, load_batch, load_dataset
from search.model_search import (
    ModelEvaluator, ModelPrior, enumerate_posterior, mh_sample, top_models,
)
from utils.helpers import AuditTrail, format_estimate

logger = logging.getLogger(__name__)

# Condition-check thresholds
E_RATIO_RANGE = (0.5, 2.0)
MIN_BEST_POSTERIOR = 0.05
RR_THRESHOLD = 2.0
RR_THRESHOLD_MARGIN = 0.1


@dataclass
class AnalysisProgress:
    """Tracks pipeline progress for callers that report it"""
    stage: str = ""
    current_item: str = ""
    items_processed: int = 0
    total_items: int = 0
    errors: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def progress_percent(self) -> float:
        if self.total_items == 0:
            return 0.0
        return (self.items_processed / self.total_items) * 100


class AnalysisPipeline:
    """
    End-to-end covariate selection and causal estimation.

    Usage:
        pipeline = AnalysisPipeline(settings)
        report = pipeline.run("trial.csv", target="1,0,1")
        pipeline.export(report)
    """

    def __init__(self, settings: Settings,
                 progress_callback: Optional[Callable[[AnalysisProgress], None]] = None):
        settings.require_valid()
        self.settings = settings
        self.progress_callback = progress_callback
        self.audit = AuditTrail()
        self.report_generator = ReportGenerator(settings)

    def _notify(self, progress: AnalysisProgress) -> None:
        if self.progress_callback:
            self.progress_callback(progress)

    # =========================================================================
    # Stage 1: Loading
    # =========================================================================

    def load(self, data_path: Union[str, Path], target: Optional[TargetSource] = None,
             targets_path: Optional[Union[str, Path]] = None) -> List[Dataset]:
        """One Dataset per target individual"""
        if target is None and targets_path is None:
            raise DataError("a target (--target) or a targets file (--targets) is required")
        if target is not None and targets_path is not None:
            raise DataError("give either a single target or a targets file, not both")

        if targets_path is not None:
            datasets = load_batch(data_path, targets_path, self.settings)
        else:
            datasets = [load_dataset(data_path, self.settings, target)]

        first = datasets[0]
        self.audit.log("LOADED", str(data_path), f"n={first.n}, k={first.k}, targets={len(datasets)}", "DATA")
        if first.n == 0:
            logger.warning(f"{data_path} holds no records; every group will be empty")
        return datasets

    # =========================================================================
    # Stage 2: Search
    # =========================================================================

    def search(self, dataset: Dataset) -> Tuple[PosteriorTable, ModelEvaluator]:
        """Posterior over models with the configured prior and search mode"""
        s = self.settings
        prior = ModelPrior(s.prior_kind, dataset.k)
        alpha, beta = s.likelihood.prior_alpha, s.likelihood.prior_beta
        evaluator = ModelEvaluator(dataset, prior, alpha, beta)

        if s.search_mode == SearchMode.ENUMERATE:
            table = enumerate_posterior(dataset, prior, s.search, alpha, beta)
        else:
            table = mh_sample(
                dataset, prior,
                iterations=s.search.iterations,
                burn_in=s.search.resolved_burn_in(),
                seed=s.search.seed,
                chains=s.search.chains,
                workers=s.search.workers,
                verify_cache=s.search.verify_cache,
                evaluator=evaluator,
            )

        self.audit.log(
            "SEARCHED", dataset.target.id,
            f"{table.source}: {table.support_size} models, best {table.best.model}", "SEARCH",
        )
        return table, evaluator

    # =========================================================================
    # Stage 3: Estimates
    # =========================================================================

    def build_rows(self, dataset: Dataset, evaluator: ModelEvaluator,
                   entries: Sequence[PosteriorEntry]) -> List[ModelRow]:
        """Causal estimates and diagnostics for each entry, ranked in the given order"""
        kind = self.settings.estimator_kind
        rows = []
        for rank, entry in enumerate(entries, start=1):
            counts = evaluator.partitioner.counts(entry.model)
            diagnostics = sufficiency_diagnostics(counts)
            rows.append(ModelRow(
                rank=rank,
                model=entry.model,
                covariates=entry.model.names(dataset.schema.names),
                posterior=entry.posterior,
                log_marginal=entry.log_marginal,
                log_prior=entry.log_prior,
                counts=counts,
                estimates=risk_ratio(counts, kind),
                treated_ratio=diagnostics.treated_ratio,
                untreated_e_ratio=diagnostics.untreated_e_ratio,
            ))
        return rows

    # =========================================================================
    # Stage 4: Condition checks
    # =========================================================================

    def check_conditions(self, dataset: Dataset, best: ModelRow) -> List[ValidationIssue]:
        """Flags on the selected model that a reader should see next to its RR"""
        issues = []

        if dataset.n == 0:
            issues.append(ValidationIssue(
                ValidationSeverity.WARNING, "dataset", "dataset holds no records",
                "estimates reflect the prior only",
            ))
        if best.counts.a11.n == 0:
            issues.append(ValidationIssue(
                ValidationSeverity.WARNING, "a11",
                f"no treated subject with desire={dataset.target.desire} matches the target on {best.model}",
                "comparability is unsupported; treat the RR as prior-driven",
            ))
        if best.counts.a00.n == 0 or best.counts.a01.n == 0:
            issues.append(ValidationIssue(
                ValidationSeverity.WARNING, "a0",
                "a matching untreated desire stratum is empty; sufficiency ratio undefined",
            ))
        elif is_defined(best.untreated_e_ratio):
            low, high = E_RATIO_RANGE
            if not low <= best.untreated_e_ratio <= high:
                issues.append(ValidationIssue(
                    ValidationSeverity.WARNING, "untreated_e_ratio",
                    f"untreated E=1/E=0 success ratio {best.untreated_e_ratio:.2f} outside [{low}, {high}]",
                    "desire still matters among matching untreated; sufficiency is doubtful",
                ))
        if best.posterior < MIN_BEST_POSTERIOR:
            issues.append(ValidationIssue(
                ValidationSeverity.INFO, "posterior",
                f"best model carries only {best.posterior:.1%} posterior mass",
                "model uncertainty is high; compare the top models",
            ))
        rr = best.estimates.rr
        if is_defined(rr) and abs(rr - RR_THRESHOLD) < RR_THRESHOLD_MARGIN:
            issues.append(ValidationIssue(
                ValidationSeverity.INFO, "rr",
                f"RR {rr:.3f} is close to the balance-of-probabilities threshold {RR_THRESHOLD}",
            ))

        for issue in issues:
            log = logger.warning if issue.severity == ValidationSeverity.WARNING else logger.info
            log(f"{dataset.target.id}: {issue.message}")
        return issues

    # =========================================================================
    # Orchestration
    # =========================================================================

    def analyze(self, dataset: Dataset) -> AnalysisReport:
        """Search, estimate and check for one target individual"""
        table, evaluator = self.search(dataset)
        entries = top_models(table, self.settings.report.top_m, support_only=True)
        rows = self.build_rows(dataset, evaluator, entries)
        best = rows[0]

        self.audit.log(
            "ESTIMATED", dataset.target.id,
            f"best {best.model} RR={format_estimate(as_optional(best.estimates.rr))}",
            "ESTIMATE",
        )
        logger.info(
            f"{dataset.target.id}: best model {best.model} {best.covariates} "
            f"(posterior {best.posterior:.4f}), "
            f"RR {format_estimate(as_optional(best.estimates.rr))}"
        )

        summary = dataset.summary()
        summary['best_model_groups'] = best.counts.to_dict()
        return AnalysisReport(
            target=dataset.target,
            dataset=summary,
            parameters=self.settings.to_dict(),
            source=table.source,
            support_size=table.support_size,
            sample_size=table.sample_size,
            log_normalizer=table.log_normalizer if table.source == "exhaustive" else None,
            rows=rows,
            best_breakdown=evaluator.breakdown(best.model),
            issues=self.check_conditions(dataset, best),
        )

    def run(self, data_path: Union[str, Path], target: Optional[TargetSource] = None,
            targets_path: Optional[Union[str, Path]] = None) -> Report:
        """Full pipeline; a BatchReport when a targets file is given"""
        progress = AnalysisProgress(stage="Loading", total_items=1)
        self._notify(progress)
        datasets = self.load(data_path, target, targets_path)

        progress = AnalysisProgress(stage="Analyzing", total_items=len(datasets))
        reports = []
        for dataset in datasets:
            progress.current_item = dataset.target.id
            self._notify(progress)
            report = self.analyze(dataset)
            progress.warnings.extend(
                i.message for i in report.issues if i.severity == ValidationSeverity.WARNING
            )
            reports.append(report)
            progress.items_processed += 1
        self._notify(progress)

        if targets_path is None:
            return reports[0]

        interval = rr_interval(r.best.estimates for r in reports)
        logger.info(
            f"RR over {interval.total} targets' best models: "
            f"[{format_estimate(as_optional(interval.low), 2)}, {format_estimate(as_optional(interval.high), 2)}]"
        )
        return BatchReport(reports, interval.low, interval.high, interval.defined)

    def explore(self, dataset: Dataset) -> List[ModelRow]:
        """Every model the search scored, in canonical order (figure data)"""
        table, evaluator = self.search(dataset)
        return self.build_rows(dataset, evaluator, table.support)

    # =========================================================================
    # Stage 5: Export
    # =========================================================================

    def export(self, report: Report, out: Optional[Union[str, Path]] = None,
               xlsx: Optional[Union[str, Path]] = None) -> Optional[str]:
        """
        Write the JSON report (and workbook when requested).

        Returns the JSON text when no output path is configured.
        """
        out = out or self.settings.report.output_path
        xlsx = xlsx or self.settings.report.xlsx_path
        text = None
        if out:
            self.report_generator.write_json(report, out)
            self.audit.log("EXPORTED", str(out), "JSON report", "REPORT")
        else:
            text = self.report_generator.to_json(report)
        if xlsx:
            self.audit.log("EXPORTED", str(xlsx), "workbook", "REPORT")
            self.report_generator.write_workbook(report, self.audit, xlsx)
        return text
