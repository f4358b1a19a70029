"""
Configuration Management Module

Design Decisions:
1. All configuration is centralized here with sensible defaults
2. Environment variables (and a .env file) override defaults
3. An optional JSON config file overrides the environment; explicit
   overrides (CLI flags) win over everything
4. Settings are validated before a run starts, not half-way through a search
5. Schema version tracks breaking changes in the JSON report format
"""

import json
import logging
import os
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from models.errors import ConfigError
from models.inference import EstimatorKind, PriorKind, SearchMode

logger = logging.getLogger(__name__)

# Increment MAJOR for breaking changes, MINOR for additions
SCHEMA_VERSION = "1.0.0"

ENV_PREFIX = "PCRS_"


@dataclass
class IngestionSettings:
    """CSV layout of the trial file"""
    id_column: str = "id"
    treatment_column: str = "T"
    desire_column: str = "E"
    response_column: str = "R"
    # None = every remaining column, in header order
    covariate_columns: Optional[List[str]] = None
    # Declared levels per covariate; undeclared ones are inferred (max level + 1, at least 2)
    cardinalities: Dict[str, int] = field(default_factory=dict)


@dataclass
class LikelihoodSettings:
    """Beta prior on every group parameter; Beta(1,1) is the uniform case"""
    prior_alpha: float = 1.0
    prior_beta: float = 1.0
    oracle_max_group_size: int = 64  # quadrature oracle is desk-scale only


@dataclass
class SearchSettings:
    """Model-space exploration"""
    prior: str = PriorKind.UNIFORM.value
    mode: str = SearchMode.ENUMERATE.value
    exhaustive_max_k: int = 20
    iterations: int = 50_000
    burn_in: Optional[int] = None  # None = burn_in_fraction * iterations
    burn_in_fraction: float = 0.1
    chains: int = 1
    seed: int = 0
    workers: int = 1
    chunk_size: int = 4096  # models per vectorised enumeration batch
    verify_cache: bool = False  # recompute cached chain targets (debug runs)

    def resolved_burn_in(self) -> int:
        if self.burn_in is not None:
            return int(self.burn_in)
        return int(self.iterations * self.burn_in_fraction)


@dataclass
class ReportSettings:
    """Report output configuration"""
    estimator: str = EstimatorKind.POSTERIOR_MEAN.value
    top_m: int = 10
    output_path: Optional[str] = None
    xlsx_path: Optional[str] = None

    # Workbook styling
    header_bg_color: str = "1F4E79"
    header_font_color: str = "FFFFFF"
    best_row_color: str = "FCE4D6"


@dataclass
class Settings:
    """
    Master settings container.

    Usage:
        settings = Settings.load(config_path="analysis.json", overrides={'search': {'seed': 7}})
        settings.search.iterations  # Access nested settings
    """
    ingestion: IngestionSettings = field(default_factory=IngestionSettings)
    likelihood: LikelihoodSettings = field(default_factory=LikelihoodSettings)
    search: SearchSettings = field(default_factory=SearchSettings)
    report: ReportSettings = field(default_factory=ReportSettings)
    log_level: str = "INFO"

    schema_path: Path = field(default_factory=lambda: Path(__file__).parent / "report_schema.json")

    @classmethod
    def load(cls, config_path: Optional[str] = None,
             overrides: Optional[Dict[str, Any]] = None) -> 'Settings':
        """
        Factory method layering defaults, environment, config file and overrides.

        Raises ConfigError when the config file cannot be read.
        """
        settings = cls()

        load_dotenv()
        settings._apply_environment(os.environ)

        if config_path:
            path = Path(config_path)
            if not path.exists():
                raise ConfigError(f"config file not found: {path}")
            try:
                payload = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as e:
                raise ConfigError(f"config file {path} is not valid JSON: {e}")
            if not isinstance(payload, dict):
                raise ConfigError(f"config file {path} must hold a JSON object")
            settings.apply(payload)
            logger.debug(f"Loaded config file {path}")

        if overrides:
            settings.apply(overrides)

        return settings

    def _apply_environment(self, environ) -> None:
        if environ.get(f"{ENV_PREFIX}LOG_LEVEL"):
            self.log_level = environ[f"{ENV_PREFIX}LOG_LEVEL"].upper()
        if environ.get(f"{ENV_PREFIX}SEED"):
            self.search.seed = _as_int(environ[f"{ENV_PREFIX}SEED"], f"{ENV_PREFIX}SEED")
        if environ.get(f"{ENV_PREFIX}EXHAUSTIVE_MAX_K"):
            self.search.exhaustive_max_k = _as_int(
                environ[f"{ENV_PREFIX}EXHAUSTIVE_MAX_K"], f"{ENV_PREFIX}EXHAUSTIVE_MAX_K"
            )

    def apply(self, values: Dict[str, Any]) -> None:
        """
        Merge a nested mapping into the settings.

        None values are skipped so unset CLI flags never clobber a config file.
        Unknown keys are a ConfigError rather than silently ignored.
        """
        _merge(self, values, path="")

    def validate(self) -> List[str]:
        """
        Validate settings and return list of issues.

        Returns empty list if all settings are valid.
        """
        issues = []

        try:
            PriorKind.from_string(self.search.prior)
        except ValueError as e:
            issues.append(str(e))
        try:
            mode = SearchMode.from_string(self.search.mode)
        except ValueError as e:
            issues.append(str(e))
            mode = None
        try:
            EstimatorKind.from_string(self.report.estimator)
        except ValueError as e:
            issues.append(str(e))

        if self.likelihood.prior_alpha <= 0 or self.likelihood.prior_beta <= 0:
            issues.append("Beta prior parameters must be positive")
        if self.likelihood.oracle_max_group_size < 0:
            issues.append("oracle cap must be non-negative")

        if self.search.exhaustive_max_k < 1:
            issues.append("exhaustive cap must be at least 1")
        if self.search.chains < 1:
            issues.append("at least one chain is required")
        if self.search.workers < 1:
            issues.append("at least one worker is required")
        if self.search.chunk_size < 1:
            issues.append("chunk size must be positive")
        if not 0 <= self.search.burn_in_fraction < 1:
            issues.append("burn-in fraction must lie in [0, 1)")
        if mode == SearchMode.MH:
            burn_in = self.search.resolved_burn_in()
            if burn_in < 0:
                issues.append("burn-in must be non-negative")
            if self.search.iterations <= burn_in:
                issues.append(
                    f"MH search needs iterations > burn-in "
                    f"(got {self.search.iterations} <= {burn_in})"
                )

        if self.report.top_m < 1:
            issues.append("top must be at least 1")

        if self.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            issues.append(f"unknown log level {self.log_level!r}")

        return issues

    def require_valid(self) -> None:
        issues = self.validate()
        if issues:
            raise ConfigError("; ".join(issues))

    @property
    def prior_kind(self) -> PriorKind:
        return PriorKind.from_string(self.search.prior)

    @property
    def search_mode(self) -> SearchMode:
        return SearchMode.from_string(self.search.mode)

    @property
    def estimator_kind(self) -> EstimatorKind:
        return EstimatorKind.from_string(self.report.estimator)

    def to_dict(self) -> Dict[str, Any]:
        """Run parameters echoed into reports (paths and styling excluded)"""
        return {
            'prior': self.prior_kind.value,
            'search': self.search_mode.value,
            'iterations': self.search.iterations,
            'burn_in': self.search.resolved_burn_in(),
            'chains': self.search.chains,
            'seed': self.search.seed,
            'estimator': self.estimator_kind.value,
            'top_m': self.report.top_m,
            'prior_alpha': self.likelihood.prior_alpha,
            'prior_beta': self.likelihood.prior_beta,
        }


def _as_int(value: str, name: str) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer, got {value!r}")


def _merge(target: Any, values: Dict[str, Any], path: str) -> None:
    known = {f.name for f in fields(target)}
    for key, value in values.items():
        location = f"{path}{key}"
        if key not in known:
            raise ConfigError(f"unknown setting {location!r}")
        if value is None:
            continue
        current = getattr(target, key)
        if is_dataclass(current):
            if not isinstance(value, dict):
                raise ConfigError(f"setting {location!r} must be an object")
            _merge(current, value, path=f"{location}.")
        elif isinstance(current, Path):
            setattr(target, key, Path(value))
        else:
            setattr(target, key, value)
