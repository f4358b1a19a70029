"""
Trial CSV Parser Module

Responsible for:
1. Reading trial CSV files (header id,T,E,R,H1..Hk or configured names)
2. Validating every field (binary T/E/R, integer covariate levels)
3. Resolving the target individual from a file, a mapping or an inline string
4. Writing datasets back out so that a load/write/load cycle is lossless

Design Decisions:
1. Every column is read as text and converted explicitly, so "1.5", "" and
   "yes" are rejected instead of being coerced by pandas
2. Missing values are rejected, never imputed
3. Row numbers in errors are 1-based data rows (the header is row 0)
4. The number of covariates k comes from the header; undeclared cardinalities
   are inferred from the data and the target (max level + 1, at least 2)
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import pandas as pd

from config.settings import IngestionSettings, Settings
from models.errors import DataError, TrialRowError, TrialSchemaError
from models.trial import CovariateSchema, Dataset, TargetSpec, TrialRecord
from utils.helpers import FileValidator

logger = logging.getLogger(__name__)

TargetSource = Union[TargetSpec, Mapping[str, Any], str, Path]

DESIRE_KEYS = frozenset({'e', 'desire'})
RESPONSE_KEYS = frozenset({'r', 'response'})


class TrialParser:
    """
    Parser for trial CSV files.

    Usage:
        parser = TrialParser(settings.ingestion)
        dataset = parser.parse_file("trial.csv", target="H1=1,H2=0")
    """

    def __init__(self, ingestion: Optional[IngestionSettings] = None):
        self.ingestion = ingestion or IngestionSettings()

    @property
    def fixed_columns(self) -> Tuple[str, str, str, str]:
        ing = self.ingestion
        return (ing.id_column, ing.treatment_column, ing.desire_column, ing.response_column)

    def parse_file(self, csv_path: Union[str, Path], target: TargetSource) -> Dataset:
        """
        Parse a trial CSV file.

        Args:
            csv_path: path to the CSV file
            target: the individual under assessment (see parse_target)

        Returns:
            Validated Dataset, rows in file order
        """
        csv_path = Path(csv_path)
        dataset = self.parse_frame(self._read(csv_path), target)
        logger.info(f"Parsed {csv_path.name}: {dataset.n} records, k={dataset.k}")
        return dataset

    def parse_batch(self, csv_path: Union[str, Path], targets_path: Union[str, Path]) -> List[Dataset]:
        """
        Parse one trial file against several target individuals.

        Inferred cardinalities cover every target, so all datasets share one schema.
        """
        csv_path = Path(csv_path)
        df = self._read(csv_path)
        names = self._covariate_columns(df.columns)
        targets = load_targets(targets_path, names)
        first = self.parse_frame(df, targets[0], extra_targets=targets[1:])
        logger.info(f"Parsed {csv_path.name}: {first.n} records, k={first.k}, {len(targets)} targets")
        return [first] + [first.with_target(t) for t in targets[1:]]

    def _read(self, csv_path: Path) -> pd.DataFrame:
        is_valid, error_msg = FileValidator.validate(csv_path, 'csv')
        if not is_valid:
            raise TrialSchemaError(f"{csv_path}: {error_msg}")
        try:
            df = pd.read_csv(csv_path, dtype=str, keep_default_na=False, encoding='utf-8')
        except (pd.errors.ParserError, UnicodeDecodeError) as e:
            raise TrialSchemaError(f"Failed to read {csv_path}: {e}")
        return df.rename(columns=lambda c: str(c).strip())

    def parse_frame(self, df: pd.DataFrame, target: TargetSource,
                    extra_targets: Sequence[TargetSpec] = ()) -> Dataset:
        """Validate an all-text DataFrame and build the Dataset"""
        df = df.rename(columns=lambda c: str(c).strip())
        covariate_columns = self._covariate_columns(df.columns)

        for column in (*self.fixed_columns, *covariate_columns):
            if column not in df.columns:
                raise TrialSchemaError(f"missing column {column!r}", column=column)

        binary_columns = list(self.fixed_columns[1:])
        values = self._convert(df, binary_columns + covariate_columns)

        for column in binary_columns:
            bad = ~values[column].isin([0, 1])
            if bad.any():
                row = int(bad.idxmax()) + 1
                raise TrialRowError(row, column, df[column].iloc[row - 1], "must be 0 or 1")

        resolved_target = parse_target(target, covariate_columns)
        schema = self._build_schema(values, covariate_columns, [resolved_target, *extra_targets])

        for j, column in enumerate(covariate_columns):
            bad = (values[column] < 0) | (values[column] >= schema.cardinalities[j])
            if bad.any():
                row = int(bad.idxmax()) + 1
                raise TrialRowError(
                    row, column, df[column].iloc[row - 1],
                    f"level outside 0..{schema.cardinalities[j] - 1}",
                )

        ids = df[self.ingestion.id_column].astype(str).str.strip()
        records = [
            TrialRecord(
                id=record_id,
                treatment=int(t),
                desire=int(e),
                response=int(r),
                covariates=tuple(int(v) for v in covs),
            )
            for record_id, t, e, r, covs in zip(
                ids,
                values[self.ingestion.treatment_column],
                values[self.ingestion.desire_column],
                values[self.ingestion.response_column],
                values[covariate_columns].itertuples(index=False, name=None),
            )
        ]
        return Dataset(schema=schema, records=tuple(records), target=resolved_target)

    def _covariate_columns(self, columns: pd.Index) -> List[str]:
        if self.ingestion.covariate_columns:
            return list(self.ingestion.covariate_columns)
        fixed = set(self.fixed_columns)
        remaining = [c for c in columns if c not in fixed]
        if not remaining:
            raise TrialSchemaError("no covariate columns found after id,T,E,R")
        return remaining

    def _convert(self, df: pd.DataFrame, columns: Sequence[str]) -> pd.DataFrame:
        """
        Convert text columns to integers.

        The first offending cell (row order, then column order) is reported.
        """
        converted = {}
        first_bad: Optional[Tuple[int, int, str]] = None
        for order, column in enumerate(columns):
            text = df[column].astype(str).str.strip()
            numbers = pd.to_numeric(text, errors='coerce')
            integral = numbers.notna() & (numbers == numbers.round()) & ~text.str.contains(r'[.eE]', regex=True)
            if not integral.all():
                row = int((~integral).idxmax())
                if first_bad is None or (row, order) < first_bad[:2]:
                    first_bad = (row, order, column)
            converted[column] = numbers.where(integral, -1).astype('int64')

        if first_bad is not None:
            row, _, column = first_bad
            raw = df[column].iloc[row]
            reason = "missing value" if str(raw).strip() == "" else "not an integer"
            raise TrialRowError(row + 1, column, raw, reason)

        return pd.DataFrame(converted, index=df.index)

    def _build_schema(self, values: pd.DataFrame, covariate_columns: List[str],
                      targets: Sequence[TargetSpec]) -> CovariateSchema:
        declared = self.ingestion.cardinalities or {}
        cardinalities = []
        for j, column in enumerate(covariate_columns):
            if column in declared:
                cardinalities.append(int(declared[column]))
                continue
            observed = int(values[column].max()) if len(values) else 0
            cardinalities.append(max(2, observed + 1, *(t.covariates[j] + 1 for t in targets)))
        return CovariateSchema(tuple(covariate_columns), tuple(cardinalities))


def load_dataset(csv_path: Union[str, Path], config: Optional[Settings] = None,
                 target: Optional[TargetSource] = None) -> Dataset:
    """
    Load and validate a trial CSV.

    The target comes from the explicit argument. Every Dataset carries the
    individual under assessment.
    """
    if target is None:
        raise DataError("a target individual is required to load a dataset")
    ingestion = config.ingestion if config is not None else IngestionSettings()
    return TrialParser(ingestion).parse_file(csv_path, target)


def load_batch(csv_path: Union[str, Path], targets_path: Union[str, Path],
               config: Optional[Settings] = None) -> List[Dataset]:
    """One Dataset per target in a JSON targets file, all over the same records"""
    ingestion = config.ingestion if config is not None else IngestionSettings()
    return TrialParser(ingestion).parse_batch(csv_path, targets_path)


def write_dataset(dataset: Dataset, csv_path: Union[str, Path],
                  target_path: Optional[Union[str, Path]] = None,
                  config: Optional[Settings] = None) -> Path:
    """Write records (and optionally the target as JSON) in the loadable layout"""
    ing = config.ingestion if config is not None else IngestionSettings()
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    frame = dataset.to_frame(ing.id_column, ing.treatment_column, ing.desire_column, ing.response_column)
    frame.to_csv(csv_path, index=False, lineterminator='\n')
    logger.info(f"Wrote {dataset.n} records to {csv_path}")

    if target_path is not None:
        target_path = Path(target_path)
        target_path.parent.mkdir(parents=True, exist_ok=True)
        target_path.write_text(json.dumps(dataset.target.to_dict(), indent=2) + "\n", encoding='utf-8')
    return csv_path


def parse_target(value: TargetSource, covariate_names: Sequence[str]) -> TargetSpec:
    """
    Resolve a target specification.

    Accepted forms:
        TargetSpec                       returned as is
        {"covariates": [1, 0], "desire": 1, "response": 1, "id": "ann"}
        {"covariates": {"H1": 1, "H2": 0}}
        path to a JSON file holding one of the mappings above
        "1,0"  or  "H1=1,H2=0,E=1,R=0"  (E and R default to 1)
    """
    if isinstance(value, TargetSpec):
        return value
    if isinstance(value, Mapping):
        return _target_from_mapping(value, covariate_names)

    text = str(value).strip()
    path = Path(text)
    if text.lower().endswith('.json') or (path.suffix and path.exists()):
        is_valid, error_msg = FileValidator.validate(path, 'json')
        if not is_valid:
            raise DataError(f"target file {path}: {error_msg}")
        try:
            payload = json.loads(path.read_text(encoding='utf-8'))
        except json.JSONDecodeError as e:
            raise DataError(f"target file {path} is not valid JSON: {e}")
        if not isinstance(payload, Mapping):
            raise DataError(f"target file {path} must hold a JSON object")
        return _target_from_mapping(payload, covariate_names)

    return _target_from_inline(text, covariate_names)


def load_targets(path: Union[str, Path], covariate_names: Sequence[str]) -> List[TargetSpec]:
    """Load a JSON list of targets (or {"targets": [...]}) for batch analysis"""
    path = Path(path)
    is_valid, error_msg = FileValidator.validate(path, 'json')
    if not is_valid:
        raise DataError(f"targets file {path}: {error_msg}")
    try:
        payload = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise DataError(f"targets file {path} is not valid JSON: {e}")
    if isinstance(payload, Mapping):
        payload = payload.get('targets', [])
    if not isinstance(payload, list) or not payload:
        raise DataError(f"targets file {path} must hold a non-empty list of targets")

    targets = []
    for i, item in enumerate(payload, start=1):
        if not isinstance(item, Mapping):
            raise DataError(f"targets file {path}: entry {i} is not an object")
        target = _target_from_mapping(item, covariate_names)
        if 'id' not in item:
            target = TargetSpec(target.covariates, target.desire, target.response, id=f"target_{i}")
        targets.append(target)
    return targets


def _target_from_mapping(payload: Mapping[str, Any], covariate_names: Sequence[str]) -> TargetSpec:
    covariates = payload.get('covariates')
    if covariates is None:
        raise DataError("target needs a 'covariates' entry")
    if isinstance(covariates, Mapping):
        missing = [name for name in covariate_names if name not in covariates]
        if missing:
            raise DataError(f"target is missing covariates {missing}")
        unknown = [name for name in covariates if name not in covariate_names]
        if unknown:
            raise DataError(f"target names unknown covariates {unknown}")
        levels = [covariates[name] for name in covariate_names]
    else:
        levels = list(covariates)
        if len(levels) != len(covariate_names):
            raise DataError(f"target has {len(levels)} covariates, dataset has {len(covariate_names)}")

    return TargetSpec(
        covariates=tuple(_as_level(v, 'target covariate') for v in levels),
        desire=_as_level(payload.get('desire', 1), 'target desire'),
        response=_as_level(payload.get('response', 1), 'target response'),
        id=str(payload.get('id', 'target')),
    )


def _target_from_inline(text: str, covariate_names: Sequence[str]) -> TargetSpec:
    if not text:
        raise DataError("empty target specification")

    positional: List[int] = []
    named: Dict[str, int] = {}
    desire, response = 1, 1
    for token in (t.strip() for t in text.split(',')):
        if not token:
            continue
        if '=' in token:
            key, raw = (part.strip() for part in token.split('=', 1))
            level = _as_level(raw, f"target {key}")
            if key.lower() in DESIRE_KEYS and key not in covariate_names:
                desire = level
            elif key.lower() in RESPONSE_KEYS and key not in covariate_names:
                response = level
            elif key in covariate_names:
                named[key] = level
            else:
                raise DataError(f"target names unknown covariate {key!r}")
        else:
            positional.append(_as_level(token, 'target covariate'))

    if positional and named:
        raise DataError("target mixes positional and named covariates")
    if named:
        missing = [name for name in covariate_names if name not in named]
        if missing:
            raise DataError(f"target is missing covariates {missing}")
        levels = [named[name] for name in covariate_names]
    else:
        if len(positional) != len(covariate_names):
            raise DataError(
                f"target has {len(positional)} covariates, dataset has {len(covariate_names)}"
            )
        levels = positional

    return TargetSpec(tuple(levels), desire=desire, response=response)


def _as_level(value: Any, label: str) -> int:
    if isinstance(value, bool):
        return int(value)
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise DataError(f"{label} must be an integer, got {value!r}")
    if not number.is_integer() or number < 0:
        raise DataError(f"{label} must be a non-negative integer, got {value!r}")
    return int(number)
