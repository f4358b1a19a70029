"""
Utilities Module

Contains:
1. Logging setup
2. Thread-safe evaluation cache for model scoring
3. Audit trail for pipeline actions
4. Input file validation
"""

import logging
import threading
from dataclasses import asdict, dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, Generic, Hashable, List, Optional, Tuple, TypeVar

import pandas as pd

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

logger = logging.getLogger(__name__)

V = TypeVar('V')


def configure_logging(level: str = "INFO") -> None:
    """Install the project log format on the root logger"""
    numeric = getattr(logging, str(level).upper(), logging.INFO)
    logging.basicConfig(level=numeric, format=LOG_FORMAT, force=True)


class EvaluationCache(Generic[V]):
    """
    Thread-safe memo table.

    Keys are partition signatures computed by the caller; chains on
    different threads share one table.

    The lock is not held while computing a missing value, so two threads may
    compute the same entry once each; values are pure so either result is
    correct.
    """

    def __init__(self):
        self._values: Dict[Hashable, V] = {}
        self._lock = threading.Lock()
        self._hits = 0
        self._misses = 0

    def get_or_compute(self, key: Hashable, compute: Callable[[], V]) -> V:
        with self._lock:
            if key in self._values:
                self._hits += 1
                return self._values[key]
            self._misses += 1
        value = compute()
        with self._lock:
            self._values.setdefault(key, value)
            return self._values[key]

    def __len__(self) -> int:
        return len(self._values)

    def get_stats(self) -> Dict[str, Any]:
        """Cache statistics"""
        with self._lock:
            total = self._hits + self._misses
            return {
                'entries': len(self._values),
                'hits': self._hits,
                'misses': self._misses,
                'hit_rate': self._hits / total if total else 0.0,
            }

    def clear(self):
        with self._lock:
            self._values.clear()
            self._hits = 0
            self._misses = 0


@dataclass
class AuditEntry:
    """Single audit log entry"""
    timestamp: datetime
    action: str
    subject: str
    detail: str
    source: str  # DATA, SEARCH, ESTIMATE, REPORT


class AuditTrail:
    """
    Records what each pipeline stage did.

    Design Decision: In-memory; exported to the workbook only, never to the
    JSON report, so JSON output stays byte-identical across runs.
    """

    def __init__(self):
        self.entries: List[AuditEntry] = []
        self._lock = threading.Lock()

    def log(self, action: str, subject: str, detail: str, source: str):
        """Add an audit entry"""
        with self._lock:
            entry = AuditEntry(
                timestamp=datetime.now(),
                action=action,
                subject=subject,
                detail=detail,
                source=source,
            )
            self.entries.append(entry)
            logger.debug(f"Audit: {action} {subject}: {detail}")

    def actions(self) -> List[str]:
        return [e.action for e in self.entries]

    def to_dataframe(self) -> pd.DataFrame:
        """Convert to pandas DataFrame for export"""
        return pd.DataFrame(
            [asdict(e) for e in self.entries],
            columns=['timestamp', 'action', 'subject', 'detail', 'source'],
        )

    def clear(self):
        with self._lock:
            self.entries.clear()


class FileValidator:
    """
    Validates input files before parsing.

    Design Decision: Fail fast with clear error messages rather than
    cryptic errors deep inside pandas.
    """

    MAX_SIZES = {
        'csv': 200 * 1024 * 1024,
        'json': 20 * 1024 * 1024,
    }
    EXTENSIONS = {
        'csv': {'.csv', '.txt'},
        'json': {'.json'},
    }

    @classmethod
    def validate(cls, path: Path, kind: str, allow_empty: bool = False) -> Tuple[bool, str]:
        """
        Validate a file of the given kind ('csv' or 'json').

        Returns (is_valid, error_message)
        """
        path = Path(path)
        if not path.exists():
            return False, f"File not found: {path}"
        if not path.is_file():
            return False, f"Not a file: {path}"

        if path.suffix.lower() not in cls.EXTENSIONS[kind]:
            expected = "/".join(sorted(cls.EXTENSIONS[kind]))
            return False, f"Expected {expected} file, got {path.suffix or 'no extension'}"

        size = path.stat().st_size
        if size == 0 and not allow_empty:
            return False, "File is empty"
        if size > cls.MAX_SIZES[kind]:
            return False, f"File too large ({size / 1024 / 1024:.1f} MB)"

        return True, ""


def format_estimate(value: Optional[float], digits: int = 3) -> str:
    """Render a possibly-missing number for log lines"""
    if value is None:
        return "undefined"
    return f"{value:.{digits}f}"
