"""
Shared fixtures: a hand-built six-record trial, small simulated trials and
CSV writers for the parser and CLI tests.
"""

import sys
from pathlib import Path
from typing import Callable, Sequence, Tuple

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from generators.trial_simulator import planted_signal_config, simulate_trial  # noqa: E402
from models.trial import CovariateSchema, Dataset, TargetSpec, TrialRecord  # noqa: E402
from parsers.trial_parser import write_dataset  # noqa: E402

# (T, E, R, H) per subject; target H=(1, 0), E=1, R=1
HAND_ROWS = [
    (1, 1, 1, (1, 0)),
    (1, 1, 0, (1, 1)),
    (1, 0, 1, (1, 0)),
    (0, 1, 1, (1, 0)),
    (0, 0, 0, (0, 0)),
    (0, 0, 1, (1, 1)),
]
HAND_TARGET = (1, 0)

Row = Tuple[int, int, int, Sequence[int]]


def build_dataset(rows: Sequence[Row], target: Sequence[int], desire: int = 1,
                  response: int = 1) -> Dataset:
    k = len(target)
    schema = CovariateSchema.default(k)
    records = tuple(
        TrialRecord(id=f"r{i}", treatment=t, desire=e, response=r, covariates=tuple(h))
        for i, (t, e, r, h) in enumerate(rows, start=1)
    )
    return Dataset(schema, records, TargetSpec(tuple(target), desire=desire, response=response))


@pytest.fixture
def hand_dataset() -> Dataset:
    return build_dataset(HAND_ROWS, HAND_TARGET)


@pytest.fixture
def make_dataset() -> Callable[..., Dataset]:
    return build_dataset


@pytest.fixture
def signal_dataset() -> Dataset:
    """k=4 planted-signal trial, small enough for exhaustive checks"""
    return simulate_trial(planted_signal_config(n=300, k=4, seed=11))


@pytest.fixture
def write_csv(tmp_path) -> Callable[[str, str], Path]:
    def write(text: str, name: str = "trial.csv") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return write


@pytest.fixture
def hand_csv(tmp_path, hand_dataset) -> Path:
    return write_dataset(hand_dataset, tmp_path / "hand.csv")
