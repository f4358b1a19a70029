"""
Trial Simulator Module

Responsible for:
1. Building synthetic randomized trials with a desire variable
2. Shipping presets: the 14-covariate student experiment layout and a
   planted-signal design used to check model recovery

Design Decisions:
1. One numpy Generator per call, seeded from the config (or the explicit
   seed argument), so equal inputs give identical datasets
2. Treatment is completely randomized: exactly round(n * ratio) subjects are
   treated, independent of covariates and desire
3. Desire and response probabilities are additive models over levels; every
   reachable probability is checked to lie in [0, 1] before any draw
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from models.errors import DataError, SimulationConfigError
from models.trial import CovariateSchema, Dataset, TargetSpec, TrialRecord
from utils.helpers import FileValidator

logger = logging.getLogger(__name__)

# Student experiment covariates (all binary, level 1 as described)
STUDENT_COVARIATES = [
    "course_facilities",      # 0=Civil, 1=Facilities
    "female",
    "age_21_plus",
    "born_florence",
    "resident_florence",
    "diploma_2016",
    "diploma_florence",
    "technical_high_school",
    "diploma_vote_80_plus",
    "first_registration_2016",
    "statistical_background",
    "father_university",
    "mother_university",
    "working_student",
]


@dataclass
class ProbabilityModel:
    """
    p = baseline + treatment_effect*T + desire_effect*E + sum_j effects[j][H_j]

    covariate_effects maps a 0-based covariate index to one additive shift
    per level.
    """
    baseline: float
    treatment_effect: float = 0.0
    desire_effect: float = 0.0
    covariate_effects: Dict[int, List[float]] = field(default_factory=dict)

    def check(self, label: str, cardinalities: Sequence[int]) -> None:
        """Raise if any reachable probability falls outside [0, 1]"""
        for j, shifts in self.covariate_effects.items():
            if not 0 <= j < len(cardinalities):
                raise SimulationConfigError(f"{label}: covariate index {j + 1} out of range")
            if len(shifts) != cardinalities[j]:
                raise SimulationConfigError(
                    f"{label}: covariate {j + 1} needs {cardinalities[j]} level effects, got {len(shifts)}"
                )
        low = self.baseline + min(0.0, self.treatment_effect) + min(0.0, self.desire_effect)
        high = self.baseline + max(0.0, self.treatment_effect) + max(0.0, self.desire_effect)
        for shifts in self.covariate_effects.values():
            low += min(shifts)
            high += max(shifts)
        if low < 0 or high > 1:
            raise SimulationConfigError(
                f"{label}: probabilities range over [{low:.3f}, {high:.3f}], outside [0, 1]"
            )

    def evaluate(self, H: np.ndarray, T: Optional[np.ndarray] = None,
                 E: Optional[np.ndarray] = None) -> np.ndarray:
        p = np.full(H.shape[0], self.baseline, dtype=float)
        if T is not None:
            p += self.treatment_effect * T
        if E is not None:
            p += self.desire_effect * E
        for j, shifts in self.covariate_effects.items():
            p += np.asarray(shifts, dtype=float)[H[:, j]]
        return np.clip(p, 0.0, 1.0)


@dataclass
class SimulationConfig:
    """Generator configuration (the JSON config fields, parsed)"""
    n: int
    covariate_cardinalities: List[int]
    desire_model: ProbabilityModel
    response_model: ProbabilityModel
    target: Dict[str, Any]
    seed: int = 0
    assignment_ratio: float = 0.5
    covariate_names: Optional[List[str]] = None
    covariate_marginals: Optional[List[List[float]]] = None

    def __post_init__(self):
        if not self.covariate_names:
            self.covariate_names = [f"H{j + 1}" for j in range(len(self.covariate_cardinalities))]

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> 'SimulationConfig':
        required = ('n', 'covariate_cardinalities', 'desire_model', 'response_model', 'target')
        missing = [key for key in required if key not in payload]
        if missing:
            raise SimulationConfigError(f"generator config is missing {missing}")

        cardinalities = [int(c) for c in payload['covariate_cardinalities']]
        names = payload.get('covariate_names') or [f"H{j + 1}" for j in range(len(cardinalities))]
        return cls(
            n=int(payload['n']),
            seed=int(payload.get('seed', 0)),
            covariate_cardinalities=cardinalities,
            covariate_names=list(names),
            covariate_marginals=payload.get('covariate_marginals'),
            assignment_ratio=float(payload.get('assignment_ratio', 0.5)),
            desire_model=_probability_model(payload['desire_model'], names, 'desire_model'),
            response_model=_probability_model(payload['response_model'], names, 'response_model'),
            target=dict(payload['target']),
        )

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> 'SimulationConfig':
        path = Path(path)
        is_valid, error_msg = FileValidator.validate(path, 'json')
        if not is_valid:
            raise SimulationConfigError(f"{path}: {error_msg}")
        try:
            payload = json.loads(path.read_text(encoding='utf-8'))
        except json.JSONDecodeError as e:
            raise SimulationConfigError(f"{path} is not valid JSON: {e}")
        return cls.from_dict(payload)

    def validate(self) -> CovariateSchema:
        """Check every probability and return the schema the data will follow"""
        if self.n < 0:
            raise SimulationConfigError(f"n must be non-negative, got {self.n}")
        if not 0 <= self.assignment_ratio <= 1:
            raise SimulationConfigError(f"assignment_ratio {self.assignment_ratio} outside [0, 1]")
        try:
            schema = CovariateSchema(tuple(self.covariate_names), tuple(self.covariate_cardinalities))
        except DataError as e:
            raise SimulationConfigError(str(e))

        for j, probs in enumerate(self.marginals()):
            if len(probs) != schema.cardinalities[j]:
                raise SimulationConfigError(
                    f"covariate {j + 1}: {len(probs)} marginal probabilities for {schema.cardinalities[j]} levels"
                )
            if any(p < 0 or p > 1 for p in probs) or not np.isclose(sum(probs), 1.0):
                raise SimulationConfigError(f"covariate {j + 1}: marginal {probs} is not a distribution")

        self.desire_model.check('desire_model', schema.cardinalities)
        self.response_model.check('response_model', schema.cardinalities)
        return schema

    def marginals(self) -> List[List[float]]:
        if self.covariate_marginals is not None:
            return [list(map(float, probs)) for probs in self.covariate_marginals]
        return [[1.0 / c] * c for c in self.covariate_cardinalities]


def simulate_trial(source: Union[SimulationConfig, Mapping[str, Any]],
                   seed: Optional[int] = None) -> Dataset:
    """
    Draw a synthetic randomized trial.

    Args:
        source: SimulationConfig or its JSON mapping
        seed: overrides the configured seed when given

    Returns:
        Dataset with the configured target attached
    """
    config = source if isinstance(source, SimulationConfig) else SimulationConfig.from_dict(source)
    schema = config.validate()
    seed = config.seed if seed is None else int(seed)
    rng = np.random.default_rng(seed)
    n = config.n

    H = np.zeros((n, schema.k), dtype=np.int64)
    for j, probs in enumerate(config.marginals()):
        H[:, j] = rng.choice(schema.cardinalities[j], size=n, p=probs)

    E = (rng.random(n) < config.desire_model.evaluate(H)).astype(np.int64)

    n_treated = int(round(n * config.assignment_ratio))
    T = np.zeros(n, dtype=np.int64)
    T[rng.permutation(n)[:n_treated]] = 1

    R = (rng.random(n) < config.response_model.evaluate(H, T, E)).astype(np.int64)

    records = tuple(
        TrialRecord(
            id=f"s{i + 1:05d}",
            treatment=int(T[i]),
            desire=int(E[i]),
            response=int(R[i]),
            covariates=tuple(int(v) for v in H[i]),
        )
        for i in range(n)
    )

    target = config.target
    levels = target.get('covariates')
    if levels is None or len(levels) != schema.k:
        raise SimulationConfigError(f"target needs {schema.k} covariate levels")
    target_spec = TargetSpec(
        covariates=tuple(int(v) for v in levels),
        desire=int(target.get('desire', 1)),
        response=int(target.get('response', 1)),
        id=str(target.get('id', 'target')),
    )

    logger.info(f"Simulated {n} records (k={schema.k}, seed={seed}, treated={n_treated})")
    return Dataset(schema=schema, records=records, target=target_spec)


def student_survey_config(n: int = 161, seed: int = 0) -> SimulationConfig:
    """
    Student-experiment shaped generator: 14 binary covariates.

    Desire for the hint leans on family education; success depends on the
    hint, statistical background and family education.
    """
    k = len(STUDENT_COVARIATES)
    father, mother, stats = 11, 12, 10
    return SimulationConfig(
        n=n,
        seed=seed,
        covariate_cardinalities=[2] * k,
        covariate_names=list(STUDENT_COVARIATES),
        covariate_marginals=[[0.5, 0.5]] * k,
        assignment_ratio=0.5,
        desire_model=ProbabilityModel(
            baseline=0.25,
            covariate_effects={father: [0.0, 0.2], mother: [0.0, 0.2]},
        ),
        response_model=ProbabilityModel(
            baseline=0.15,
            treatment_effect=0.25,
            covariate_effects={stats: [0.0, 0.15], father: [0.0, 0.15], mother: [0.0, 0.15]},
        ),
        target={
            'id': 'student',
            'covariates': [0, 0, 1, 0, 1, 1, 0, 0, 1, 0, 0, 1, 1, 0],
            'desire': 1,
            'response': 1,
        },
    )


def planted_signal_config(n: int = 2000, k: int = 6, signal: int = 0, gap: float = 0.4,
                          seed: int = 0, signal_share: float = 0.9,
                          background_majority: float = 0.8) -> SimulationConfig:
    """
    Success depends on one covariate only (plus treatment); desire follows the
    same covariate, so matching on it is what makes desire irrelevant among
    the untreated.

    The target sits at the high-success level of the signal covariate, held
    by signal_share of the sample, and at the majority level of every other
    covariate. Both shares sit above one half, so each background covariate
    added to the signal moves the matched groups toward an even split with
    the unmatched ones, which lowers the Beta(1, 1) marginal by about a nat
    at n = 2000 with no change in fit.
    """
    if not 0 <= signal < k:
        raise SimulationConfigError(f"signal covariate {signal + 1} outside 1..{k}")
    for label, share in (('signal_share', signal_share), ('background_majority', background_majority)):
        if not 0.5 < share < 1.0:
            raise SimulationConfigError(f"{label} must lie in (0.5, 1), got {share}")
    marginals = [[background_majority, 1.0 - background_majority]] * k
    marginals[signal] = [1.0 - signal_share, signal_share]
    target_levels = [0] * k
    target_levels[signal] = 1
    return SimulationConfig(
        n=n,
        seed=seed,
        covariate_cardinalities=[2] * k,
        covariate_marginals=marginals,
        covariate_names=[f"H{j + 1}" for j in range(k)],
        assignment_ratio=0.5,
        desire_model=ProbabilityModel(baseline=0.05, covariate_effects={signal: [0.0, 0.9]}),
        response_model=ProbabilityModel(
            baseline=0.2,
            treatment_effect=0.3,
            covariate_effects={signal: [0.0, gap]},
        ),
        target={'covariates': target_levels, 'desire': 1, 'response': 1},
    )


PRESETS = {
    'students': student_survey_config,
    'signal': planted_signal_config,
}


def _probability_model(payload: Any, names: Sequence[str], label: str) -> ProbabilityModel:
    if isinstance(payload, (int, float)):
        return ProbabilityModel(baseline=float(payload))
    if not isinstance(payload, Mapping):
        raise SimulationConfigError(f"{label} must be a number or an object")
    effects = {}
    for key, shifts in (payload.get('covariate_effects') or {}).items():
        effects[_covariate_index(key, names, label)] = [float(s) for s in shifts]
    return ProbabilityModel(
        baseline=float(payload.get('baseline', 0.5)),
        treatment_effect=float(payload.get('treatment_effect', 0.0)),
        desire_effect=float(payload.get('desire_effect', 0.0)),
        covariate_effects=effects,
    )


def _covariate_index(key: Any, names: Sequence[str], label: str) -> int:
    """Covariates are referenced by name or 1-based position"""
    if key in names:
        return list(names).index(key)
    try:
        position = int(key)
    except (TypeError, ValueError):
        raise SimulationConfigError(f"{label}: unknown covariate {key!r}")
    if not 1 <= position <= len(names):
        raise SimulationConfigError(f"{label}: covariate position {position} outside 1..{len(names)}")
    return position - 1
