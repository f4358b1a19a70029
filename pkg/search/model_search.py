"""
Model Search Module

Priors over covariate subsets, exhaustive posterior enumeration and
Metropolis-Hastings sampling of the model space.

Responsible for:
1. Uniform and size-layered (Chen-Chen) priors over models
2. Scoring every model for small k, in vectorised chunks
3. Single-flip Metropolis-Hastings chains for large k, merged after burn-in
4. Canonical ordering and top-m selection of posterior tables

Design Decisions:
1. The size-layered prior keeps models with |J| <= floor(k/2); its weights
   are left unnormalised since the posterior is normalised anyway
2. Models outside the prior support never reach the likelihood; they stay in
   exhaustive tables with probability 0
3. The proposal toggles one uniformly chosen covariate, so it is symmetric
   and the Hastings correction cancels
4. Chains cache log targets per mask and marginal likelihoods per partition
   signature; revisits cost a dict lookup
5. Chains are seeded from SeedSequence(seed).spawn(chains), so a run is
   reproducible regardless of how chains are scheduled on threads
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from classifiers.group_partitioner import MAX_BATCH_K, GroupPartitioner
from config.settings import SearchSettings
from models.errors import ExhaustiveCapError, SamplerError
from models.inference import (
    ChainState, LogMarginal, ModelId, PosteriorEntry, PosteriorTable, PriorKind,
)
from models.trial import Dataset
from scoring.marginal_likelihood import log_marginal, log_marginal_batch
from utils.helpers import EvaluationCache

logger = logging.getLogger(__name__)

NEG_INF = float('-inf')


@dataclass(frozen=True)
class ModelPrior:
    """Prior over the 2^k models"""
    kind: PriorKind
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"prior needs k >= 1, got {self.k}")

    @property
    def max_size(self) -> int:
        """Largest model size with positive mass"""
        if self.kind == PriorKind.CHEN_CHEN:
            return self.k // 2
        return self.k

    def weight(self, model: ModelId) -> float:
        """Prior weight on the probability scale"""
        size = model.size
        if self.kind == PriorKind.UNIFORM:
            return 1.0 / 2 ** self.k
        if size > self.max_size:
            return 0.0
        return 1.0 / ((self.k + 1) * math.comb(self.k, size))

    def log_weights(self, sizes: np.ndarray) -> np.ndarray:
        """Log prior for an array of model sizes; -inf outside the support"""
        sizes = np.asarray(sizes, dtype=np.int64)
        if self.kind == PriorKind.UNIFORM:
            return np.full(sizes.shape, -self.k * math.log(2.0))
        layer = np.array([
            -math.log(self.k + 1) - math.log(math.comb(self.k, s)) if s <= self.max_size else NEG_INF
            for s in range(self.k + 1)
        ])
        return layer[sizes]

    def support_size(self) -> int:
        return sum(math.comb(self.k, s) for s in range(self.max_size + 1))


def log_prior(model: ModelId, prior: ModelPrior) -> float:
    """Log prior weight of one model; -inf encodes zero mass"""
    if model.k != prior.k:
        raise ValueError(f"model built for k={model.k}, prior has k={prior.k}")
    return float(prior.log_weights(np.array([model.size]))[0])


def popcount(masks: np.ndarray, k: int) -> np.ndarray:
    """Number of set bits in each mask"""
    masks = np.asarray(masks, dtype=np.int64)
    sizes = np.zeros(masks.shape, dtype=np.int64)
    for j in range(k):
        sizes += (masks >> j) & 1
    return sizes


class ModelEvaluator:
    """
    Scores models of one dataset under one prior.

    Usage:
        evaluator = ModelEvaluator(dataset, ModelPrior(PriorKind.UNIFORM, dataset.k))
        evaluator.log_target(ModelId.from_indices([0], dataset.k))
    """

    def __init__(self, dataset: Dataset, prior: ModelPrior,
                 alpha: float = 1.0, beta: float = 1.0):
        if prior.k != dataset.k:
            raise ValueError(f"prior built for k={prior.k}, dataset has k={dataset.k}")
        self.dataset = dataset
        self.prior = prior
        self.alpha = alpha
        self.beta = beta
        self.partitioner = GroupPartitioner(dataset)
        self.r_target = dataset.target.response
        self._marginals: EvaluationCache[float] = EvaluationCache()
        self._targets: EvaluationCache[float] = EvaluationCache()

    @property
    def k(self) -> int:
        return self.dataset.k

    def breakdown(self, model: ModelId) -> LogMarginal:
        """Uncached per-group factors of one model"""
        counts = self.partitioner.counts(model)
        return log_marginal(counts, self.r_target, self.alpha, self.beta)

    def log_marginal(self, model: ModelId) -> float:
        key = self.partitioner.partition_signature(model)
        return self._marginals.get_or_compute(key, lambda: self.breakdown(model).log_value)

    def log_target(self, model: ModelId, fresh: bool = False) -> float:
        """log(marginal * prior); prior-zero models are never scored"""
        if fresh:
            lp = log_prior(model, self.prior)
            return lp if lp == NEG_INF else self.breakdown(model).log_value + lp
        return self._targets.get_or_compute(model.mask, lambda: self._compute_target(model))

    def _compute_target(self, model: ModelId) -> float:
        lp = log_prior(model, self.prior)
        if lp == NEG_INF:
            return NEG_INF
        return self.log_marginal(model) + lp

    def cache_stats(self):
        return {'marginals': self._marginals.get_stats(), 'targets': self._targets.get_stats()}


def normalize_log_weights(log_weights: np.ndarray) -> Tuple[np.ndarray, float]:
    """Probabilities proportional to exp(log_weights), and the log normaliser"""
    log_weights = np.asarray(log_weights, dtype=float)
    log_normalizer = float(logsumexp(log_weights))
    return np.exp(log_weights - log_normalizer), log_normalizer


def enumerate_posterior(data: Dataset, prior: ModelPrior,
                        settings: Optional[SearchSettings] = None,
                        alpha: float = 1.0, beta: float = 1.0) -> PosteriorTable:
    """
    Exact posterior over all 2^k models.

    Raises:
        ExhaustiveCapError: k above settings.exhaustive_max_k, or above the
            widest mask batched tallies support
    """
    settings = settings or SearchSettings()
    k = data.k
    cap = min(settings.exhaustive_max_k, MAX_BATCH_K)
    if k > cap:
        raise ExhaustiveCapError(
            f"k={k} exceeds the exhaustive cap of {cap}; "
            f"use the Metropolis-Hastings sampler (--search mh)"
        )
    if prior.k != k:
        raise ValueError(f"prior built for k={prior.k}, dataset has k={k}")

    partitioner = GroupPartitioner(data)
    r_target = data.target.response
    masks = np.arange(1 << k, dtype=np.int64)
    log_priors = prior.log_weights(popcount(masks, k))
    in_support = np.isfinite(log_priors)
    support_masks = masks[in_support]

    chunks = [
        support_masks[start:start + settings.chunk_size]
        for start in range(0, len(support_masks), settings.chunk_size)
    ]

    def score(chunk: np.ndarray) -> np.ndarray:
        batch = partitioner.counts_batch(chunk)
        return log_marginal_batch(batch, r_target, alpha, beta)

    if settings.workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=settings.workers) as pool:
            scored = list(pool.map(score, chunks))
    else:
        scored = [score(chunk) for chunk in chunks]

    log_marginals = np.full(len(masks), np.nan)
    if scored:
        log_marginals[in_support] = np.concatenate(scored)

    posterior = np.zeros(len(masks))
    posterior[in_support], log_normalizer = normalize_log_weights(
        log_marginals[in_support] + log_priors[in_support]
    )

    entries = [
        PosteriorEntry(
            model=ModelId(int(mask), k),
            log_marginal=float(log_marginals[mask]) if in_support[mask] else None,
            log_prior=float(log_priors[mask]),
            posterior=float(posterior[mask]),
        )
        for mask in range(len(masks))
    ]
    logger.info(
        f"Enumerated {len(masks)} models ({int(in_support.sum())} in prior support) "
        f"in {len(chunks)} chunk(s)"
    )
    return PosteriorTable.build(entries, log_normalizer, k, source="exhaustive")


@dataclass
class ChainRun:
    """Final state of one chain, plus its full path when requested"""
    state: ChainState
    path: Optional[np.ndarray] = None


def run_chain(evaluator: ModelEvaluator, iterations: int, burn_in: int, seed: int,
              start: Optional[ModelId] = None, record_path: bool = False,
              verify_cache: bool = False) -> ChainRun:
    """
    One Metropolis-Hastings chain over the model space.

    Visits are counted for steps with index >= burn_in. The path (when
    recorded) holds the model mask after every step.
    """
    k = evaluator.k
    start = start or ModelId.empty(k)
    state = ChainState(current=start, log_target=evaluator.log_target(start), rng_seed=seed)
    if state.log_target == NEG_INF:
        raise SamplerError(f"starting model {start} has zero prior mass")

    rng = np.random.default_rng(seed)
    flips = rng.integers(0, k, size=iterations).tolist()
    log_uniforms = np.log(rng.random(iterations)).tolist()
    path = np.empty(iterations, dtype=np.int64) if record_path else None

    mask = start.mask
    current_log = state.log_target
    for step in range(iterations):
        proposal = ModelId(mask ^ (1 << flips[step]), k)
        proposal_log = evaluator.log_target(proposal)
        state.proposed += 1
        if proposal_log != NEG_INF and log_uniforms[step] < proposal_log - current_log:
            mask = proposal.mask
            current_log = proposal_log
            state.current = proposal
            state.log_target = proposal_log
            state.accepted += 1
            if verify_cache:
                recomputed = evaluator.log_target(proposal, fresh=True)
                if not math.isclose(recomputed, current_log, rel_tol=1e-12, abs_tol=1e-12):
                    raise SamplerError(
                        f"cached target {current_log} for {proposal} disagrees with {recomputed}"
                    )
        if step >= burn_in:
            state.visit()
        if path is not None:
            path[step] = mask

    logger.debug(
        f"Chain seed={seed}: acceptance {state.acceptance_rate:.3f}, "
        f"{len(state.history)} distinct models visited"
    )
    return ChainRun(state=state, path=path)


def chain_seeds(seed: int, chains: int) -> List[int]:
    """Independent per-chain integer seeds derived from one run seed"""
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(chains)]


def mh_sample(data: Dataset, prior: ModelPrior, iterations: int, burn_in: int, seed: int,
              chains: int = 1, workers: int = 1, verify_cache: bool = False,
              alpha: float = 1.0, beta: float = 1.0,
              evaluator: Optional[ModelEvaluator] = None) -> PosteriorTable:
    """
    Empirical posterior from merged Metropolis-Hastings chains.

    Raises:
        SamplerError: iterations <= burn_in, or no model has prior mass
    """
    if burn_in < 0 or iterations <= burn_in:
        raise SamplerError(f"need iterations > burn-in >= 0, got {iterations} and {burn_in}")
    if chains < 1:
        raise SamplerError(f"at least one chain is required, got {chains}")
    if prior.support_size() == 0:
        raise SamplerError("every model has zero prior mass")

    evaluator = evaluator or ModelEvaluator(data, prior, alpha, beta)
    seeds = chain_seeds(seed, chains)

    def run(chain_seed: int) -> ChainRun:
        return run_chain(evaluator, iterations, burn_in, chain_seed, verify_cache=verify_cache)

    if workers > 1 and chains > 1:
        with ThreadPoolExecutor(max_workers=min(workers, chains)) as pool:
            runs = list(pool.map(run, seeds))
    else:
        runs = [run(s) for s in seeds]

    merged = {}
    for chain in runs:
        for mask, count in chain.state.history.items():
            merged[mask] = merged.get(mask, 0) + count
    total = sum(merged.values())

    entries = []
    for mask, count in merged.items():
        model = ModelId(mask, data.k)
        entries.append(PosteriorEntry(
            model=model,
            log_marginal=evaluator.log_marginal(model),
            log_prior=log_prior(model, prior),
            posterior=count / total,
        ))

    rates = ", ".join(f"{c.state.acceptance_rate:.3f}" for c in runs)
    stats = evaluator.cache_stats()['targets']
    logger.info(
        f"MH: {chains} chain(s) x {iterations} iterations (burn-in {burn_in}), "
        f"acceptance [{rates}], {len(merged)} models visited, "
        f"cache hit rate {stats['hit_rate']:.2%}"
    )
    return PosteriorTable.build(entries, math.nan, data.k, source="mcmc", sample_size=total)


def top_models(table: PosteriorTable, m: int, support_only: bool = False) -> List[PosteriorEntry]:
    """First m entries in canonical order (clamped to the table)"""
    if m < 1:
        raise ValueError(f"m must be at least 1, got {m}")
    entries: Sequence[PosteriorEntry] = table.support if support_only else table.entries
    return list(entries[:m])


def total_variation(p: Dict[int, float], q: Dict[int, float]) -> float:
    """Total-variation distance between two mask -> probability mappings"""
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(key, 0.0) - q.get(key, 0.0)) for key in keys)

