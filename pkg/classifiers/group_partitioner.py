"""
Group Partitioner Module

Splits the trial sample into the five groups a model M_J induces relative to
the target individual, and tallies successes in each.

Groups:
- a11:    treated, desire equal to the target's, matching the target on J
- abar11: every other treated subject
- a01:    untreated, E=1, matching on J
- a00:    untreated, E=0, matching on J
- abar0:  untreated, not matching

Design Decisions:
1. Matching is exact equality on every covariate in J; J = {} matches everyone
2. Untreated subjects match on H only and are then split by E (they are not
   required to share the target's desire)
3. Records are compressed once into cells of identical (T, E, R, match
   pattern) so that tallies for many models are cheap and vectorised
4. Counts depend only on which records match, so the match vector over cells
   is the partition signature used for caching
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterator, Tuple

import numpy as np

from models.inference import (
    Estimate, GroupCounts, GroupStats, ModelId, UNDEFINED, as_optional, safe_ratio,
)
from models.trial import Dataset

logger = logging.getLogger(__name__)

# Largest k for which match patterns fit in an int64 bitmask (batched tallies)
MAX_BATCH_K = 62

GROUP_NAMES = ('a11', 'abar11', 'a01', 'a00', 'abar0')


@dataclass(frozen=True)
class SufficiencyDiagnostics:
    """
    The two forces driving the marginal likelihood.

    treated_ratio:     success ratio in a11 (comparability)
    untreated_e_ratio: success ratio of a01 over that of a00; close to 1 when
                       desire is irrelevant among matching untreated (sufficiency)
    """
    treated_ratio: Estimate
    untreated_e_ratio: Estimate

    def __iter__(self) -> Iterator[Estimate]:
        return iter((self.treated_ratio, self.untreated_e_ratio))

    def to_dict(self):
        return {
            'treated_ratio': as_optional(self.treated_ratio),
            'untreated_e_ratio': as_optional(self.untreated_e_ratio),
        }


class GroupPartitioner:
    """
    Tallies group counts for any model over one dataset.

    Usage:
        partitioner = GroupPartitioner(dataset)
        counts = partitioner.counts(ModelId.from_indices([0, 2], dataset.k))
        batch = partitioner.counts_batch(np.arange(2 ** dataset.k))
    """

    def __init__(self, dataset: Dataset):
        self.dataset = dataset
        self.k = dataset.k
        arrays = dataset.arrays
        target = dataset.target

        match = arrays['H'] == np.asarray(target.covariates, dtype=np.int64)[None, :]
        rows = np.column_stack([arrays['T'], arrays['E'], arrays['R'], match]).astype(np.int8)
        if len(rows):
            cells, weights = np.unique(rows, axis=0, return_counts=True)
        else:
            cells = np.zeros((0, 3 + self.k), dtype=np.int8)
            weights = np.zeros(0, dtype=np.int64)

        self._weights = weights.astype(np.int64)
        self._cell_match = cells[:, 3:].astype(bool)
        treated = cells[:, 0] == 1
        desire = cells[:, 1]
        response = cells[:, 2].astype(np.int64)

        # Per-cell group role, independent of J
        self._roles = {
            'a11': treated & (desire == target.desire),
            'u1': ~treated & (desire == 1),
            'u0': ~treated & (desire == 0),
        }
        self._successes = self._weights * response
        self._treated_total = GroupStats(
            int(self._weights[treated].sum()), int(self._successes[treated].sum())
        )
        self._untreated_total = GroupStats(
            int(self._weights[~treated].sum()), int(self._successes[~treated].sum())
        )

        if self.k <= MAX_BATCH_K:
            bits = np.left_shift(np.int64(1), np.arange(self.k, dtype=np.int64))
            self._cell_masks = (self._cell_match.astype(np.int64) * bits).sum(axis=1)
        else:
            self._cell_masks = None

        logger.debug(f"Partitioner: {dataset.n} records in {len(self._weights)} cells, k={self.k}")

    @property
    def n_cells(self) -> int:
        return len(self._weights)

    def matches(self, model: ModelId) -> np.ndarray:
        """Boolean match vector over cells for model J"""
        if model.k != self.k:
            raise ValueError(f"model built for k={model.k}, dataset has k={self.k}")
        indices = list(model.indices)
        if not indices:
            return np.ones(self.n_cells, dtype=bool)
        return self._cell_match[:, indices].all(axis=1)

    def partition_signature(self, model: ModelId) -> bytes:
        """Identical for models inducing the same partition of the records"""
        return np.packbits(self.matches(model)).tobytes()

    def counts(self, model: ModelId) -> GroupCounts:
        """Group tallies for a single model"""
        sel = self.matches(model)
        w, s = self._weights, self._successes

        def tally(mask: np.ndarray) -> GroupStats:
            return GroupStats(int(w[mask].sum()), int(s[mask].sum()))

        a11 = tally(sel & self._roles['a11'])
        a01 = tally(sel & self._roles['u1'])
        a00 = tally(sel & self._roles['u0'])
        abar11 = GroupStats(self._treated_total.n - a11.n, self._treated_total.x - a11.x)
        abar0 = GroupStats(
            self._untreated_total.n - a01.n - a00.n,
            self._untreated_total.x - a01.x - a00.x,
        )
        return GroupCounts(a11=a11, abar11=abar11, a01=a01, a00=a00, abar0=abar0)

    def counts_batch(self, masks: np.ndarray) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
        """
        Vectorised tallies for many models at once.

        Args:
            masks: int64 array of model bitmasks

        Returns:
            group name -> (n array, x array), aligned with masks
        """
        if self._cell_masks is None:
            raise ValueError(f"batched tallies need k <= {MAX_BATCH_K}, got k={self.k}")
        masks = np.asarray(masks, dtype=np.int64)
        sel = (self._cell_masks[None, :] & masks[:, None]) == masks[:, None]
        sel = sel.astype(np.int64)

        out = {}
        for group, role in (('a11', 'a11'), ('a01', 'u1'), ('a00', 'u0')):
            weights = np.where(self._roles[role], self._weights, 0)
            successes = np.where(self._roles[role], self._successes, 0)
            out[group] = (sel @ weights, sel @ successes)

        out['abar11'] = (
            self._treated_total.n - out['a11'][0],
            self._treated_total.x - out['a11'][1],
        )
        out['abar0'] = (
            self._untreated_total.n - out['a01'][0] - out['a00'][0],
            self._untreated_total.x - out['a01'][1] - out['a00'][1],
        )
        return out


def partition_counts(data: Dataset, model: ModelId) -> GroupCounts:
    """Split the dataset into the five groups for model J and tally successes"""
    return GroupPartitioner(data).counts(model)


def sufficiency_diagnostics(counts: GroupCounts) -> SufficiencyDiagnostics:
    """
    Treated success ratio and untreated E=1 / E=0 success-ratio ratio.

    Any zero denominator yields UNDEFINED, including a00 with no successes.
    """
    treated_ratio = counts.a11.success_ratio
    ratio_e1 = counts.a01.success_ratio
    ratio_e0 = counts.a00.success_ratio
    if ratio_e1 is UNDEFINED or ratio_e0 is UNDEFINED:
        untreated_e_ratio: Estimate = UNDEFINED
    else:
        untreated_e_ratio = safe_ratio(ratio_e1, ratio_e0)
    return SufficiencyDiagnostics(treated_ratio, untreated_e_ratio)
