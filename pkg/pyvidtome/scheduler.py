#!/usr/bin/env python

'''splits the frames of one denoising iteration into chunks and decides the order they are processed in'''

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from pyvidtome.utils.errors import ConsistencyError, EmptySetError, ParameterError
from pyvidtome.utils.mapping import order_policies
from pyvidtome.utils.tokens import ratio_to_count

logger = logging.getLogger(__name__)


class OrderKind(str, Enum):
    SEQUENTIAL = 'sequential'
    RANDOM = 'random'
    MIXED = 'mixed'


@dataclass(frozen=True)
class OrderPolicy:
    kind: OrderKind = OrderKind.RANDOM
    fraction_random: float = 0.5  # only used by the mixed policy

    def __post_init__(self):
        if self.kind not in [k.value for k in OrderKind]:
            raise ParameterError('ERROR: unknown chunk order policy <'+str(self.kind)+'> !')
        object.__setattr__(self, 'kind', OrderKind(self.kind))
        if not 0.0 <= self.fraction_random <= 1.0:
            raise ParameterError('ERROR: <fraction_random> must lie in [0, 1], got '+str(self.fraction_random)+' !')

    @classmethod
    def sequential(cls):
        return cls(OrderKind.SEQUENTIAL)

    @classmethod
    def random(cls):
        return cls(OrderKind.RANDOM)

    @classmethod
    def mixed(cls, fraction_random=0.5):
        return cls(OrderKind.MIXED, fraction_random)

    def describe(self):
        return order_policies[self.kind.value]['msg'].format(fraction=self.fraction_random)


@dataclass(frozen=True)
class ChunkPlan:
    chunks: tuple
    processing_order: tuple
    policy: OrderPolicy

    def __post_init__(self):
        start = 0
        for chunk in self.chunks:
            if chunk.start != start or len(chunk) < 1 or chunk.step != 1:
                raise ConsistencyError('ERROR: chunks must be consecutive, non-empty and disjoint !')
            start = chunk.stop
        if sorted(self.processing_order) != list(range(len(self.chunks))):
            raise ConsistencyError('ERROR: <processing_order> is not a permutation of the chunk indices !')

    @property
    def frames(self):
        return self.chunks[-1].stop

    @property
    def lengths(self):
        return tuple(len(c) for c in self.chunks)

    def ordered_chunks(self):
        return [self.chunks[i] for i in self.processing_order]


def plan_chunks(n, chunk_size, policy, rng):
    '''Splits frames [0, n) into a first chunk of random length b in [1, min(B, n)], then runs
    of B frames and a possibly shorter last chunk; the processing order follows <policy>.'''
    if n < 1:
        raise EmptySetError('ERROR: cannot plan chunks for '+str(n)+' frames !')
    if chunk_size < 1:
        raise ParameterError('ERROR: <chunk_size> must be >= 1, got '+str(chunk_size)+' !')

    b = rng.integers(1, min(chunk_size, n) + 1)
    chunks = [range(0, b)]
    chunks.extend(range(start, min(start + chunk_size, n)) for start in range(b, n, chunk_size))
    m = len(chunks)

    if policy.kind is OrderKind.SEQUENTIAL:
        order = list(range(m))
    elif policy.kind is OrderKind.RANDOM:
        order = rng.permutation(m)
    else:
        # a uniformly chosen subset of positions is shuffled among itself, the rest stays in sequence
        positions = rng.subset(m, ratio_to_count(policy.fraction_random, m))
        order = list(range(m))
        for position, value in zip(positions, [positions[i] for i in rng.permutation(len(positions))]):
            order[position] = value

    plan = ChunkPlan(tuple(chunks), tuple(order), policy)
    logger.debug('Chunk plan for '+str(n)+' frames: lengths '+str(plan.lengths)+', order '+str(plan.processing_order)+'.')
    return plan


def first_chunk_distribution(n, chunk_size, trials, rng, policy=None):
    '''empirical frequencies of the first chunk length b over <trials> plans'''
    if trials < 1:
        raise ParameterError('ERROR: <trials> must be >= 1 !')
    policy = policy or OrderPolicy.sequential()
    counts = np.zeros(min(chunk_size, n) + 1, dtype=np.int64)
    for _ in range(trials):
        counts[len(plan_chunks(n, chunk_size, policy, rng).chunks[0])] += 1
    return {b: counts[b]/trials for b in range(1, counts.size)}
