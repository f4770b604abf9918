#!/usr/bin/env python

'''bipartite soft matching: link every src token to its most similar dst token and keep the r strongest links'''

import logging
import math
from dataclasses import dataclass

import numpy as np

from pyvidtome.utils.errors import ConsistencyError, EmptySetError, ParameterError
from pyvidtome.utils.tokens import cosine_similarity, similarity_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MatchMap:
    '''r directed edges src -> dst, ordered by non-increasing similarity'''
    src_idx: np.ndarray
    dst_idx: np.ndarray
    similarities: np.ndarray
    src_size: int
    dst_size: int

    def __post_init__(self):
        src_idx = np.asarray(self.src_idx, dtype=np.int64).ravel()
        dst_idx = np.asarray(self.dst_idx, dtype=np.int64).ravel()
        sims = np.asarray(self.similarities, dtype=np.float64).ravel()
        if not src_idx.size == dst_idx.size == sims.size:
            raise ConsistencyError('ERROR: <src_idx>, <dst_idx> and <similarities> of a MatchMap must have equal length !')
        if src_idx.size > self.src_size:
            raise ConsistencyError('ERROR: a MatchMap cannot hold more edges ('+str(src_idx.size)+') than src tokens ('+str(self.src_size)+') !')
        if src_idx.size:
            if src_idx.min() < 0 or src_idx.max() >= self.src_size or dst_idx.min() < 0 or dst_idx.max() >= self.dst_size:
                raise ConsistencyError('ERROR: MatchMap edge index out of range !')
            if np.unique(src_idx).size != src_idx.size:
                raise ConsistencyError('ERROR: a src token may merge into at most one dst token !')
            if np.any(np.diff(sims) > 0):
                raise ConsistencyError('ERROR: MatchMap similarities must be sorted non-increasing !')
        for name, arr in (('src_idx', src_idx), ('dst_idx', dst_idx), ('similarities', sims)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def empty(cls, src_size, dst_size):
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0), src_size, dst_size)

    @property
    def r(self):
        return int(self.src_idx.size)

    @property
    def edges(self):
        return list(zip(self.src_idx.tolist(), self.dst_idx.tolist()))

    def same_edges(self, other):
        return (self.src_size == other.src_size and self.dst_size == other.dst_size
                and np.array_equal(self.src_idx, other.src_idx) and np.array_equal(self.dst_idx, other.dst_idx))


def _check_budget(r, src_size, dst_size):
    if dst_size < 1:
        raise EmptySetError('ERROR: the dst token set is empty !')
    if r < 0 or r > src_size:
        raise ParameterError('ERROR: <r> = '+str(r)+' must lie in [0, '+str(src_size)+'] (the number of src tokens) !')


def keep_strongest(node_max, node_idx, r, dst_size):
    '''Keeps the r candidate edges with the largest similarity.

    Ties at the cut are resolved in favour of the smallest src index, and the kept
    edges are returned ordered by (similarity descending, src index ascending).
    '''
    src_size = node_max.size
    _check_budget(r, src_size, dst_size)
    if r == 0:
        return MatchMap.empty(src_size, dst_size)
    if r < src_size:
        # value of the r-th largest similarity
        cut = np.partition(node_max, src_size - r)[src_size - r]
        above = np.flatnonzero(node_max > cut)
        at_cut = np.flatnonzero(node_max == cut)[:r - above.size]
        kept = np.concatenate([above, at_cut])
    else:
        kept = np.arange(src_size)
    order = np.lexsort((kept, -node_max[kept]))
    kept = kept[order]
    return MatchMap(kept, node_idx[kept], node_max[kept], src_size, dst_size)


def match_scores(scores, r):
    '''bipartite soft matching on a precomputed S x D similarity matrix'''
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[1] < 1:
        raise EmptySetError('ERROR: the dst token set is empty !')
    _check_budget(r, scores.shape[0], scores.shape[1])
    if scores.shape[0] == 0:
        return MatchMap.empty(0, scores.shape[1])
    node_idx = np.argmax(scores, axis=1)  # first maximum, i.e. smallest dst index on ties
    node_max = scores[np.arange(scores.shape[0]), node_idx]
    return keep_strongest(node_max, node_idx, r, scores.shape[1])


def match(src, dst, r):
    '''E = Match(src, dst, r) on raw token values'''
    src = np.asarray(src)
    dst = np.asarray(dst)
    if dst.ndim < 2 or dst.shape[0] == 0:
        raise EmptySetError('ERROR: the dst token set is empty !')
    if r > len(src):
        raise ParameterError('ERROR: <r> = '+str(r)+' exceeds the number of src tokens ('+str(len(src))+') !')
    if len(src) == 0:
        return MatchMap.empty(0, len(dst))
    match_map = match_scores(similarity_matrix(src, dst), r)
    logger.debug('Matched '+str(match_map.r)+' of '+str(len(src))+' src tokens onto '+str(len(dst))+' dst tokens.')
    return match_map


def match_oracle(src, dst, r):
    '''Reference matching by full enumeration: every src/dst pair scored with its own
    cosine_similarity() call, first-maximum scan per src token, then a complete stable
    sort of all candidate edges.'''
    if len(dst) == 0:
        raise EmptySetError('ERROR: the dst token set is empty !')
    if r < 0 or r > len(src):
        raise ParameterError('ERROR: <r> = '+str(r)+' must lie in [0, '+str(len(src))+'] !')
    if len(src) == 0 or r == 0:
        return MatchMap.empty(len(src), len(dst))
    candidates = []
    for i, a in enumerate(src):
        best, best_j = -math.inf, 0
        for j, b in enumerate(dst):
            score = cosine_similarity(a, b)
            if score > best:
                best, best_j = score, j
        candidates.append((best, i, best_j))
    candidates.sort(key=lambda edge: (-edge[0], edge[1]))
    kept = candidates[:r]
    return MatchMap([e[1] for e in kept], [e[2] for e in kept], [e[0] for e in kept], len(src), len(dst))
