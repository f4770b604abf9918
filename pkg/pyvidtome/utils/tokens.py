#!/usr/bin/env python

'''token containers, cosine similarity primitives and the seeded random stream used across pyvidtome'''

import math
from dataclasses import dataclass

import numpy as np

from pyvidtome.utils.errors import DimensionError, EmptySetError, ParameterError

EPSILON = 1e-12  # norms below this value make a token degenerate (similarity 0 to everything)
RATIO_TOLERANCE = 1e-9  # absorbs binary representation error in ratio * count before flooring
MAX_SEED = 2**64 - 1


@dataclass(frozen=True, eq=False)
class TokenMatrix:
    '''Immutable frame-indexed stack of token rows with shape (frames, tokens_per_frame, channels).

    Values are always stored as 32-bit floats. The denoising harness keeps its float64
    tokens as plain arrays, which every merging operation accepts as well.
    '''
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise DimensionError('ERROR: <data> of a TokenMatrix must be 3D (frames x tokens x channels), got '+str(data.ndim)+'D !')
        if min(data.shape) < 1:
            raise DimensionError('ERROR: all dimensions of a TokenMatrix must be >= 1, got '+str(data.shape)+' !')
        if not np.all(np.isfinite(data)):
            raise ParameterError('ERROR: a TokenMatrix must only hold finite values !')
        with np.errstate(over='ignore'):
            data = np.array(data, dtype=np.float32, copy=True)
        if not np.all(np.isfinite(data)):
            raise ParameterError('ERROR: TokenMatrix values exceed the 32-bit float range !')
        data.setflags(write=False)
        object.__setattr__(self, 'data', data)

    @classmethod
    def from_flat(cls, values, frames, tokens_per_frame, channels):
        '''builds a TokenMatrix from a row-major (frame, token, channel) sequence of values'''
        values = np.asarray(values, dtype=np.float32).ravel()
        if values.size != frames*tokens_per_frame*channels:
            raise DimensionError('ERROR: '+str(values.size)+' values cannot fill a '+str((frames, tokens_per_frame, channels))+' TokenMatrix !')
        return cls(values.reshape(frames, tokens_per_frame, channels))

    @property
    def frames(self):
        return self.data.shape[0]

    @property
    def tokens_per_frame(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]

    def frame(self, index):
        return self.data[index]

    def flatten(self):
        '''returns all tokens as a (frames * tokens_per_frame, channels) array, frame-major'''
        return self.data.reshape(-1, self.channels)


@dataclass(frozen=True)
class TokenIndex:
    frame: int
    token: int

    def check(self, matrix):
        if not (0 <= self.frame < matrix.frames and 0 <= self.token < matrix.tokens_per_frame):
            raise ParameterError('ERROR: '+str(self)+' lies outside a TokenMatrix of shape '+str(matrix.data.shape)+' !')
        return self

    def flat(self, matrix):
        self.check(matrix)
        return self.frame*matrix.tokens_per_frame + self.token


class SeededRng:
    '''Single-owner pseudo-random stream.

    The stream is numpy's PCG64 bit generator wrapped by numpy.random.Generator, so an
    identical seed gives an identical draw sequence on every platform. Independent child
    streams are derived with child(key), which does not consume draws from the parent.
    '''
    ALGORITHM = 'PCG64'

    def __init__(self, seed):
        seed = int(seed)
        if not 0 <= seed <= MAX_SEED:
            raise ParameterError('ERROR: <seed> must be a 64-bit unsigned integer, got '+str(seed)+' !')
        self.seed = seed
        self._generator = np.random.Generator(np.random.PCG64(seed))

    def child(self, key):
        key = int(key)
        state = np.random.SeedSequence(self.seed, spawn_key=(key,)).generate_state(1, dtype=np.uint64)
        return SeededRng(int(state[0]))

    def integers(self, low, high):
        '''uniform integer in [low, high)'''
        return int(self._generator.integers(low, high))

    def random(self):
        return float(self._generator.random())

    def permutation(self, n):
        return [int(i) for i in self._generator.permutation(n)]

    def subset(self, n, k):
        '''uniformly chosen k-subset of range(n), ascending'''
        return sorted(int(i) for i in self._generator.choice(n, size=k, replace=False))

    def uniform(self, low, high, size):
        return self._generator.uniform(low, high, size)

    def normal(self, size):
        return self._generator.standard_normal(size)

    def __repr__(self):
        return 'SeededRng(seed='+str(self.seed)+', algorithm='+self.ALGORITHM+')'


def ratio_to_count(ratio, count):
    '''converts a merging ratio into an absolute token count by flooring, clamped to [0, count]'''
    if not 0.0 <= ratio <= 1.0:
        raise ParameterError('ERROR: merging ratio must lie in [0, 1], got '+str(ratio)+' !')
    return max(0, min(int(count), int(math.floor(ratio*count + RATIO_TOLERANCE))))


def _as_rows(vectors, name):
    rows = np.asarray(vectors, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[np.newaxis, :]
    if rows.ndim != 2:
        raise DimensionError('ERROR: <'+name+'> must be a list of token vectors !')
    if rows.shape[0] == 0:
        raise EmptySetError('ERROR: <'+name+'> is empty !')
    return rows


def cosine_similarity(a, b):
    '''cosine similarity of two token vectors, accumulated in float64; 0 for degenerate (near zero-norm) vectors'''
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise DimensionError('ERROR: token lengths differ ('+str(a.size)+' vs '+str(b.size)+') in cosine_similarity() !')
    norm_a = math.sqrt(float(np.dot(a, a)))
    norm_b = math.sqrt(float(np.dot(b, b)))
    if norm_a < EPSILON or norm_b < EPSILON:
        return 0.0
    return min(1.0, max(-1.0, float(np.dot(a, b))/(norm_a*norm_b)))


def similarity_matrix(src, dst):
    '''S x D matrix of pair-wise cosine similarities between the src and dst token sets.

    Each entry is dot(a, b)/(|a|*|b|) like cosine_similarity(), so equal pairs get equal scores.
    '''
    src = _as_rows(src, 'src')
    dst = _as_rows(dst, 'dst')
    if src.shape[1] != dst.shape[1]:
        raise DimensionError('ERROR: src tokens have '+str(src.shape[1])+' channels but dst tokens have '+str(dst.shape[1])+' !')
    src_norms = np.sqrt(np.einsum('ij,ij->i', src, src))
    dst_norms = np.sqrt(np.einsum('ij,ij->i', dst, dst))
    degenerate = (src_norms < EPSILON)[:, np.newaxis] | (dst_norms < EPSILON)[np.newaxis, :]
    scale = np.where(degenerate, 1.0, np.outer(src_norms, dst_norms))
    scores = (src @ dst.T)/scale
    scores[degenerate] = 0.0
    return np.clip(scores, -1.0, 1.0)
