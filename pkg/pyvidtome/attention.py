#!/usr/bin/env python

'''reference multi-head self-attention and its cost accounting'''

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from pyvidtome.utils.errors import DimensionError, EmptySetError, NumericError, ParameterError
from pyvidtome.utils.tokens import SeededRng

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AttentionWeights:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    head_count: int = 1

    def __post_init__(self):
        channels = np.asarray(self.wq).shape[0]
        for name in ('wq', 'wk', 'wv', 'wo'):
            matrix = np.asarray(getattr(self, name), dtype=np.float64)
            if matrix.shape != (channels, channels):
                raise DimensionError('ERROR: <'+name+'> must be a '+str(channels)+' x '+str(channels)+' matrix, got '+str(matrix.shape)+' !')
            if not np.all(np.isfinite(matrix)):
                raise ParameterError('ERROR: <'+name+'> holds non-finite entries !')
            matrix.setflags(write=False)
            object.__setattr__(self, name, matrix)
        if self.head_count < 1 or channels % self.head_count:
            raise ParameterError('ERROR: <head_count> = '+str(self.head_count)+' must be >= 1 and divide the '+str(channels)+' channels !')

    @property
    def channels(self):
        return self.wq.shape[0]

    @classmethod
    def from_seed(cls, channels, head_count=1, seed=0, qk_gain=1.0, value_gain=1.0, value_identity=0.0):
        '''Uniform(-1, 1) / sqrt(C) entries drawn from a seeded stream.

        qk_gain scales the query/key projections (smaller values flatten the softmax),
        value_gain scales the random part of the value and output projections and
        value_identity adds a multiple of the identity to them.
        '''
        rng = SeededRng(seed)
        scale = 1.0/math.sqrt(channels)
        wq, wk, wv, wo = (rng.uniform(-1.0, 1.0, (channels, channels))*scale for _ in range(4))
        eye = np.eye(channels)
        return cls(wq*qk_gain, wk*qk_gain, wv*value_gain + value_identity*eye, wo*value_gain + value_identity*eye,
                   head_count)


@dataclass(frozen=True)
class CostReport:
    score_entries: int = 0
    macs: int = 0
    peak_buffer: int = 0

    def __add__(self, other):
        return CostReport(self.score_entries + other.score_entries, self.macs + other.macs,
                          max(self.peak_buffer, other.peak_buffer))

    def as_dict(self):
        return {'score_entries': self.score_entries, 'macs': self.macs, 'peak_buffer': self.peak_buffer}


class CostCounter:
    '''accumulates the costs measured inside self_attention calls'''

    def __init__(self):
        self.total = CostReport()
        self.calls = 0
        self.sequence_lengths = []

    def record(self, length, report):
        self.total = self.total + report
        self.calls += 1
        self.sequence_lengths.append(int(length))


def sequence_cost(length, channels, head_count):
    length, channels, head_count = int(length), int(channels), int(head_count)
    return CostReport(
        score_entries=head_count*length*length,
        macs=4*length*channels*channels + 2*length*length*channels,
        peak_buffer=4*length*channels + head_count*length*length,
    )


def cost_of(batch_shape, channels, head_count=1):
    '''analytic cost of running self-attention on each sequence length in <batch_shape>'''
    if any(length < 1 for length in batch_shape):
        raise ParameterError('ERROR: all sequence lengths in <batch_shape> must be >= 1 !')
    total = CostReport()
    for length in batch_shape:
        total = total + sequence_cost(length, channels, head_count)
    return total


def _check_finite(array, step):
    if not np.all(np.isfinite(array)):
        raise NumericError(step)


def self_attention(tokens, weights, counter=None, return_probs=False):
    '''softmax(Q K^T / sqrt(C/h)) V per head, heads concatenated and projected by wo'''
    x = np.asarray(tokens)
    if x.ndim != 2 or x.shape[0] < 1:
        raise EmptySetError('ERROR: self_attention() needs a non-empty (L x C) token sequence !')
    length, channels = x.shape
    if channels != weights.channels:
        raise DimensionError('ERROR: tokens have '+str(channels)+' channels but the weights expect '+str(weights.channels)+' !')
    heads = weights.head_count
    head_dim = channels//heads
    x64 = x.astype(np.float64)

    q = (x64 @ weights.wq).reshape(length, heads, head_dim).transpose(1, 0, 2)
    k = (x64 @ weights.wk).reshape(length, heads, head_dim).transpose(1, 0, 2)
    v = (x64 @ weights.wv).reshape(length, heads, head_dim).transpose(1, 0, 2)
    scores = q @ k.transpose(0, 2, 1)/math.sqrt(head_dim)
    _check_finite(scores, 'scores')
    probs = softmax(scores, axis=-1)
    _check_finite(probs, 'softmax')
    attended = (probs @ v).transpose(1, 0, 2).reshape(length, channels)
    out = attended @ weights.wo
    _check_finite(out, 'output')

    if counter is not None:
        # measured from the arrays of this call
        projection_macs = (q.size + k.size + v.size + out.size)*channels
        product_macs = scores.size*head_dim + probs.size*head_dim
        counter.record(length, CostReport(int(scores.size), int(projection_macs + product_macs),
                                          int(q.size + k.size + v.size + scores.size + attended.size)))

    out = out.astype(x.dtype) if x.dtype in (np.float32, np.float64) else out
    return (out, probs) if return_probs else out
