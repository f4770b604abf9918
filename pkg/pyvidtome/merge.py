#!/usr/bin/env python

'''token merging M(T, E) and unmerging U(T_m, E) along a MatchMap'''

from dataclasses import dataclass
from enum import Enum

import numpy as np

from pyvidtome.utils.errors import ConsistencyError


class MergeMode(str, Enum):
    REPLACE = 'replace'  # the dst token value is kept as the merged value
    MEAN = 'mean'        # dst becomes the mean of itself and every src merged into it


@dataclass(frozen=True, eq=False)
class MergedTokens:
    '''Merged token sequence laid out as [surviving src tokens in original order, dst tokens in original order].

    src_order holds the original indices of the surviving src tokens.
    '''
    tokens: np.ndarray
    match_map: object
    src_order: np.ndarray

    @property
    def unmerged_count(self):
        return int(self.src_order.size)

    def __len__(self):
        return int(self.tokens.shape[0])


def merge_tokens(src, dst, match_map, mode=MergeMode.REPLACE):
    '''merges src tokens into their dst targets; returns S + D - r tokens'''
    src = np.asarray(src)
    dst = np.asarray(dst)
    mode = MergeMode(mode)
    if src.shape[0] != match_map.src_size or dst.shape[0] != match_map.dst_size:
        raise ConsistencyError('ERROR: the MatchMap was built for '+str(match_map.src_size)+' src / '+str(match_map.dst_size)
                               +' dst tokens but '+str(src.shape[0])+' / '+str(dst.shape[0])+' were passed !')
    if src.shape[0] and dst.shape[0] and src.shape[1:] != dst.shape[1:]:
        raise ConsistencyError('ERROR: src and dst tokens have different channel counts !')

    keep = np.ones(match_map.src_size, dtype=bool)
    keep[match_map.src_idx] = False
    src_order = np.flatnonzero(keep)

    if mode is MergeMode.MEAN and match_map.r:
        sums = dst.astype(np.float64)
        counts = np.ones(dst.shape[0])
        np.add.at(sums, match_map.dst_idx, src[match_map.src_idx].astype(np.float64))
        np.add.at(counts, match_map.dst_idx, 1.0)
        merged_dst = (sums/counts[:, np.newaxis]).astype(dst.dtype)
    else:
        merged_dst = dst.copy()

    tokens = np.concatenate([src[src_order], merged_dst], axis=0)
    return MergedTokens(tokens, match_map, src_order)


def unmerge_tokens(merged, values=None):
    '''Restores (src, dst) with their original counts and ordering.

    values replaces merged.tokens, e.g. the self-attention output computed on the merged
    sequence. Every merged-away src token receives the current value of its dst target.
    '''
    values = merged.tokens if values is None else np.asarray(values)
    match_map = merged.match_map
    if values.shape[0] != len(merged):
        raise ConsistencyError('ERROR: expected '+str(len(merged))+' merged tokens, got '+str(values.shape[0])+' !')
    if merged.unmerged_count + match_map.r != match_map.src_size or len(merged) != match_map.src_size + match_map.dst_size - match_map.r:
        raise ConsistencyError('ERROR: merge provenance is inconsistent with its MatchMap !')
    if merged.unmerged_count and (merged.src_order.min() < 0 or merged.src_order.max() >= match_map.src_size):
        raise ConsistencyError('ERROR: surviving src index out of range !')

    dst = values[merged.unmerged_count:]
    src = np.empty((match_map.src_size,) + values.shape[1:], dtype=values.dtype)
    src[merged.src_order] = values[:merged.unmerged_count]
    src[match_map.src_idx] = dst[match_map.dst_idx]
    return src, dst.copy()
