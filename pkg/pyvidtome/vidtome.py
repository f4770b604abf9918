#!/usr/bin/env python

'''Video token merging around self-attention.

Local merging folds the tokens of all frames in a chunk into one randomly chosen target
frame. Global merging then combines the locally merged tokens with a set of global tokens
carried across the chunks of one denoising iteration. After attention the output is
unmerged in two stages (global map first, local map second) back to B x N tokens.

Two alternative local strategies exist for comparison: merging over the concatenated
chunk tokens with randomly drawn dst tokens, and merging inside every frame separately.
Both merge the same number of tokens as the target-frame strategy whenever they can.
'''

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from pyvidtome.matching import MatchMap, keep_strongest, match
from pyvidtome.merge import MergedTokens, MergeMode, merge_tokens, unmerge_tokens
from pyvidtome.utils.errors import ConsistencyError, DimensionError, ParameterError
from pyvidtome.utils.tokens import TokenMatrix, ratio_to_count, similarity_matrix

logger = logging.getLogger(__name__)


class LocalStrategy(str, Enum):
    TARGET_FRAME = 'target-frame'  # dst = every token of one random frame of the chunk
    CONCATENATED = 'concatenated'  # dst = N random tokens drawn from the whole chunk
    PER_FRAME = 'per-frame'        # dst = random tokens of each frame, edges stay inside their frame


@dataclass(frozen=True)
class VidToMeConfig:
    chunk_size: int = 4
    local_ratio: float = 0.9
    global_ratio: float = 0.8
    merge_to_local_probability: float = 0.5
    merge_mode: MergeMode = MergeMode.REPLACE
    seed: int = 0
    global_merge: bool = True
    local_strategy: LocalStrategy = LocalStrategy.TARGET_FRAME

    def __post_init__(self):
        if int(self.chunk_size) != self.chunk_size or self.chunk_size < 1:
            raise ParameterError('ERROR: <chunk_size> must be an integer >= 1, got '+str(self.chunk_size)+' !')
        for name in ('local_ratio', 'global_ratio', 'merge_to_local_probability'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ParameterError('ERROR: <'+name+'> must lie in [0, 1], got '+str(value)+' !')
        object.__setattr__(self, 'merge_mode', MergeMode(self.merge_mode))
        if self.local_strategy not in [s.value for s in LocalStrategy]:
            raise ParameterError('ERROR: unknown <local_strategy> '+repr(self.local_strategy)+' !')
        object.__setattr__(self, 'local_strategy', LocalStrategy(self.local_strategy))

    @property
    def merging_active(self):
        '''False when there is nothing to merge; attention sites then run per frame'''
        if self.chunk_size == 1:
            return False
        return self.local_ratio > 0 or (self.global_merge and self.global_ratio > 0)


@dataclass(frozen=True)
class GlobalTokenState:
    '''global tokens T_g of one attention site, valid within a single denoising iteration'''
    tokens: Optional[np.ndarray] = None
    iteration: int = 0

    @classmethod
    def reset(cls, iteration):
        return cls(None, iteration)

    @property
    def is_empty(self):
        return self.tokens is None or len(self.tokens) == 0

    def __len__(self):
        return 0 if self.tokens is None else int(len(self.tokens))


@dataclass(frozen=True, eq=False)
class MergeRecord:
    '''Everything needed to invert the local and the global merge of one chunk.

    src_positions and dst_positions are the frame-major flat indices (frame * N + token)
    of the local src and dst sets. target_frame is None unless the target-frame strategy
    was used.
    '''
    frames: int
    tokens_per_frame: int
    target_frame: Optional[int]
    local: MergedTokens
    src_positions: np.ndarray
    dst_positions: np.ndarray
    global_: Optional[MergedTokens] = None
    global_is_src: Optional[bool] = None  # True: src = global / dst = local, False: src = local / dst = global

    @property
    def local_map(self):
        return self.local.match_map

    @property
    def global_map(self):
        return None if self.global_ is None else self.global_.match_map

    @property
    def local_count(self):
        return len(self.local)

    @property
    def merged_count(self):
        return self.local_count if self.global_ is None else len(self.global_)


def _chunk_rows(chunk):
    data = chunk.data if isinstance(chunk, TokenMatrix) else np.asarray(chunk)
    if data.ndim != 3 or min(data.shape) < 1:
        raise DimensionError('ERROR: a chunk must hold B x N x C tokens, got shape '+str(data.shape)+' !')
    return data


def _complement(size, positions):
    keep = np.ones(size, dtype=bool)
    keep[positions] = False
    return np.flatnonzero(keep)


def _per_frame_match(rows, frames, n_tokens, r, rng):
    '''ToMe inside every frame: a quarter of each frame (at least one token) is dst and the
    budget r is spread evenly over the frames, capped by their src counts'''
    dst_per_frame = max(1, n_tokens//4)
    src_per_frame = n_tokens - dst_per_frame
    budgets = [min(src_per_frame, r//frames + (f < r % frames)) for f in range(frames)]
    if sum(budgets) < r:
        logger.debug('Per-frame local merging can only merge '+str(sum(budgets))+' of '+str(r)+' tokens.')

    src_positions, dst_positions, src_idx, dst_idx, similarities = [], [], [], [], []
    for f in range(frames):
        offset = f*n_tokens
        dst_f = np.asarray(rng.subset(n_tokens, dst_per_frame), dtype=np.int64) + offset
        src_f = _complement(n_tokens, dst_f - offset) + offset
        frame_map = match(rows[src_f], rows[dst_f], budgets[f])
        src_idx.append(frame_map.src_idx + f*src_per_frame)
        dst_idx.append(frame_map.dst_idx + f*dst_per_frame)
        similarities.append(frame_map.similarities)
        src_positions.append(src_f)
        dst_positions.append(dst_f)

    src_idx, dst_idx, similarities = (np.concatenate(a) for a in (src_idx, dst_idx, similarities))
    order = np.lexsort((src_idx, -similarities))
    local_map = MatchMap(src_idx[order], dst_idx[order], similarities[order],
                         frames*src_per_frame, frames*dst_per_frame)
    return np.concatenate(src_positions), np.concatenate(dst_positions), local_map


def local_merge(chunk, cfg, rng):
    '''Merges the tokens of a B-frame chunk (TokenMatrix or B x N x C array) following
    cfg.local_strategy; r = floor(local_ratio * (B - 1) * N) src tokens are merged.'''
    data = _chunk_rows(chunk)
    frames, n_tokens, channels = data.shape
    rows = data.reshape(-1, channels)
    if frames == 1:
        empty = MatchMap.empty(0, n_tokens)
        local = merge_tokens(rows[:0], rows, empty, cfg.merge_mode)
        return local.tokens, MergeRecord(1, n_tokens, 0, local, np.zeros(0, np.int64), np.arange(n_tokens))

    r = ratio_to_count(cfg.local_ratio, (frames - 1)*n_tokens)
    target = None
    if cfg.local_strategy is LocalStrategy.PER_FRAME:
        src_positions, dst_positions, local_map = _per_frame_match(rows, frames, n_tokens, r, rng)
    else:
        if cfg.local_strategy is LocalStrategy.TARGET_FRAME:
            target = rng.integers(0, frames)
            dst_positions = target*n_tokens + np.arange(n_tokens)
        else:
            dst_positions = np.asarray(rng.subset(frames*n_tokens, n_tokens), dtype=np.int64)
        src_positions = _complement(frames*n_tokens, dst_positions)  # frame-major
        local_map = match(rows[src_positions], rows[dst_positions], r)

    local = merge_tokens(rows[src_positions], rows[dst_positions], local_map, cfg.merge_mode)
    logger.debug('Local merge ('+cfg.local_strategy.value+') of '+str(frames)+' frames: '
                 +str(frames*n_tokens)+' -> '+str(len(local))+' tokens.')
    return local.tokens, MergeRecord(frames, n_tokens, target, local, src_positions, dst_positions)


def global_merge(local, state, cfg, rng, record):
    '''Merges the locally merged tokens with the global tokens of <state>.

    Returns the merged sequence, the record extended by E_g and the updated state. The first
    chunk of an iteration initialises the state with its local tokens.
    '''
    local = np.asarray(local)
    if len(local) != record.local_count:
        raise ConsistencyError('ERROR: <local> holds '+str(len(local))+' tokens but the record expects '+str(record.local_count)+' !')
    if not cfg.global_merge:
        return local, record, state
    if state.is_empty:
        return local, record, GlobalTokenState(local.copy(), state.iteration)
    if state.tokens.shape[1:] != local.shape[1:]:
        raise ConsistencyError('ERROR: global tokens and local tokens have different channel counts !')

    global_is_src = rng.random() < cfg.merge_to_local_probability
    src, dst = (state.tokens, local) if global_is_src else (local, state.tokens)
    r = ratio_to_count(cfg.global_ratio, len(src))
    global_map = match(src, dst, r)
    merged = merge_tokens(src, dst, global_map, cfg.merge_mode)

    # T_g <- the local part of U(T_gm, E_g)
    src_u, dst_u = unmerge_tokens(merged)
    new_local = dst_u if global_is_src else src_u
    logger.debug('Global merge ('+('global -> local' if global_is_src else 'local -> global')+'): '
                 +str(len(src)+len(dst))+' -> '+str(len(merged))+' tokens.')
    record = replace(record, global_=merged, global_is_src=global_is_src)
    return merged.tokens, record, GlobalTokenState(new_local, state.iteration)


def unmerge_chunk(attention_output, record):
    '''Two-stage unmerge of the attention output back to a B x N x C array.

    The dtype of <attention_output> is kept; unmerge_all() wraps the result in a TokenMatrix.
    '''
    output = np.asarray(attention_output)
    if output.ndim != 2 or output.shape[0] != record.merged_count:
        raise ConsistencyError('ERROR: attention output holds '+str(output.shape[0] if output.ndim else 0)
                               +' tokens but '+str(record.merged_count)+' were merged !')
    if record.global_ is not None:
        src_u, dst_u = unmerge_tokens(record.global_, output)
        local = dst_u if record.global_is_src else src_u
    else:
        local = output
    src, dst = unmerge_tokens(record.local, local)

    frames, n_tokens = record.frames, record.tokens_per_frame
    rows = np.empty((frames*n_tokens, output.shape[1]), dtype=output.dtype)
    rows[record.src_positions] = src
    rows[record.dst_positions] = dst
    return rows.reshape(frames, n_tokens, output.shape[1])


def unmerge_all(attention_output, record):
    '''two-stage unmerge of the attention output back to a B x N x C TokenMatrix'''
    return TokenMatrix(unmerge_chunk(attention_output, record))


def merged_token_count(frames, tokens_per_frame, local_ratio, global_ratio, first_chunk=False, global_merge=True):
    '''number of tokens reaching self-attention for a chunk of <frames> frames whose global state
    holds as many tokens as its own local merge (the steady state of an iteration). Exact for
    the target-frame and concatenated strategies; per-frame merging may fall short when a frame
    runs out of src tokens.'''
    local = frames*tokens_per_frame - ratio_to_count(local_ratio, (frames - 1)*tokens_per_frame)
    if first_chunk or not global_merge:
        return local
    return 2*local - ratio_to_count(global_ratio, local)


def match_shared(source_stream, edit_stream, r):
    '''One MatchMap for two streams (src, dst) of equal set sizes.

    For each src token the winning edge is the one with the larger similarity in either
    stream (the source stream wins ties); the top-r cut uses that winning similarity.
    '''
    (src_a, dst_a), (src_b, dst_b) = source_stream, edit_stream
    if len(src_a) != len(src_b) or len(dst_a) != len(dst_b):
        raise ConsistencyError('ERROR: source and edit streams must have identical src/dst set sizes !')
    if r == 0:
        return MatchMap.empty(len(src_a), len(dst_a))
    scores_a = similarity_matrix(src_a, dst_a)
    scores_b = similarity_matrix(src_b, dst_b)
    rows = np.arange(scores_a.shape[0])
    idx_a, idx_b = np.argmax(scores_a, axis=1), np.argmax(scores_b, axis=1)
    max_a, max_b = scores_a[rows, idx_a], scores_b[rows, idx_b]
    use_b = max_b > max_a
    node_idx = np.where(use_b, idx_b, idx_a)
    node_max = np.where(use_b, max_b, max_a)
    return keep_strongest(node_max, node_idx, r, scores_a.shape[1])
