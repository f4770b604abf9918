#!/usr/bin/env python

'''Attention cost of per-frame, extended (joint) and merged self-attention over a (B, p, N) grid.

per-frame: B sequences of N tokens; extended: one sequence of B*N tokens; merged: one
sequence of the tokens left after local and global merging of a chunk in the steady state
of an iteration. Rows for N <= instrumented_max_tokens are cross-checked against the
counts measured while actually executing the three modes on random tokens.
'''

import logging
from pathlib import Path

import pandas as pd

from pyvidtome.attention import AttentionWeights, CostCounter, cost_of, self_attention
from pyvidtome.utils.tokens import SeededRng, TokenMatrix
from pyvidtome.vidtome import GlobalTokenState, VidToMeConfig, global_merge, local_merge, merged_token_count

logger = logging.getLogger(__name__)

MODES = ('per-frame', 'extended', 'merged')


def analytic_lengths(chunk_size, ratio, tokens):
    '''sequence lengths handed to self-attention by each mode'''
    cfg = VidToMeConfig(chunk_size=chunk_size, local_ratio=ratio, global_ratio=ratio)
    per_frame = [tokens]*chunk_size
    if cfg.merging_active:
        merged = [merged_token_count(chunk_size, tokens, ratio, ratio)]
    else:
        merged = per_frame
    return {'per-frame': per_frame, 'extended': [chunk_size*tokens], 'merged': merged}


def instrumented_costs(chunk_size, ratio, tokens, channels, head_count, rng):
    '''runs the three modes on random tokens and returns the measured CostReports'''
    cfg = VidToMeConfig(chunk_size=chunk_size, local_ratio=ratio, global_ratio=ratio)
    weights = AttentionWeights.from_seed(channels, head_count, rng.child(0).seed)
    chunk = TokenMatrix(rng.normal((chunk_size, tokens, channels)))
    counters = {mode: CostCounter() for mode in MODES}

    for frame in chunk.data:
        self_attention(frame, weights, counters['per-frame'])
    self_attention(chunk.flatten(), weights, counters['extended'])
    if cfg.merging_active:
        # a previous chunk of the same size fills the global state
        previous = TokenMatrix(rng.normal((chunk_size, tokens, channels)))
        previous_local, record = local_merge(previous, cfg, rng)
        _, _, state = global_merge(previous_local, GlobalTokenState.reset(0), cfg, rng, record)
        local, record = local_merge(chunk, cfg, rng)
        merged, record, state = global_merge(local, state, cfg, rng, record)
        self_attention(merged, weights, counters['merged'])
    else:
        for frame in chunk.data:
            self_attention(frame, weights, counters['merged'])
    return {mode: counter.total for mode, counter in counters.items()}


def run_bench(cfg):
    '''one row per (B, p, N, mode) with analytic costs, ratios and the instrumented cross-check'''
    rng = SeededRng(cfg.seed)
    rows = []
    for chunk_size in cfg.chunk_sizes:
        for ratio in cfg.ratios:
            for tokens in cfg.tokens:
                lengths = analytic_lengths(chunk_size, ratio, tokens)
                reports = {mode: cost_of(lengths[mode], cfg.token_channels, cfg.head_count) for mode in MODES}
                single = cost_of([tokens], cfg.token_channels, cfg.head_count)
                measured = None
                if tokens <= cfg.instrumented_max_tokens:
                    measured = instrumented_costs(chunk_size, ratio, tokens, cfg.token_channels, cfg.head_count,
                                                  rng.child(len(rows)))
                for mode in MODES:
                    report = reports[mode]
                    row = {
                        'chunk_size': chunk_size,
                        'ratio': ratio,
                        'tokens': tokens,
                        'mode': mode,
                        'attended_tokens': sum(lengths[mode]),
                        'score_entries': report.score_entries,
                        'macs': report.macs,
                        'peak_buffer': report.peak_buffer,
                        'score_ratio_vs_per_frame': report.score_entries/reports['per-frame'].score_entries,
                        'score_ratio_vs_single_frame': report.score_entries/single.score_entries,
                        'instrumented_match': None if measured is None else measured[mode] == report,
                    }
                    if row['instrumented_match'] is False:
                        logger.error('Instrumented and analytic costs differ for B = '+str(chunk_size)+', p = '
                                     +str(ratio)+', N = '+str(tokens)+', mode '+mode+': '+str(measured[mode])+' vs '+str(report))
                    rows.append(row)
    logger.info('Benchmark grid of '+str(len(rows)//len(MODES))+' points evaluated.')
    return pd.DataFrame(rows)


def format_table(table):
    return table.to_string(index=False)


def write_csv(table, path):
    path = Path(path)
    table.to_csv(path, index=False)
    logger.info('Benchmark table written to '+str(path))
    return path


def read_csv(path):
    return pd.read_csv(path, float_precision='round_trip')
