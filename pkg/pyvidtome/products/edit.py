#!/usr/bin/env python

'''End-to-end video edit: load or synthesise source latents, invert them to noise, generate the
edited video with token merging and collect the run metrics.'''

import json
import logging
import time
from pathlib import Path

import numpy as np
import psutil

from pyvidtome.attention import CostCounter
from pyvidtome.harness import (AttentionMode, NoiseSchedule, ToyDenoiser, VideoLatents, endpoint_distance, generate_video,
                               invert_video, synthetic_video, temporal_variance)
from pyvidtome.merge import MergeMode
from pyvidtome.scheduler import OrderPolicy
from pyvidtome.utils.errors import ConfigError
from pyvidtome.utils.latent_io import read_latents, write_latents
from pyvidtome.utils.mapping import attention_modes, local_strategies
from pyvidtome.utils.tokens import SeededRng
from pyvidtome.vidtome import VidToMeConfig

logger = logging.getLogger(__name__)


def merge_config(cfg):
    return VidToMeConfig(
        chunk_size=cfg.chunk_size,
        local_ratio=cfg.local_ratio,
        global_ratio=cfg.global_ratio,
        merge_to_local_probability=cfg.merge_to_local_probability,
        merge_mode=MergeMode(cfg.merge_mode),
        seed=cfg.seed,
        global_merge=cfg.global_merge,
        local_strategy=cfg.local_strategy,
    )


def order_policy(cfg):
    if cfg.order_policy == 'mixed':
        return OrderPolicy.mixed(cfg.mixed_fraction)
    return OrderPolicy(cfg.order_policy)


def noise_schedule(cfg):
    if cfg.alphas is not None:
        return NoiseSchedule(tuple(cfg.alphas))
    return NoiseSchedule.linear(cfg.steps)


def attention_mode(cfg, vcfg):
    '''merged attention with nothing to merge, or <merging> switched off, is the per-frame baseline'''
    if not cfg.merging:
        return AttentionMode.PER_FRAME
    mode = AttentionMode(cfg.attention_mode)
    if mode is AttentionMode.MERGED and not vcfg.merging_active:
        return AttentionMode.PER_FRAME
    return mode


def load_source(cfg):
    if cfg.input is not None:
        data = read_latents(cfg.input)
        logger.info('Source latents of shape '+str(data.shape)+' read from '+str(cfg.input))
        return VideoLatents(data.astype(np.float64))
    return synthetic_video(cfg.synthetic, cfg.frames, cfg.height, cfg.width, cfg.latent_channels, cfg.seed,
                           cfg.drift, cfg.jitter)


def _merged_token_ratio(merge_stats, chunk_size):
    '''mean fraction of tokens reaching attention for full chunks merged against global tokens'''
    full = [merged/(frames*tokens) for _, frames, tokens, merged, with_global in merge_stats
            if frames == chunk_size and with_global]
    return float(np.mean(full)) if full else None


def edit_video(cfg):
    '''returns the edited VideoLatents and the metrics report of one run'''
    start = time.perf_counter()
    source = load_source(cfg)
    if source.data.shape[-1] > cfg.token_channels:
        raise ConfigError('ERROR: the source latents have '+str(source.data.shape[-1])+' channels, more than <token_channels> = '
                          +str(cfg.token_channels)+' !')
    vcfg = merge_config(cfg)
    schedule = noise_schedule(cfg)
    policy = order_policy(cfg)
    model = ToyDenoiser.from_seed(source.data.shape[-1], cfg.token_channels, cfg.head_count, cfg.site_flags,
                                  cfg.seed, cfg.x0_blend)
    attention = attention_mode(cfg, vcfg)
    mode = attention_modes[attention.value]['label']
    logger.info('Video editing of '+str(source.frames)+' frames over '+str(schedule.steps)+' steps in '+mode+' mode. '
                +attention_modes[attention.value]['msg']+' '+policy.describe())
    if attention is AttentionMode.MERGED:
        logger.info(local_strategies[vcfg.local_strategy.value]['msg'])

    rng = SeededRng(cfg.seed)
    inversion_counter = CostCounter()
    noisy = invert_video(source, model, schedule, vcfg, rng=rng.child(0), policy=policy,
                         mode=attention if cfg.merge_during_inversion else AttentionMode.PER_FRAME,
                         fixed_point_iterations=cfg.fixed_point_iterations, tolerance=cfg.fixed_point_tolerance,
                         counter=inversion_counter)
    counter = CostCounter()
    merge_stats = []
    edited = generate_video(noisy, model, schedule, vcfg, conditioning=model.edit_conditioning(cfg.edit_strength, cfg.seed),
                            rng=rng.child(1), policy=policy, mode=attention, counter=counter, merge_stats=merge_stats)

    report = {
        'mode': mode,
        'seed': cfg.seed,
        'frames': source.frames,
        'latent_shape': list(source.frame_shape),
        'steps': schedule.steps,
        'generation_cost': counter.total.as_dict(),
        'generation_attention_calls': counter.calls,
        'inversion_cost': inversion_counter.total.as_dict(),
        'merged_token_ratio': _merged_token_ratio(merge_stats, vcfg.chunk_size) if attention is AttentionMode.MERGED else None,
        'wall_time_s': time.perf_counter() - start,
        'rss_mb': psutil.Process().memory_info().rss/1024**2,
    }
    if source.frames >= 2:
        report['temporal_variance_source'] = temporal_variance(source)
        report['temporal_variance'] = temporal_variance(edited)
        report['endpoint_distance'] = endpoint_distance(edited)
    return edited, report


def write_outputs(cfg, edited, report):
    write_latents(cfg.output, edited.data)
    report_path = Path(cfg.report) if cfg.report is not None else Path(str(cfg.output)+'.report.json')
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True))
    logger.info('Run report written to '+str(report_path))
    return report_path
