#!/usr/bin/env python

'''Desk-scale video editing loop: DDIM inversion and generation over synthetic frame latents with
a deterministic toy denoiser whose attention sites are wrapped by video token merging.'''

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from tqdm import tqdm

from pyvidtome.attention import AttentionWeights, self_attention
from pyvidtome.scheduler import OrderPolicy, plan_chunks
from pyvidtome.utils.errors import ConsistencyError, DimensionError, ParameterError, ScheduleError
from pyvidtome.utils.mapping import merge_site_presets, synthetic_videos
from pyvidtome.utils.tokens import SeededRng
from pyvidtome.vidtome import GlobalTokenState, global_merge, local_merge, unmerge_chunk

logger = logging.getLogger(__name__)


class Direction(str, Enum):
    DENOISE = 'denoise'
    INVERT = 'invert'


class AttentionMode(str, Enum):
    PER_FRAME = 'per-frame'  # every frame attends to itself only
    EXTENDED = 'extended'    # all tokens of a chunk form one sequence
    MERGED = 'merged'        # local and global token merging around the joint sequence


@dataclass(frozen=True)
class NoiseSchedule:
    '''alphas[t-1] = alpha_t for t = 1..T; alpha_0 is 1 by definition'''
    alphas: tuple

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        if len(alphas) < 1:
            raise ScheduleError('ERROR: <alphas> must hold at least one value !')
        if any(not (0.0 < a <= 1.0) for a in alphas):
            raise ScheduleError('ERROR: all <alphas> must lie in (0, 1] !')
        if any(b >= a for a, b in zip(alphas[:-1], alphas[1:])):
            raise ScheduleError('ERROR: <alphas> must be strictly decreasing !')
        object.__setattr__(self, 'alphas', alphas)

    @classmethod
    def linear(cls, steps):
        '''alpha_t = 1 - t / (T + 1)'''
        if steps < 1:
            raise ScheduleError('ERROR: <steps> must be >= 1 !')
        return cls(tuple(1.0 - t/(steps + 1) for t in range(1, steps + 1)))

    @property
    def steps(self):
        return len(self.alphas)

    def alpha(self, t):
        if not 0 <= t <= self.steps:
            raise ScheduleError('ERROR: time step '+str(t)+' lies outside [0, '+str(self.steps)+'] !')
        return 1.0 if t == 0 else self.alphas[t - 1]


def ddim_step(z_t, noise_prediction, t, schedule, direction):
    '''deterministic DDIM update from t to t-1 (denoise) or t+1 (invert)'''
    direction = Direction(direction)
    if direction is Direction.DENOISE:
        if not 1 <= t <= schedule.steps:
            raise ScheduleError('ERROR: cannot denoise from time step '+str(t)+' !')
        t_next = t - 1
    else:
        if not 0 <= t < schedule.steps:
            raise ScheduleError('ERROR: cannot invert from time step '+str(t)+' !')
        t_next = t + 1
    alpha_t, alpha_next = schedule.alpha(t), schedule.alpha(t_next)
    if alpha_t <= 0 or alpha_next <= 0:
        raise ScheduleError('ERROR: alpha must be positive, got '+str(alpha_t)+' and '+str(alpha_next)+' !')
    x0_pred = (z_t - math.sqrt(1.0 - alpha_t)*noise_prediction)/math.sqrt(alpha_t)
    return math.sqrt(alpha_next)*x0_pred + math.sqrt(1.0 - alpha_next)*noise_prediction


@dataclass(frozen=True, eq=False)
class VideoLatents:
    '''n frames of H x W x C_lat latents'''
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 4 or min(data.shape) < 1:
            raise DimensionError('ERROR: video latents must have shape (n, H, W, C_lat), got '+str(data.shape)+' !')
        if not np.all(np.isfinite(data)):
            raise ParameterError('ERROR: video latents must be finite !')
        object.__setattr__(self, 'data', data)

    @property
    def frames(self):
        return self.data.shape[0]

    @property
    def frame_shape(self):
        return self.data.shape[1:]


@dataclass
class AttentionContext:
    '''attention mode and merging state of one model evaluation pass over the chunks of a denoising iteration'''
    cfg: object
    rng: SeededRng
    iteration: int
    mode: AttentionMode = AttentionMode.MERGED
    counter: object = None
    states: dict = field(default_factory=dict)
    merge_stats: list = field(default_factory=list)

    def state(self, site):
        return self.states.setdefault(site, GlobalTokenState.reset(self.iteration))

    def site_mode(self, merge_site):
        '''sites without the merge flag, and merged sites with nothing to merge, run per frame'''
        if not merge_site:
            return AttentionMode.PER_FRAME
        if self.mode is AttentionMode.MERGED and not self.cfg.merging_active:
            return AttentionMode.PER_FRAME
        return self.mode


@dataclass(frozen=True, eq=False)
class ToyDenoiser:
    '''Linear patch embedding, a stack of attention sites and a linear unembedding.

    The noise estimate corresponds to the clean estimate
    x0 = z + beta * sqrt(1 - alpha_t) * (content(z) - z), where content is the
    embed -> sites -> unembed path. Sites replace tokens by their attention output.
    '''
    embed: np.ndarray
    unembed: np.ndarray
    sites: tuple
    merge_sites: tuple
    conditioning: np.ndarray
    x0_blend: float = 1.0

    def __post_init__(self):
        if len(self.sites) != len(self.merge_sites):
            raise ConsistencyError('ERROR: one merge flag per attention site is required !')
        if self.embed.shape[1] != self.unembed.shape[0] or self.embed.shape[0] != self.unembed.shape[1]:
            raise DimensionError('ERROR: <embed> and <unembed> shapes do not match !')

    @classmethod
    def from_seed(cls, latent_channels=4, token_channels=8, head_count=1, merge_sites=None, seed=0, x0_blend=1.0):
        merge_sites = tuple(merge_site_presets['default'] if merge_sites is None else merge_sites)
        rng = SeededRng(seed)
        embed = rng.uniform(-1.0, 1.0, (latent_channels, token_channels))/math.sqrt(latent_channels)
        unembed = np.linalg.pinv(embed)
        sites = tuple(
            AttentionWeights.from_seed(token_channels, head_count, rng.child(site).seed,
                                       qk_gain=0.5, value_gain=0.05, value_identity=1.0)
            for site in range(len(merge_sites))
        )
        conditioning = 0.1*rng.normal(token_channels)
        return cls(embed, unembed, sites, tuple(bool(m) for m in merge_sites), conditioning, x0_blend)

    def edit_conditioning(self, strength, seed=0):
        '''conditioning vector moved by <strength> along a seeded unit direction'''
        direction = SeededRng(seed).child(1).normal(self.conditioning.shape[0])
        return self.conditioning + strength*direction/np.linalg.norm(direction)

    def _attend(self, site, tokens, context):
        '''tokens: (b, N, C); the context decides between per-frame, extended and merged attention'''
        weights = self.sites[site]
        if context is None:
            return np.stack([self_attention(frame, weights) for frame in tokens])
        mode = context.site_mode(self.merge_sites[site])
        if mode is AttentionMode.PER_FRAME:
            return np.stack([self_attention(frame, weights, context.counter) for frame in tokens])
        if mode is AttentionMode.EXTENDED:
            joint = self_attention(tokens.reshape(-1, tokens.shape[-1]), weights, context.counter)
            return joint.reshape(tokens.shape)
        cfg = context.cfg
        local, record = local_merge(tokens, cfg, context.rng)
        merged, record, new_state = global_merge(local, context.state(site), cfg, context.rng, record)
        context.states[site] = new_state
        context.merge_stats.append((site, tokens.shape[0], tokens.shape[1], len(merged), record.global_ is not None))
        output = self_attention(merged, weights, context.counter)
        return unmerge_chunk(output, record)

    def content(self, z_chunk, conditioning, context=None):
        z_chunk = np.asarray(z_chunk, dtype=np.float64)
        frames, height, width, channels = z_chunk.shape
        tokens = np.stack([frame.reshape(height*width, channels) @ self.embed for frame in z_chunk]) + conditioning
        for site in range(len(self.sites)):
            tokens = self._attend(site, tokens, context)
        return np.stack([frame @ self.unembed for frame in tokens]).reshape(frames, height, width, channels)

    def predict_noise(self, z_chunk, t, schedule, conditioning=None, context=None):
        alpha = schedule.alpha(t)
        conditioning = self.conditioning if conditioning is None else conditioning
        z_chunk = np.asarray(z_chunk, dtype=np.float64)
        root = math.sqrt(alpha)
        # (1 - sqrt(a)) / sqrt(1 - a), written to stay finite at a = 1
        identity_gain = math.sqrt((1.0 - root)/(1.0 + root)) + root*self.x0_blend
        return identity_gain*z_chunk - root*self.x0_blend*self.content(z_chunk, conditioning, context)


def _predict_video(model, z, t, schedule, conditioning, plan, context):
    eps = np.empty_like(z)
    for chunk in plan.ordered_chunks():
        eps[chunk.start:chunk.stop] = model.predict_noise(z[chunk.start:chunk.stop], t, schedule, conditioning, context)
    return eps


def _step_context(cfg, n, rng, t, policy, mode, counter, stats):
    step_rng = rng.child(t)
    plan = plan_chunks(n, cfg.chunk_size, policy, step_rng)
    context = AttentionContext(cfg, step_rng, t, AttentionMode(mode), counter)
    context.merge_stats = stats
    return plan, context


def invert_video(video, model, schedule, cfg, conditioning=None, rng=None, policy=None, mode=AttentionMode.PER_FRAME,
                 fixed_point_iterations=100, tolerance=1e-12, counter=None):
    '''DDIM inversion t = 0 -> T. Each step solves z_{t+1} = invert(z_t, eps(z_{t+1}, t+1)) by
    fixed-point iteration so that denoising from z_{t+1} reproduces z_t.'''
    rng = rng or SeededRng(cfg.seed)
    policy = policy or OrderPolicy.random()
    z = np.asarray(video.data, dtype=np.float64)
    n = z.shape[0]
    worst = 0
    for t in tqdm(range(schedule.steps), desc='inversion', disable=None, leave=False):
        def evaluate(z_eval):
            # fresh context per evaluation: identical random draws inside one step
            plan, context = _step_context(cfg, n, rng, t + 1, policy, mode, counter, [])
            return _predict_video(model, z_eval, t + 1, schedule, conditioning, plan, context)

        z_next = ddim_step(z, evaluate(z), t, schedule, Direction.INVERT)
        for iteration in range(1, fixed_point_iterations + 1):
            z_new = ddim_step(z, evaluate(z_next), t, schedule, Direction.INVERT)
            change = float(np.max(np.abs(z_new - z_next)))
            z_next = z_new
            if change <= tolerance*(1.0 + float(np.max(np.abs(z_new)))):
                break
        else:
            logger.warning('Fixed-point inversion at step '+str(t)+' did not reach <tolerance> = '+str(tolerance)+' (last change '+str(change)+') !')
        worst = max(worst, iteration)
        z = z_next
    logger.info('DDIM inversion finished after '+str(schedule.steps)+' steps, at most '+str(worst)+' fixed-point iterations per step.')
    return VideoLatents(z)


def generate_video(noisy, model, schedule, cfg, conditioning=None, rng=None, policy=None, mode=AttentionMode.MERGED,
                   counter=None, merge_stats=None):
    '''DDIM generation t = T -> 1 with fresh chunk plans and global states in every iteration'''
    rng = rng or SeededRng(cfg.seed)
    policy = policy or OrderPolicy.random()
    merge_stats = [] if merge_stats is None else merge_stats
    z = np.asarray(noisy.data, dtype=np.float64)
    n = z.shape[0]
    for t in tqdm(range(schedule.steps, 0, -1), desc='generation', disable=None, leave=False):
        plan, context = _step_context(cfg, n, rng, t, policy, mode, counter, merge_stats)
        eps = _predict_video(model, z, t, schedule, conditioning, plan, context)
        z = ddim_step(z, eps, t, schedule, Direction.DENOISE)
    return VideoLatents(z)


def temporal_variance(video):
    '''mean squared difference between consecutive frames'''
    data = np.asarray(video.data, dtype=np.float64)
    if data.shape[0] < 2:
        raise ParameterError('ERROR: temporal_variance() needs at least 2 frames, got '+str(data.shape[0])+' !')
    return float(np.mean(np.diff(data, axis=0)**2))


def endpoint_distance(video):
    '''mean squared difference between the first and the last frame'''
    data = np.asarray(video.data, dtype=np.float64)
    if data.shape[0] < 2:
        raise ParameterError('ERROR: endpoint_distance() needs at least 2 frames !')
    return float(np.mean((data[-1] - data[0])**2))


def synthetic_video(kind='drift', frames=8, height=16, width=16, channels=4, seed=0, drift=0.05, jitter=0.01):
    '''static: identical frames; drift: frames move along a fixed channel direction plus jitter;
    shift: each frame is the previous one translated by one token column'''
    if kind not in synthetic_videos:
        raise ParameterError('ERROR: unknown synthetic video <'+str(kind)+'> !')
    logger.info(synthetic_videos[kind]['msg'].format(frames=frames, height=height, width=width, channels=channels,
                                                    drift=drift, jitter=jitter))
    rng = SeededRng(seed)
    if kind == 'shift':
        wide = rng.normal((height, width + frames, channels))
        data = np.stack([wide[:, frames - f:frames - f + width] for f in range(frames)])
        return VideoLatents(data)
    base = rng.normal((height, width, channels))
    if kind == 'static':
        return VideoLatents(np.repeat(base[np.newaxis], frames, axis=0))
    direction = rng.normal(channels)
    direction = direction/np.linalg.norm(direction)
    steps = np.arange(frames, dtype=np.float64)[:, None, None, None]
    data = base[np.newaxis] + drift*steps*direction + jitter*rng.normal((frames, height, width, channels))
    return VideoLatents(data)
