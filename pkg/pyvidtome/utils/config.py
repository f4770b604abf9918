import logging
import os
from dataclasses import dataclass, fields
from typing import Optional

import yaml

from pyvidtome.utils.errors import ConfigError, VidToMeError
from pyvidtome.utils.mapping import attention_modes, local_strategies, log_levels, merge_site_presets, synthetic_videos

logger = logging.getLogger(__name__)


def configure_logging():
    """Configure the root logger from the VIDTOME_LOG environment variable"""
    level = os.getenv('VIDTOME_LOG', 'info').lower()
    if level not in log_levels:
        raise ConfigError('ERROR: unknown entry for <VIDTOME_LOG>: '+level+', expected one of '+str(list(log_levels))+' !')
    logging.basicConfig(level=log_levels[level], format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    logging.getLogger().setLevel(log_levels[level])
    return level


def load_config(config_path):
    """Load configuration from YAML (or flat JSON) file"""
    logger.info('The path of the configuration file is '+str(config_path))
    try:
        with open(config_path, 'r') as file:
            config = yaml.safe_load(file)
    except OSError as exc:
        raise ConfigError('ERROR: cannot read the configuration file '+str(config_path)+': '+str(exc)+' !') from exc
    except yaml.YAMLError as exc:
        raise ConfigError('ERROR: malformed configuration file '+str(config_path)+': '+str(exc)+' !') from exc
    if config is None:
        config = {}
    if not isinstance(config, dict):
        raise ConfigError('ERROR: the configuration in '+str(config_path)+' must be a mapping of keys to values !')
    return config


def _check_keys(config, cls):
    known = [f.name for f in fields(cls)]
    unknown = sorted(set(config) - set(known))
    if unknown:
        raise ConfigError('ERROR: unknown configuration key(s) '+str(unknown)+' !')


def _check_range(name, value, low, high=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError('ERROR: <'+name+'> must be a number, got '+repr(value)+' !')
    if value < low or (high is not None and value > high):
        bounds = '['+format(low, 'g')+', '+format(high, 'g')+']' if high is not None else '>= '+format(low, 'g')
        raise ConfigError('ERROR: <'+name+'> must lie in '+bounds+', got '+str(value)+' !')


def _check_int(name, value, low):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError('ERROR: <'+name+'> must be an integer, got '+repr(value)+' !')
    _check_range(name, value, low)


def _check_bool(name, value):
    if not isinstance(value, bool):
        raise ConfigError('ERROR: <'+name+'> must be true or false, got '+repr(value)+' !')


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    frames: int = 8
    height: int = 16
    width: int = 16
    latent_channels: int = 4
    token_channels: int = 8
    head_count: int = 1
    steps: int = 50
    alphas: Optional[list] = None
    chunk_size: int = 4
    local_ratio: float = 0.9
    global_ratio: float = 0.8
    merge_to_local_probability: float = 0.5
    merge_mode: str = 'replace'
    global_merge: bool = True
    merging: bool = True
    merge_during_inversion: bool = False
    attention_mode: str = 'merged'
    local_strategy: str = 'target-frame'
    order_policy: str = 'random'
    mixed_fraction: float = 0.5
    merge_sites: object = 'default'
    x0_blend: float = 1.0
    edit_strength: float = 0.0
    input: Optional[str] = None
    synthetic: str = 'drift'
    drift: float = 0.05
    jitter: float = 0.01
    output: str = 'edited.vtml'
    report: Optional[str] = None
    fixed_point_iterations: int = 100
    fixed_point_tolerance: float = 1e-12

    def __post_init__(self):
        _check_int('seed', self.seed, 0)
        if self.seed > 2**64 - 1:
            raise ConfigError('ERROR: <seed> must be a 64-bit unsigned integer, got '+str(self.seed)+' !')
        for name in ('frames', 'height', 'width', 'latent_channels', 'token_channels', 'head_count', 'steps',
                     'chunk_size', 'fixed_point_iterations'):
            _check_int(name, getattr(self, name), 1)
        if self.token_channels % self.head_count:
            raise ConfigError('ERROR: <head_count> = '+str(self.head_count)+' must divide <token_channels> = '+str(self.token_channels)+' !')
        if self.latent_channels > self.token_channels:
            raise ConfigError('ERROR: <latent_channels> must not exceed <token_channels> !')
        for name in ('local_ratio', 'global_ratio', 'merge_to_local_probability', 'mixed_fraction', 'x0_blend'):
            _check_range(name, getattr(self, name), 0.0, 1.0)
        for name in ('drift', 'jitter'):
            _check_range(name, getattr(self, name), 0.0)
        _check_range('edit_strength', self.edit_strength, float('-inf'))
        _check_range('fixed_point_tolerance', self.fixed_point_tolerance, 0.0)
        for name in ('global_merge', 'merging', 'merge_during_inversion'):
            _check_bool(name, getattr(self, name))
        if self.merge_mode not in ('replace', 'mean'):
            raise ConfigError('ERROR: <merge_mode> must be replace or mean, got '+repr(self.merge_mode)+' !')
        if self.attention_mode not in attention_modes:
            raise ConfigError('ERROR: <attention_mode> must be one of '+str(list(attention_modes))+', got '+repr(self.attention_mode)+' !')
        if self.local_strategy not in local_strategies:
            raise ConfigError('ERROR: <local_strategy> must be one of '+str(list(local_strategies))+', got '+repr(self.local_strategy)+' !')
        if self.order_policy not in ('sequential', 'random', 'mixed'):
            raise ConfigError('ERROR: <order_policy> must be sequential, random or mixed, got '+repr(self.order_policy)+' !')
        if self.synthetic not in synthetic_videos:
            raise ConfigError('ERROR: unknown entry for <synthetic>: '+repr(self.synthetic)+' !')
        sites = self.site_flags
        if not sites or not all(isinstance(s, bool) for s in sites):
            raise ConfigError('ERROR: <merge_sites> must be a preset name '+str(list(merge_site_presets))+' or a list of booleans !')
        if self.alphas is not None:
            alphas = self.alphas
            if not isinstance(alphas, list) or not alphas:
                raise ConfigError('ERROR: <alphas> must be a non-empty list or null !')
            for a in alphas:
                _check_range('alphas', a, 0.0, 1.0)
                if a <= 0.0:
                    raise ConfigError('ERROR: all <alphas> must lie in (0, 1] !')
            if any(b >= a for a, b in zip(alphas[:-1], alphas[1:])):
                raise ConfigError('ERROR: <alphas> must be strictly decreasing !')

    @property
    def site_flags(self):
        if isinstance(self.merge_sites, str):
            if self.merge_sites not in merge_site_presets:
                raise ConfigError('ERROR: unknown <merge_sites> preset '+repr(self.merge_sites)+' !')
            return list(merge_site_presets[self.merge_sites])
        return list(self.merge_sites) if isinstance(self.merge_sites, (list, tuple)) else []

    @classmethod
    def from_dict(cls, config):
        _check_keys(config, cls)
        try:
            return cls(**config)
        except ConfigError:
            raise
        except (VidToMeError, TypeError) as exc:
            raise ConfigError('ERROR: invalid run configuration: '+str(exc)+' !') from exc


@dataclass(frozen=True)
class BenchConfig:
    chunk_sizes: tuple = (1, 2, 4, 8)
    ratios: tuple = (0.5, 0.8, 0.9)
    tokens: tuple = (64, 256, 1000)
    token_channels: int = 8
    head_count: int = 1
    instrumented_max_tokens: int = 64
    seed: int = 0
    csv: str = 'bench.csv'

    def __post_init__(self):
        for name in ('chunk_sizes', 'ratios', 'tokens'):
            values = getattr(self, name)
            if not isinstance(values, (list, tuple)) or not values:
                raise ConfigError('ERROR: <'+name+'> must be a non-empty list !')
            object.__setattr__(self, name, tuple(values))
        for b in self.chunk_sizes:
            _check_int('chunk_sizes', b, 1)
        for n in self.tokens:
            _check_int('tokens', n, 1)
        for p in self.ratios:
            _check_range('ratios', p, 0.0, 1.0)
        _check_int('token_channels', self.token_channels, 1)
        _check_int('head_count', self.head_count, 1)
        if self.token_channels % self.head_count:
            raise ConfigError('ERROR: <head_count> must divide <token_channels> !')
        _check_int('instrumented_max_tokens', self.instrumented_max_tokens, 0)
        _check_int('seed', self.seed, 0)

    @classmethod
    def from_dict(cls, config):
        _check_keys(config, cls)
        try:
            return cls(**config)
        except ConfigError:
            raise
        except (VidToMeError, TypeError) as exc:
            raise ConfigError('ERROR: invalid bench configuration: '+str(exc)+' !') from exc
