import logging
import sys
from dataclasses import replace
from pathlib import Path

import fire

from pyvidtome.products.bench import format_table, run_bench, write_csv
from pyvidtome.products.edit import edit_video, write_outputs
from pyvidtome.products.flowmap import write_flow_map
from pyvidtome.utils.config import BenchConfig, RunConfig, configure_logging, load_config
from pyvidtome.utils.errors import ConfigError, NumericError, VidToMeError
from pyvidtome.utils.latent_io import read_latents
from pyvidtome.utils.mapping import exit_codes
from pyvidtome.utils.tokens import ratio_to_count

logger = logging.getLogger(__name__)


def main_run(config: str | Path, seed: int = None, out: str | Path = None) -> None:
    """
    CLI entry point for one video edit.

    Loads the run configuration, inverts the source latents, generates the edited video
    and writes the edited latents plus a JSON metrics report.

    Parameters:
    -----------
    config : str or Path
        Path to YAML/JSON configuration file
    seed : int, optional
        Overrides <seed> of the configuration
    out : str or Path, optional
        Overrides <output> of the configuration
    """
    cfg = RunConfig.from_dict(load_config(config))
    overrides = {}
    if seed is not None:
        overrides['seed'] = seed
    if out is not None:
        overrides['output'] = str(out)
    if overrides:
        cfg = replace(cfg, **overrides)

    edited, report = edit_video(cfg)
    write_outputs(cfg, edited, report)
    logger.info('Edited latents written to '+str(cfg.output)+' ('+report['mode']+' mode).')


def main_bench(config: str | Path, csv: str | Path = None) -> None:
    """
    CLI entry point for the attention cost benchmark.

    Parameters:
    -----------
    config : str or Path
        Path to YAML/JSON configuration file
    csv : str or Path, optional
        Overrides <csv> of the configuration
    """
    cfg = BenchConfig.from_dict(load_config(config))
    if csv is not None:
        cfg = replace(cfg, csv=str(csv))
    table = run_bench(cfg)
    print(format_table(table))
    write_csv(table, cfg.csv)


def _frame_pair(frames):
    if isinstance(frames, str):
        frames = frames.split(',')
    try:
        first, second = (int(f) for f in frames)
    except (TypeError, ValueError) as exc:
        raise ConfigError('ERROR: <frames> must be two frame indices i,j, got '+repr(frames)+' !') from exc
    return first, second


def main_flowmap(**kwargs) -> None:
    """
    CLI entry point for the token-matching flow map between two frames.

    Parameters:
    -----------
    in : str or Path
        Latent file holding the frames
    frames : str
        Frame pair i,j; tokens of frame i are matched onto frame j
    ratio : float, optional
        Fraction of the tokens of frame i that is matched (default 1.0)
    out : str or Path
        Output PPM file
    """
    unknown = set(kwargs) - {'in', 'frames', 'ratio', 'out'}
    if unknown or 'in' not in kwargs or 'frames' not in kwargs or 'out' not in kwargs:
        raise ConfigError('ERROR: usage is flowmap --in <path> --frames <i>,<j> [--ratio <p>] --out <path> !')
    data = read_latents(kwargs['in'])
    first, second = _frame_pair(kwargs['frames'])
    for index in (first, second):
        if not 0 <= index < data.shape[0]:
            raise ConfigError('ERROR: frame index '+str(index)+' lies outside the '+str(data.shape[0])+' frames of '+str(kwargs['in'])+' !')
    ratio = float(kwargs.get('ratio', 1.0))
    if not 0.0 <= ratio <= 1.0:
        raise ConfigError('ERROR: <ratio> must lie in [0, 1], got '+str(ratio)+' !')
    r = ratio_to_count(ratio, data.shape[1]*data.shape[2])
    write_flow_map(kwargs['out'], data[first], data[second], r)


COMMANDS = {
    'run': main_run,
    'bench': main_bench,
    'flowmap': main_flowmap,
}


def main(argv=None):
    try:
        configure_logging()
        fire.Fire(COMMANDS, command=argv)
    except ConfigError as exc:
        logger.error(str(exc))
        sys.exit(exit_codes['usage'])
    except NumericError as exc:
        logger.error(str(exc))
        sys.exit(exit_codes['numeric'])
    except VidToMeError as exc:
        logger.error(str(exc))
        sys.exit(exit_codes['usage'])
    sys.exit(exit_codes['success'])


if __name__ == "__main__":
    main()
