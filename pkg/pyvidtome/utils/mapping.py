import logging

order_policies = {
    "sequential": {
        "msg": (
            'Chunks are processed in temporal order; global tokens are shared among '
            'neighbouring chunks.'
        )
    },
    "random": {
        "msg": (
            'Chunks are processed in fully random order; global tokens are shared '
            'independently of the temporal order.'
        )
    },
    "mixed": {
        "msg": (
            'A random {fraction:.0%} of the chunks is processed in random order, the '
            'others sequentially.'
        )
    },
}

attention_modes = {
    "per-frame": {
        "label": 'per-frame baseline',
        "msg": 'Every frame attends to its own tokens only.',
    },
    "extended": {
        "label": 'extended',
        "msg": 'The tokens of all frames in a chunk attend to each other in one joint sequence.',
    },
    "merged": {
        "label": 'merged',
        "msg": 'Tokens are merged within and across chunks before attention and unmerged after it.',
    },
}

local_strategies = {
    "target-frame": {
        "msg": 'Local merging folds every chunk into one randomly chosen target frame.'
    },
    "concatenated": {
        "msg": 'Local merging runs over the concatenated chunk tokens with randomly drawn dst tokens.'
    },
    "per-frame": {
        "msg": 'Local merging runs inside every frame separately.'
    },
}

# merge-enabled flags per attention site: prefix and suffix sites merge, interior sites do not
merge_site_presets = {
    "default": [True, False, False, True],
    "all": [True, True, True, True],
    "none": [False, False, False, False],
}

synthetic_videos = {
    "static": {
        "msg": 'Identical frames are generated: {frames} x {height} x {width} x {channels}.'
    },
    "drift": {
        "msg": (
            'A drifting video is generated: {frames} x {height} x {width} x {channels}, '
            'drift {drift} per frame, jitter {jitter}.'
        )
    },
    "shift": {
        "msg": (
            'A translating video is generated: {frames} x {height} x {width} x {channels}, '
            'one token column per frame.'
        )
    },
}

exit_codes = {
    "success": 0,
    "usage": 2,
    "numeric": 3,
}

log_levels = {
    "error": logging.ERROR,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}
