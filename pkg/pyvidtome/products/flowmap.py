#!/usr/bin/env python

'''Token matching between two frames rendered as a flow map.

Pixel (y, x) shows the edge of the src token at grid position (y, x): hue is the direction
of the displacement (dx, dy) towards its dst token, saturation its magnitude relative to the
largest displacement and value is 1. Unmatched src tokens are gray.
'''

import logging
import math
import re
from pathlib import Path

import numpy as np
from matplotlib.colors import hsv_to_rgb, rgb_to_hsv

from pyvidtome.matching import match
from pyvidtome.utils.errors import ConsistencyError, DimensionError

logger = logging.getLogger(__name__)

UNMATCHED = (128, 128, 128)
HEADER_TOKEN = re.compile(rb'\s*(#[^\n]*\n|\S+)')


def flow_field(src_frame, dst_frame, r):
    '''matches the H x W tokens of <src_frame> onto <dst_frame>; returns dx, dy and the matched mask'''
    src_frame = np.asarray(src_frame)
    dst_frame = np.asarray(dst_frame)
    if src_frame.ndim != 3 or src_frame.shape != dst_frame.shape:
        raise DimensionError('ERROR: both frames must be H x W x C grids of equal shape !')
    height, width, channels = src_frame.shape
    match_map = match(src_frame.reshape(-1, channels), dst_frame.reshape(-1, channels), r)

    dx = np.zeros(height*width, dtype=np.int64)
    dy = np.zeros(height*width, dtype=np.int64)
    matched = np.zeros(height*width, dtype=bool)
    src_y, src_x = np.divmod(match_map.src_idx, width)
    dst_y, dst_x = np.divmod(match_map.dst_idx, width)
    dx[match_map.src_idx] = dst_x - src_x
    dy[match_map.src_idx] = dst_y - src_y
    matched[match_map.src_idx] = True
    return dx.reshape(height, width), dy.reshape(height, width), matched.reshape(height, width)


def render_flow_map(dx, dy, matched):
    '''uint8 RGB raster and the largest displacement used for the saturation scale'''
    magnitude = np.hypot(dx, dy)
    max_displacement = float(magnitude[matched].max()) if matched.any() else 0.0
    hsv = np.zeros(dx.shape + (3,))
    hsv[..., 0] = np.mod(np.arctan2(dy, dx)/(2*math.pi), 1.0)
    hsv[..., 1] = magnitude/max_displacement if max_displacement > 0 else 0.0
    hsv[..., 2] = 1.0
    rgb = np.round(hsv_to_rgb(hsv)*255).astype(np.uint8)
    rgb[~matched] = UNMATCHED
    return rgb, max_displacement


def encode_ppm(rgb, max_displacement):
    height, width = rgb.shape[:2]
    header = 'P6\n# max_displacement '+repr(float(max_displacement))+'\n'+str(width)+' '+str(height)+'\n255\n'
    return header.encode('ascii') + np.ascontiguousarray(rgb, dtype=np.uint8).tobytes()


def write_flow_map(path, src_frame, dst_frame, r):
    dx, dy, matched = flow_field(src_frame, dst_frame, r)
    rgb, max_displacement = render_flow_map(dx, dy, matched)
    path = Path(path)
    path.write_bytes(encode_ppm(rgb, max_displacement))
    logger.info('Flow map with '+str(int(matched.sum()))+' matched and '+str(int((~matched).sum()))
                +' unmatched tokens written to '+str(path))
    return path


def read_ppm(blob):
    '''returns the RGB raster and the header comments of a binary PPM'''
    comments = []
    fields = []
    position = 0
    while len(fields) < 4:
        found = HEADER_TOKEN.match(blob, position)
        if found is None:
            raise ConsistencyError('ERROR: truncated PPM header !')
        token = found.group(1)
        position = found.end()
        if token.startswith(b'#'):
            comments.append(token[1:].strip().decode('ascii'))
        else:
            fields.append(token)
    if fields[0] != b'P6' or int(fields[3]) != 255:
        raise ConsistencyError('ERROR: only 8-bit binary PPM (P6) files are supported !')
    width, height = int(fields[1]), int(fields[2])
    raster = np.frombuffer(blob[position + 1:], dtype=np.uint8)
    if raster.size != width*height*3:
        raise ConsistencyError('ERROR: PPM payload does not match its '+str(width)+' x '+str(height)+' header !')
    return raster.reshape(height, width, 3), comments


def decode_flow_map(path):
    '''recovers the rounded displacements (dx, dy) and the matched mask from a written flow map'''
    rgb, comments = read_ppm(Path(path).read_bytes())
    scale = [c.split()[1] for c in comments if c.startswith('max_displacement')]
    if not scale:
        raise ConsistencyError('ERROR: '+str(path)+' carries no max_displacement comment !')
    max_displacement = float(scale[0])
    matched = rgb.max(axis=-1) == 255
    hsv = rgb_to_hsv(rgb.astype(np.float64)/255.0)
    magnitude = hsv[..., 1]*max_displacement
    angle = hsv[..., 0]*2*math.pi
    dx = np.where(matched, np.round(magnitude*np.cos(angle)), 0).astype(np.int64)
    dy = np.where(matched, np.round(magnitude*np.sin(angle)), 0).astype(np.int64)
    return dx, dy, matched
