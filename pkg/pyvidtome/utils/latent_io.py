'''binary latent files: b"VTML", u32 version, n, H, W, C_lat (little endian), then float32 frame-major payload'''

import logging
from pathlib import Path

import numpy as np

from pyvidtome.utils.errors import ConfigError, ConsistencyError, DimensionError
from pyvidtome.utils.tokens import TokenMatrix

logger = logging.getLogger(__name__)

MAGIC = b'VTML'
VERSION = 1
HEADER = np.dtype([('version', '<u4'), ('n', '<u4'), ('height', '<u4'), ('width', '<u4'), ('channels', '<u4')])


def encode_latents(data):
    data = np.asarray(data)
    if data.ndim != 4:
        raise DimensionError('ERROR: latents must have shape (n, H, W, C_lat), got '+str(data.shape)+' !')
    header = np.array([(VERSION,) + tuple(data.shape)], dtype=HEADER)
    return MAGIC + header.tobytes() + np.ascontiguousarray(data, dtype='<f4').tobytes()


def decode_latents(blob):
    if len(blob) < len(MAGIC) + HEADER.itemsize or blob[:len(MAGIC)] != MAGIC:
        raise ConsistencyError('ERROR: not a latent file (missing VTML header) !')
    header = np.frombuffer(blob, dtype=HEADER, count=1, offset=len(MAGIC))[0]
    if int(header['version']) != VERSION:
        raise ConsistencyError('ERROR: unsupported latent file version '+str(int(header['version']))+' !')
    shape = tuple(int(header[k]) for k in ('n', 'height', 'width', 'channels'))
    payload = blob[len(MAGIC) + HEADER.itemsize:]
    if len(payload) != 4*int(np.prod(shape)):
        raise ConsistencyError('ERROR: payload holds '+str(len(payload))+' bytes but the header announces '+str(shape)+' !')
    return np.frombuffer(payload, dtype='<f4').reshape(shape).astype(np.float32)


def write_latents(path, data):
    path = Path(path)
    path.write_bytes(encode_latents(data))
    logger.info('Latents of shape '+str(np.shape(data))+' written to '+str(path))
    return path


def read_latents(path):
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError('ERROR: cannot read latent file '+str(path)+': '+str(exc)+' !') from exc
    return decode_latents(blob)


def write_token_matrix(path, matrix):
    '''a B x N x C TokenMatrix is stored as (n, H, W, C) = (B, N, 1, C)'''
    return write_latents(path, matrix.data[:, :, np.newaxis, :])


def read_token_matrix(path):
    data = read_latents(path)
    if data.shape[2] != 1:
        raise DimensionError('ERROR: '+str(path)+' does not hold a token matrix (W = '+str(data.shape[2])+') !')
    return TokenMatrix(data[:, :, 0, :])
