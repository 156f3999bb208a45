"""
Checkpoint files.

A checkpoint is a numpy ``.npz`` archive. The entry ``__header__`` holds a
UTF-8 JSON document (as a uint8 array) with the format name and version,
the model and MPDP configs, the ordered parameter names and shapes, and
free-form metadata. Every other entry is one parameter, keyed
``model/<name>`` or ``heads/<name>``. Arrays are stored raw, so loading
restores bit-identical parameters.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from glmotion.errors import FormatError
from glmotion.model.gl_base import ModelConfig, ModelParams
from glmotion.mpdp import MpdpConfig, MpdpHeads
from glmotion.positional import get_positional

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 'glmotion-checkpoint'
CHECKPOINT_VERSION = 1
HEADER_KEY = '__header__'


@dataclass
class Checkpoint:
    model_cfg: ModelConfig
    params: ModelParams
    mpdp_cfg: Optional[MpdpConfig] = None
    heads: Optional[MpdpHeads] = None
    meta: dict = field(default_factory=dict)


def save_checkpoint(path, params: ModelParams, heads: Optional[MpdpHeads] = None, meta: Optional[dict] = None) -> Path:
    """
    Write parameters and their configs to `path`.

    Args:
        path (str or Path): Target file; should end in ``.npz``.
        params (ModelParams): Network weights (carry their ModelConfig).
        heads (MpdpHeads, optional): Pretraining heads (carry their MpdpConfig).
        meta (dict, optional): JSON-serialisable extras such as the epoch.

    Returns:
        Path: The written file.
    """
    path = Path(path)
    arrays = {f'model/{name}': t.data for name, t in params.named()}
    header = {
        'format': CHECKPOINT_FORMAT,
        'version': CHECKPOINT_VERSION,
        'model_config': params.cfg.to_dict(),
        'model_names': [[name, list(t.shape)] for name, t in params.named()],
        'mpdp_config': None,
        'head_names': [],
        'head_count': 0,
        'meta': meta or {},
    }
    if heads is not None:
        arrays.update({f'heads/{name}': t.data for name, t in heads.named()})
        header['mpdp_config'] = heads.cfg.to_dict()
        header['head_names'] = [[name, list(t.shape)] for name, t in heads.named()]
        header['head_count'] = heads.head_count()
        header['tokens'] = heads.tokens

    arrays[HEADER_KEY] = np.frombuffer(json.dumps(header).encode('utf-8'), dtype=np.uint8)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        np.savez(f, **arrays)
    logger.debug('wrote checkpoint %s (%d tensors)', path, len(arrays) - 1)
    return path


def read_header(path) -> dict:
    """The decoded JSON header of a checkpoint."""
    with np.load(path, allow_pickle=False) as archive:
        return _decode_header(archive, path)


def _decode_header(archive, path):
    if HEADER_KEY not in archive.files:
        raise FormatError(f'{path} has no checkpoint header')
    header = json.loads(archive[HEADER_KEY].tobytes().decode('utf-8'))
    if header.get('format') != CHECKPOINT_FORMAT:
        raise FormatError(f'{path} is not a {CHECKPOINT_FORMAT} file')
    if header.get('version') != CHECKPOINT_VERSION:
        raise FormatError(f'{path} has checkpoint version {header.get("version")}, expected {CHECKPOINT_VERSION}')
    return header


def load_checkpoint(path) -> Checkpoint:
    """
    Rebuild configs, parameters and heads from a checkpoint.

    Raises:
        FormatError: On a missing or foreign header, a version mismatch or a missing tensor.
    """
    with np.load(path, allow_pickle=False) as archive:
        header = _decode_header(archive, path)
        model_cfg = ModelConfig(**header['model_config'])
        trainable_m = get_positional(model_cfg.positional_mode).trainable
        params = ModelParams(model_cfg)
        for name, shape in header['model_names']:
            data = _entry(archive, f'model/{name}', shape, path)
            params.add(name, data, trainable=trainable_m if name == 'pos.M' else True)

        mpdp_cfg, heads = None, None
        if header['mpdp_config'] is not None:
            raw = dict(header['mpdp_config'])
            raw['intervals'] = tuple(raw['intervals'])
            raw['magnitude_edges'] = np.array(raw['magnitude_edges'], dtype=np.float64)
            mpdp_cfg = MpdpConfig(**raw)
            heads = MpdpHeads(mpdp_cfg, header['tokens'])
            for name, shape in header['head_names']:
                heads.add(name, _entry(archive, f'heads/{name}', shape, path))
    return Checkpoint(model_cfg=model_cfg, params=params, mpdp_cfg=mpdp_cfg, heads=heads, meta=header['meta'])


def _entry(archive, key, shape, path):
    if key not in archive.files:
        raise FormatError(f'{path} is missing tensor {key}')
    data = archive[key]
    if list(data.shape) != list(shape):
        raise FormatError(f'{path}: tensor {key} has shape {data.shape}, header says {tuple(shape)}')
    return data
