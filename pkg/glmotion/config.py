"""
Flat key-value configuration.

A config file holds one ``key = value`` per line; ``#`` starts a comment
and blank lines are ignored. Keys are the flattened keys of
`glmotion.settings.template_settings`. Values are coerced to the type of
the template default: booleans accept true/false/yes/no/1/0, lists are
comma separated and ``none`` clears an optional key.

Precedence is command-line overrides > file > defaults.
"""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

from glmotion.errors import ConfigError
from glmotion.model.gl_base import ModelConfig
from glmotion.mpdp import MpdpConfig
from glmotion.sequence import DISENTANGLE_MODES
from glmotion.settings import get_default_settings, get_settings, optional_types

logger = logging.getLogger(__name__)

RESOLVED_NAME = 'config.resolved.txt'

_TRUE = ('true', 'yes', '1', 'on')
_FALSE = ('false', 'no', '0', 'off')


def parse_input_mode(mode) -> Optional[int]:
    """Fixed input length of ``sampled:<N>``, None for ``natural``."""
    if mode == 'natural':
        return None
    kind, _, value = mode.partition(':')
    if kind != 'sampled' or not value.isdigit() or int(value) < 1:
        raise ConfigError(f'input_mode must be natural or sampled:<N>, got {mode!r}')
    return int(value)


@dataclass
class RunConfig:
    """
    Settings of the experiment loops.

    Attributes:
        epochs, batch_size, seed: Pretraining loop.
        lr, lr_decay, weight_decay: AdamW learning rate, per-epoch decay factor and decoupled decay.
        grad_clip: Global gradient-norm bound, None to disable.
        max_steps: Stop pretraining after this many optimizer steps, None for no limit.
        checkpoint_every: Write an intermediate checkpoint every this many epochs, 0 to disable.
        probe_lr, probe_epochs, probe_batch_size: Linear probe (Adam, constant lr).
        finetune_lr, finetune_epochs, label_fraction: Semi-supervised fine-tuning (AdamW).
        augment, shear, interp_frac, corrupt: Training-time augmentation.
        input_mode: ``natural`` or ``sampled:<N>``.
        disentangle_mode: Entry of DISENTANGLE_MODES.
        log_wall_time: Write measured wall time to the metrics log instead of 0.
    """
    epochs: int = 120
    batch_size: int = 128
    seed: int = 0
    lr: float = 5e-4
    lr_decay: float = 0.99
    weight_decay: float = 0.01
    grad_clip: Optional[float] = 5.0
    max_steps: Optional[int] = None
    checkpoint_every: int = 10
    probe_lr: float = 3e-3
    probe_epochs: int = 120
    probe_batch_size: int = 1024
    finetune_lr: float = 1e-4
    finetune_epochs: int = 120
    label_fraction: float = 0.1
    augment: bool = True
    shear: float = 0.5
    interp_frac: float = 0.1
    corrupt: float = 0.0
    input_mode: str = 'natural'
    disentangle_mode: str = 'global_local'
    log_wall_time: bool = False

    def __post_init__(self):
        for name in ('epochs', 'probe_epochs', 'finetune_epochs'):
            if getattr(self, name) < 0:
                raise ConfigError(f'{name} must be non-negative, got {getattr(self, name)}')
        for name in ('batch_size', 'probe_batch_size'):
            if getattr(self, name) < 1:
                raise ConfigError(f'{name} must be positive, got {getattr(self, name)}')
        if not 0.0 < self.label_fraction <= 1.0:
            raise ConfigError(f'label_fraction must be in (0, 1], got {self.label_fraction}')
        if not 0.0 <= self.corrupt <= 1.0:
            raise ConfigError(f'corrupt must be in [0, 1], got {self.corrupt}')
        if self.shear < 0 or self.interp_frac < 0:
            raise ConfigError('shear and interp_frac must be non-negative')
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ConfigError(f'grad_clip must be positive or none, got {self.grad_clip}')
        if self.disentangle_mode not in DISENTANGLE_MODES:
            raise ConfigError(f'disentangle_mode must be one of {DISENTANGLE_MODES}, got {self.disentangle_mode!r}')
        parse_input_mode(self.input_mode)

    @property
    def sampled_length(self) -> Optional[int]:
        """Fixed input length for ``sampled:<N>``, None for natural-speed input."""
        return parse_input_mode(self.input_mode)

    def to_dict(self) -> dict:
        return asdict(self)


def coerce_value(key, raw, default):
    """
    Convert a text value to the type of the template default of `key`.

    Raises:
        ConfigError: If the value cannot be converted.
    """
    text = raw.strip() if isinstance(raw, str) else raw
    if not isinstance(text, str):
        return text
    if text.lower() == 'none':
        if default is None or key in optional_types:
            return None
        raise ConfigError(f'{key} cannot be none')
    target = optional_types.get(key) if default is None else type(default)
    try:
        if target is bool:
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(text)
        if target is list:
            item_type = type(default[0]) if default else str
            return [item_type(part.strip()) for part in text.split(',') if part.strip()]
        if target is int:
            return int(text)
        if target is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f'invalid value {raw!r} for {key}') from None


def parse_config_text(text, defaults=None) -> dict:
    """
    Parse config-file text into a dict of coerced values.

    Args:
        text (str): File contents.
        defaults (dict, optional): Flat defaults used for key checking and coercion.

    Returns:
        dict: Only the keys present in the text.

    Raises:
        ConfigError: On an unknown key or a malformed line.
    """
    defaults = defaults if defaults is not None else get_default_settings(get_settings())
    values = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition('=')
        key = key.strip()
        if not sep:
            raise ConfigError(f'line {number}: expected "key = value", got {line!r}')
        if key not in defaults:
            raise ConfigError(f'line {number}: unknown config key {key!r}')
        values[key] = coerce_value(key, raw, defaults[key])
    return values


def resolve_settings(config_path=None, overrides=None) -> dict:
    """
    Merge defaults, an optional config file and overrides into one flat dict.

    Args:
        config_path (str or Path, optional): Config file.
        overrides (dict, optional): Values from the command line; text values are coerced.

    Returns:
        dict: Every flat key with its resolved value.

    Raises:
        ConfigError: On unknown keys or invalid values.
    """
    defaults = get_default_settings(get_settings())
    resolved = dict(defaults)
    if config_path is not None:
        resolved.update(parse_config_text(Path(config_path).read_text(encoding='utf-8'), defaults))
    for key, value in (overrides or {}).items():
        if key not in defaults:
            raise ConfigError(f'unknown config key {key!r}')
        resolved[key] = coerce_value(key, value, defaults[key])
    return resolved


def format_value(value) -> str:
    if value is None:
        return 'none'
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (list, tuple)):
        return ','.join(str(v) for v in value)
    return str(value)


def write_resolved(settings: dict, directory) -> Path:
    """Write the resolved flat settings to ``<directory>/config.resolved.txt``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    txt = '# resolved glmotion configuration\n'
    for key in sorted(settings):
        txt += f'{key} = {format_value(settings[key])}\n'
    path = directory / RESOLVED_NAME
    path.write_text(txt, encoding='utf-8')
    logger.info('resolved configuration written to %s', path)
    return path


def build_run_config(settings: dict) -> RunConfig:
    """RunConfig from the Run section keys of a flat settings dict."""
    return RunConfig(**{key: settings[key] for key in get_settings()['Run']})


def build_configs(settings: dict, joints=None, persons=None):
    """
    Build the three config objects from a flat settings dict.

    Args:
        settings (dict): Resolved flat settings.
        joints (int, optional): K from the dataset, used when the ``joints`` setting is none.
        persons (int, optional): P from the dataset, used when the ``persons`` setting is none.

    Returns:
        tuple: (ModelConfig, MpdpConfig, RunConfig).

    Raises:
        ConfigError: If a value violates a config invariant or K/P are unknown.
    """
    template = get_settings()
    k = settings.get('joints') if settings.get('joints') is not None else joints
    p = settings.get('persons') if settings.get('persons') is not None else persons
    if k is None or p is None:
        raise ConfigError('joints and persons must be set or taken from a dataset')
    if (joints is not None and k != joints) or (persons is not None and p != persons):
        raise ConfigError(f'configured K={k}, P={p} disagree with the dataset (K={joints}, P={persons})')

    model_kwargs = {key: settings[key] for key in template['Model'] if key not in ('joints', 'persons')}
    model_cfg = ModelConfig(joints=k, persons=p, **model_kwargs)
    mpdp_cfg = MpdpConfig(**{key: settings[key] for key in template['Mpdp']})
    run_cfg = build_run_config(settings)
    return model_cfg, mpdp_cfg, run_cfg
