import hashlib
from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from glmotion.autodiff import Tensor
from glmotion.errors import ConfigError
from glmotion.positional import POSITIONAL_MODES, get_positional

DTYPES = {'float64': np.float64, 'float32': np.float32}


@dataclass
class ModelConfig:
    """
    Hyperparameters of the network.

    Attributes:
    -----------
    joints, persons : int
        K joints per person and P persons per frame.
    embed_dim : int
        Size D of every joint token.
    blocks : int
        Number N of stacked blocks.
    spatial_heads, temporal_heads : int
        Head counts h_s and h_t.
    mlp_hidden : int or None
        Hidden width of every MLP; None means 4 * P*K*D.
    t_max : int
        Maximum number of frames, the first axis of M.
    ln_eps : float
        Layer-norm epsilon.
    positional_mode : str
        Key of POSITIONAL_MODES.
    p2p_attention : bool
        If False, spatial attention never crosses persons.
    dtype : str
        'float64' or 'float32'.
    """
    joints: int
    persons: int = 1
    embed_dim: int = 6
    blocks: int = 4
    spatial_heads: int = 2
    temporal_heads: int = 8
    mlp_hidden: Optional[int] = None
    t_max: int = 300
    ln_eps: float = 1e-5
    positional_mode: str = 'trainable_tight'
    p2p_attention: bool = True
    dtype: str = 'float64'

    def __post_init__(self):
        for name in ('joints', 'persons', 'embed_dim', 'blocks', 'spatial_heads', 'temporal_heads', 't_max'):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f'{name} must be positive, got {getattr(self, name)}')
        if self.joints < 2:
            raise ConfigError(f'joints must be at least 2, got {self.joints}')
        if self.embed_dim % self.spatial_heads:
            raise ConfigError(f'embed_dim {self.embed_dim} is not divisible by spatial_heads {self.spatial_heads}')
        if self.frame_dim // self.temporal_heads < 1:
            raise ConfigError(f'temporal_heads {self.temporal_heads} exceeds the frame width {self.frame_dim}')
        if self.mlp_hidden is not None and self.mlp_hidden < 1:
            raise ConfigError(f'mlp_hidden must be positive, got {self.mlp_hidden}')
        if self.ln_eps <= 0:
            raise ConfigError(f'ln_eps must be positive, got {self.ln_eps}')
        if self.positional_mode not in POSITIONAL_MODES:
            raise ConfigError(f'unknown positional_mode {self.positional_mode!r}')
        if self.dtype not in DTYPES:
            raise ConfigError(f'dtype must be one of {sorted(DTYPES)}, got {self.dtype!r}')

    @property
    def tokens(self) -> int:
        return self.persons * self.joints

    @property
    def frame_dim(self) -> int:
        return self.persons * self.joints * self.embed_dim

    @property
    def d_s(self) -> int:
        return self.embed_dim // self.spatial_heads

    @property
    def d_t(self) -> int:
        return self.frame_dim // self.temporal_heads

    @property
    def hidden(self) -> int:
        return self.mlp_hidden if self.mlp_hidden is not None else 4 * self.frame_dim

    @property
    def np_dtype(self):
        return DTYPES[self.dtype]

    def to_dict(self) -> dict:
        return asdict(self)


class ParamStore:
    """
    Ordered collection of named parameter tensors.

    Names are dotted paths such as ``block0.spatial.W_Q``; iteration order
    is insertion order and is the order used by checkpoints and checksums.
    """

    def __init__(self):
        self.tensors = OrderedDict()

    def add(self, name, data, trainable=True) -> Tensor:
        if name in self.tensors:
            raise KeyError(f'parameter {name!r} already exists')
        data = np.asarray(data)
        tensor = Tensor(data, requires_grad=trainable, dtype=data.dtype, name=name)
        self.tensors[name] = tensor
        return tensor

    def __getitem__(self, name) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name) -> bool:
        return name in self.tensors

    def __len__(self):
        return len(self.tensors)

    def named(self):
        return list(self.tensors.items())

    def parameters(self):
        """Trainable tensors, in insertion order."""
        return [t for t in self.tensors.values() if t.requires_grad]

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.zero_grad()

    def freeze(self) -> None:
        for t in self.tensors.values():
            t.requires_grad = False

    def count(self, trainable_only=True) -> int:
        return sum(t.size for t in self.tensors.values() if t.requires_grad or not trainable_only)

    def checksum(self) -> str:
        """SHA-256 over names, shapes and raw bytes of every tensor."""
        digest = hashlib.sha256()
        for name, t in self.tensors.items():
            digest.update(name.encode('utf-8'))
            digest.update(str(t.shape).encode('utf-8'))
            digest.update(np.ascontiguousarray(t.data).tobytes())
        return digest.hexdigest()

    def copy(self):
        other = type(self).__new__(type(self))
        other.__dict__.update(self.__dict__)
        other.tensors = OrderedDict()
        for name, t in self.tensors.items():
            other.add(name, t.data.copy(), t.requires_grad)
        return other


def uniform_weight(rng, fan_in, fan_out, dtype=np.float64):
    """Weight of shape (fan_in, fan_out) drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)


class ModelParams(ParamStore):
    """
    All weights of the network for one ModelConfig.

    Weights follow the row-vector convention ``y = x @ W + b``. Layout:

    - ``embed.W_g``/``embed.b_g`` and ``embed.W_r``/``embed.b_r``: (3, D) and (D,).
    - ``pos.M``: positional tensor (T_max, P*K, D); frozen for fixed_sinusoidal.
    - ``block{n}.spatial.*``: layer norm over D, W_Q/W_K/W_V of shape (D, h_s*d_s), W_H (h_s*d_s, D).
    - ``block{n}.temporal.*``: layer norm over P*K*D, W_Q/W_K/W_V (P*K*D, h_t*d_t), W_H (h_t*d_t, P*K*D).
    - ``block{n}.mlp.*``: layer norm, W_1 (P*K*D, hidden), b_1, W_2 (hidden, P*K*D), b_2.
    - ``final.*``: the 2-layer output MLP, same shapes as a block MLP without the layer norm.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg

    @classmethod
    def init(cls, cfg: ModelConfig, rng):
        """
        Allocates and initialises every parameter.

        Weights are uniform in +/- 1/sqrt(fan_in); biases and layer-norm
        shifts start at 0, layer-norm scales at 1, and M as its positional
        strategy prescribes.

        Args:
            cfg (ModelConfig): Network hyperparameters.
            rng (numpy.random.Generator): Source of randomness.

        Returns:
            ModelParams: The initialised parameters.
        """
        p = cls(cfg)
        dt = cfg.np_dtype
        D, F, H = cfg.embed_dim, cfg.frame_dim, cfg.hidden
        hs, ht = cfg.spatial_heads * cfg.d_s, cfg.temporal_heads * cfg.d_t

        p.add('embed.W_g', uniform_weight(rng, 3, D, dt))
        p.add('embed.b_g', np.zeros(D, dtype=dt))
        p.add('embed.W_r', uniform_weight(rng, 3, D, dt))
        p.add('embed.b_r', np.zeros(D, dtype=dt))

        strategy = get_positional(cfg.positional_mode)
        p.add('pos.M', strategy.init_table(cfg.t_max, cfg.tokens, D, dt), trainable=strategy.trainable)

        for n in range(cfg.blocks):
            for module, width, inner in (('spatial', D, hs), ('temporal', F, ht)):
                prefix = f'block{n}.{module}'
                p.add(f'{prefix}.ln.gamma', np.ones(width, dtype=dt))
                p.add(f'{prefix}.ln.beta', np.zeros(width, dtype=dt))
                for w in ('W_Q', 'W_K', 'W_V'):
                    p.add(f'{prefix}.{w}', uniform_weight(rng, width, inner, dt))
                p.add(f'{prefix}.W_H', uniform_weight(rng, inner, width, dt))
            p.add(f'block{n}.mlp.ln.gamma', np.ones(F, dtype=dt))
            p.add(f'block{n}.mlp.ln.beta', np.zeros(F, dtype=dt))
            p._add_mlp(f'block{n}.mlp', rng, F, H, dt)

        p._add_mlp('final', rng, F, H, dt)
        return p

    def _add_mlp(self, prefix, rng, width, hidden, dtype):
        self.add(f'{prefix}.W_1', uniform_weight(rng, width, hidden, dtype))
        self.add(f'{prefix}.b_1', np.zeros(hidden, dtype=dtype))
        self.add(f'{prefix}.W_2', uniform_weight(rng, hidden, width, dtype))
        self.add(f'{prefix}.b_2', np.zeros(width, dtype=dtype))


def parameter_count(cfg: ModelConfig, trainable_only=True) -> int:
    """
    Number of network parameters as a closed-form function of the config.

    Args:
        cfg (ModelConfig): Network hyperparameters.
        trainable_only (bool): Leave out a frozen positional table.

    Returns:
        int: Parameter count.
    """
    D, F, H = cfg.embed_dim, cfg.frame_dim, cfg.hidden
    hs, ht = cfg.spatial_heads * cfg.d_s, cfg.temporal_heads * cfg.d_t
    mlp = F * H + H + H * F + F

    embed = 2 * (3 * D + D)
    positional = cfg.t_max * cfg.tokens * D
    if trainable_only and not get_positional(cfg.positional_mode).trainable:
        positional = 0
    spatial = 2 * D + 3 * D * hs + hs * D
    temporal = 2 * F + 3 * F * ht + ht * F
    block = spatial + temporal + 2 * F + mlp
    return embed + positional + cfg.blocks * block + mlp
