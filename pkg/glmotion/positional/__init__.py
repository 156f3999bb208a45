from glmotion.errors                             import ConfigError
from glmotion.positional.pos_base                import PositionalEmbedding
from glmotion.positional.pos_trainable_tight     import TrainableTight
from glmotion.positional.pos_trainable_once      import TrainableOnce
from glmotion.positional.pos_fixed_sinusoidal    import FixedSinusoidal

POSITIONAL_MODES = {
    'trainable_tight': TrainableTight,
    'trainable_once': TrainableOnce,
    'fixed_sinusoidal': FixedSinusoidal,
}


def get_positional(mode: str):
    """Strategy class for a ``positional_mode`` setting."""
    try:
        return POSITIONAL_MODES[mode]
    except KeyError:
        raise ConfigError(f'unknown positional_mode {mode!r}, expected one of {sorted(POSITIONAL_MODES)}') from None
