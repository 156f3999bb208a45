_current_settings = None


def set_settings(settings: dict) -> None:
    """
    Set the global settings for the glmotion library.

    Args:
        settings (dict): A nested dictionary shaped like `template_settings`.

    Example:
        >>> import glmotion as gm
        >>> gm.set_settings({
        ...     "Model": {...},
        ...     "Mpdp": {...},
        ...     "Run": {...}
        ... })
    """
    global _current_settings
    _current_settings = settings


def get_settings() -> dict:
    """
    Get the current global settings. Returns template_settings if no settings have been set.

    Returns:
        dict: The current settings dictionary.
    """
    global _current_settings
    if _current_settings is None:
        return template_settings
    return _current_settings


def get_default_settings(settings):
    """
    Flattens a nested settings dictionary into the flat key space shared by
    config files and command-line flags.

    Model keys:
    - 'joints'           : joints per person K (None = take it from the dataset)
    - 'persons'          : persons per frame P (None = take it from the dataset)
    - 'embed_dim'        : embedding size D of every joint token
    - 'blocks'           : number of stacked blocks N
    - 'spatial_heads'    : heads h_s of the spatial attention
    - 'temporal_heads'   : heads h_t of the temporal attention
    - 'mlp_hidden'       : hidden width of the MLPs (None = 4 x P*K*D)
    - 't_max'            : maximum number of frames T_max
    - 'ln_eps'           : layer-norm epsilon
    - 'positional_mode'  : trainable_tight, trainable_once or fixed_sinusoidal
    - 'p2p_attention'    : allow attention between persons in the spatial module
    - 'dtype'            : float64 (default) or float32

    Mpdp keys:
    - 'intervals'        : frame offsets n of the displacement targets
    - 'magnitude_classes': number of magnitude bins C_sigma
    - 'eps_dir'          : per-axis no-movement threshold in meters
    - 'lambda_delta'     : weight of the direction loss
    - 'lambda_sigma'     : weight of the magnitude loss

    Run keys:
    - 'epochs', 'batch_size', 'seed', 'lr', 'lr_decay', 'weight_decay',
      'grad_clip', 'max_steps', 'checkpoint_every'      : pretraining loop
    - 'probe_lr', 'probe_epochs', 'probe_batch_size'     : linear probe
    - 'finetune_lr', 'finetune_epochs', 'label_fraction' : semi-supervised fine-tuning
    - 'augment', 'shear', 'interp_frac', 'corrupt'       : augmentation
    - 'input_mode'       : natural or sampled:<N>
    - 'disentangle_mode' : global_local, local_only or entangled
    - 'log_wall_time'    : write wall-clock time to the metrics log
    """
    default_settings = {}
    for section in ('Model', 'Mpdp', 'Run'):
        for key, value in settings[section].items():
            if key in default_settings:
                raise KeyError(f'settings key {key!r} appears in more than one section')
            default_settings[key] = value
    return default_settings


template_settings = {
    "Model": {
        "joints": None,
        "persons": None,
        "embed_dim": 6,
        "blocks": 4,
        "spatial_heads": 2,
        "temporal_heads": 8,
        "mlp_hidden": None,
        "t_max": 300,
        "ln_eps": 1e-5,
        "positional_mode": "trainable_tight",
        "p2p_attention": True,
        "dtype": "float64"
    },
    "Mpdp": {
        "intervals": [1, 5, 10],
        "magnitude_classes": 8,
        "eps_dir": 0.005,
        "lambda_delta": 1.0,
        "lambda_sigma": 1.0
    },
    "Run": {
        "epochs": 120,
        "batch_size": 128,
        "seed": 0,
        "lr": 5e-4,
        "lr_decay": 0.99,
        "weight_decay": 0.01,
        "grad_clip": 5.0,
        "max_steps": None,
        "checkpoint_every": 10,
        "probe_lr": 3e-3,
        "probe_epochs": 120,
        "probe_batch_size": 1024,
        "finetune_lr": 1e-4,
        "finetune_epochs": 120,
        "label_fraction": 0.1,
        "augment": True,
        "shear": 0.5,
        "interp_frac": 0.1,
        "corrupt": 0.0,
        "input_mode": "natural",
        "disentangle_mode": "global_local",
        "log_wall_time": False
    }
}

# keys whose default is None but whose value is typed
optional_types = {
    "joints": int,
    "persons": int,
    "mlp_hidden": int,
    "max_steps": int,
    "grad_clip": float,
}
