import numpy as np

from glmotion.positional.pos_trainable_once import TrainableOnce

SINUSOID_BASE = 10000.0


class FixedSinusoidal(TrainableOnce):
    """
    Frozen sine/cosine table added once, at the spatial input of the first block.

    Rows are indexed by the flattened position u = t * (P*K) + j; even
    channels hold sin(u / base^(2i/D)) and odd channels the matching cosine.
    """
    trainable = False

    @staticmethod
    def init_table(t_max, tokens, dim, dtype=np.float64) -> np.ndarray:
        u = np.arange(t_max * tokens, dtype=np.float64)[:, None]
        channel = np.arange(dim)
        rate = SINUSOID_BASE ** (-(2 * (channel // 2)) / dim)
        angle = u * rate[None, :]
        table = np.where(channel % 2 == 0, np.sin(angle), np.cos(angle))
        return table.reshape(t_max, tokens, dim).astype(dtype)
