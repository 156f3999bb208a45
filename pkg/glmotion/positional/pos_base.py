import numpy as np


class PositionalEmbedding:
    """
    The base class for all positional-embedding strategies.

    A strategy decides how the positional tensor M of shape
    (T_max, P*K, D) is initialised, whether it is trained, and at which
    block inputs it is added. Block indices are 0-based.
    """
    trainable = True

    @staticmethod
    def init_table(t_max, tokens, dim, dtype=np.float64) -> np.ndarray:
        """
        Initial value of M.

        Args:
            t_max (int): Maximum number of frames.
            tokens (int): Tokens per frame, P*K.
            dim (int): Embedding size D.
            dtype: numpy dtype of the table.

        Returns:
            numpy.ndarray: Array of shape (t_max, tokens, dim).
        """
        return np.zeros((t_max, tokens, dim), dtype=dtype)

    @staticmethod
    def adds_spatial(block_index) -> bool:
        """Whether M is added to the spatial input of block `block_index`."""
        return True

    @staticmethod
    def adds_temporal(block_index) -> bool:
        """Whether the vectorised M is added to the temporal input of block `block_index`."""
        return True
