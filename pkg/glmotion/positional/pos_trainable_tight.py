from glmotion.positional.pos_base import PositionalEmbedding


class TrainableTight(PositionalEmbedding):
    """
    Trainable M re-injected in every block, at both the spatial and the
    temporal input. Zero-initialised.

    Methods:
        -- inherited from PositionalEmbedding:
        init_table(t_max, tokens, dim): Zero table.
        adds_spatial(block_index): Always True.
        adds_temporal(block_index): Always True.
    """
    trainable = True
