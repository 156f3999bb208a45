from glmotion.positional.pos_base import PositionalEmbedding


class TrainableOnce(PositionalEmbedding):
    """
    Trainable M added once, at the spatial input of the first block.
    """
    trainable = True

    @staticmethod
    def adds_spatial(block_index) -> bool:
        return block_index == 0

    @staticmethod
    def adds_temporal(block_index) -> bool:
        return False
