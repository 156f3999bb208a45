from glmotion.model.gl_base        import ModelConfig, ModelParams, ParamStore, parameter_count
from glmotion.model.gl_attention   import multi_head_attention, spatial_mha, temporal_mha, person_mask
from glmotion.model.gl_transformer import ForwardOutput, embed_frame, gl_block, model_forward, pooled_representation
