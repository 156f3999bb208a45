from glmotion.sequence              import RawSequence, DisentangledSequence, Batch, disentangle, reassemble, pad_and_mask
from glmotion.sequence_transformer  import Augment
from glmotion.sequence_io           import read_sequence, write_sequence, read_dataset, write_dataset, parse_ntu_skeleton
from glmotion.synth_generator       import synth_generate, nearest_neighbor_accuracy
from glmotion.model                 import ModelConfig, ModelParams, model_forward, pooled_representation, parameter_count
from glmotion.model.checkpoint      import save_checkpoint, load_checkpoint
from glmotion.mpdp                  import MpdpConfig, MpdpHeads, build_targets, batch_targets, heads_forward, mpdp_loss
from glmotion.config                import RunConfig, resolve_settings, build_configs
from glmotion.training              import pretrain, linear_probe, finetune_semi, run_ablation, extract_features
from glmotion.analysis              import average_attention, mean_attended_distance, posemb_similarity
from glmotion.settings              import set_settings, get_settings, template_settings
