from glmotion.training.optim       import OptimState, optimizer_step, clip_grad_norm, ExponentialDecay
from glmotion.training.metrics_log import MetricsLog
from glmotion.training.pretrain    import PretrainResult, pretrain, prepare_batch, prepare_sequence, worker_count
from glmotion.training.evaluate    import (ProbeResult, FinetuneResult, extract_features, linear_probe,
                                           stratified_subset, finetune_semi, run_ablation, ABLATION_VARIANTS)
from glmotion.training.verify      import toy_configs, toy_batch, toy_gradcheck
