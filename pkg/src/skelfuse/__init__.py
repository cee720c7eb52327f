"""Skeleton-based action recognition with a graph-convolution branch, a
Transformer branch, derived pose modalities and late score fusion."""
from .errors import (AlignmentError, ConfigError, ContractError,
                     DimensionError, FormatError, ModalityError,
                     SkelfuseError)
from .sequence import (Dataset, SkeletonSequence, center_normalize,
                       load_dataset_dir, read_skl1, resample_sequence,
                       save_dataset_dir, write_skl1)
from .topology import (Topology, builtin_topology, load_topology,
                       parse_topology, resolve_topology, write_topology)
from .modalities import (derive_bone, derive_bone_motion, derive_joint_motion,
                         derive_k2, derive_k2_motion, derive_modality)
from .lifting import PoseLifter, lift_to_3d, load_precomputed_3d, zero_z_lifter
from .gcn import (GcnLayerParams, GcnModel, channel_refined_adjacency,
                  graph_conv_forward, init_gcn_model, normalized_adjacency,
                  temporal_conv_forward, temporal_dependent_adjacency)
from .former import (AttentionParams, FeedforwardParams, FormerModel,
                     attention_block_forward, attention_weights,
                     feedforward_block, init_former_model, layer_norm,
                     positional_encode, tokenize)
from .training import (TrainConfig, TrainHistory, cross_entropy_loss,
                       desk_config, finite_difference_check, load_train_config,
                       lr_at_epoch, paper_former_config, paper_gcn_config,
                       score_dataset, sgd_step, train_model,
                       write_train_config)
from .checkpoint import load_model, save_model
from .fusion import (FusionWeights, ScoreMatrix, fuse_scores,
                     grid_search_weights, read_scores, softmax_scores,
                     write_scores)
from .synth import SynthConfig, class_archetype, generate_synthetic
from .metrics import Metrics, evaluate, plot_confusion
from .ablation import (AblationReport, StreamSpec, load_ablation_spec,
                       prepare_stream_dataset, run_ablation)

__version__ = "0.1.0"
