"""Hypergraph attention text-video retrieval with a variational graph scorer.

Every pair (text i, video j) becomes one joint hypergraph over a global video
node, keyframe nodes and word nodes. A hypergraph attention encoder, a
two-layer variational graph convolution and an attention readout turn it into
a scalar score; a B x B score matrix is trained with bidirectional in-batch
cross-entropy plus a KL term. Gradients are exact and hand-derived.
"""
from .errors import (CheckpointError, DimensionError, FormatError, GraphError, LeanError,
                     ManifestError, NonFiniteError)
from .kernels import available_backends, backend_name, use_backend
from .metrics import RetrievalMetrics, both_directions, metrics, rank_of_target
from .params import ModelParams, init_params
from .pipeline import loss_and_grad, pair_score, similarity_matrix
from .scoring import LossWeights, retrieval_losses, total_loss
from .trainer import TrainConfig, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "CheckpointError", "DimensionError", "FormatError", "GraphError", "LeanError",
    "ManifestError", "NonFiniteError", "LossWeights", "ModelParams", "RetrievalMetrics",
    "TrainConfig", "available_backends", "backend_name", "both_directions", "init_params",
    "load_checkpoint", "loss_and_grad", "metrics", "pair_score", "rank_of_target",
    "retrieval_losses", "save_checkpoint", "similarity_matrix", "total_loss", "train",
    "use_backend",
]
