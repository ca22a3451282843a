"""One-pass online metric learning (OPML) and its cold-start variant (COPML).

A Mahalanobis transform ``L`` is learned from a single pass over a sample
stream. Each arriving sample forms one triplet against the latest stored
sample of each class, and each update costs O(d^2) via a closed-form inverse
of a rank-2 perturbation of the identity.
"""
from .data import (Dataset, DatasetError, Sample, SplitSpec, bundled_names, load_bundled,
                   load_csv, make_stream, normalize)
from .evaluation import EvalReport, error_rate, repeated_eval, verification_roc
from .metric import (hinge_loss, load_metric, opml_update, pair_update, save_metric,
                     transformed_distance)
from .trainer import TrainConfig, TrainTrace, train, train_copml, train_opml
from .triplets import ClassLatestBuffer, Triplet

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DatasetError", "Sample", "SplitSpec", "bundled_names", "load_bundled",
    "load_csv", "make_stream", "normalize", "EvalReport", "error_rate", "repeated_eval",
    "verification_roc", "hinge_loss", "load_metric", "opml_update", "pair_update",
    "save_metric", "transformed_distance", "TrainConfig", "TrainTrace", "train",
    "train_copml", "train_opml", "ClassLatestBuffer", "Triplet", "__version__",
]
