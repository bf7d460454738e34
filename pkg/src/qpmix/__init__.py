"""Limited-order structure learning for homogeneous mixed graphical models."""
from __future__ import annotations

__version__ = "0.1.0"
INTERFACE_VERSION = "1"

from .errors import (  # noqa: E402
    ConfigError, ConvergenceError, DataFormatError, InfeasibleTestError, NoFeasibleSubsetError,
    NumericalError, QpMixError, RetryExhaustedError, SampleSizeError, SingularMatrixError,
)
from .marked_graph import MarkedGraph, is_decomposable, sample_dregular  # noqa: E402
from .cg_model import CGModel, build_model, complete_covariance  # noqa: E402
from .sampler import MixedDataset, sample_dataset  # noqa: E402
from .citest import ci_test  # noqa: E402
from .nrr import NrrMatrix, average_nrr, nrr_matrix, nrr_pair  # noqa: E402
from .inference import auc, precision_recall, qp_graph, rank_edges  # noqa: E402
