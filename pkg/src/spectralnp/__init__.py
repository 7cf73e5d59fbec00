"""spectralnp: context-conditioned spectral-mixture features for
transformer neural processes.

Subpackages and modules:

* ``spectral``   the four-stage spectral aggregator and feature maps
* ``kernels``    closed-form kernels, random-feature estimator, rotations
* ``tasks``      synthetic episode generators and CSV ingestion
* ``diffengine`` minimal float64 reverse-mode tape engine and AdamW
* ``npmodel``    transformer neural-process backbone and training
* ``harness``    CLI, run configuration, metrics persistence
"""

from . import diffengine, kernels, spectral, tasks
from .errors import ConfigError, DataError, IngestionError, NumericalError, ShapeError

__version__ = "0.1.0"

__all__ = [
    "diffengine",
    "kernels",
    "spectral",
    "tasks",
    "ConfigError",
    "DataError",
    "IngestionError",
    "NumericalError",
    "ShapeError",
    "__version__",
]
