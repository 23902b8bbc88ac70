"""orthonn: orthogonal neural networks built from unary rotation circuits.

The package is organized as six modules:

- :mod:`orthonn.circuits`  RBS gates, unary states, data loaders, simulators
- :mod:`orthonn.pyramid`   pyramidal orthogonal layers and matrix decomposition
- :mod:`orthonn.shots`     sampled estimation, tomography, noise, mitigation
- :mod:`orthonn.training`  networks, backpropagation, training regimes
- :mod:`orthonn.data`      CSV ingestion, PCA, metrics
- :mod:`orthonn.cli`       command-line front end

Submodules are imported lazily so that ``import orthonn`` stays cheap.
"""

import importlib

from . import errors

__version__ = "0.1.0"

_SUBMODULES = ("circuits", "pyramid", "shots", "training", "data", "cli")

__all__ = ["errors", "__version__", *_SUBMODULES]


def __getattr__(name):
    if name in _SUBMODULES:
        module = importlib.import_module(f".{name}", __name__)
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(__all__)
