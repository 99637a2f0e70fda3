"""TensorFlow/Keras backend for the layer-graph interchange format."""

from .adapter import ModelRejected, evaluate, main, make_layer

__version__ = "0.1.0"

__all__ = ["ModelRejected", "evaluate", "main", "make_layer", "__version__"]
