"""From-scratch differentiable layers and training.

Peephole LSTM, dense, 1-D convolution with max pooling, and a 1-D
convolutional LSTM, all with exact backpropagation through time,
trained by Adam on mean squared error with early stopping. A central
finite-difference gradient checker validates every layer type.
"""

from .layers import (
    Conv1dLayer,
    DenseLayer,
    FlattenLayer,
    LstmLayer,
    ConvLstmLayer,
    MaxPoolLayer,
)
from .network import (
    AdamOptimizer,
    LayerSpec,
    Network,
    NetworkSpec,
    TrainConfig,
    TrainedNetwork,
    gradient_check,
    train_network,
)

__all__ = [
    "AdamOptimizer",
    "Conv1dLayer",
    "ConvLstmLayer",
    "DenseLayer",
    "FlattenLayer",
    "LayerSpec",
    "LstmLayer",
    "MaxPoolLayer",
    "Network",
    "NetworkSpec",
    "TrainConfig",
    "TrainedNetwork",
    "gradient_check",
    "train_network",
]
