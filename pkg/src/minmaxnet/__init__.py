"""MinMax networks trained by constrained discrete gradient descent.

A MinMax network is a sum of min- and max-neurons over affine basic
neurons; it represents any continuous piecewise-linear function.
"""

from ._backend import NAME as KERNEL_BACKEND
from .contraction import ContractionReport, certify_step, measurement_space_matrix, weight_space_matrix
from .dataset import Dataset, gen_corner, gen_polygon, gen_pyramid, load_csv, write_csv
from .model import MAX, MIN, Network, Neuron, activation_pattern, evaluate, load_network, save_network
from .topology import TopologySchedule, duplicate_basic, prune, spawn_neuron
from .trainer import TrainerConfig, TrainState, constrained_step, cost, gradient, train

__version__ = "0.1.0"
