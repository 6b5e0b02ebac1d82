"""Width-saturation training experiments: standard vs clamped-dense MLPs."""

from .data import load_mnist, make_spike_dataset, take_subset
from .training import RunMetrics, TrainConfig, numeric_gradient_check, sweep, sweep_to_csv, train
