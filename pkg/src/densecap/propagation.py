"""Message passing on step kernels and on their weighted-graph form.

Both schemes are fixed, not trainable. On kernels each round integrates
the signal against the kernel, amplifies by B, and applies ReLU; on graphs
each round averages neighbor features weighted by the adjacency. The last
round of either scheme drops the ReLU. Integrals over step objects are
measure-weighted finite sums, so evaluation is exact up to float rounding.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EquivalenceViolationError, ParameterError
from .kernels import (
    StepKernel,
    StepSignal,
    graph_features,
    induce_graph,
    induce_input_signal,
    induce_kernel,
)
from .networks import forward
from .partitions import common_refinement


def _align(kernel, signal):
    """Put a kernel and signal on one partition via common refinement."""
    pk, ps = kernel.partition, signal.partition
    if pk.size == ps.size and np.allclose(
        pk.boundaries(), ps.boundaries(), rtol=0, atol=1e-12
    ):
        return kernel, signal
    ref, ki, si = common_refinement(pk, ps, with_maps=True)
    c = kernel.coeffs[np.ix_(ki, ki)]
    v = signal.values[si]
    return StepKernel(ref, c), StepSignal(ref, v)


def mpnn_forward(kernel, signal, B, L, return_hidden=False):
    """Run L rounds of amplified integral-ReLU message passing.

    Returns the output StepSignal; with ``return_hidden=True`` also the
    list of signals after rounds 0..L.
    """
    if L < 1:
        raise ParameterError(f"need at least one round, got L={L}")
    kernel, signal = _align(kernel, signal)
    weighted = kernel.coeffs * kernel.partition.measures[None, :]
    g = signal.values
    hidden = [StepSignal(kernel.partition, g)]
    for ell in range(1, L + 1):
        g = B * (weighted @ g)
        if ell < L:
            g = np.maximum(g, 0.0)
        if return_hidden:
            hidden.append(StepSignal(kernel.partition, g))
    out = StepSignal(kernel.partition, g)
    if return_hidden:
        return out, hidden
    return out


def readout(signal, layers, tol=1e-10):
    """Per-output-cell value of a signal defined on a refinement of the cells.

    The value must be constant on each output cell; variation beyond the
    tolerance signals a structural bug rather than noise, so it raises.
    """
    bounds = signal.partition.boundaries()
    out = np.empty(layers.dL)
    cell = 1.0 / ((layers.L + 2) * layers.dL)
    lo0 = layers.L / (layers.L + 2)
    for i in range(layers.dL):
        lo, hi = lo0 + i * cell, lo0 + (i + 1) * cell
        inside = (bounds[:-1] >= lo - 1e-12) & (bounds[1:] <= hi + 1e-12)
        idx = np.flatnonzero(inside)
        if idx.size == 0:
            raise ParameterError(
                f"signal partition has no parts inside output cell {i}"
            )
        vals = signal.values[idx]
        dev = float(np.ptp(vals))
        if dev > tol:
            raise EquivalenceViolationError(
                f"output cell {i} not constant: spread {dev:.3g} exceeds {tol:.1g}"
            )
        out[i] = vals[0]
    return out


def sr_mpnn_forward(graph, features, L, return_hidden=False):
    """L rounds of sum-ReLU message passing on a weighted graph."""
    features = np.asarray(features, dtype=float)
    n = graph.n
    if features.shape != (n,):
        raise ParameterError(f"features must have shape ({n},), got {features.shape}")
    f = features
    hidden = [f]
    for ell in range(1, L + 1):
        f = (graph.adjacency @ f) / n
        if ell < L:
            f = np.maximum(f, 0.0)
        if return_hidden:
            hidden.append(f)
    if return_hidden:
        return f, hidden
    return f


def graph_readout(features, layers, tol=1e-10):
    """Per-output-cell value of node features (constancy enforced)."""
    out = np.empty(layers.dL)
    for i in range(layers.dL):
        vals = features[layers.out_cell_slice(i)]
        dev = float(np.ptp(vals))
        if dev > tol:
            raise EquivalenceViolationError(
                f"output cell {i} not constant: spread {dev:.3g} exceeds {tol:.1g}"
            )
        out[i] = vals[0]
    return out


@dataclass
class EquivalenceReport:
    net_output: np.ndarray
    kernel_output: np.ndarray
    graph_output: np.ndarray
    max_discrepancy: float
    bias_values: list
    tolerance: float

    @property
    def passed(self):
        return self.max_discrepancy <= self.tolerance

    @property
    def max_bias_drift(self):
        return max(abs(v - 1.0) for v in self.bias_values)


def check_equivalence(net, x, tolerance=1e-9):
    """Evaluate a network as itself, as a kernel, and as a graph.

    All three paths must produce the same output vector; the report also
    carries the bias-region value after every message-passing round, which
    stays exactly 1 for a correctly built encoding.
    """
    y_net = forward(net, x)

    ck = induce_kernel(net)
    sig = induce_input_signal(x, ck.layers)
    out_sig, hidden = mpnn_forward(ck.kernel, sig, ck.B, ck.layers.L, return_hidden=True)
    y_ker = readout(out_sig, ck.layers)
    bias = ck.layers.bias_slice
    bias_values = [float(h.values[bias.start]) for h in hidden]

    g = induce_graph(net)
    y_graph = graph_readout(sr_mpnn_forward(g, graph_features(x, g.layers), net.L), g.layers)

    disc = max(
        float(np.max(np.abs(y_net - y_ker))),
        float(np.max(np.abs(y_net - y_graph))),
        float(np.max(np.abs(y_ker - y_graph))),
    )
    return EquivalenceReport(y_net, y_ker, y_graph, disc, bias_values, tolerance)
