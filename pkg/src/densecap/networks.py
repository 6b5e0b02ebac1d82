"""Fixed-width dense ReLU networks with a depth-normalized forward pass.

The forward rule divides every layer's pre-activation by d_prev*(L+2) and
puts the bias inside the sum over input channels, so a bias contributes
b/(L+2) to the pre-activation (not b as in a conventional MLP). With all
parameters bounded by B, no small set of channels can dominate the output:
nontrivial computation has to be collective.
"""

import io
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidNetworkError,
    ParseError,
)


@dataclass(frozen=True)
class DenseNetwork:
    """Depth-L ReLU network with hidden width d and parameter bound B.

    Layer widths are (d0, d, ..., d, dL); d must be divisible by both d0
    and dL, every weight and bias must lie in [-B, B], and B >= L+2.
    """

    L: int
    d0: int
    dL: int
    d: int
    B: float
    weights: tuple
    biases: tuple
    check: bool = True

    def __post_init__(self):
        ws = tuple(np.ascontiguousarray(w, dtype=float) for w in self.weights)
        bs = tuple(np.ascontiguousarray(b, dtype=float) for b in self.biases)
        for a in ws + bs:
            a.setflags(write=False)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)
        if self.check:
            self._validate()

    def _validate(self):
        if self.L < 2:
            raise InvalidNetworkError(f"depth must be >= 2, got {self.L}")
        if min(self.d0, self.dL, self.d) < 1:
            raise InvalidNetworkError("dimensions must be positive")
        if self.d % self.d0 or self.d % self.dL:
            raise InvalidNetworkError(
                f"hidden width {self.d} not divisible by d0={self.d0}, dL={self.dL}"
            )
        if self.B < self.L + 2:
            raise InvalidNetworkError(f"bound B={self.B} below L+2={self.L + 2}")
        if len(self.weights) != self.L or len(self.biases) != self.L:
            raise InvalidNetworkError(
                f"expected {self.L} weight/bias entries, got "
                f"{len(self.weights)}/{len(self.biases)}"
            )
        dims = self.layer_dims
        for ell in range(1, self.L + 1):
            w, b = self.weights[ell - 1], self.biases[ell - 1]
            want = (dims[ell], dims[ell - 1])
            if w.shape != want:
                raise DimensionMismatchError(f"W[{ell}]", want, w.shape)
            if b.shape != (dims[ell],):
                raise DimensionMismatchError(f"b[{ell}]", (dims[ell],), b.shape)
            for name, arr in (("W", w), ("b", b)):
                bad = np.argwhere(np.abs(arr) > self.B)
                if bad.size:
                    idx = tuple(int(k) for k in bad[0])
                    raise InvalidNetworkError(
                        f"{name}[{ell}] entry {idx} = {arr[tuple(bad[0])]!r} "
                        f"outside [-{self.B}, {self.B}]"
                    )

    @property
    def layer_dims(self):
        return (self.d0,) + (self.d,) * (self.L - 1) + (self.dL,)

    @property
    def size(self):
        """Effective size (L+2)*d of the fixed-width network."""
        return (self.L + 2) * self.d


def forward(net, x):
    """Evaluate the normalized forward pass; final layer carries no ReLU.

    Accepts a single input of shape (d0,) or a batch (..., d0); returns the
    matching (dL,) or (..., dL) output.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (net.d0,):
        raise DimensionMismatchError("input", (net.d0,), x.shape)
    h = x
    dims = net.layer_dims
    for ell in range(1, net.L + 1):
        w, b = net.weights[ell - 1], net.biases[ell - 1]
        d_prev = dims[ell - 1]
        pre = (h @ w.T + d_prev * b) / (d_prev * (net.L + 2))
        h = pre if ell == net.L else np.maximum(pre, 0.0)
    return h


def clamp_dense(net, bound):
    """Project every parameter onto [-bound, bound] entrywise (idempotent)."""
    if bound <= 0:
        raise InvalidNetworkError(f"clamp bound must be positive, got {bound}")
    ws = tuple(np.clip(w, -bound, bound) for w in net.weights)
    bs = tuple(np.clip(b, -bound, bound) for b in net.biases)
    # the stored envelope only shrinks, and never below the L+2 floor
    new_b = net.B if bound >= net.B else max(float(bound), float(net.L + 2))
    return DenseNetwork(net.L, net.d0, net.dL, net.d, new_b, ws, bs)


def param_count(L, d0, dL, d):
    """Number of parameters of the fixed-width architecture."""
    if min(L, d0, dL, d) < 1:
        raise InvalidNetworkError("all architecture parameters must be >= 1")
    return (L - 1) * d * d + (d0 + dL + L - 1) * d + dL


MAGIC_NET = "densecap-net v1"


def _fmt(values):
    return " ".join(repr(float(v)) for v in np.asarray(values).ravel())


def serialize_network(net):
    """Text record for a network; floats use shortest round-trip repr."""
    out = io.StringIO()
    out.write(MAGIC_NET + "\n")
    out.write(f"{net.L} {net.d0} {net.dL} {net.d} {net.B!r}\n")
    for ell in range(1, net.L + 1):
        out.write(f"W {ell}\n")
        for row in net.weights[ell - 1]:
            out.write(_fmt(row) + "\n")
        out.write(f"b {ell}\n")
        out.write(_fmt(net.biases[ell - 1]) + "\n")
    return out.getvalue()


def deserialize_network(text):
    lines = text.splitlines()
    pos = 0

    def take(what):
        nonlocal pos
        if pos >= len(lines):
            raise ParseError(f"truncated record: missing {what}", line=pos + 1)
        pos += 1
        return lines[pos - 1]

    if take("header").strip() != MAGIC_NET:
        raise ParseError(f"bad header, expected {MAGIC_NET!r}", line=1)
    head = take("dimensions line").split()
    if len(head) != 5:
        raise ParseError("dimensions line needs 'L d0 dL d B'", line=2)
    try:
        L, d0, dL, d = (int(v) for v in head[:4])
        B = float(head[4])
    except ValueError as exc:
        raise ParseError(f"bad dimensions line: {exc}", line=2) from None
    dims = (d0,) + (d,) * (L - 1) + (dL,)
    weights, biases = [], []
    for ell in range(1, L + 1):
        tag = take(f"W {ell} marker").split()
        if tag != ["W", str(ell)]:
            raise ParseError(f"expected 'W {ell}' marker, got {' '.join(tag)!r}", line=pos)
        rows = []
        for r in range(dims[ell]):
            vals = take(f"W {ell} row {r}").split()
            if len(vals) != dims[ell - 1]:
                raise ParseError(
                    f"W {ell} row {r} has {len(vals)} entries, expected {dims[ell - 1]}",
                    line=pos,
                )
            rows.append([float(v) for v in vals])
        tag = take(f"b {ell} marker").split()
        if tag != ["b", str(ell)]:
            raise ParseError(f"expected 'b {ell}' marker, got {' '.join(tag)!r}", line=pos)
        vals = take(f"b {ell} values").split()
        if len(vals) != dims[ell]:
            raise ParseError(
                f"b {ell} has {len(vals)} entries, expected {dims[ell]}", line=pos
            )
        weights.append(np.array(rows))
        biases.append(np.array([float(v) for v in vals]))
    return DenseNetwork(L, d0, dL, d, B, tuple(weights), tuple(biases))


def save_network(net, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_network(net))


def load_network(path):
    with open(path, encoding="utf-8") as fh:
        return deserialize_network(fh.read())


def random_network(L, d0, dL, d, B, rng, scale=1.0):
    """Network with parameters uniform in [-scale*B, scale*B] (scale <= 1)."""
    dims = (d0,) + (d,) * (L - 1) + (dL,)
    lim = scale * B
    ws = tuple(
        rng.uniform(-lim, lim, size=(dims[ell], dims[ell - 1]))
        for ell in range(1, L + 1)
    )
    bs = tuple(rng.uniform(-lim, lim, size=dims[ell]) for ell in range(1, L + 1))
    return DenseNetwork(L, d0, dL, d, B, ws, bs)
