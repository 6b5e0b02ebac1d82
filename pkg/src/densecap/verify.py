"""In-process invariant suites behind ``densecap verify``.

Each check re-derives a module's core guarantee on fresh random instances
and reports one pass/fail line; ``quick`` shrinks the instance counts.
"""

import numpy as np

from .bounds import (
    compression_hidden_dim,
    d0_threshold,
    lipschitz_constant,
    wrl_hidden_dim,
)
from .cutnorm import (
    kernel_cut_norm_exact,
    kernel_cut_norm_lower,
    l1_norm,
    signal_cut_norm,
)
from .experiments.training import numeric_gradient_check
from .kernels import StepKernel, StepSignal, extract_network, induce_kernel
from .networks import forward, param_count, random_network
from .partitions import Partition, equipartition
from .propagation import check_equivalence
from .regularity import equitize, project, weak_regularity


def _random_net(rng, max_d=24):
    L = int(rng.integers(2, 5))
    d0 = int(rng.integers(1, 4))
    dL = int(rng.integers(1, 4))
    mult = int(np.lcm(d0, dL))
    d = mult * int(rng.integers(1, max(2, max_d // mult + 1)))
    B = float(rng.uniform(L + 2, 10.0))
    return random_network(L, d0, dL, d, B, rng)


def _brute_cut_norm(kern):
    n = kern.n
    w = kern.coeffs * np.outer(kern.partition.measures, kern.partition.measures)
    best = 0.0
    for smask in range(1 << n):
        rows = [i for i in range(n) if (smask >> i) & 1]
        if not rows:
            continue
        g = w[rows].sum(axis=0)
        best = max(best, g[g > 0].sum(), -g[g < 0].sum())
    return best


def run_verification(quick=False, seed=0):
    rng = np.random.default_rng(seed)
    k = 1 if quick else 4
    results = []

    def check(name, fn):
        try:
            detail = fn()
            results.append((name, True, detail or ""))
        except AssertionError as exc:
            results.append((name, False, str(exc)))
        except Exception as exc:  # noqa: BLE001 - verify must report, not crash
            results.append((name, False, f"{type(exc).__name__}: {exc}"))

    def forward_oracle():
        worst = 0.0
        for _ in range(25 * k):
            net = _random_net(rng)
            x = rng.uniform(0, 1, net.d0)
            h = x.copy()
            dims = net.layer_dims
            for ell in range(1, net.L + 1):
                w, b = net.weights[ell - 1], net.biases[ell - 1]
                pre = np.array(
                    [
                        sum(w[i, j] * h[j] + b[i] for j in range(dims[ell - 1]))
                        / (dims[ell - 1] * (net.L + 2))
                        for i in range(dims[ell])
                    ]
                )
                h = pre if ell == net.L else np.maximum(pre, 0)
            worst = max(worst, float(np.abs(forward(net, x) - h).max()))
        assert worst <= 1e-12, f"disagreement {worst:.2e}"
        return f"max |fast - straight-line| = {worst:.1e}"

    def three_paths():
        worst, drift = 0.0, 0.0
        for _ in range(25 * k):
            net = _random_net(rng)
            rep = check_equivalence(net, rng.uniform(0, 1, net.d0))
            worst = max(worst, rep.max_discrepancy)
            drift = max(drift, rep.max_bias_drift)
        assert worst <= 1e-9, f"discrepancy {worst:.2e}"
        assert drift <= 1e-12, f"bias drift {drift:.2e}"
        return f"max discrepancy {worst:.1e}, bias drift {drift:.1e}"

    def roundtrip():
        for _ in range(10 * k):
            net = _random_net(rng)
            # exact round trips need a power-of-two bound
            net = random_network(net.L, net.d0, net.dL, net.d, 8.0, rng)
            back = extract_network(induce_kernel(net))
            for a, b in zip(net.weights + net.biases, back.weights + back.biases):
                assert np.array_equal(a, b), "parameters changed in round trip"
        return "induce/extract identity, exact"

    def cut_exact():
        worst = 0.0
        for _ in range(8 * k):
            n = int(rng.integers(2, 8))
            kern = StepKernel(
                Partition(rng.dirichlet(np.ones(n))), rng.uniform(-1, 1, (n, n))
            )
            v = kernel_cut_norm_exact(kern).value
            bf = _brute_cut_norm(kern)
            worst = max(worst, abs(v - bf))
            lo = kernel_cut_norm_lower(kern, restarts=8, seed=1).value
            assert lo <= v + 1e-12, "heuristic exceeded exact"
        assert worst <= 1e-12, f"exact vs enumeration gap {worst:.2e}"
        return f"max |exact - enumeration| = {worst:.1e}"

    def sandwich():
        for _ in range(200 * k):
            n = int(rng.integers(1, 12))
            sig = StepSignal(
                Partition(rng.dirichlet(np.ones(n))), rng.uniform(-2, 2, n)
            )
            v, l1 = signal_cut_norm(sig).value, l1_norm(sig)
            assert 0.5 * l1 - 1e-12 <= v <= l1 + 1e-12, f"{v} vs L1 {l1}"
        return "0.5*L1 <= cut <= L1 held"

    def projection():
        for _ in range(10 * k):
            n = int(rng.integers(3, 10))
            kern = StepKernel(
                Partition(rng.dirichlet(np.ones(n))), rng.uniform(-1, 1, (n, n))
            )
            assert project(kern, kern.partition) is kern
            coarse = equipartition(int(rng.integers(1, n)))
            kp = project(kern, coarse)
            m, mp = kern.partition.measures, coarse.measures
            ints = (kern.coeffs * np.outer(m, m)).sum()
            intp = (kp.coeffs * np.outer(mp, mp)).sum()
            assert abs(ints - intp) <= 1e-12, "integral not preserved"
        return "idempotence and integral preservation"

    def fk_trace():
        for _ in range(3 * k):
            base = rng.uniform(-1, 1, (5, 5))
            reps = np.repeat(np.arange(5), rng.multinomial(11, np.ones(5) / 5) + 1)
            kern = StepKernel(equipartition(reps.size), base[np.ix_(reps, reps)])
            tr = weak_regularity(kern, 0.2, oracle="exact")
            en = tr.energies
            assert all(b >= a for a, b in zip(en, en[1:])), "energy decreased"
            assert len(tr.iterations) <= int(np.ceil(4 / 0.04)) + 1, "cap exceeded"
            assert tr.status in ("certified", "cap_reached")
        return "energy monotone, iteration cap held"

    def equitize_h():
        for _ in range(20 * k):
            n = int(rng.integers(2, 8))
            part = Partition(rng.dirichlet(np.ones(n)))
            m = n + int(rng.integers(1, 12))
            res = equitize(part, m)
            assert res.h <= n, f"h={res.h} exceeds {n}"
            assert len(res.composition) == m
        return "h <= part count on all instances"

    def bounds_spot():
        assert lipschitz_constant(4, 2).exact == 64
        assert wrl_hidden_dim(4, 2, 1, 1).exact == 16
        assert compression_hidden_dim(1, 4, 2, 1, 1).log2 == 2097164
        assert d0_threshold(4, 2, 1, 1).exact == 18_253_611_637
        assert param_count(2, 1, 1, 4) == 29
        return "spot values exact"

    def gradients():
        worst = numeric_gradient_check(width=8, seed=seed)
        assert worst <= 1e-5, f"relative gap {worst:.2e}"
        return f"max relative gap {worst:.1e}"

    check("forward vs straight-line oracle", forward_oracle)
    check("network/kernel/graph equivalence", three_paths)
    check("induce/extract round trip", roundtrip)
    check("kernel cut norm vs enumeration", cut_exact)
    check("signal cut-norm sandwich", sandwich)
    check("projection properties", projection)
    check("refinement trace properties", fk_trace)
    check("equitize remainder bound", equitize_h)
    check("bound calculator spot values", bounds_spot)
    check("backprop vs finite differences", gradients)
    return results
