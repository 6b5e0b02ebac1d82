import math
from fractions import Fraction

import numpy as np
import pytest

from densecap.bounds import (
    BoundValue,
    compression_hidden_dim,
    d0_threshold,
    lipschitz_constant,
    non_universality_check,
    spike_target,
    vc_lower_bound,
    wrl_hidden_dim,
)
from densecap.errors import ParameterError


def test_lipschitz_spot_values():
    assert lipschitz_constant(4, 2).exact == 64
    assert lipschitz_constant(1, 1).exact == 2
    v = lipschitz_constant(8, 10)
    assert v.log2 == Fraction(40)
    assert v.exact == 2**40


def test_lipschitz_non_integer_bound():
    v = lipschitz_constant("9/2", 2)
    assert v.exact == 81
    v = lipschitz_constant("7/3", 1)
    assert v.exact is None
    assert abs(v.log2_float - math.log2(14 / 3)) <= 1e-12


def test_wrl_dim_spot_values():
    assert wrl_hidden_dim(4, 2, 1, 1).exact == 16
    v = wrl_hidden_dim(1, 2, 1, 1)
    assert v.exact == 16 * 2**32
    # the lcm enters linearly
    assert wrl_hidden_dim(4, 2, 2, 3).exact == 6 * wrl_hidden_dim(4, 2, 1, 1).exact


def test_compression_dim_exact_log2():
    v = compression_hidden_dim(1, 4, 2, 1, 1)
    assert v.log2 == Fraction(2_097_164)
    assert v.exact == 2**2_097_164


def test_compression_dim_monotone_decreasing_in_eps():
    vals = [compression_hidden_dim(e, 4, 2, 1, 1).log2_float for e in (4, 2, 1, "1/2")]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_compression_dim_output_dim_enters_squared_in_exponent():
    a = compression_hidden_dim(1, 4, 2, 1, 1).log2_float
    b = compression_hidden_dim(1, 4, 2, 1, 2).log2_float
    # dominant exponent 2*ceil(16 ((L+2) dL)^2 (2B)^(2L) / eps^2) quadruples
    assert abs(b / a - 4.0) <= 0.01


def test_compression_dim_log_space_fallback():
    v = compression_hidden_dim(1, 5, 3, 1, 1)
    assert v.exact is None
    inner = 2 * math.ceil(16 * 25 * 10**6)
    assert abs(v.log2_float - inner) <= 40  # the remaining factors are tiny


def test_vc_lower_bound_spot_values():
    assert vc_lower_bound("1/6", 5).exact == 1
    assert vc_lower_bound("1/24", 2).exact == 4
    v = vc_lower_bound("1/8", 306)
    assert abs(v.log2_float - 153 * math.log2(4 / 3)) <= 1e-9


def test_vc_lower_bound_domain():
    with pytest.raises(ParameterError):
        vc_lower_bound("1/3", 2)
    with pytest.raises(ParameterError):
        vc_lower_bound("2/5", 2)
    with pytest.raises(ParameterError):
        vc_lower_bound(0, 2)


def test_d0_threshold_spot_value():
    v = d0_threshold(4, 2, 1, 1)
    assert v.exact == 18_253_611_637
    assert v.consistent()


def test_d0_threshold_monotone_in_c_and_dL():
    base = d0_threshold(4, 2, 1, 1).exact
    assert d0_threshold(4, 2, 1, 4).exact > base
    bigger_c = d0_threshold(4, 2, 1, 16).exact
    assert bigger_c > base
    # doubling dL adds 17*log2(2^4) = 68 to the log part and grows the rest
    l1 = d0_threshold(4, 2, 2, 1).exact
    assert l1 > base


def test_non_universality_check_at_threshold_and_below():
    thr = d0_threshold(4, 2, 1, 1).exact
    at = non_universality_check(4, 2, 1, thr)
    assert at.holds and at.margin_log2 >= 0.0
    assert at.direct_gap_log2 > 0.0
    below = non_universality_check(4, 2, 1, 1)
    assert not below.holds and below.margin_log2 < 0.0
    assert below.direct_gap_log2 < 0.0


def test_non_universality_margin_monotone_in_d0():
    vals = [
        non_universality_check(4, 2, 1, d0).margin_log2
        for d0 in (1, 10, 10**6, 10**9, 2 * 10**10)
    ]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_bound_value_consistency_everywhere():
    for v in (
        lipschitz_constant(4, 3),
        wrl_hidden_dim(2, 3, 2, 2),
        compression_hidden_dim(2, 5, 2, 1, 1),
        vc_lower_bound("1/12", 4),
        d0_threshold(5, 3, 2, 1),
    ):
        assert isinstance(v, BoundValue)
        assert v.consistent(1e-9)


def test_spike_target_interpolates_grid():
    rng = np.random.default_rng(0)
    for d0, N in ((1, 4), (2, 3), (3, 2)):
        y = rng.uniform(-1, 1, N**d0) / (2 * N)
        f = spike_target(d0, N, y)
        pts = f.grid_points()
        assert np.allclose(f(pts), y, atol=0)


def test_spike_target_zero_labels():
    f = spike_target(2, 4, np.zeros(16))
    x = np.random.default_rng(1).uniform(0, 1, (500, 2))
    assert np.all(f(x) == 0.0)


def test_spike_target_rejects_bad_label_count():
    with pytest.raises(ParameterError):
        spike_target(2, 3, np.zeros(8))


def test_spike_target_empirical_lipschitz():
    rng = np.random.default_rng(2)
    d0, N = 2, 5
    y = rng.integers(0, 2, N**d0) / (2 * N)
    f = spike_target(d0, N, y)
    a = rng.uniform(0, 1, (100_000, d0))
    b = rng.uniform(0, 1, (100_000, d0))
    num = np.abs(f(a) - f(b))
    den = np.linalg.norm(a - b, axis=1)
    keep = den > 1e-12
    assert float((num[keep] / den[keep]).max()) <= 1.0 + 1e-6


def test_spike_target_bounded_by_max_label():
    rng = np.random.default_rng(3)
    y = rng.uniform(0, 0.1, 9)
    f = spike_target(2, 3, y)
    x = rng.uniform(0, 1, (20_000, 2))
    assert f(x).max() <= y.max() + 1e-12
    assert f(x).min() >= 0.0
