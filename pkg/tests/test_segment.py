import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from factorseg.errors import IntervalError, LengthError
from factorseg.segment import (
    FixedThreshold,
    cusum,
    dc_surface,
    dcbs,
    default_trim,
    double_cusum,
)
from factorseg.simulation import baseline_reducers
from factorseg.wavelet import RowMeta, WaveletPanel


def make_panel(values: torch.Tensor, sigmas: torch.Tensor | None = None):
    """Wrap a matrix as a transformed panel without applying any transform."""
    values = values.to(torch.float64)
    if sigmas is None:
        sigmas = values.square().mean(dim=1).sqrt()
    return WaveletPanel(
        values=values,
        row_meta=tuple(RowMeta(-1, "auto", i, None, 1) for i in range(len(values))),
        sigmas=sigmas,
        source="raw",
        J_star=1,
        mode="reduced",
        scales=(-1,),
    )


def brute_cusum(y: torch.Tensor, sigma: float, s: int, e: int, b: int) -> float:
    seg = y[s - 1 : e]
    n = e - s + 1
    left, right = seg[: b - s + 1], seg[b - s + 1 :]
    weight = math.sqrt((b - s + 1) * (e - b) / n)
    return weight * (left.mean() - right.mean()).item() / sigma


def brute_dc(moduli: list[float]) -> list[float]:
    N = len(moduli)
    ordered = sorted(moduli, reverse=True)
    out = []
    for m in range(1, N + 1):
        head = sum(ordered[:m]) / m
        tail = sum(ordered[m:]) / (2 * N - m)
        out.append(math.sqrt(m * (2 * N - m) / (2 * N)) * (head - tail))
    return out


def test_cusum_matches_formula():
    panel = make_panel(torch.rand(3, 30))
    c = cusum(panel, 5, 24)
    assert c.values.shape == (3, 19)

    for row in range(3):
        for b in (5, 12, 23):
            sigma = panel.sigmas[row].item()
            expected = brute_cusum(panel.values[row], sigma, 5, 24, b)
            assert abs(c.values[row, b - 5].item() - expected) < 1e-12


def test_cusum_ignores_a_fixed_shift():
    values = torch.rand(4, 50, dtype=torch.float64)
    sigmas = torch.ones(4, dtype=torch.float64)
    a = cusum(make_panel(values, sigmas), 1, 50).values
    b = cusum(make_panel(values + 7.5, sigmas), 1, 50).values
    torch.testing.assert_close(a, b)


def test_cusum_drops_flat_rows():
    values = torch.rand(3, 20, dtype=torch.float64)
    values[1] = 0.0
    c = cusum(make_panel(values), 1, 20)
    assert c.rows == 2
    assert c.excluded == (1,)
    assert c.retained.tolist() == [0, 2]


def test_cusum_interval_checks():
    panel = make_panel(torch.rand(2, 20))
    with pytest.raises(IntervalError):
        cusum(panel, 5, 5)
    with pytest.raises(IntervalError):
        cusum(panel, 0, 10)
    with pytest.raises(IntervalError):
        cusum(panel, 10, 21)


def test_dc_surface_matches_definition():
    moduli = torch.rand(7, 1, dtype=torch.float64)
    surface = dc_surface(moduli)[:, 0].tolist()
    expected = brute_dc(moduli[:, 0].tolist())
    assert surface == pytest.approx(expected, abs=1e-12)


def test_double_cusum_finds_a_shift():
    rng = torch.Generator().manual_seed(0)
    values = torch.rand(10, 120, generator=rng, dtype=torch.float64)
    values[:, 60:] += 2.0

    dc = double_cusum(cusum(make_panel(values), 1, 120), trim=10)
    assert dc.location == 60
    assert 1 <= dc.m <= 10
    assert dc.per_b_curve is not None and len(dc.per_b_curve) == 120 - 1 - 20


def test_double_cusum_trim():
    c = cusum(make_panel(torch.rand(2, 20)), 1, 20)
    with pytest.raises(LengthError):
        double_cusum(c, trim=10)


def test_last_split_leaves_trim_plus_one_points():
    values = torch.zeros(3, 60, dtype=torch.float64)
    values[:, 50:] = 1.0

    # A shift after t = 50 sits one past the last allowed split
    dc = double_cusum(cusum(make_panel(values), 1, 60), trim=10)
    assert dc.location == 49
    assert len(dc.per_b_curve) == 39

    dc = double_cusum(cusum(make_panel(values), 1, 60), trim=9)
    assert dc.location == 50


@settings(max_examples=200, deadline=None)
@given(
    st.integers(min_value=0, max_value=2**31),
    st.integers(min_value=1, max_value=8),
    st.integers(min_value=24, max_value=80),
    st.integers(min_value=0, max_value=10),
    st.floats(min_value=0.1, max_value=100.0),
)
def test_double_cusum_properties(seed: int, N: int, T: int, trim: int, scale: float):
    rng = torch.Generator().manual_seed(seed)
    values = torch.rand(N, T, generator=rng, dtype=torch.float64)
    panel = make_panel(values)
    dc = double_cusum(cusum(panel, 1, T), trim)

    # The split leaves more than `trim` points on each side
    assert 1 + trim <= dc.location <= T - 1 - trim
    assert dc.statistic >= -1e-12

    # Rescaling every row leaves the statistic and its argmax unchanged
    rescaled = double_cusum(cusum(make_panel(scale * values), 1, T), trim)
    assert rescaled.location == dc.location
    assert math.isclose(rescaled.statistic, dc.statistic, rel_tol=1e-9, abs_tol=1e-12)


def test_default_trim():
    assert default_trim(200) == 23
    assert default_trim(500) == 38
    assert default_trim(10_000) == 84
    with pytest.raises(LengthError):
        default_trim(15)


def two_shift_panel(seed: int = 0) -> WaveletPanel:
    rng = torch.Generator().manual_seed(seed)
    values = torch.randn(20, 300, generator=rng, dtype=torch.float64)
    values[:, 100:200] += 3.0
    return make_panel(values)


def test_dcbs_finds_both_shifts():
    result = dcbs(two_shift_panel(), FixedThreshold(10.0), d_T=10, max_depth=4)

    assert len(result) == 2
    first, second = result.locations
    assert abs(first - 100) <= 2
    assert abs(second - 200) <= 2
    assert {p.level for p in result} <= {1, 2}

    # Every split was also recorded as a rejected node
    rejected = [node for node in result.nodes if node.rejected]
    assert sorted(node.location for node in rejected) == result.locations


def test_dcbs_respects_threshold_and_depth():
    panel = two_shift_panel()
    assert len(dcbs(panel, FixedThreshold(math.inf), d_T=10, max_depth=4)) == 0

    shallow = dcbs(panel, FixedThreshold(10.0), d_T=10, max_depth=1)
    assert len(shallow) == 1
    assert shallow.points[0].level == 1


def test_dcbs_gap():
    result = dcbs(
        two_shift_panel(), FixedThreshold(1.0), d_T=10, max_depth=6, min_gap=30
    )
    locations = result.locations
    assert all(b - a > 30 for a, b in zip(locations, locations[1:]))
    assert all(30 < loc < 300 - 30 for loc in locations)


def test_dcbs_with_unknown_nodes():
    # A provider that only knows the root stops the recursion after one split
    panel = two_shift_panel()

    def provider(s: int, e: int) -> float | None:
        return 10.0 if (s, e) == (1, 300) else None

    result = dcbs(panel, provider, d_T=10, max_depth=4, keep_profiles=True)
    assert len(result) == 1
    assert all(node.profile is not None for node in result.nodes)
    assert [node.threshold for node in result.nodes][1:] == [None, None]


def brute_double_cusum(
    panel: WaveletPanel, trim: int
) -> tuple[float, int, float, float]:
    """Enumerate every (b, m) and return DC, its argmax b, and the MAX and AVG
    statistics."""
    y, sigmas = panel.values, panel.sigmas
    N, T = y.shape
    best, best_b = -math.inf, -1
    top_max = top_avg = -math.inf
    for b in range(1 + trim, T - trim):
        moduli = [abs(brute_cusum(y[i], sigmas[i].item(), 1, T, b)) for i in range(N)]
        value = max(brute_dc(moduli))
        if value > best + 1e-12:
            best, best_b = value, b
        top_max = max(top_max, max(moduli))
        top_avg = max(top_avg, sum(moduli) / N)
    return best, best_b, top_max, top_avg


@settings(max_examples=500, deadline=None)
@given(
    st.integers(min_value=0, max_value=2**31),
    st.integers(min_value=1, max_value=6),
    st.integers(min_value=6, max_value=25),
    st.integers(min_value=0, max_value=2),
)
def test_reducers_match_enumeration(seed: int, N: int, T: int, trim: int):
    rng = torch.Generator().manual_seed(seed)
    panel = make_panel(torch.rand(N, T, generator=rng, dtype=torch.float64))
    c = cusum(panel, 1, T)

    best, best_b, top_max, top_avg = brute_double_cusum(panel, trim)
    dc = double_cusum(c, trim)
    assert dc.statistic == pytest.approx(best, abs=1e-10)
    assert dc.location == best_b

    stats = baseline_reducers(c, trim)
    assert stats.max == pytest.approx(top_max, abs=1e-10)
    assert stats.avg == pytest.approx(top_avg, abs=1e-10)


@settings(max_examples=150, deadline=None)
@given(
    st.integers(min_value=0, max_value=2**31),
    st.integers(min_value=1, max_value=6),
    st.integers(min_value=8, max_value=60),
    st.floats(min_value=-50.0, max_value=50.0),
)
def test_cusum_ignores_constant_shifts(seed: int, N: int, T: int, shift: float):
    rng = torch.Generator().manual_seed(seed)
    values = torch.randn(N, T, generator=rng, dtype=torch.float64)
    sigmas = values.std(dim=1)

    base = cusum(make_panel(values, sigmas), 1, T)
    shifted = cusum(make_panel(values + shift, sigmas), 1, T)
    torch.testing.assert_close(shifted.values, base.values, rtol=0, atol=1e-9)
