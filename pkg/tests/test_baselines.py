import torch

from factorseg.segment import cusum, double_cusum
from factorseg.simulation import avg_statistic, baseline_reducers, max_statistic
from factorseg.wavelet import build_panel


def test_single_row_reducers_agree():
    panel = build_panel(torch.randn(1, 128, dtype=torch.float64), 1)
    c = cusum(panel, 1, 128)
    stats = baseline_reducers(c, trim=5)

    expected = c.values[0, 5 : 128 - 1 - 5].abs().max().item()
    assert stats.max == stats.avg == expected
    assert stats.max_location == stats.avg_location


def test_max_dominates_avg():
    panel = build_panel(torch.randn(6, 200, dtype=torch.float64), 2)
    stats = baseline_reducers(cusum(panel, 1, 200), trim=10)
    assert stats.max >= stats.avg
    for loc in (stats.max_location, stats.avg_location):
        assert 11 <= loc <= 189


def test_reducers_locate_a_variance_change():
    x = torch.randn(10, 300, dtype=torch.float64)
    x[:, 150:] *= 3
    panel = build_panel(x, 2)

    c = cusum(panel, 1, 300)
    stats = baseline_reducers(c, trim=20)
    dc = double_cusum(c, trim=20)
    for loc in (stats.max_location, stats.avg_location, dc.location):
        assert abs(loc - 150) <= 10

    assert max_statistic(panel, 1, 300, 20) == stats.max
    assert avg_statistic(panel, 1, 300, 20) == stats.avg
