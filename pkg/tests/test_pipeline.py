import pytest
import torch

from factorseg.errors import DimensionError, LengthError
from factorseg.panel import TimeSeriesPanel, center
from factorseg.pipeline import (
    classify_break,
    kbc_table,
    screening_range,
    segment_analysis,
    segment_bounds,
)
from factorseg.pipeline.segments import kbc_row


def piecewise_panel(new_factor: bool, n=60, T=400, seed=0) -> TimeSeriesPanel:
    """One strong factor throughout, plus a second one from T/2 on if asked."""
    rng = torch.Generator().manual_seed(seed)
    lam = 2 * torch.randn(n, 2, generator=rng, dtype=torch.float64)
    f = torch.randn(2, T, generator=rng, dtype=torch.float64)
    eps = torch.randn(n, T, generator=rng, dtype=torch.float64)

    chi = lam[:, :1] @ f[:1]
    if new_factor:
        chi[:, T // 2 :] += lam[:, 1:] @ f[1:, T // 2 :]
    return center(TimeSeriesPanel(chi + eps))


def spectrum_panel(eigenvalues: list[float], T: int) -> TimeSeriesPanel:
    """A panel whose sample covariance is exactly diag(eigenvalues)."""
    n = len(eigenvalues)
    Q, _ = torch.linalg.qr(torch.randn(T, n, dtype=torch.float64))
    scale = (T * torch.tensor(eigenvalues, dtype=torch.float64)).sqrt()
    return TimeSeriesPanel(scale.unsqueeze(1) * Q.T)


def test_screening_range():
    panel = piecewise_panel(new_factor=False)
    screening = screening_range(panel)
    assert screening.r_upper == 20
    assert screening.r_lower == 1
    assert screening.candidates == tuple(range(1, 21))

    assert screening_range(panel, r_upper=5).r_upper == 5

    with pytest.raises(DimensionError):
        screening_range(TimeSeriesPanel(torch.randn(3, 100)))
    with pytest.raises(DimensionError):
        screening_range(TimeSeriesPanel(torch.randn(10, 20)))


def test_segment_bounds():
    assert segment_bounds([150, 67], 200) == [(1, 67), (68, 150), (151, 200)]
    assert segment_bounds([], 50) == [(1, 50)]


def test_segment_analysis():
    panel = piecewise_panel(new_factor=True)
    fits = segment_analysis(panel, [200])
    assert [(f.start, f.end, f.r_hat) for f in fits] == [(1, 200, 1), (201, 400, 2)]
    assert fits[1].decomposition is not None
    assert fits[1].decomposition.common.shape == (60, 200)


def test_short_segments_are_skipped():
    panel = piecewise_panel(new_factor=False)
    with pytest.warns(UserWarning):
        fits = segment_analysis(panel, [10, 200])

    assert fits[0].r_hat is None and fits[0].skipped
    assert all(f.r_hat is not None for f in fits[1:])


def test_classify_break():
    assert (
        classify_break(piecewise_panel(new_factor=True), (1, 200), (201, 400))
        == "loading_or_number_break"
    )
    assert (
        classify_break(piecewise_panel(new_factor=False), (1, 200), (201, 400))
        == "autocorrelation_only"
    )

    panel = piecewise_panel(new_factor=False)
    with pytest.raises(ValueError):
        classify_break(panel, (1, 200), (202, 400))
    with pytest.raises(LengthError):
        classify_break(panel, (1, 10), (11, 400))


def test_kbc_row():
    panel = spectrum_panel([4.0, 3.0, 2.0, 1.0], T=8)
    # Only the first q = n − 1 = 3 eigenvalues count: 4/9, 7/9, 9/9
    assert kbc_row(panel, (1, 8), [0.4, 0.5, 0.8]) == [1, 2, 3]


def test_kbc_on_equal_eigenvalues():
    panel = spectrum_panel([1.0] * 10, T=20)
    # k/9 first exceeds 1/2 at k = 5
    assert kbc_row(panel, (1, 20), [0.5]) == [5]


def test_kbc_table():
    panel = piecewise_panel(new_factor=True)
    table = kbc_table(panel, [200], [0.5, 0.9])
    assert list(table.columns) == ["start", "end", "0.5", "0.9"]
    assert table[["start", "end"]].values.tolist() == [[1, 200], [201, 400]]
    assert (table["0.5"] <= table["0.9"]).all()

    with pytest.raises(ValueError):
        kbc_table(panel, [200], [1.0])
