import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from factorseg.bootstrap import (
    ROLE_COMMON,
    ResampleSource,
    SbConfig,
    block_length_politis_white,
    block_lengths,
    bootstrap_statistic,
    build_threshold_tree,
    draw_replicate,
    grow_tree,
    joint_source,
    pooled_block_parameter,
    resample_source,
    sb_indices,
    sb_resample,
)
from factorseg.errors import ConfigError, DegenerateInputError, LengthError
from factorseg.factor import decompose
from factorseg.panel import TimeSeriesPanel, center
from factorseg.segment import default_trim
from factorseg.simulation import ScenarioSpec, generate
from factorseg.utils import generator
from factorseg.wavelet import build_panel


def ar_series(coef: float, T: int = 500, seed: int = 0) -> torch.Tensor:
    rng = torch.Generator().manual_seed(seed)
    e = torch.randn(T + 100, generator=rng, dtype=torch.float64)
    x = torch.zeros_like(e)
    for t in range(1, len(e)):
        x[t] = coef * x[t - 1] + e[t]
    return x[100:]


def test_config_checks():
    with pytest.raises(ConfigError):
        SbConfig(replicates=0)
    with pytest.raises(ConfigError):
        SbConfig(alpha=1.0)
    with pytest.raises(ConfigError):
        SbConfig(p_idio=0.0)

    assert SbConfig().height(200) == 3
    assert SbConfig().height(500) == 4
    assert SbConfig(tree_height=1).height(500) == 1


def test_block_lengths_are_geometric():
    lengths = block_lengths(20_000, 0.1, generator(0))
    assert lengths.min().item() >= 1
    assert abs(lengths.double().mean().item() - 10) < 0.4

    assert (block_lengths(10, 1.0, generator(0)) == 1).all()


def test_sb_indices():
    T, p = 400, 0.2
    idx = sb_indices(T, p, generator(1))
    assert len(idx) == T
    assert 0 <= idx.min() and idx.max() < T

    # Within a block the next index follows the previous one, wrapping around
    follows = ((idx[1:] - idx[:-1]) % T == 1).double().mean().item()
    assert abs(follows - (1 - p)) < 0.08


def test_sb_resample_keeps_rows_together():
    base = torch.randn(100, dtype=torch.float64)
    block = torch.stack([base, 2 * base, -base])
    out = sb_resample(block, 0.1, generator(3))
    torch.testing.assert_close(out[1], 2 * out[0])
    torch.testing.assert_close(out[2], -out[0])


def test_block_length_grows_with_dependence():
    for seed in range(20):
        white = block_length_politis_white(ar_series(0.0, seed=seed))
        persistent = block_length_politis_white(ar_series(0.9, seed=seed))
        assert white >= 0.5
        assert persistent < 0.2

    # Mean block length is capped at ⌈min(3√T, T/3)⌉
    assert 1 / persistent <= math.ceil(min(3 * math.sqrt(500), 500 / 3))


def test_block_length_checks():
    with pytest.raises(LengthError):
        block_length_politis_white(torch.randn(10))
    with pytest.raises(DegenerateInputError):
        block_length_politis_white(torch.ones(100))


def test_pooled_block_parameter():
    block = torch.stack([ar_series(0.0, seed=1), ar_series(0.8, seed=2)])
    p = pooled_block_parameter(block)
    ps = [block_length_politis_white(row) for row in block]
    assert math.isclose(1 / p, (1 / ps[0] + 1 / ps[1]) / 2)


def small_decomposition(T: int = 200):
    data = generate(ScenarioSpec(scenario="null", n=12, T=T, q=2, seed=4))
    panel = center(data.panel)
    return panel, decompose(panel, 2)


def test_draw_replicate_is_deterministic():
    _, decomp = small_decomposition()
    for which in ("common", "idiosyncratic", "raw"):
        plan = resample_source(decomp, which, SbConfig())
        a = draw_replicate(plan, 7, 3)
        assert torch.equal(a, draw_replicate(plan, 7, 3))
        assert not torch.equal(a, draw_replicate(plan, 7, 4))
        assert a.shape == decomp.common.shape


def test_common_replicates_stay_in_loading_space():
    _, decomp = small_decomposition()
    sample = draw_replicate(resample_source(decomp, "common", SbConfig()), 0, 0)

    # Projecting onto the loadings reproduces the replicate
    W = decomp.loadings / math.sqrt(decomp.n)
    torch.testing.assert_close(W @ (W.T @ sample), sample)


def test_fixed_block_parameters():
    _, decomp = small_decomposition()
    plan = resample_source(decomp, "common", SbConfig(p_common=(0.5, 0.25)))
    assert plan.params == (0.5, 0.25)
    with pytest.raises(ConfigError):
        resample_source(decomp, "common", SbConfig(p_common=(0.5,)))

    assert joint_source(decomp.idiosyncratic, SbConfig(p_idio=0.3)).params == (0.3,)


def test_tiny_block_parameters_are_raised():
    block = torch.randn(4, 100, generator=generator(0), dtype=torch.float64)
    with pytest.warns(UserWarning, match="below 1/T"):
        plan = joint_source(block, SbConfig(p_idio=0.001))
    assert plan.params == (0.01,)


def test_bootstrap_statistic():
    panel, decomp = small_decomposition()
    template = build_panel(decomp.common, 2)
    cfg = SbConfig(seed=5)

    a = bootstrap_statistic(decomp, "common", (1, 200), cfg, 0, template, 23)
    b = bootstrap_statistic(decomp, "common", (1, 200), cfg, 0, template, 23)
    assert a == b and a >= 0
    with pytest.raises(LengthError):
        bootstrap_statistic(decomp, "common", (50, 50), cfg, 0, template, 23)


def test_tree_structure():
    _, decomp = small_decomposition()
    panel = build_panel(decomp.common, 2)
    nodes = grow_tree(panel, 23, 3)

    assert (nodes[0].level, nodes[0].index, nodes[0].start, nodes[0].end) == (
        1,
        1,
        1,
        200,
    )
    assert all(node.level <= 3 for node in nodes)
    assert all(node.end - node.start + 1 > 4 * 23 for node in nodes)

    # Children tile their parent
    by_key = {(n.level, n.index): n for n in nodes}
    for node in nodes:
        left = by_key.get((node.level + 1, 2 * node.index - 1))
        right = by_key.get((node.level + 1, 2 * node.index))
        if left and right:
            assert left.start == node.start and right.end == node.end
            assert right.start == left.end + 1


def test_threshold_tree():
    _, decomp = small_decomposition()
    panel = build_panel(decomp.common, 2)
    cfg = SbConfig(replicates=19, seed=1, retain_stats=True)
    tree = build_threshold_tree(panel, decomp, "common", cfg, default_trim(200))

    assert tree.quantiles.shape == (len(tree.nodes), 1)
    assert tree.replicate_stats is not None
    assert tree.replicate_stats.shape == (19, len(tree.nodes), 1)

    root = tree.nodes[0]
    expected = tree.replicate_stats[:, 0, 0].quantile(0.95).item()
    assert tree(root.start, root.end) == pytest.approx(expected)
    assert tree(2, 3) is None


def test_thresholds_fall_as_alpha_grows():
    _, decomp = small_decomposition()
    panel = build_panel(decomp.common, 2)

    thresholds = []
    for alpha in (0.01, 0.05, 0.1, 0.5):
        cfg = SbConfig(replicates=39, seed=6, alpha=alpha)
        thresholds.append(build_threshold_tree(panel, decomp, "common", cfg, 23))

    for strict, loose in zip(thresholds, thresholds[1:]):
        assert strict.nodes == loose.nodes
        assert (strict.quantiles >= loose.quantiles).all()


def test_factors_use_their_own_substreams():
    f = ar_series(0.5, T=200, seed=9)
    source = ResampleSource(
        torch.stack([f, f]), (0.2, 0.2), torch.eye(2, dtype=torch.float64)
    )
    sample = draw_replicate(source, 11, 4)

    # Identical factors are resampled differently
    assert not torch.equal(sample[0], sample[1])
    for j in range(2):
        rng = generator(11, 4, ROLE_COMMON, j)
        torch.testing.assert_close(sample[j], f[sb_indices(200, 0.2, rng)])


def test_threshold_tree_ignores_worker_count():
    _, decomp = small_decomposition()
    panel = build_panel(decomp.idiosyncratic, 2, source_kind="idiosyncratic")
    cfg = SbConfig(replicates=8, seed=2)

    serial = build_threshold_tree(panel, decomp, "idiosyncratic", cfg, 23)
    parallel = build_threshold_tree(panel, decomp, "idiosyncratic", cfg, 23, workers=2)
    assert serial.nodes == parallel.nodes
    assert torch.equal(serial.quantiles, parallel.quantiles)


def test_threshold_tree_without_source():
    panel = build_panel(torch.randn(4, 200, dtype=torch.float64), 2)
    with pytest.raises(ValueError):
        build_threshold_tree(panel, None, "common", SbConfig(replicates=2), 23)


def test_raw_source_resamples_the_panel():
    _, decomp = small_decomposition()
    plan = resample_source(decomp, "raw", SbConfig())
    torch.testing.assert_close(plan.series, decomp.common + decomp.idiosyncratic)
    assert plan.loadings is None
    assert TimeSeriesPanel(plan.series).n == 12


@settings(max_examples=150, deadline=None)
@given(
    st.integers(min_value=0, max_value=2**31),
    st.integers(min_value=2, max_value=6),
    st.integers(min_value=5, max_value=120),
    st.floats(min_value=0.01, max_value=1.0),
)
def test_resampling_moves_whole_cross_sections(seed: int, m: int, T: int, p: float):
    # Row i holds i * T + t, so every column is identified by its first entry
    block = torch.arange(m * T, dtype=torch.float64).reshape(m, T)
    out = sb_resample(block, p, generator(seed))

    assert out.shape == (m, T)
    times = out[0].long()
    torch.testing.assert_close(out, block[:, times])
