import math
from pathlib import Path

import numpy as np
import pytest
import torch

from factorseg.errors import ConfigError
from factorseg.simulation import ScenarioSpec, generate, theta_scale
from factorseg.simulation.scenarios import ar1, moving_sum


def test_generate_is_deterministic():
    spec = ScenarioSpec(scenario="S1", n=20, T=100, seed=3)
    a, b = generate(spec), generate(spec)
    assert torch.equal(a.panel.values, b.panel.values)
    assert a.truth == b.truth

    other = generate(ScenarioSpec(scenario="S1", n=20, T=100, seed=4))
    assert not torch.equal(a.panel.values, other.panel.values)


def test_panel_is_common_plus_scaled_idiosyncratic():
    data = generate(ScenarioSpec(scenario="S5", n=20, T=100, phi=2.0))
    assert data.panel.values.shape == (20, 100)
    assert math.isclose(data.idio_scale**2, theta_scale(data.spec))
    torch.testing.assert_close(
        data.panel.values, data.true_common + data.idio_scale * data.true_idio
    )


def test_theta_scale():
    spec = ScenarioSpec(n=100, q=5, phi=1.0)
    assert spec.bandwidth == 5
    assert theta_scale(spec) == pytest.approx(3.189, abs=1e-3)
    assert theta_scale(ScenarioSpec(phi=0.0)) == 0.0

    with pytest.raises(ConfigError):
        generate(ScenarioSpec(phi=0.0))


def test_bandwidth():
    assert ScenarioSpec(n=10).bandwidth == 1
    assert ScenarioSpec(n=1000).bandwidth == 10
    assert ScenarioSpec(n=100, H=3).bandwidth == 3


def test_single_break_truth():
    assert generate(ScenarioSpec(scenario="null", n=10, T=100)).truth == ()

    for scenario, origin in [
        ("S1", "common"),
        ("S2", "common"),
        ("S3", "common"),
        ("S4", "idiosyncratic"),
        ("S5", "idiosyncratic"),
    ]:
        data = generate(ScenarioSpec(scenario=scenario, n=20, T=200))
        assert data.breaks(origin) == [67]
        assert len(data.truth) == 1

    moved = generate(ScenarioSpec(scenario="S1", n=20, T=200, break_fraction=0.5))
    assert moved.breaks("common") == [100]


def test_multi_break_truth():
    m2 = generate(ScenarioSpec(scenario="M2", n=20, T=500))
    assert [b.location for b in m2.truth] == [167, 250, 300, 400]
    assert m2.breaks("common") == [167, 250, 400]
    assert m2.breaks("idiosyncratic") == [300]

    m1 = generate(ScenarioSpec(scenario="M1", n=20, T=200))
    assert m1.breaks("common") == [67, 100]
    assert m1.breaks("idiosyncratic") == [100, 160]


def test_breaks_leave_the_other_component_alone():
    null = generate(ScenarioSpec(scenario="null", n=20, T=150, seed=9))
    s1 = generate(ScenarioSpec(scenario="S1", n=20, T=150, seed=9))
    s4 = generate(ScenarioSpec(scenario="S4", n=20, T=150, seed=9))

    assert torch.equal(s1.true_idio, null.true_idio)
    assert torch.equal(s4.true_common, null.true_common)

    # Before the break the common components coincide
    eta = s1.truth[0].location
    assert torch.equal(s1.true_common[:, :eta], null.true_common[:, :eta])
    assert not torch.equal(s1.true_common[:, eta:], null.true_common[:, eta:])


def test_varrho_limits_affected_series():
    spec = ScenarioSpec(scenario="S1", n=40, T=150, varrho=0.25, seed=2)
    s1, null = generate(spec), generate(ScenarioSpec(n=40, T=150, seed=2))
    eta = s1.truth[0].location

    changed = (s1.true_common[:, eta:] != null.true_common[:, eta:]).any(dim=1)
    assert int(changed.sum()) == spec.affected == 10


def test_ar1():
    e = torch.randn(3, 50, dtype=torch.float64)
    coef = torch.full((3, 50), 0.5, dtype=torch.float64)
    z = ar1(e, coef)

    expected = torch.zeros(3, dtype=torch.float64)
    for t in range(50):
        expected = 0.5 * expected + e[:, t]
        torch.testing.assert_close(z[:, t], expected)


def test_moving_sum():
    v = torch.randn(14, 5, dtype=torch.float64)
    pad, H = 4, 2
    out = moving_sum(v, pad, H)
    for i in range(6):
        row = i + pad
        expected = sum(v[row + k] for k in range(-H, H + 1) if k != 0)
        torch.testing.assert_close(out[i], expected)


def test_spec_checks():
    with pytest.raises(ConfigError):
        ScenarioSpec(varrho=0.0)
    with pytest.raises(ConfigError):
        ScenarioSpec(T=10)
    with pytest.raises(ConfigError):
        ScenarioSpec(rho_f=1.0)


def test_m1_loadings_file(tmp_path: Path):
    path = tmp_path / "loadings.csv"
    np.savetxt(path, np.ones((20, 5)), delimiter=",")
    data = generate(ScenarioSpec(scenario="M1", n=20, T=100, m1_loadings=path))

    # With identical loadings every series shares the same common component
    torch.testing.assert_close(
        data.true_common, data.true_common[:1].expand(20, -1)
    )

    np.savetxt(path, np.ones((20, 3)), delimiter=",")
    with pytest.raises(ConfigError):
        generate(ScenarioSpec(scenario="M1", n=20, T=100, m1_loadings=path))
