import numpy as np
import pytest

from mimo import channel
from mimo.array import ArrayGeometry, Direction, make_ula
from mimo.channel import ChannelModel, ChannelSpec, PropagationContext
from mimo.errors import ChannelError

NT, NR = 4, 4


@pytest.fixture
def ctx():
    return PropagationContext(carrier_frequency=3e9, tx_array=make_ula(NT), rx_array=make_ula(NR))


def spec_for(model: str, **kwargs) -> ChannelSpec:
    defaults = {
        "los": {"los_aod": Direction(azimuth=0.2), "los_aoa": Direction(azimuth=-0.7)},
        "rician": {"rician_kappa": 1.0},
        "ray-cluster": {"num_clusters": 2, "num_rays": 2},
    }
    return ChannelSpec(model=model, **{**defaults.get(model, {}), **kwargs})


def draw(spec, ctx, rng):
    return channel.realize(spec, ctx, rng, (0.0, 0.0, 0.0), (0.0, 20.0, 0.0)).matrix


def test_model_name_is_case_insensitive():
    assert ChannelSpec(model="Rayleigh").model == ChannelModel.RAYLEIGH
    assert ChannelSpec(model=" Spherical-Wave").model == ChannelModel.SPHERICAL_WAVE


def test_unknown_model_rejected():
    with pytest.raises(ValueError):
        ChannelSpec(model="free-space")


def test_rayleigh_shape(ctx):
    h = draw(spec_for("rayleigh"), ctx, np.random.default_rng(0))
    assert h.shape == (NR, NT)
    assert np.iscomplexobj(h)


@pytest.mark.parametrize("model", ["rayleigh", "los", "rician", "ray-cluster", "spherical-wave"])
def test_strict_normalization_every_draw(ctx, model):
    spec = spec_for(model, force_normalization=True)
    rng = np.random.default_rng(1)
    for _ in range(1000):
        h = draw(spec, ctx, rng)
        assert np.sum(np.abs(h) ** 2) == pytest.approx(NT * NR, abs=1e-9)


def test_strict_normalization_custom_energy(ctx):
    spec = spec_for("rayleigh", force_normalization=True, normalized_energy=2.5)
    h = draw(spec, ctx, np.random.default_rng(2))
    assert np.sum(np.abs(h) ** 2) == pytest.approx(2.5)


@pytest.mark.parametrize("model", ["rayleigh", "rician", "ray-cluster"])
def test_average_normalization(ctx, model):
    spec = spec_for(model)
    rng = np.random.default_rng(3)
    energies = [np.sum(np.abs(draw(spec, ctx, rng)) ** 2) for _ in range(10_000)]
    assert 0.95 <= np.mean(energies) / (NT * NR) <= 1.05


def test_los_energy_is_exact(ctx):
    h = draw(spec_for("los"), ctx, np.random.default_rng(4))
    assert np.sum(np.abs(h) ** 2) == pytest.approx(NT * NR)
    assert np.linalg.matrix_rank(h) == 1


def test_los_requires_angles(ctx):
    with pytest.raises(ChannelError):
        draw(ChannelSpec(model="los"), ctx, np.random.default_rng(0))


def test_rician_zero_kappa_matches_rayleigh_statistics(ctx):
    spec = spec_for("rician", rician_kappa=0.0)
    rng = np.random.default_rng(5)
    entries = np.concatenate([draw(spec, ctx, rng).ravel() for _ in range(6250)])
    assert len(entries) == 100_000
    assert np.var(entries) == pytest.approx(1.0, rel=0.03)
    assert abs(np.mean(entries)) < 0.02


def test_rician_large_kappa_converges_to_los(ctx):
    spec = spec_for("rician", rician_kappa=1e9, **spec_for("los").model_dump(include={"los_aod", "los_aoa"}))
    h_rician = channel.realize_rician(spec, ctx, np.random.default_rng(6))
    h_los = channel.realize_los(spec, ctx, np.random.default_rng(6))
    assert np.linalg.norm(h_rician - h_los) / np.linalg.norm(h_los) < 1e-4


def test_rician_weights_sum_to_one():
    w_los, w_ray = channel.rician_weights(3.0)
    assert w_los**2 + w_ray**2 == pytest.approx(1.0)


def test_rician_requires_kappa(ctx):
    with pytest.raises(ChannelError):
        draw(ChannelSpec(model="rician"), ctx, np.random.default_rng(0))


def test_spherical_wave_is_deterministic(ctx):
    spec = spec_for("spherical-wave")
    first = draw(spec, ctx, np.random.default_rng(0))
    second = draw(spec, ctx, np.random.default_rng(99))
    assert np.array_equal(first, second)


def test_spherical_wave_needs_carrier():
    ctx = PropagationContext(tx_array=make_ula(2), rx_array=make_ula(2))
    with pytest.raises(ChannelError):
        draw(spec_for("spherical-wave"), ctx, np.random.default_rng(0))


def test_spherical_wave_coincident_elements(ctx):
    with pytest.raises(ChannelError):
        channel.realize(spec_for("spherical-wave"), ctx, np.random.default_rng(0))


def test_rayleigh_without_carrier():
    ctx = PropagationContext(tx_array=make_ula(2), rx_array=make_ula(3))
    assert draw(spec_for("rayleigh"), ctx, np.random.default_rng(0)).shape == (3, 2)


def test_empty_array_rejected():
    ctx = PropagationContext(tx_array=ArrayGeometry(), rx_array=make_ula(2))
    with pytest.raises(ChannelError):
        draw(spec_for("rayleigh"), ctx, np.random.default_rng(0))


def test_normalizing_zero_matrix():
    with pytest.raises(ChannelError):
        channel.enforce_normalization(np.zeros((2, 2)), 4.0)


@pytest.mark.parametrize("num_clusters, num_rays", [(1, 1), (1, 2), (1, 3), (2, 2), (3, 4)])
def test_ray_cluster_rank_bounded_by_path_count(ctx, num_clusters, num_rays):
    spec = spec_for("ray-cluster", num_clusters=num_clusters, num_rays=num_rays)
    rng = np.random.default_rng(43)
    for _ in range(20):
        h = draw(spec, ctx, rng)
        assert np.linalg.matrix_rank(h, tol=1e-9) <= min(num_clusters * num_rays, NT, NR)


def test_ray_cluster_requires_cluster_and_ray_counts(ctx):
    with pytest.raises(ChannelError):
        draw(ChannelSpec(model="ray-cluster", num_clusters=2), ctx, np.random.default_rng(0))
    with pytest.raises(ChannelError):
        draw(ChannelSpec(model="ray-cluster", num_rays=2), ctx, np.random.default_rng(0))
