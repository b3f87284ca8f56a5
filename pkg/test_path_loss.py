import numpy as np
import pytest

from mimo import path_loss
from mimo.errors import PathLossError
from mimo.path_loss import GainRealization, PathLossModel, PathLossSpec


def two_slope(distance: float) -> PathLossSpec:
    return PathLossSpec(
        model="two-slope",
        distance=distance,
        reference_distance=10.0,
        reference_loss_db=80.0,
        exponent_near=2.0,
        exponent_far=4.0,
    )


def test_friis_at_2_4_ghz():
    spec = PathLossSpec(model="fspl", carrier_frequency=2.4e9, distance=100.0, path_loss_exponent=2.0)
    gain = path_loss.realize_fspl(spec)
    assert gain.power_loss_db == pytest.approx(80.05, abs=0.01)


def test_fspl_exponent_scales_distance_term():
    base = PathLossSpec(model="fspl", carrier_frequency=2.4e9, distance=100.0, path_loss_exponent=2.0)
    steeper = base.model_copy(update={"path_loss_exponent": 3.0})
    difference = path_loss.fspl_loss_db(steeper) - path_loss.fspl_loss_db(base)
    assert difference == pytest.approx(20.0)


def test_fspl_missing_distance():
    spec = PathLossSpec(model="fspl", carrier_frequency=2.4e9, path_loss_exponent=2.0)
    with pytest.raises(PathLossError, match="distance"):
        path_loss.realize_fspl(spec)


@pytest.mark.parametrize(
    "distance, expected_db",
    [(10.0, 80.0), (100.0, 120.0), (1.0, 60.0)],
)
def test_two_slope(distance, expected_db):
    assert path_loss.realize_two_slope(two_slope(distance)).power_loss_db == pytest.approx(
        expected_db, abs=1e-9
    )


def test_reference_loss_stored_linear():
    assert two_slope(10.0).reference_loss == pytest.approx(1e8)


def test_set_reference_path_loss_units():
    spec = two_slope(10.0)
    spec.set_reference_path_loss(1e6, unit="linear")
    assert spec.reference_loss == 1e6
    spec.set_reference_path_loss(70.0)
    assert spec.reference_loss == pytest.approx(1e7)
    with pytest.raises(PathLossError):
        spec.set_reference_path_loss(70.0, unit="neper")


def test_shadowing_statistics():
    spec = PathLossSpec(
        model="fspl-lns",
        carrier_frequency=2.4e9,
        distance=100.0,
        path_loss_exponent=2.0,
        shadowing_variance_db=16.0,
    )
    rng = np.random.default_rng(11)
    losses = np.array([path_loss.realize(spec, rng).power_loss_db for _ in range(20_000)])
    assert np.mean(losses) == pytest.approx(path_loss.fspl_loss_db(spec), abs=0.1)
    assert np.std(losses) == pytest.approx(4.0, rel=0.03)


def test_zero_shadowing_equals_fspl():
    spec = PathLossSpec(model="fspl-lns", carrier_frequency=5e9, distance=50.0, path_loss_exponent=2.0)
    gain = path_loss.realize(spec, np.random.default_rng(0))
    assert gain.power_loss_db == pytest.approx(path_loss.fspl_loss_db(spec))


def test_model_names():
    assert PathLossSpec(model="FSPL").model == PathLossModel.FSPL
    with pytest.raises(ValueError):
        PathLossSpec(model="free-space")


def test_gain_from_loss_db():
    gain = GainRealization.from_loss_db(20.0)
    assert gain.amplitude_gain == pytest.approx(0.1)
    assert gain.power_loss_db == pytest.approx(20.0)


def test_wavelength_needs_carrier():
    with pytest.raises(PathLossError):
        PathLossSpec(model="fspl").carrier_wavelength


def test_zero_distance_is_a_path_loss_error():
    spec = PathLossSpec(model="fspl", carrier_frequency=2.4e9, distance=1.0, path_loss_exponent=2.0)
    coincident = spec.model_copy(update={"distance": 0.0})
    with pytest.raises(PathLossError):
        path_loss.realize(coincident, np.random.default_rng(0))
