import math

import numpy as np
from scipy.spatial.distance import pdist
import pytest

from mimo.array import ArrayGeometry, Direction, cart_to_sph, make_ula, make_upa, sph_to_cart
from mimo.errors import GeometryError


def test_sph_to_cart_axes():
    assert sph_to_cart(1.0, Direction()) == pytest.approx((0.0, 1.0, 0.0))
    assert sph_to_cart(2.0, Direction(azimuth=math.pi / 2)) == pytest.approx((2.0, 0.0, 0.0), abs=1e-12)
    assert sph_to_cart(1.0, Direction(elevation=math.pi / 2)) == pytest.approx((0.0, 0.0, 1.0), abs=1e-12)


def test_cart_to_sph_inverts_sph_to_cart():
    direction = Direction(azimuth=-2.1, elevation=0.4)
    r, back = cart_to_sph(*sph_to_cart(3.0, direction))
    assert r == pytest.approx(3.0)
    assert back.azimuth == pytest.approx(-2.1)
    assert back.elevation == pytest.approx(0.4)


def test_cart_to_sph_origin():
    r, direction = cart_to_sph(0.0, 0.0, 0.0)
    assert r == 0.0
    assert direction.azimuth == 0.0 and direction.elevation == 0.0


def test_negative_length_rejected():
    with pytest.raises(GeometryError):
        sph_to_cart(-1.0, Direction())


def test_direction_out_of_range_rejected():
    with pytest.raises(ValueError):
        Direction(azimuth=4.0)


def test_ula_layout():
    array = make_ula(4)
    assert array.num_elements == 4
    assert np.allclose(array.elements[:, 0], [0.0, 0.5, 1.0, 1.5])
    assert np.allclose(array.elements[:, 1:], 0.0)
    assert np.allclose(array.weights, 1.0)


def test_ula_along_z():
    array = make_ula(3, axis="z")
    assert np.allclose(array.elements[:, 2], [0.0, 0.5, 1.0])


def test_upa_is_row_major():
    array = make_upa(2, 3)
    assert array.num_elements == 6
    # row 0 first, columns along x, rows along z
    assert np.allclose(array.elements[:3, 0], [0.0, 0.5, 1.0])
    assert np.allclose(array.elements[:3, 2], 0.0)
    assert np.allclose(array.elements[3:, 2], 0.5)


def test_array_response_broadside_is_all_ones():
    response = make_ula(8).array_response(Direction())
    assert np.allclose(response, 1.0)


def test_array_response_endfire_phase_progression():
    response = make_ula(4).array_response(Direction(azimuth=math.pi / 2))
    # half-wavelength spacing along the look direction: phase step of π
    assert response[0] == 1.0
    assert np.allclose(response, [1, -1, 1, -1])


def test_array_gain_sums_weighted_response():
    array = make_ula(4)
    assert array.array_gain(Direction()) == pytest.approx(4.0)
    steered = array.set_weights(array.array_response(Direction(azimuth=0.3)).conj())
    assert abs(steered.array_gain(Direction(azimuth=0.3))) == pytest.approx(4.0)


def test_set_weights_wrong_length():
    with pytest.raises(ValueError):
        make_ula(4).set_weights([1.0, 1.0])


def test_add_and_remove_elements():
    array = ArrayGeometry().add_element([0.0, 1.0], [0.0, 0.0], [0.0, 0.0])
    assert array.num_elements == 2
    array = array.add_element(0.0, 2.0, 0.0)
    assert array.num_elements == 3
    assert np.allclose(array.remove_element().elements, [[0, 0, 0], [1, 0, 0]])
    assert np.allclose(array.remove_element(0).elements[0], [1, 0, 0])


def test_remove_from_empty_array():
    with pytest.raises(GeometryError):
        ArrayGeometry().remove_element()


def test_translate_without_arguments_centers_array():
    centered = make_ula(5).translate()
    assert np.allclose(centered.elements.mean(axis=0), 0.0)


def test_rotate_about_z_moves_x_to_y():
    rotated = make_ula(2).rotate(theta_z=math.pi / 2)
    assert np.allclose(rotated.elements[1], [0.0, 0.5, 0.0])


def test_response_of_empty_array():
    with pytest.raises(GeometryError):
        ArrayGeometry().array_response(Direction())


def test_pattern_cut_grid():
    points = make_ula(4).pattern_cut("azimuth", samples=5)
    angles = [angle for angle, _ in points]
    assert angles == pytest.approx([-math.pi, -math.pi / 2, 0.0, math.pi / 2, math.pi])
    assert abs(points[2][1]) == pytest.approx(4.0)


def test_pattern_cut_elevation_range():
    points = make_upa(2, 2).pattern_cut("elevation", samples=3)
    assert points[0][0] == pytest.approx(-math.pi / 2)
    assert points[-1][0] == pytest.approx(math.pi / 2)


def test_pattern_cut_needs_two_samples():
    with pytest.raises(GeometryError):
        make_ula(2).pattern_cut("azimuth", samples=1)


def random_geometry(rng, n=6):
    return ArrayGeometry(elements=rng.uniform(-2.0, 2.0, (n, 3)))


def random_direction(rng):
    return Direction(azimuth=rng.uniform(-math.pi, math.pi), elevation=rng.uniform(-math.pi / 2, math.pi / 2))


def test_response_entries_have_unit_magnitude():
    rng = np.random.default_rng(40)
    for _ in range(50):
        response = random_geometry(rng).array_response(random_direction(rng))
        assert np.allclose(np.abs(response), 1.0)


def test_conjugate_weights_give_full_array_gain():
    rng = np.random.default_rng(41)
    for _ in range(50):
        geometry = random_geometry(rng, n=int(rng.integers(1, 10)))
        direction = random_direction(rng)
        steered = geometry.set_weights(geometry.array_response(direction).conj())
        assert steered.array_gain(direction) == pytest.approx(geometry.num_elements)


def test_rotation_preserves_element_distances():
    rng = np.random.default_rng(42)
    for _ in range(50):
        geometry = random_geometry(rng)
        rotated = geometry.rotate(*rng.uniform(-math.pi, math.pi, 3))
        assert np.allclose(pdist(rotated.elements), pdist(geometry.elements))
