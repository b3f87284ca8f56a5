import math

import numpy as np
import pytest

from mimo.array import make_ula
from mimo.errors import NumericError, TransceiverError
from mimo.receiver import (
    HybridReceiver,
    Receiver,
    draw_noise,
    eigen_combiner,
    lmmse_combiner,
    psd_from_dbm_hz,
    psd_to_dbm_hz,
    symbol_mse,
)
from mimo.transmitter import ChannelStateInformation, InterferenceInfo, Transmitter, subarray_mask


def random_matrix(rng, rows, cols):
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / math.sqrt(2)


def configured_link(rng, num_rx=4, num_tx=4, num_streams=2, noise_variance=0.1):
    tx = Transmitter(array=make_ula(num_tx))
    tx.set_num_streams(num_streams)
    channel = random_matrix(rng, num_rx, num_tx)
    csi = ChannelStateInformation(
        effective_channel=channel,
        large_scale_gain=1.0,
        transmit_energy=tx.energy_per_symbol,
        noise_variance=noise_variance,
        transmitter=tx,
    )
    tx.set_channel_state_information(csi)
    tx.configure_transmitter("eigen")
    rx = Receiver(array=make_ula(num_rx))
    rx.set_num_streams(num_streams)
    rx.set_noise_power_per_hz(noise_variance, "J")
    rx.set_channel_state_information(csi)
    return tx, rx, csi


def test_psd_conversions():
    assert psd_from_dbm_hz(-174.0) == pytest.approx(10 ** (-20.4))
    assert psd_to_dbm_hz(psd_from_dbm_hz(-174.0)) == pytest.approx(-174.0)


def test_noise_variance_and_effective_power():
    rx = Receiver()
    rx.set_noise_power_per_hz(-174.0)
    rx.set_symbol_bandwidth(50e6)
    assert rx.noise_variance == pytest.approx(10 ** (-20.4))
    assert 10 * math.log10(rx.effective_noise_power * 1000) == pytest.approx(-97.0103, abs=1e-3)


def test_noise_unit_rejected():
    with pytest.raises(TransceiverError):
        Receiver().set_noise_power_per_hz(1.0, "W")


def test_drawn_noise_statistics():
    rng = np.random.default_rng(31)
    samples = np.array([draw_noise(0.25, 4, rng) for _ in range(20_000)])
    assert np.mean(np.abs(samples) ** 2) == pytest.approx(0.25, rel=0.02)
    assert abs(np.mean(samples)) < 0.01


def test_noise_needs_generator_or_vector():
    with pytest.raises(TransceiverError):
        Receiver().set_noise()


def test_combine_without_noise():
    rx = Receiver(array=make_ula(2))
    rx.set_combiner(np.array([1.0, 1j]))
    rx.set_received_signal([2.0, 1.0])
    assert np.allclose(rx.combine(), [2.0 - 1j])


def test_combine_needs_signal():
    with pytest.raises(TransceiverError):
        Receiver().combine()


def test_unknown_strategy():
    with pytest.raises(TransceiverError):
        Receiver().configure_receiver("zero-forcing")


def test_mmse_is_optimal():
    rng = np.random.default_rng(32)
    for _ in range(200):
        tx, rx, csi = configured_link(rng)
        optimal = symbol_mse(lmmse_combiner(csi, False), csi)
        eigen = symbol_mse(eigen_combiner(csi.effective_channel, 2), csi)
        assert optimal <= eigen + 1e-12
        for _ in range(100):
            assert optimal <= symbol_mse(random_matrix(rng, 4, 2), csi) + 1e-12


def test_configure_mmse_matches_closed_form():
    tx, rx, csi = configured_link(np.random.default_rng(33))
    rx.configure_receiver("mmse")
    assert np.allclose(rx.combiner, lmmse_combiner(csi, False))


def test_mmse_with_interference_accounts_for_interferer():
    rng = np.random.default_rng(34)
    tx, rx, csi = configured_link(rng)
    interferer = Transmitter(array=make_ula(4), transmit_power=10.0)
    interferer.set_num_streams(2)
    csi = csi.model_copy(
        update={"interference": [InterferenceInfo(effective_channel=random_matrix(rng, 4, 4), transmitter=interferer)]}
    )
    aware = symbol_mse(lmmse_combiner(csi, True), csi, include_interference=True)
    unaware = symbol_mse(lmmse_combiner(csi, False), csi, include_interference=True)
    assert aware <= unaware + 1e-12
    assert np.allclose(csi.interference_covariance(), csi.interference[0].covariance())


def test_singular_covariance():
    tx, rx, csi = configured_link(np.random.default_rng(35))
    csi = csi.model_copy(update={"noise_variance": 0.0, "effective_channel": np.zeros((4, 4))})
    with pytest.raises(NumericError):
        lmmse_combiner(csi, False)


def test_hybrid_receiver_mmse():
    rng = np.random.default_rng(36)
    _, _, csi = configured_link(rng, num_rx=8)
    rx = HybridReceiver(array=make_ula(8))
    rx.set_num_streams(2)
    rx.set_num_rf_chains(2)
    rx.set_connections(subarray_mask(8, 2))
    rx.set_phase_bits(2)
    rx.set_channel_state_information(csi)
    rx.configure_receiver("mmse")
    mask = subarray_mask(8, 2)
    assert np.all(rx.combiner_analog[~mask] == 0)
    assert np.allclose(np.abs(rx.combiner_analog[mask]), 1.0)
    assert rx.effective_combiner.shape == (8, 2)
    # the digital stage is the best combiner given the analog stage
    best = symbol_mse(rx.effective_combiner, csi)
    for _ in range(50):
        trial = rx.combiner_analog @ random_matrix(rng, 2, 2)
        assert best <= symbol_mse(trial, csi) + 1e-12


def test_hybrid_receiver_rejects_direct_combiner():
    with pytest.raises(TransceiverError):
        HybridReceiver(array=make_ula(4)).set_combiner(np.ones((4, 1)))
