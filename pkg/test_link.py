import math

import numpy as np
import pytest

from mimo.array import make_ula
from mimo.channel import ChannelSpec
from mimo.errors import LinkError, PathLossError, TransceiverError
from mimo.link import Device, Link, estimation_error, gaussian_mutual_information, snr_db
from mimo.path_loss import PathLossSpec
from mimo.transmitter import Transmitter
from mimo.units import db_to_linear


def make_link(num_tx=1, num_rx=1, capability="transmitter", normalize=True) -> Link:
    tail_capability = "receiver" if capability == "transmitter" else capability
    head = Device.create(capability, name="tx", coordinate=(0.0, 0.0, 0.0))
    tail = Device.create(tail_capability, name="rx", coordinate=(0.0, 100.0, 0.0))
    head.set_arrays(make_ula(num_tx), make_ula(num_rx) if capability == "transceiver" else None)
    tail.set_arrays(make_ula(num_tx) if capability == "transceiver" else make_ula(num_rx), make_ula(num_rx))
    link = Link.create(head, tail)
    link.set_carrier_frequency(2.4e9)
    link.set_channel(ChannelSpec(model="rayleigh", force_normalization=normalize))
    link.set_path_loss(PathLossSpec(model="fspl", path_loss_exponent=2.0))
    return link


def configure(link: Link, transmit="eigen", receive="mmse"):
    link.supply_channel_state_information()
    link.head.transmitter.configure_transmitter(transmit)
    link.tail.receiver.configure_receiver(receive)


def test_create_checks_capabilities():
    rx_only = Device.create("receiver", name="a")
    tx_only = Device.create("transmitter", name="b")
    with pytest.raises(LinkError):
        Link.create(rx_only, tx_only)
    assert Link.create(tx_only, rx_only).reverse is None


def test_transceivers_have_reverse_direction():
    link = make_link(2, 2, capability="transceiver")
    assert link.reverse is not None
    assert link.name == "tx->rx"
    assert link.distance == pytest.approx(100.0)


def test_device_mismatch_rejected():
    with pytest.raises(ValueError):
        Device(name="r", capability="receiver", transmitter=Transmitter())


def test_rf_chains_only_on_hybrid():
    with pytest.raises(LinkError):
        Device.create("transceiver").set_num_rf_chains(2)
    hybrid = Device.create("transceiver", "hybrid")
    hybrid.set_arrays(make_ula(4))
    hybrid.set_num_rf_chains(2)
    assert hybrid.transmitter.num_rf_chains == 2 and hybrid.receiver.num_rf_chains == 2


@pytest.mark.parametrize("rho_db", [0.0, 3.0, 10.0])
def test_siso_mutual_information_closed_form(rho_db):
    link = make_link()
    link.realization(np.random.default_rng(7))
    link.set_snr(rho_db)
    configure(link)
    assert link.mutual_information() == pytest.approx(math.log2(1 + db_to_linear(rho_db)), abs=1e-9)


def test_snr_target_persists_across_realizations():
    link = make_link()
    link.set_snr(10.0)
    rng = np.random.default_rng(8)
    for _ in range(3):
        link.realization(rng)
        assert snr_db(link) == pytest.approx(10.0)
    link.clear_snr()
    link.realization(rng)
    assert snr_db(link) != pytest.approx(10.0)


def test_path_loss_fills_distance_and_carrier():
    link = make_link()
    link.realization(np.random.default_rng(9))
    budget, reverse = link.compute_link_budget()
    assert reverse is None
    assert budget.path_loss_db == pytest.approx(80.05, abs=0.01)
    assert budget.received_power_dbm == pytest.approx(budget.transmit_power_dbm - budget.path_loss_db)


def test_link_budget_snr_matches_large_scale_snr():
    link = make_link()
    link.head.set_transmit_power(0.0, "dBm")
    link.head.set_symbol_bandwidth(1e6)
    link.tail.set_symbol_bandwidth(1e6)
    link.tail.set_noise_power_per_hz(-174.0)
    link.realization(np.random.default_rng(10))
    budget, _ = link.compute_link_budget()
    assert budget.snr_db == pytest.approx(snr_db(link), abs=1e-9)
    assert budget.noise_power_dbm == pytest.approx(-114.0, abs=1e-9)


def test_channel_symmetry():
    link = make_link(3, 3, capability="transceiver")
    link.set_channel_symmetric(True)
    link.set_path_loss_symmetric(True)
    link.realization(np.random.default_rng(11))
    assert np.array_equal(link.get_channel_matrix("reverse"), link.get_channel_matrix("forward").conj().T)
    assert link.get_large_scale_gain("reverse") == link.get_large_scale_gain("forward")


def test_channel_symmetry_needs_matching_arrays():
    link = make_link(2, 4, capability="transceiver")
    with pytest.raises(LinkError):
        link.set_channel_symmetric(True)


def test_reverse_draws_independently_without_symmetry():
    link = make_link(2, 2, capability="transceiver")
    link.realization(np.random.default_rng(12))
    forward, reverse = link.get_channel_matrix("forward"), link.get_channel_matrix("reverse")
    assert not np.allclose(reverse, forward.conj().T)


def test_realization_clears_receiver_signals():
    link = make_link()
    link.realization(np.random.default_rng(13))
    configure(link)
    link.head.transmitter.set_transmit_symbol([1.0])
    link.compute_received_signal()
    assert link.tail.receiver.estimated_symbol is not None
    link.realization(np.random.default_rng(14))
    assert link.tail.receiver.received_signal is None
    assert link.tail.receiver.estimated_symbol is None


def test_noiseless_estimation_is_near_exact_at_high_snr():
    link = make_link(4, 4, normalize=False)
    for device in (link.head, link.tail):
        device.set_num_streams(2)
    link.realization(np.random.default_rng(15))
    link.set_snr(60.0)
    configure(link)
    link.head.transmitter.set_transmit_symbol([1.0, -1j])
    link.compute_received_signal()
    absolute, normalized = link.symbol_estimation_error()
    assert normalized < 1e-4
    assert absolute == pytest.approx(2.0 * normalized)


def test_metrics_need_realization():
    link = make_link()
    with pytest.raises(LinkError):
        link.mutual_information()


def test_estimation_error_zero_symbol():
    with pytest.raises(LinkError):
        estimation_error(np.ones(2), np.zeros(2))


def test_gaussian_mutual_information_identity():
    assert gaussian_mutual_information(3.0 * np.eye(2), np.eye(2)) == pytest.approx(4.0)


def test_unknown_snr_unit():
    with pytest.raises(LinkError):
        make_link().set_snr(3.0, unit="neper")


def test_transceiver_link_with_only_head_symbol():
    link = make_link(2, 2, capability="transceiver")
    link.realization(np.random.default_rng(16))
    link.head.transmitter.set_transmit_symbol([1.0])
    link.compute_received_signal()
    assert link.tail.receiver.estimated_symbol is not None
    assert link.head.receiver.received_signal is None


def test_transceiver_link_carries_both_symbols():
    link = make_link(2, 2, capability="transceiver")
    link.realization(np.random.default_rng(17))
    link.head.transmitter.set_transmit_symbol([1.0])
    link.tail.transmitter.set_transmit_symbol([-1.0])
    link.compute_received_signal(np.random.default_rng(18))
    assert link.tail.receiver.estimated_symbol is not None
    assert link.head.receiver.estimated_symbol is not None


def test_head_without_symbol_leaves_receivers_untouched():
    link = make_link(2, 2, capability="transceiver")
    link.realization(np.random.default_rng(19))
    link.tail.transmitter.set_transmit_symbol([1.0])
    with pytest.raises(TransceiverError):
        link.compute_received_signal()
    assert link.head.receiver.received_signal is None


def test_coincident_devices_raise_path_loss_error():
    head = Device.create("transmitter", name="tx")
    tail = Device.create("receiver", name="rx")
    link = Link.create(head, tail)
    link.set_carrier_frequency(2.4e9)
    link.set_channel(ChannelSpec(model="rayleigh"))
    link.set_path_loss(PathLossSpec(model="fspl", path_loss_exponent=2.0))
    with pytest.raises(PathLossError):
        link.realization(np.random.default_rng(20))


def budgeted_link(num_antennas=4, num_streams=2) -> Link:
    link = make_link(num_antennas, num_antennas, normalize=False)
    for device in (link.head, link.tail):
        device.set_num_streams(num_streams)
        device.set_symbol_bandwidth(1e6)
    link.tail.set_noise_power_per_hz(-174.0)
    return link


def test_mutual_information_grows_with_transmit_power():
    link = budgeted_link()
    rng = np.random.default_rng(21)
    for _ in range(20):
        link.realization(rng)
        previous = -math.inf
        for power_dbm in np.arange(-40.0, 41.0, 5.0):
            link.head.set_transmit_power(power_dbm, "dBm")
            configure(link)
            mi = link.mutual_information()
            assert mi >= previous - 1e-9
            previous = mi


def test_covariances_are_hermitian_and_psd():
    link = budgeted_link()
    rng = np.random.default_rng(22)
    for _ in range(20):
        link.realization(rng)
        configure(link)
        for matrix in link.compute_covariance():
            assert np.allclose(matrix, matrix.conj().T)
            eigenvalues = np.linalg.eigvalsh(matrix)
            assert eigenvalues.min() >= -1e-12 * max(eigenvalues.max(), 1.0)


def test_received_covariance_matches_sample_covariance():
    link = budgeted_link()
    rng = np.random.default_rng(23)
    link.realization(rng)
    link.set_snr(10.0)
    configure(link)
    r_y, r_n = link.compute_covariance()
    transmitter, receiver = link.head.transmitter, link.tail.receiver
    w_h = receiver.effective_combiner.conj().T
    gain, channel = link.get_large_scale_gain(), link.get_channel_matrix()
    samples = []
    for _ in range(20_000):
        transmitter.draw_transmit_symbol(rng)
        samples.append(w_h @ (gain * (channel @ transmitter.transmit())))
    samples = np.array(samples)
    sample_covariance = samples.T @ samples.conj() / len(samples)
    assert np.linalg.norm(sample_covariance - r_y) <= 0.05 * np.linalg.norm(r_y)
    assert np.all(np.linalg.eigvalsh(r_n) > 0)
