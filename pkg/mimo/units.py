import numpy as np


def _scalar_or_array(value):
    return float(value) if np.ndim(value) == 0 else value


def db_to_linear(value_db):
    """Power ratio in dB to linear."""
    return _scalar_or_array(10.0 ** (np.asarray(value_db, dtype=float) / 10.0))


def linear_to_db(value):
    """Linear power ratio to dB."""
    return _scalar_or_array(10.0 * np.log10(np.asarray(value, dtype=float)))


def dbm_to_watts(value_dbm):
    return _scalar_or_array(10.0 ** ((np.asarray(value_dbm, dtype=float) - 30.0) / 10.0))


def watts_to_dbm(value_watts):
    return _scalar_or_array(10.0 * np.log10(np.asarray(value_watts, dtype=float) * 1000.0))
