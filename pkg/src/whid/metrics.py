"""Figures of merit and pilot-length budgets.

All ratios are returned in dB. An exact estimate gives ``Q = +inf`` and
``NMSE = -inf``; CSV writers replace these with :data:`SENTINEL_DB`.
"""

import math
from dataclasses import dataclass

import numpy as np

from .channel import as_taps, convolve
from .errors import DegenerateError, ParameterError

SENTINEL_DB = 400.0


def db(ratio):
    return 10.0 * math.log10(ratio)


def undb(value_db):
    return 10.0 ** (value_db / 10.0)


def csv_db(value):
    """Finite dB value for tables: ``+-inf`` map to ``+-SENTINEL_DB``."""
    if math.isinf(value):
        return math.copysign(SENTINEL_DB, value)
    return float(value)


def _inverse_error_db(reference, estimate):
    ref_energy = float(reference @ reference)
    if ref_energy == 0.0:
        raise DegenerateError("reference filter has zero energy")
    err = reference - estimate
    err_energy = float(err @ err)
    if err_energy == 0.0:
        return math.inf
    return db(ref_energy / err_energy)


def q_value(true, est):
    """``10 log10(||r||^2 / ||r - r_hat||^2)``."""
    true, est = as_taps(true), as_taps(est)
    if true.shape != est.shape:
        raise ParameterError("filters must have equal lengths")
    return _inverse_error_db(true, est)


def q_prime(true, est, weighting):
    """Q-value of both filters after convolving them with ``weighting``."""
    true, est = as_taps(true), as_taps(est)
    if true.shape != est.shape:
        raise ParameterError("filters must have equal lengths")
    w = as_taps(weighting)
    return _inverse_error_db(np.convolve(w, true), np.convolve(w, est))


def predicted_q(n, taps, snr_db):
    """Expected least-squares Q-value ``10 log10(N/L) + SNR``."""
    if n < 1 or taps < 1:
        raise ParameterError("N and L must be >= 1")
    return db(n / taps) + snr_db


def nmse(w, w_hat):
    """Single-realization ``10 log10(||w - w_hat||^2 / ||w||^2)``."""
    w = np.asarray(w, dtype=float)
    w_hat = np.asarray(w_hat, dtype=float)
    if w.shape != w_hat.shape:
        raise ParameterError("signals must have equal lengths")
    ref = float(w @ w)
    if ref == 0.0:
        raise DegenerateError("NMSE against an all-zero reference")
    err = w - w_hat
    e = float(err @ err)
    if e == 0.0:
        return -math.inf
    return db(e / ref)


def nmse_prime(w, w_hat, weighting):
    """NMSE after passing both signals through the band-selection filter."""
    return nmse(convolve(weighting, w), convolve(weighting, w_hat))


def nmse_frequency_domain(x, r, r_hat):
    """NMSE of ``r_hat * x`` against ``r * x`` from circular spectra (Parseval).

    ``sum |X|^2 |E|^2 / sum |X|^2 |R|^2`` over DFT bins, with ``E`` the
    spectrum of ``r - r_hat``. Equals the time-domain NMSE of the circular
    convolutions.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    X = np.fft.fft(x)
    R = np.fft.fft(as_taps(r), n)
    E = np.fft.fft(as_taps(r) - as_taps(r_hat), n)
    power = np.abs(X) ** 2
    return db(np.sum(power * np.abs(E) ** 2) / np.sum(power * np.abs(R) ** 2))


@dataclass
class BudgetInputs:
    """Inputs of the SNR and minimum-length budgets (linear units except ``target_nmse_db``).

    ``target_nmse_db`` is converted to the inverse factor
    ``10^(-NMSE_dB/10)`` that the length formulas multiply by.
    """

    target_nmse_db: float = -30.0
    taps: int = 39
    taps_g: int = 20
    bandwidth_ratio_x: float = 1.0  # W_x / W_r^x
    bandwidth_ratio_u: float = 1.0  # W_u / W_g^u
    par_x1: float = 1.0
    par_x2: float = 1.0
    ibo: float = 1.0
    noise_variance: float = 1.0
    gain: float = 1.0
    p_in_sat: float = 1.0
    par_increase: float = 1.0  # PAR(u) / PAR(x1)
    beta: float = 2.0

    def __post_init__(self):
        for name in (
            "taps", "taps_g", "bandwidth_ratio_x", "bandwidth_ratio_u", "par_x1",
            "par_x2", "ibo", "noise_variance", "gain", "p_in_sat", "par_increase",
            "beta",
        ):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be strictly positive")

    @property
    def nmse_inverse(self):
        return undb(-self.target_nmse_db)

    @property
    def noise_to_peak(self):
        return self.noise_variance / (self.gain**2 * self.p_in_sat)


def snr_budget(inputs, option=1):
    """Maximum achievable step-1 SNR in dB for pilot option 1 or 2."""
    base = 1.0 / (inputs.noise_to_peak * inputs.par_x1 * inputs.ibo)
    if option == 1:
        return db(base / inputs.bandwidth_ratio_x)
    if option == 2:
        return db(base / (inputs.bandwidth_ratio_u * inputs.par_increase))
    raise ParameterError(f"option must be 1 or 2, got {option}")


def min_pilot_length(inputs, which):
    """Minimum pilot length for ``which`` in ``{"x1opt1", "x1opt2", "x2"}``, rounded up."""
    b = inputs
    if which == "x1opt1":
        n = b.nmse_inverse * b.taps * b.bandwidth_ratio_x * b.par_x1 * b.ibo * b.noise_to_peak
    elif which == "x1opt2":
        n = (
            b.nmse_inverse * b.taps * b.bandwidth_ratio_u * b.par_x1 * b.ibo
            * b.par_increase * b.noise_to_peak
        )
    elif which == "x2":
        n = b.beta * b.nmse_inverse * b.taps_g * b.par_x2 * b.noise_to_peak
    else:
        raise ParameterError(f"unknown pilot {which!r}")
    # Guard against 16.000000000000004 rounding up to 17.
    return int(math.ceil(round(n, 9)))
