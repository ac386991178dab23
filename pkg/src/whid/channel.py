"""Ground-truth Wiener-Hammerstein channel.

``x -> h -> amplifier -> g -> (+ noise) -> w``. Filters are causal FIR tap
arrays with zero initial state; the amplifier is either a Rapp AM/AM curve
or an odd polynomial.
"""

from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.signal import lfilter

from . import lsq
from .errors import DegenerateError, ParameterError


def as_taps(taps):
    taps = np.asarray(taps, dtype=float).ravel()
    if taps.size < 1:
        raise ParameterError("a filter needs at least one tap")
    if not np.all(np.isfinite(taps)):
        raise ParameterError("filter taps must be finite")
    return taps


def convolve(taps, x):
    """Causal FIR filtering; output has the length of ``x``."""
    return lfilter(as_taps(taps), [1.0], np.asarray(x, dtype=float))


def load_filter_csv(path):
    with open(path) as f:
        return as_taps([float(line) for line in f if line.strip()])


def save_filter_csv(path, taps):
    with open(path, "w") as f:
        for v in as_taps(taps):
            f.write(f"{float(v)!r}\n")


def reference_filters():
    """The 20-tap ``h`` and ``g`` used throughout the examples (``h_reference.csv``, ``g_reference.csv``)."""
    data = resources.files("whid") / "data"
    with resources.as_file(data / "h_reference.csv") as p:
        h = load_filter_csv(p)
    with resources.as_file(data / "g_reference.csv") as p:
        g = load_filter_csv(p)
    return h, g


@dataclass(frozen=True)
class RappAmplifier:
    """Rapp AM/AM model ``G|u| / (1 + (G|u|/A0)^(2p))^(1/(2p))`` with the sign of ``u``."""

    gain: float = 1.0
    saturation: float = 10.0
    smoothness: float = 3.0

    def __post_init__(self):
        if not (self.gain > 0 and self.saturation > 0 and self.smoothness > 0):
            raise ParameterError("Rapp parameters must be positive")

    @property
    def small_signal_gain(self):
        return self.gain

    def __call__(self, u):
        return rapp(self, u)


@dataclass(frozen=True)
class PolynomialAmplifier:
    """Odd polynomial ``sum_k gamma_k u^k``; ``coeffs`` maps odd order to coefficient."""

    coeffs: dict

    def __post_init__(self):
        coeffs = {int(k): float(v) for k, v in dict(self.coeffs).items()}
        if not coeffs:
            raise ParameterError("polynomial needs at least one coefficient")
        if any(k < 1 or k % 2 == 0 for k in coeffs):
            raise ParameterError("only odd orders are allowed")
        if coeffs.get(1, 0.0) == 0.0:
            raise ParameterError("the linear coefficient gamma(1) must be nonzero")
        object.__setattr__(self, "coeffs", dict(sorted(coeffs.items())))

    @property
    def order(self):
        return max(self.coeffs)

    @property
    def small_signal_gain(self):
        return self.coeffs[1]

    def gamma(self, k):
        return self.coeffs.get(k, 0.0)

    def __call__(self, u):
        return poly_amp(self, u)


def rapp(amp, u):
    u = np.asarray(u, dtype=float)
    a = amp.gain * np.abs(u)
    two_p = 2.0 * amp.smoothness
    mag = a / (1.0 + (a / amp.saturation) ** two_p) ** (1.0 / two_p)
    return np.sign(u) * mag


def poly_amp(amp, u):
    # Evaluate on |u| and restore the sign so odd symmetry holds bit for bit.
    u = np.asarray(u, dtype=float)
    a = np.abs(u)
    y = np.zeros_like(u)
    for k, c in amp.coeffs.items():
        y = y + c * a**k
    return np.sign(u) * y


def fit_polynomial(u, y, order):
    """Least-squares fit of ``y`` by odd monomials of ``u`` up to ``order``.

    Returns
    -------
    amp : PolynomialAmplifier
    nmse_db : float
        ``10 log10(||y - fit||^2 / ||y||^2)``.
    """
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    if u.shape != y.shape:
        raise ParameterError("u and y must have the same length")
    orders = lsq.odd_orders(order)
    if u.size < len(orders):
        raise ParameterError("not enough samples for the requested order")
    X = np.stack([u**k for k in orders], axis=1)
    res = lsq.solve(X, y)
    err = y - X @ res.coef
    amp = PolynomialAmplifier(dict(zip(orders, res.coef)))
    return amp, _ratio_db(err @ err, y @ y)


def fit_rapp(amp, max_amplitude, order, points=2001):
    """Fit an odd polynomial to a Rapp curve on a uniform grid over ``[-a, a]``."""
    u = np.linspace(-max_amplitude, max_amplitude, points)
    return fit_polynomial(u, rapp(amp, u), order)


def _ratio_db(num, den):
    if den == 0.0:
        raise DegenerateError("zero reference energy")
    if num == 0.0:
        return -np.inf
    return float(10.0 * np.log10(num / den))


def hammerstein_coeffs(amp, g):
    """Flattened ``g'_k(i) = gamma(k) g(i)``, odd ``k`` ascending, taps inner."""
    g = as_taps(g)
    return np.concatenate([amp.gamma(k) * g for k in lsq.odd_orders(amp.order)])


@dataclass(frozen=True)
class WhModel:
    h: np.ndarray
    amplifier: object
    g: np.ndarray
    noise_variance: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "h", as_taps(self.h))
        object.__setattr__(self, "g", as_taps(self.g))
        if self.noise_variance < 0:
            raise ParameterError("noise_variance must be >= 0")

    @property
    def r(self):
        """Linear-regime channel ``G * (g * h)``."""
        return self.amplifier.small_signal_gain * np.convolve(self.g, self.h)

    def with_noise(self, noise_variance):
        return WhModel(self.h, self.amplifier, self.g, noise_variance)

    def noiseless(self, x):
        return convolve(self.g, self.amplifier(convolve(self.h, x)))

    def forward(self, x, seed=None):
        return wh_forward(self, x, seed)


def wh_forward(model, x, seed=None):
    """Run ``x`` through the channel.

    Returns ``(u, y, w)`` with ``u = h*x``, ``y = c(u)``, ``w = g*y + e``.
    The noise draw is deterministic given ``seed``.
    """
    u = convolve(model.h, x)
    y = model.amplifier(u)
    w = convolve(model.g, y)
    if model.noise_variance > 0:
        rng = np.random.default_rng(seed)
        w = w + rng.normal(0.0, np.sqrt(model.noise_variance), w.size)
    return u, y, w


def noise_for_snr(model, x, snr_db):
    """Noise variance giving ``snr_db`` relative to the noiseless output power of ``x``."""
    v = model.noiseless(x)
    return float(np.mean(v * v) / 10.0 ** (snr_db / 10.0))


def group_delay(taps, rtol=1e-12):
    """Delay in samples.

    ``(L-1)/2`` for symmetric or antisymmetric taps, otherwise the energy
    centroid ``sum i f(i)^2 / sum f(i)^2``.
    """
    f = as_taps(taps)
    energy = f @ f
    if energy == 0.0:
        raise DegenerateError("group delay of an all-zero filter")
    tol = rtol * np.max(np.abs(f))
    if np.all(np.abs(f - f[::-1]) <= tol) or np.all(np.abs(f + f[::-1]) <= tol):
        return (f.size - 1) / 2.0
    return float(np.arange(f.size) @ (f * f) / energy)


def fractional_delay(x, delay):
    """Circular delay by ``delay`` samples via a DFT phase ramp.

    Exact for periodic band-limited records. For even lengths the Nyquist
    bin is real, so a non-integer delay attenuates any Nyquist component.
    """
    x = np.asarray(x, dtype=float)
    if not np.isfinite(delay):
        raise ParameterError("delay must be finite")
    if delay == 0:
        return x.copy()
    spectrum = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(x.size)
    return np.fft.irfft(spectrum * np.exp(-2j * np.pi * freqs * delay), x.size)
