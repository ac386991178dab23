"""Three-step identification of a K=3 Wiener-Hammerstein channel.

Step 1 fits the linear-regime response ``r = g * h`` from a backed-off
multisine. Step 2 drives the amplifier hard with a band-limited multisine,
approximates ``u = h * x`` by a fractional delay of the pilot, and fits a
Hammerstein model ``w = g'_1 * u + g'_3 * u^3``. Step 3 fixes the scale of
``g`` from a short linear-regime pilot and deconvolves ``h`` out of ``r``.

Records follow one convention throughout: a pilot is transmitted as
``pad`` zeros followed by the samples, the captured output has the same
length, and regression rows inside the transient are dropped.
"""

import csv
import functools
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import convolution_matrix
from scipy.optimize import minimize_scalar

from . import lsq, metrics, signals
from .channel import as_taps, convolve, fractional_delay, group_delay, save_filter_csv, load_filter_csv
from .errors import DegenerateError, EmptyBandError, ParameterError, StepError

log = logging.getLogger(__name__)


@dataclass
class PilotPlan:
    """Pilot design and estimator settings.

    Amplitudes are in the units of the amplifier input. ``p_in_sat`` is the
    input power at saturation (peak amplitude squared).
    """

    taps_h: int = 20
    taps_g: int = 20
    order: int = 3
    p_in_sat: float = 256.0
    ibo_db: float = 5.0
    # x1: Schroeder multisine, one period of x1_period samples
    x1_harmonics: int = 100
    x1_period: int = 200
    n1: int = 16000
    # phase design: 1 = Schroeder, 2 = min-max search seeded with Schroeder
    x1_option: int = 1
    x1_min_harmonics: int = None
    search_budget: int = 0
    search_seed: int = 0
    # x2: band-limited multisine at the saturation peak
    x2_harmonics: int = 100
    x2_period: int = 500
    x2_first_harmonic: int = 1
    x2_peak: float = 16.0
    n2: int = 8000
    # x3: x2's spectrum at x1's peak
    n3: int = 500
    delay_grid: int = 17
    tie_db: float = 0.5
    passband_db: float = 3.0
    ridge: float = None
    alpha_method: str = "projection"  # or "joint": fit the cubic response alongside

    def __post_init__(self):
        for name in ("taps_h", "taps_g", "n1", "n2", "n3", "delay_grid",
                     "x1_harmonics", "x1_period", "x2_harmonics", "x2_period"):
            if int(getattr(self, name)) < 1:
                raise ParameterError(f"{name} must be >= 1")
        lsq.odd_orders(self.order)
        if self.x1_option not in (1, 2):
            raise ParameterError("x1_option must be 1 or 2")
        if self.alpha_method not in ("projection", "joint"):
            raise ParameterError("alpha_method must be 'projection' or 'joint'")
        if self.ibo_db < 0:
            raise ParameterError("ibo_db must be >= 0")
        if not self.p_in_sat > 0 or not self.x2_peak > 0:
            raise ParameterError("p_in_sat and x2_peak must be positive")
        self.x1_spec
        self.x2_spec

    @property
    def pad(self):
        return max(self.taps_h, self.taps_g)

    @property
    def taps_r(self):
        return self.taps_h + self.taps_g - 1

    @functools.cached_property
    def phase_search(self):
        """Min-max phase search result for x1 (option 2), ``None`` under option 1."""
        if self.x1_option == 1:
            return None
        M = self.x1_harmonics
        M0 = self.x1_min_harmonics or max(1, M // 2)
        return signals.minmax_phase_search(
            M, M0, 1.0 / self.x1_period, self.x1_period, self.search_budget, self.search_seed
        )

    @property
    def x1_spec(self):
        M = self.x1_harmonics
        f1 = 1.0 / self.x1_period
        # validate the grid before a potentially long search
        signals.MultisineSpec(M, f1, np.zeros(M), self.x1_period)
        search = self.phase_search
        phases = signals.schroeder_phases(M) if search is None else search.phases
        return signals.MultisineSpec(M, f1, phases, self.x1_period)

    @property
    def x2_spec(self):
        M = self.x2_harmonics
        return signals.MultisineSpec(
            M, 1.0 / self.x2_period, signals.schroeder_phases(M), self.x2_period,
            self.x2_first_harmonic,
        )

    @property
    def x1_backoff_db(self):
        """Step-1 power back-off from saturation: IBO plus the PAR of x1."""
        return self.ibo_db + signals.par_db(signals.multisine(self.x1_spec))

    def x1(self):
        period = signals.multisine(self.x1_spec)
        power = self.p_in_sat / 10.0 ** (self.x1_backoff_db / 10.0)
        period = period * math.sqrt(power / signals.mean_power(period))
        return _tile(period, self.n1)

    def x2_period_samples(self):
        return signals.scale_to_peak(signals.multisine(self.x2_spec), self.x2_peak)

    def x2(self):
        return _tile(self.x2_period_samples(), self.n2)

    def x3_period_samples(self):
        return signals.scale_to_peak(signals.multisine(self.x2_spec), np.max(np.abs(self.x1())))

    def x3(self):
        return _tile(self.x3_period_samples(), self.n3)

    def padded(self, x):
        return np.concatenate([np.zeros(self.pad), x])


def _tile(period, n):
    reps = -(-n // period.size)
    return np.tile(period, reps)[:n]


def _skip_rows(design, target, skip):
    if design.shape[0] - skip < 1:
        raise ParameterError("record shorter than the transient")
    return design[skip:], target[skip:]


# Step 1 ---------------------------------------------------------------------

@dataclass
class Step1Result:
    r_hat: np.ndarray
    snr_db: float
    predicted_q: float
    output_power: float
    condition: float


def step1_estimate_r(x1, w1, taps, pad=0, ridge=None):
    """Least-squares FIR estimate of ``r`` from a linear-regime record.

    ``x1`` and ``w1`` are the padded input and captured output; the first
    ``pad`` rows are dropped. The SNR is estimated from the fit residual.
    """
    x1 = np.asarray(x1, dtype=float)
    w1 = np.asarray(w1, dtype=float)
    if x1.shape != w1.shape:
        raise ParameterError("x1 and w1 must have the same length")
    X, w = _skip_rows(lsq.linear_design(x1, taps), w1, pad)
    res = lsq.solve(X, w, ridge=ridge)
    n = w.size
    output_power = float(w @ w / n)
    noise = res.residual_norm**2 / max(n - taps, 1)
    snr = math.inf if noise == 0 else metrics.db(max(output_power - noise, 1e-300) / noise)
    pq = math.inf if math.isinf(snr) else metrics.predicted_q(n, taps, snr)
    return Step1Result(res.coef, snr, pq, output_power, res.condition)


def passband(r_hat, n_fft=4096, passband_db=3.0):
    """Frequencies ``(lo, hi)`` where ``|R|`` is within ``passband_db`` of its peak."""
    mag = np.abs(np.fft.rfft(as_taps(r_hat), n_fft)) ** 2
    freqs = np.fft.rfftfreq(n_fft)
    keep = np.flatnonzero(mag >= mag.max() * 10.0 ** (-passband_db / 10.0))
    return float(freqs[keep[0]]), float(freqs[keep[-1]])


def passband_ripple_db(r_hat, band, n_fft=4096):
    mag = np.abs(np.fft.rfft(as_taps(r_hat), n_fft)) ** 2
    freqs = np.fft.rfftfreq(n_fft)
    inside = mag[(freqs >= band[0]) & (freqs <= band[1])]
    return float(10.0 * np.log10(inside.max() / inside.min()))


def check_band(spec, r_hat, passband_db=3.0):
    """Fraction of ``spec``'s harmonics inside ``r_hat``'s passband.

    Raises :class:`EmptyBandError` if none are; logs a warning if some fall
    outside.
    """
    lo, hi = passband(r_hat, passband_db=passband_db)
    freqs = spec.harmonics * spec.fundamental
    inside = np.mean((freqs >= lo) & (freqs <= hi))
    if inside == 0:
        raise EmptyBandError(f"no x2 harmonic in the passband [{lo:.3f}, {hi:.3f}]")
    if inside < 1:
        log.warning("%.0f%% of x2 harmonics lie outside the passband [%.3f, %.3f]",
                    100 * (1 - inside), lo, hi)
    ripple = passband_ripple_db(r_hat, (lo, hi))
    if ripple > 1.0:
        log.warning("passband ripple of r_hat is %.2f dB", ripple)
    return float(inside)


# Step 2 ---------------------------------------------------------------------

def delayed_pilot(x, delay, pad=0, period=None):
    """Surrogate of ``u = h * x`` for a padded record: the pilot delayed by ``delay``.

    With ``period`` the delay is applied to one period and tiled, which is
    exact for periodic pilots of any length. Otherwise the unpadded part is
    delayed circularly.
    """
    x = np.asarray(x, dtype=float)
    body = x[pad:]
    if period:
        one = fractional_delay(body[:period], delay)
        shifted = _tile(one, body.size)
    else:
        shifted = fractional_delay(body, delay)
    return np.concatenate([np.zeros(pad), shifted])


@dataclass
class Step2Result:
    g1_direct: np.ndarray
    g3: np.ndarray
    coef: np.ndarray
    delay: float
    nmse_db: float
    searched: list = field(default_factory=list)


def _hammerstein_fit(u, w, taps, order, skip, ridge):
    X, t = _skip_rows(lsq.hammerstein_design(u, taps, order), w, skip)
    res = lsq.solve(X, t, ridge=ridge)
    err = res.residual_norm**2
    ref = float(t @ t)
    if ref == 0:
        raise DegenerateError("all-zero step-2 output")
    return res.coef, (metrics.db(err / ref) if err > 0 else -math.inf)


def step2_estimate_hammerstein(
    x2, w2, r_hat, taps_g, order=3, taps_h=None, pad=0, period=None,
    delay_grid=17, tie_db=0.5, delay=None, ridge=None,
):
    """Hammerstein fit of step 2 with a fractional-delay search.

    The candidate delays form a grid over ``[tau_r/4, 3 tau_r/4]``, with
    ``tau_r`` the group delay of ``r_hat``; the best grid point is refined
    by a bounded scalar search. Shifting by a whole sample is nearly free
    (``g`` absorbs it), so among equally good shifts of the optimum the one
    nearest ``tau_r (L1-1)/(L1+L2-2)`` wins. ``delay`` skips the search.
    """
    x2 = np.asarray(x2, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    if x2.shape != w2.shape:
        raise ParameterError("x2 and w2 must have the same length")
    r_hat = as_taps(r_hat)
    L1 = taps_h if taps_h is not None else r_hat.size - taps_g + 1
    skip = pad + r_hat.size + 1

    def fit(tau):
        return _hammerstein_fit(delayed_pilot(x2, tau, pad, period), w2, taps_g, order, skip, ridge)

    searched = []
    if delay is None and L1 == 1:
        delay = 0.0  # h is a scalar gain
    if delay is None:
        tau_r = group_delay(r_hat)
        lo, hi = tau_r / 4.0, 3.0 * tau_r / 4.0
        grid = np.linspace(lo, hi, delay_grid) if hi > lo else np.array([lo])
        scores = [fit(t)[1] for t in grid]
        searched = list(zip(grid.tolist(), scores))
        best = int(np.argmin(scores))
        tau = float(grid[best])
        if grid.size > 1:
            step = grid[1] - grid[0]
            opt = minimize_scalar(
                lambda t: fit(t)[1],
                bounds=(max(lo, tau - step), min(hi, tau + step)),
                method="bounded", options={"xatol": 1e-3},
            )
            if opt.fun < scores[best]:
                tau = float(opt.x)
            prior = tau_r * (L1 - 1) / max(r_hat.size - 1, 1)
            tau = _tie_break(tau, fit(tau)[1], lo, hi, prior, tie_db, fit)
        delay = tau
    coef, score = fit(delay)
    L2 = taps_g
    return Step2Result(coef[:L2].copy(), coef[L2:2 * L2].copy(), coef, float(delay), score, searched)


def _tie_break(tau, score, lo, hi, prior, tie_db, fit):
    shifts = [tau + k for k in range(-int(hi - lo) - 1, int(hi - lo) + 2)]
    options = [(t, fit(t)[1]) for t in shifts if lo <= t <= hi]
    options.append((tau, score))
    best = min(s for _, s in options)
    close = [t for t, s in options if s <= best + tie_db]
    return float(min(close, key=lambda t: (abs(t - prior), t)))


def improve_g1(r_hat, g3, u, w, skip=0):
    """Scalar projection ``gamma'_1`` with ``g1 = gamma'_1 g3``.

    Both sides are filtered by ``r_hat`` so the estimate concentrates on the
    band where the channel is well excited.
    """
    g3 = as_taps(g3)
    if not np.any(g3):
        raise DegenerateError("g3 estimate is all zero")
    u = np.asarray(u, dtype=float)
    w_f = convolve(r_hat, w)[skip:]
    y1 = convolve(r_hat, convolve(g3, u))[skip:]
    y3 = convolve(r_hat, convolve(g3, u**3))[skip:]
    den = float(y1 @ y1)
    if den == 0:
        raise DegenerateError("projection onto an all-zero regressor")
    gamma = float(y1 @ (w_f - y3)) / den
    return gamma, gamma * g3


# Step 3 ---------------------------------------------------------------------

def estimate_alpha(g1, u3, w3, skip=0, g3=None):
    """Scale ``alpha`` with ``w3 ~ alpha g1 * u3``.

    With ``g3`` the cubic response ``g3 * u3^3`` is fitted jointly and only
    the linear coefficient is returned, so residual compression at x3's
    amplitude does not bias ``alpha``.
    """
    w = np.asarray(w3, dtype=float)[skip:]
    z = convolve(g1, u3)[skip:]
    if not np.any(z):
        raise DegenerateError("projection onto an all-zero regressor")
    if g3 is not None and np.any(g3):
        cubic = convolve(g3, np.asarray(u3, dtype=float) ** 3)[skip:]
        return float(lsq.solve(np.stack([z, cubic], axis=1), w).coef[0])
    return float(z @ w) / float(z @ z)


def deconvolve_h(r_hat, g_hat, taps_h, ridge=None):
    """Least-squares ``h`` from ``r = g * h`` with the full convolution matrix of ``g``."""
    r_hat, g_hat = as_taps(r_hat), as_taps(g_hat)
    if r_hat.size != g_hat.size + taps_h - 1:
        raise ParameterError("len(r) must equal len(g) + taps_h - 1")
    G = convolution_matrix(g_hat, taps_h, mode="full")
    return lsq.solve(G, r_hat, ridge=ridge).coef


def step3_estimate_h(r_hat, g1, u3, w3, taps_h, skip=0, ridge=None, g3=None):
    """Return ``(alpha, g_hat, h_hat)``."""
    alpha = estimate_alpha(g1, u3, w3, skip, g3)
    g_hat = alpha * as_taps(g1)
    return alpha, g_hat, deconvolve_h(r_hat, g_hat, taps_h, ridge)


# Estimate -------------------------------------------------------------------

@dataclass
class WhEstimate:
    """Identified channel. ``predict`` evaluates ``g1 * u + g3 * u^3`` with ``u = h_hat * x``."""

    r_hat: np.ndarray
    g1_direct: np.ndarray
    g1: np.ndarray
    g3: np.ndarray
    gamma1_prime: float
    alpha: float
    g_hat: np.ndarray
    h_hat: np.ndarray
    delay: float
    diagnostics: list = field(default_factory=list)

    @property
    def r_prime(self):
        return np.convolve(self.h_hat, self.g_hat)

    @property
    def gamma(self):
        """Amplifier coefficients relative to ``g_hat``: ``{1: 1/alpha, 3: 1/(alpha gamma'_1)}``."""
        return {1: 1.0 / self.alpha, 3: 1.0 / (self.alpha * self.gamma1_prime)}

    def predict(self, x):
        u = convolve(self.h_hat, x)
        return convolve(self.g1, u) + convolve(self.g3, u**3)

    def predict_linear(self, x):
        return convolve(self.r_prime, x)

    def diagnostic(self, step, metric):
        for s, m, v in self.diagnostics:
            if s == step and m == metric:
                return v
        raise KeyError((step, metric))

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        save_filter_csv(os.path.join(directory, "r_hat.csv"), self.r_hat)
        save_filter_csv(os.path.join(directory, "g_hat.csv"), self.g_hat)
        save_filter_csv(os.path.join(directory, "h_hat.csv"), self.h_hat)
        with open(os.path.join(directory, "gamma.csv"), "w", newline="") as f:
            out = csv.writer(f)
            out.writerow(["name", "value"])
            for name, value in self._scalars().items():
                out.writerow([name, repr(value)])
            for k, v in enumerate(self.g1):
                out.writerow([f"g1_{k}", repr(float(v))])
            for k, v in enumerate(self.g3):
                out.writerow([f"g3_{k}", repr(float(v))])
            for k, v in enumerate(self.g1_direct):
                out.writerow([f"g1_direct_{k}", repr(float(v))])
        with open(os.path.join(directory, "diagnostics.csv"), "w", newline="") as f:
            out = csv.writer(f)
            out.writerow(["step", "metric", "value_db"])
            for step, metric, value in self.diagnostics:
                out.writerow([step, metric, repr(metrics.csv_db(value))])

    def _scalars(self):
        return {
            "gamma1": self.gamma[1],
            "gamma3": self.gamma[3],
            "gamma1_prime": self.gamma1_prime,
            "alpha": self.alpha,
            "delay": self.delay,
        }

    @classmethod
    def load(cls, directory):
        r_hat = load_filter_csv(os.path.join(directory, "r_hat.csv"))
        g_hat = load_filter_csv(os.path.join(directory, "g_hat.csv"))
        h_hat = load_filter_csv(os.path.join(directory, "h_hat.csv"))
        scalars, g1, g3, g1d = {}, [], [], []
        with open(os.path.join(directory, "gamma.csv"), newline="") as f:
            for row in csv.DictReader(f):
                name, value = row["name"], float(row["value"])
                if name.startswith("g1_direct_"):
                    g1d.append(value)
                elif name.startswith("g1_"):
                    g1.append(value)
                elif name.startswith("g3_"):
                    g3.append(value)
                else:
                    scalars[name] = value
        diagnostics = []
        with open(os.path.join(directory, "diagnostics.csv"), newline="") as f:
            for row in csv.DictReader(f):
                diagnostics.append((row["step"], row["metric"], float(row["value_db"])))
        return cls(
            r_hat, np.array(g1d), np.array(g1), np.array(g3), scalars["gamma1_prime"],
            scalars["alpha"], g_hat, h_hat, scalars["delay"], diagnostics,
        )


def identify(x1, w1, x2, w2, x3, w3, plan):
    """Run the three steps on captured, padded records.

    ``x2`` and ``x3`` must be periodic with period ``plan.x2_period`` after
    the ``plan.pad`` leading zeros. Failures are re-raised as
    :class:`StepError` naming the step.
    """
    pad = plan.pad
    diag = []
    try:
        s1 = step1_estimate_r(x1, w1, plan.taps_r, pad, plan.ridge)
    except Exception as exc:
        raise StepError(1, exc) from exc
    diag += [("1", "snr", s1.snr_db), ("1", "predicted_q", s1.predicted_q)]

    try:
        inside = check_band(plan.x2_spec, s1.r_hat, plan.passband_db)
        s2 = step2_estimate_hammerstein(
            x2, w2, s1.r_hat, plan.taps_g, plan.order, plan.taps_h, pad,
            plan.x2_period, plan.delay_grid, plan.tie_db, ridge=plan.ridge,
        )
        skip = pad + plan.taps_r + 1
        u2 = delayed_pilot(x2, s2.delay, pad, plan.x2_period)
        g3 = s2.g3
        if _negligible(convolve(g3, u2**3)[skip:], w2[skip:]):
            # linear amplifier: the ratio gamma'_1 is undefined
            gamma1_prime, g1, g3 = math.inf, s2.g1_direct, np.zeros_like(g3)
        else:
            gamma1_prime, g1 = improve_g1(s1.r_hat, g3, u2, w2, skip)
    except Exception as exc:
        raise StepError(2, exc) from exc
    diag += [("2", "band_fraction", metrics.db(inside)), ("2", "fit_nmse", s2.nmse_db),
             ("2", "delay", s2.delay)]

    try:
        u3 = delayed_pilot(x3, s2.delay, pad, plan.x2_period)
        alpha, g_hat, h_hat = step3_estimate_h(
            s1.r_hat, g1, u3, w3, plan.taps_h, skip, plan.ridge,
            g3 if plan.alpha_method == "joint" else None,
        )
    except Exception as exc:
        raise StepError(3, exc) from exc
    return WhEstimate(s1.r_hat, s2.g1_direct, g1, g3, gamma1_prime, alpha, g_hat, h_hat,
                      s2.delay, diag)


def _negligible(part, total, rtol=1e-9):
    return float(np.linalg.norm(part)) <= rtol * float(np.linalg.norm(total))


def transmit(model, x, seed):
    return model.forward(x, seed)[2]


def run_full_pipeline(model, plan=None, seed=0):
    """Synthesize the three captures from ``model`` and identify it.

    Each capture gets independent noise from a child of ``seed``.
    """
    plan = plan or PilotPlan()
    seeds = np.random.SeedSequence(seed).spawn(3)
    x1, x2, x3 = (plan.padded(plan.x1()), plan.padded(plan.x2()), plan.padded(plan.x3()))
    w1, w2, w3 = (transmit(model, x, np.random.default_rng(s)) for x, s in zip((x1, x2, x3), seeds))
    return identify(x1, w1, x2, w2, x3, w3, plan)
