"""Monte Carlo experiments behind the command line and the acceptance tests.

Every function takes explicit seeds and returns plain dicts or lists of
dicts, so results can be tabulated, compared and rerun bit for bit.
"""

import math

import numpy as np

from . import channel, estimator, lsq, metrics, signals, volterra


def rng_for(seed, *key):
    """Generator for ``seed`` and a tuple of non-negative integer labels."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key)]))


def reference_model(amplifier=None, noise_variance=0.0, filters=None):
    h, g = filters if filters is not None else channel.reference_filters()
    return channel.WhModel(h, amplifier or channel.RappAmplifier(), g, noise_variance)


def reference_polynomial(plan=None, order=3, rapp=None):
    """Polynomial the estimate is scored against: a fit of Rapp up to x2's peak."""
    plan = plan or estimator.PilotPlan()
    return channel.fit_rapp(rapp or channel.RappAmplifier(), plan.x2_peak, order)[0]


def _noisy(clean, snr_db, rng):
    var = metrics.undb(-snr_db) * float(np.mean(clean * clean))
    return clean + rng.normal(0.0, math.sqrt(var), clean.size)


# Linear estimation -----------------------------------------------------------

def q_white_noise(n, snr_db, seeds, taps=None):
    """Q of the least-squares ``r`` from a white-noise pilot through the linear channel."""
    r = reference_model().r
    taps = taps or r.size
    out = []
    for s in seeds:
        rng = rng_for(s, 3)
        x = rng.standard_normal(n)
        w = _noisy(channel.convolve(r, x), snr_db, rng)
        est = lsq.solve(lsq.linear_design(x, taps), w).coef
        out.append(metrics.q_value(r, est))
    return {"q": out, "predicted": metrics.predicted_q(n, taps, snr_db)}


def nmse_vs_q(points, seeds, validation_length=20000):
    """NMSE on fresh white noise against Q of the same estimate, per ``(n, snr_db)``."""
    r = reference_model().r
    rows = []
    for n, snr in points:
        for s in seeds:
            rng = rng_for(s, 4, n, int(snr * 10))
            x = rng.standard_normal(n)
            w = _noisy(channel.convolve(r, x), snr, rng)
            est = lsq.solve(lsq.linear_design(x, r.size), w).coef
            xv = rng.standard_normal(validation_length)
            rows.append({
                "n": n, "snr": snr, "seed": s,
                "q": metrics.q_value(r, est),
                "nmse": metrics.nmse(channel.convolve(r, xv), channel.convolve(est, xv)),
            })
    return rows


def backoff_sweep(backoffs_db, snr_db, n, seeds, plan=None):
    """Step-1 Q against power back-off from saturation, Rapp amplifier.

    Noise is set per record for ``snr_db`` at the channel output.
    """
    plan = plan or estimator.PilotPlan()
    model = reference_model()
    period = signals.multisine(plan.x1_spec)
    rows = []
    for bo in backoffs_db:
        power = plan.p_in_sat * metrics.undb(-bo)
        x = plan.padded(estimator._tile(period * math.sqrt(power / signals.mean_power(period)), n))
        clean = model.noiseless(x)
        for s in seeds:
            w = _noisy(clean, snr_db, rng_for(s, 5, int(bo * 10)))
            res = estimator.step1_estimate_r(x, w, plan.taps_r, plan.pad)
            rows.append({
                "backoff": bo, "seed": s,
                "q": metrics.q_value(model.r, res.r_hat),
                "predicted": metrics.predicted_q(n, plan.taps_r, snr_db),
            })
    return rows


def polynomial_fits(ranges=((3, 20.0), (3, 16.0), (5, 22.0), (5, 20.0))):
    amp = channel.RappAmplifier()
    return [
        {"order": k, "max_amplitude": a, "nmse": channel.fit_rapp(amp, a, k)[1]}
        for k, a in ranges
    ]


# Step 2 with a known amplifier input ----------------------------------------

def step2_known_input(snr_db, seeds, plan=None, amplifier=None):
    """Hammerstein estimate of ``g`` when ``u = h * x2`` is known exactly.

    The amplifier is the K=3 polynomial fitted to Rapp, so the model class
    is exact and only the band limitation of ``u`` costs accuracy.
    """
    plan = plan or estimator.PilotPlan()
    amp = amplifier or reference_polynomial(plan)
    model = reference_model(amp)
    x2 = plan.padded(plan.x2())
    u, y, clean = channel.wh_forward(model, x2)
    g = model.g
    skip = plan.pad + plan.taps_r + 1
    energy = metrics.db(np.sum((amp.gamma(3) * u[skip:] ** 3) ** 2) / np.sum(y[skip:] ** 2))
    rows = []
    for s in seeds:
        w = _noisy(clean, snr_db, rng_for(s, 7, int(snr_db * 10)))
        X, t = lsq.hammerstein_design(u, plan.taps_g, 3)[skip:], w[skip:]
        coef = lsq.solve(X, t).coef
        g1d, g3 = coef[:plan.taps_g], coef[plan.taps_g:]
        _, g1 = estimator.improve_g1(model.r, g3, u, w, skip)
        rows.append({
            "seed": s,
            "q_g3": metrics.q_prime(amp.gamma(3) * g, g3, g),
            "q_g1_direct": metrics.q_prime(amp.gamma(1) * g, g1d, g),
            "q_g1": metrics.q_prime(amp.gamma(1) * g, g1, g),
            "cubic_energy": energy,
        })
    return rows


# Full pipeline --------------------------------------------------------------

def pipeline_model(snr_db, plan=None, amplifier=None, filters=None):
    """Reference channel (or ``filters``) with noise set for ``snr_db`` on the x2 record."""
    plan = plan or estimator.PilotPlan()
    model = reference_model(amplifier, filters=filters)
    return model.with_noise(channel.noise_for_snr(model, plan.padded(plan.x2()), snr_db))


def score_estimate(est, model, plan=None):
    """Q and Q' figures of an estimate against the true channel."""
    plan = plan or estimator.PilotPlan()
    ref = model.amplifier
    if not isinstance(ref, channel.PolynomialAmplifier):
        ref = reference_polynomial(plan, rapp=ref)
    g, h = model.g, model.h
    return {
        "q_r": metrics.q_value(model.r, est.r_hat),
        "q_g3": metrics.q_prime(ref.gamma(3) * g, est.g3, g),
        "q_g1_direct": metrics.q_prime(ref.gamma(1) * g, est.g1_direct, g),
        "q_g1": metrics.q_prime(ref.gamma(1) * g, est.g1, g),
        "q_g": metrics.q_prime(model.amplifier.small_signal_gain * g, est.g_hat, g),
        "q_h": metrics.q_prime(h, est.h_hat, h),
        "q_r_prime": metrics.q_value(model.r, est.r_prime),
        "delay": est.delay,
    }


def validation_input(backoff_db, length, rng, plan=None):
    """White noise with the mean power of a Schroeder multisine at ``backoff_db`` below saturation peak."""
    plan = plan or estimator.PilotPlan()
    peak = math.sqrt(plan.p_in_sat) * 10.0 ** (-backoff_db / 20.0)
    reference = signals.scale_to_peak(signals.multisine(plan.x1_spec), peak)
    return signals.matched_white_noise(reference, length, rng)


def validate(est, model, backoff_db, seed, length=20000, plan=None):
    """NMSE' of the nonlinear estimate and of its linear surrogate ``h_hat * g_hat``."""
    x = validation_input(backoff_db, length, rng_for(seed, 9, int(backoff_db * 10)), plan)
    truth = model.noiseless(x)
    return {
        "nmse_nonlinear": metrics.nmse_prime(truth, est.predict(x), model.g),
        "nmse_linear": metrics.nmse_prime(truth, est.predict_linear(x), model.g),
    }


def end_to_end(snr_db, seeds, backoffs_db=(5.0, 0.0), plan=None, amplifier=None, filters=None):
    plan = plan or estimator.PilotPlan()
    model = pipeline_model(snr_db, plan, amplifier, filters)
    rows = []
    for s in seeds:
        est = estimator.run_full_pipeline(model, plan, s)
        rows.append({"snr": snr_db, "seed": s, **evaluate(est, model, s, backoffs_db, plan)})
    return rows


def evaluate(est, model, seed, backoffs_db=(5.0, 0.0), plan=None):
    """Scores plus validation NMSE' at each back-off, keyed ``nmse_<model>_<backoff>``."""
    row = score_estimate(est, model, plan)
    for bo in backoffs_db:
        for name, value in validate(est, model, bo, seed, plan=plan).items():
            row[f"{name}_{bo:g}"] = value
    return row


# Volterra baseline ----------------------------------------------------------

def random_polynomial_model(L1, L2, rng, gamma3=-0.05):
    h = rng.standard_normal(L1)
    g = rng.standard_normal(L2)
    h /= np.linalg.norm(h)
    g /= np.linalg.norm(g)
    return channel.WhModel(h, channel.PolynomialAmplifier({1: 1.0, 3: gamma3}), g)


def volterra_sweep(L1, L2, ratios, snr_db, seeds, validation_length=5000):
    """NMSE of the reduced-kernel estimate against ``-(10 log10(N/P) + SNR)``.

    Uses random K=3 polynomial W-H channels, so the Volterra model is exact.
    """
    count = len(volterra.enumerate_reduced_indices(L1, L2))
    rows = []
    for ratio in ratios:
        n = int(round(ratio * count))
        for s in seeds:
            rng = rng_for(s, 11, L1, L2, int(ratio * 100))
            model = random_polynomial_model(L1, L2, rng)
            x = rng.standard_normal(n)
            w = _noisy(model.noiseless(x), snr_db, rng)
            est = volterra.estimate_volterra(x, w, L1, L2)
            xv = rng.standard_normal(validation_length)
            rows.append({
                "ratio": ratio, "n": n, "count": count, "seed": s,
                "nmse": metrics.nmse(model.noiseless(xv), est.predict(xv)),
                "predicted": -metrics.predicted_q(n, count, snr_db),
            })
    return rows
