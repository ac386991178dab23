"""Pilot signal generation and characterization.

Signals are plain 1-D float arrays with an implicit sample rate of 1
(normalized frequency). :class:`Signal` only exists at the file boundary,
where the sample rate travels with the samples.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateError, ParameterError

_MAGIC = b"WHSG"
_VERSION = 1


@dataclass(frozen=True)
class MultisineSpec:
    """Sum of equal-amplitude cosines at consecutive harmonics of ``fundamental``.

    Harmonics ``first_harmonic, ..., first_harmonic + num_harmonics - 1`` are
    used. ``first_harmonic=1`` gives the textbook multisine.
    """

    num_harmonics: int
    fundamental: float
    phases: np.ndarray
    length: int
    first_harmonic: int = 1

    def __post_init__(self):
        object.__setattr__(self, "phases", np.asarray(self.phases, dtype=float))
        if self.num_harmonics < 1:
            raise ParameterError("num_harmonics must be >= 1")
        if self.length < 1:
            raise ParameterError("length must be >= 1")
        if self.first_harmonic < 1:
            raise ParameterError("first_harmonic must be >= 1")
        if not 0.0 < self.fundamental < 0.5:
            raise ParameterError("fundamental must lie in (0, 1/2)")
        if self.top_frequency > 0.5 + 1e-12:
            raise ParameterError(
                f"highest harmonic {self.top_frequency:g} exceeds Nyquist (1/2)"
            )
        if self.phases.shape != (self.num_harmonics,):
            raise ParameterError("phases must have one entry per harmonic")

    @property
    def harmonics(self):
        return np.arange(self.num_harmonics) + self.first_harmonic

    @property
    def top_frequency(self):
        return (self.first_harmonic + self.num_harmonics - 1) * self.fundamental

    @property
    def band(self):
        return self.first_harmonic * self.fundamental, self.top_frequency


def multisine(spec):
    """Evaluate ``sum_k cos(2 pi f1 k n + theta_k)`` for ``n = 0..N-1``."""
    n = np.arange(spec.length)[:, None]
    arg = 2 * np.pi * spec.fundamental * spec.harmonics[None, :] * n + spec.phases
    return np.cos(arg).sum(axis=1)


def schroeder_phases(num_harmonics):
    """Phases ``pi * floor(k^2 / 2M) mod 2 pi`` for ``k = 1..M``; each is 0 or pi."""
    M = int(num_harmonics)
    if M < 1:
        raise ParameterError("num_harmonics must be >= 1")
    k = np.arange(1, M + 1, dtype=np.int64)
    return np.pi * ((k * k // (2 * M)) % 2).astype(float)


def par(x):
    """Peak-to-average power ratio ``max|x|^2 / mean(x^2)`` (linear)."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ParameterError("empty signal")
    power = np.mean(x * x)
    if power == 0.0:
        raise DegenerateError("PAR of an all-zero signal is undefined")
    return float(np.max(x * x) / power)


def par_db(x):
    return 10.0 * np.log10(par(x))


def mean_power(x):
    x = np.asarray(x, dtype=float)
    return float(np.mean(x * x))


def scale_to_peak(x, peak):
    """Scale ``x`` so that ``max|x| == peak``."""
    top = np.max(np.abs(x))
    if top == 0.0:
        raise DegenerateError("cannot scale an all-zero signal")
    return x * (peak / top)


def _truncated_par(phases, cos_table, sin_table, first):
    # x^j for every j at once: cumulative sum over harmonics. phases: (P, M).
    c = np.cos(phases)[:, None, :]
    s = np.sin(phases)[:, None, :]
    partial = np.cumsum(cos_table[None] * c - sin_table[None] * s, axis=2)
    partial = partial[:, :, first - 1:]
    peak = np.max(partial * partial, axis=1)
    power = np.mean(partial * partial, axis=1)
    return np.max(peak / power, axis=1)


@dataclass
class PhaseSearchResult:
    phases: np.ndarray
    objective: float
    seed_objective: float
    evaluations: int
    trace: list = field(default_factory=list)


def minmax_phase_search(
    num_harmonics,
    min_harmonics,
    fundamental,
    length,
    budget,
    seed=0,
    population=32,
    mutation_sigma=0.3,
    elitism=2,
    tournament=2,
):
    """Evolutionary search for phases minimizing the worst truncated-multisine PAR.

    The objective is ``max_{j in [M0, M]} PAR(x^j)`` where ``x^j`` keeps the
    first ``j`` harmonics. The population is seeded with Schroeder phases,
    so the returned objective is never worse than the seed's.

    Parameters
    ----------
    num_harmonics, min_harmonics : int
        ``M`` and ``M0`` with ``1 <= M0 <= M``.
    fundamental : float
        ``f1`` in cycles/sample.
    length : int
        Number of samples the PAR is evaluated over (usually one period).
    budget : int
        Maximum number of objective evaluations. ``0`` returns the seed.
    seed : int
        Seed of the search's random generator.

    Returns
    -------
    PhaseSearchResult
    """
    M, M0 = int(num_harmonics), int(min_harmonics)
    if not 1 <= M0 <= M:
        raise ParameterError("need 1 <= min_harmonics <= num_harmonics")
    MultisineSpec(M, fundamental, np.zeros(M), length)  # validates the grid
    n = np.arange(length)[:, None]
    arg = 2 * np.pi * fundamental * np.arange(1, M + 1)[None, :] * n
    cos_table, sin_table = np.cos(arg), np.sin(arg)

    def evaluate(pop):
        return _truncated_par(pop, cos_table, sin_table, M0)

    start = schroeder_phases(M)
    seed_obj = float(evaluate(start[None])[0])
    if budget <= 0:
        return PhaseSearchResult(start, seed_obj, seed_obj, 0, [seed_obj])

    rng = np.random.default_rng(seed)
    two_pi = 2 * np.pi
    pop = start + rng.normal(0.0, mutation_sigma, size=(population, M))
    pop[0] = start
    pop = pop[: min(population, budget)] % two_pi
    fit = evaluate(pop)
    used = len(pop)
    trace = [float(fit.min())]

    while used < budget:
        order = np.argsort(fit, kind="stable")
        elite = pop[order[:elitism]]
        n_child = min(population - len(elite), budget - used)
        if n_child <= 0:
            break
        contenders = rng.integers(0, len(pop), size=(2, n_child, tournament))
        winners = []
        for side in contenders:
            best = np.argmin(fit[side], axis=1)
            winners.append(side[np.arange(n_child), best])
        mask = rng.random((n_child, M)) < 0.5
        children = np.where(mask, pop[winners[0]], pop[winners[1]])
        children = (children + rng.normal(0.0, mutation_sigma, children.shape)) % two_pi
        child_fit = evaluate(children)
        used += n_child
        pop = np.vstack([elite, children])
        fit = np.concatenate([fit[order[:elitism]], child_fit])
        trace.append(float(fit.min()))

    best = int(np.argmin(fit))
    if fit[best] >= seed_obj:
        return PhaseSearchResult(start, seed_obj, seed_obj, used, trace)
    return PhaseSearchResult(pop[best].copy(), float(fit[best]), seed_obj, used, trace)


def matched_white_noise(reference, length, seed):
    """White Gaussian noise whose power equals the mean power of ``reference``."""
    power = mean_power(reference)
    rng = np.random.default_rng(seed)
    return rng.standard_normal(int(length)) * np.sqrt(power)


def occupied_bandwidth(x, threshold_db=-20.0):
    """Width of the periodogram support within ``threshold_db`` of its peak.

    The support runs from the lowest to the highest bin in ``[0, 1/2]`` whose
    power is no more than ``|threshold_db|`` below the peak, plus one bin.
    Returned in normalized frequency, capped at 1/2.
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ParameterError("empty signal")
    spectrum = np.abs(np.fft.rfft(x)) ** 2
    peak = spectrum.max()
    if peak == 0.0:
        return 0.0
    keep = np.flatnonzero(spectrum >= peak * 10.0 ** (-abs(threshold_db) / 10.0))
    width = (keep[-1] - keep[0] + 1) / x.size
    return float(min(width, 0.5))


@dataclass
class Signal:
    """Samples plus sample rate, as stored on disk."""

    samples: np.ndarray
    sample_rate: float = 1.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).ravel()
        if self.samples.size < 1:
            raise ParameterError("a signal needs at least one sample")
        if not np.all(np.isfinite(self.samples)):
            raise ParameterError("signal samples must be finite")
        if not self.sample_rate > 0:
            raise ParameterError("sample_rate must be positive")


def save_signal_csv(path, x):
    samples = Signal(x).samples
    with open(path, "w") as f:
        f.write("sample\n")
        for v in samples:
            f.write(f"{float(v)!r}\n")


def load_signal_csv(path):
    with open(path) as f:
        header = f.readline().strip()
        if header != "sample":
            raise ParameterError(f"{path}: expected header 'sample', got {header!r}")
        values = [float(line) for line in f if line.strip()]
    return Signal(values).samples


def save_signal_bin(path, x):
    """Write ``WHSG`` magic, u32 version, u64 length, then little-endian float64."""
    samples = Signal(x).samples
    with open(path, "wb") as f:
        f.write(_MAGIC + struct.pack("<IQ", _VERSION, samples.size))
        f.write(samples.astype("<f8").tobytes())


def load_signal_bin(path):
    with open(path, "rb") as f:
        header = f.read(16)
        if len(header) != 16 or header[:4] != _MAGIC:
            raise ParameterError(f"{path}: not a WHSG signal file")
        version, length = struct.unpack("<IQ", header[4:])
        if version != _VERSION:
            raise ParameterError(f"{path}: unsupported version {version}")
        data = np.frombuffer(f.read(8 * length), dtype="<f8")
    if data.size != length:
        raise ParameterError(f"{path}: truncated, expected {length} samples")
    return data.astype(float)
