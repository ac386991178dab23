"""Experiment configuration read from TOML.

The schema is documented in ``docs/config.md``. Relative paths are taken
relative to the configuration file.
"""

import dataclasses
import os
import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import channel
from .errors import ParameterError
from .estimator import PilotPlan

_AMPLIFIERS = ("rapp", "polynomial", "linear")
_CAPTURES = ("x1", "w1", "x2", "w2", "x3", "w3")


@dataclass
class ChannelConfig:
    filters: str = "reference"
    h: str = None
    g: str = None
    amplifier: str = "rapp"
    gain: float = 1.0
    saturation: float = 10.0
    smoothness: float = 3.0
    gamma: list = None
    snr_db: float = 20.0
    noise_variance: float = None

    def amplifier_model(self):
        if self.amplifier == "rapp":
            return channel.RappAmplifier(self.gain, self.saturation, self.smoothness)
        if self.amplifier == "linear":
            return channel.PolynomialAmplifier({1: self.gain})
        if not self.gamma:
            raise ParameterError("channel.gamma is required for a polynomial amplifier")
        return channel.PolynomialAmplifier({2 * i + 1: c for i, c in enumerate(self.gamma)})

    def filters_taps(self):
        if self.filters == "reference":
            return channel.reference_filters()
        if self.filters != "files" or not (self.h and self.g):
            raise ParameterError("channel.filters must be 'reference' or 'files' with h and g paths")
        return channel.load_filter_csv(self.h), channel.load_filter_csv(self.g)


@dataclass
class VolterraConfig:
    l1: int = 6
    l2: int = 6
    ratios: list = field(default_factory=lambda: [2.0, 5.0, 10.0, 20.0, 50.0])
    snr_db: float = 20.0
    ridge: float = None


@dataclass
class SweepConfig:
    experiment: str = "backoff"
    values: list = field(default_factory=lambda: [0.0, 3.0, 6.0, 9.0, 11.0, 14.0])
    snr_db: float = 20.0
    n: int = 8000


@dataclass
class ExperimentConfig:
    seeds: int = 4
    target_nmse_db: float = -30.0
    signal_format: str = "csv"
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    pilot: PilotPlan = field(default_factory=PilotPlan)
    capture: dict = None
    volterra: VolterraConfig = field(default_factory=VolterraConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def __post_init__(self):
        if int(self.seeds) < 1:
            raise ParameterError("seeds must be >= 1")
        if self.signal_format not in ("csv", "bin"):
            raise ParameterError("signal_format must be 'csv' or 'bin'")
        if self.channel.amplifier not in _AMPLIFIERS:
            raise ParameterError(f"channel.amplifier must be one of {_AMPLIFIERS}")

    def model(self):
        """Ground-truth channel with noise set from ``noise_variance`` or ``snr_db`` on x2."""
        h, g = self.channel.filters_taps()
        model = channel.WhModel(h, self.channel.amplifier_model(), g)
        if self.channel.noise_variance is not None:
            return model.with_noise(self.channel.noise_variance)
        x2 = self.pilot.padded(self.pilot.x2())
        return model.with_noise(channel.noise_for_snr(model, x2, self.channel.snr_db))


def _build(cls, table, section):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(table) - names
    if unknown:
        raise ParameterError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    try:
        return cls(**table)
    except TypeError as exc:
        raise ParameterError(f"[{section}]: {exc}") from exc


def _resolve(base, path):
    if path is None or os.path.isabs(path):
        return path
    return os.path.join(base, path)


def from_dict(data, base="."):
    data = dict(data)
    sections = {}
    for name, cls in (("channel", ChannelConfig), ("volterra", VolterraConfig), ("sweep", SweepConfig)):
        sections[name] = _build(cls, data.pop(name, {}), name)
    sections["pilot"] = _build(PilotPlan, data.pop("pilot", {}), "pilot")
    capture = data.pop("capture", None)
    if capture is not None:
        missing = [k for k in _CAPTURES if k not in capture]
        if missing or set(capture) - set(_CAPTURES):
            raise ParameterError(f"[capture] needs exactly the keys {', '.join(_CAPTURES)}")
        capture = {k: _resolve(base, v) for k, v in capture.items()}
        for path in capture.values():
            if not os.path.exists(path):
                raise FileNotFoundError(path)
    ch = sections["channel"]
    ch.h, ch.g = _resolve(base, ch.h), _resolve(base, ch.g)
    for path in (ch.h, ch.g):
        if path is not None and not os.path.exists(path):
            raise FileNotFoundError(path)
    return _build(ExperimentConfig, {**data, **sections, "capture": capture}, "top level")


def load(path=None):
    """Read a TOML file; ``None`` gives the defaults (reference preset)."""
    if path is None:
        return ExperimentConfig()
    with open(path, "rb") as f:
        try:
            data = tomllib.load(f)
        except tomllib.TOMLDecodeError as exc:
            raise ParameterError(f"{path}: {exc}") from exc
    return from_dict(data, os.path.dirname(os.path.abspath(path)))


def load_signal(path):
    from . import signals

    if path.endswith(".bin"):
        return signals.load_signal_bin(path)
    return signals.load_signal_csv(path)


def load_captures(cfg):
    return {k: np.asarray(load_signal(p)) for k, p in cfg.capture.items()}
