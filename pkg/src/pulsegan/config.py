"""Run configuration: flat ``section.key = value`` text files.

Every key has a documented default; an empty file yields a complete
configuration. Unknown keys, malformed values and constraint violations
raise :class:`ConfigError` naming the key.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .losses import LossWeights
from .models import NetPlan
from .synth import FAMILIES
from .training import MODES, TrainConfig


def _int(text):
    return int(text)


def _float(text):
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _ints(text):
    return tuple(int(t) for t in re.split(r"[,\s]+", text.strip()) if t)


def _strs(text):
    return tuple(t for t in re.split(r"[,\s]+", text.strip()) if t)


def _positive(v):
    return None if v > 0 else "must be > 0"


def _non_negative(v):
    return None if v >= 0 else "must be >= 0"


def _at_least(n):
    return lambda v: None if v >= n else f"must be >= {n}"


def _open_unit(v):
    return None if 0 < v < 1 else "must lie strictly between 0 and 1"


def _one_of(choices):
    return lambda v: None if v in choices else f"must be one of {', '.join(choices)}"


def _subset_of(choices):
    def check(v):
        if not v:
            return "must list at least one entry"
        bad = [x for x in v if x not in choices]
        return f"unknown entries {bad}; choose from {', '.join(choices)}" if bad else None
    return check


def _all_positive(v):
    return None if v and all(x > 0 for x in v) else "must be a non-empty list of positive integers"


@dataclass(frozen=True)
class _Field:
    parse: object
    default: object
    check: object = None
    doc: str = ""


_PLAN = NetPlan()

SCHEMA = {
    "run.seed": _Field(_int, 0, _non_negative, "master seed (overridden by --seed)"),
    "signal.band_lo": _Field(_float, 0.7, _positive, "pass-band lower edge, Hz"),
    "signal.band_hi": _Field(_float, 4.0, _positive, "pass-band upper edge, Hz"),
    "signal.detrend_sec": _Field(_float, 1.0, _positive, "moving-average detrend window, s"),
    "net.window_len": _Field(_int, _PLAN.window_len, _at_least(2), "samples per window"),
    "net.padded_len": _Field(_int, _PLAN.padded_len, _at_least(2), "zero-padded length"),
    "net.kernel": _Field(_int, _PLAN.kernel, _at_least(1), "odd kernel width"),
    "net.stride": _Field(_int, _PLAN.stride, _at_least(1)),
    "net.enc_channels": _Field(_ints, _PLAN.enc_channels, _all_positive),
    "net.disc_channels": _Field(_ints, _PLAN.disc_channels, _all_positive),
    "net.prelu_init": _Field(_float, _PLAN.prelu_init),
    "net.leaky_slope": _Field(_float, _PLAN.leaky_slope, _non_negative),
    "loss.lambda": _Field(_float, 10.0, _non_negative, "waveform L1 weight"),
    "loss.beta": _Field(_float, 10.0, _non_negative, "spectrum L1 weight"),
    "train.epochs": _Field(_int, 30, _at_least(1)),
    "train.batch_size": _Field(_int, 8, _at_least(1)),
    "train.lr": _Field(_float, 1e-3, _positive, "initial learning rate"),
    "train.factor": _Field(_float, 0.1, _open_unit, "plateau LR reduction factor"),
    "train.patience": _Field(_int, 3, _at_least(1), "plateau patience, epochs"),
    "train.modes": _Field(_strs, MODES, _subset_of(MODES), "models trained by `train`"),
    "train.adam_beta1": _Field(_float, 0.9, _open_unit),
    "train.adam_beta2": _Field(_float, 0.999, _open_unit),
    "train.adam_eps": _Field(_float, 1e-8, _positive),
    "corpus.protocol": _Field(str, "cross", _one_of(("within", "cross"))),
    "corpus.test_family": _Field(str, "broad", _one_of(FAMILIES), "held-out family (cross)"),
    "corpus.families": _Field(_strs, FAMILIES, _subset_of(FAMILIES)),
    "corpus.subjects_per_family": _Field(_ints, (6, 10, 8), _all_positive,
                                         "one count per entry of corpus.families"),
    "corpus.duration_sec": _Field(_float, 120.0, _at_least(30.0)),
    "corpus.noise_level": _Field(_float, 2.0, _non_negative, "scales every corruption term"),
    "corpus.rgb_snr_db": _Field(_float, 15.0, None, "per-channel camera noise SNR"),
    "gradcheck.seeds": _Field(_int, 20, _at_least(1)),
    "gradcheck.tolerance": _Field(_float, 1e-4, _positive),
    "gradcheck.step": _Field(_float, 1e-5, _positive, "finite-difference step h"),
}

FPS = 30.0


def _render(v):
    if isinstance(v, tuple):
        return ", ".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class RunConfig:
    """Validated, fully materialized configuration (key -> typed value)."""

    values: tuple  # (key, value) pairs in schema order

    def __getitem__(self, key):
        return dict(self.values)[key]

    def as_dict(self):
        return dict(self.values)

    @property
    def seed(self):
        return self["run.seed"]

    @property
    def band(self):
        return (self["signal.band_lo"], self["signal.band_hi"])

    @property
    def plan(self) -> NetPlan:
        d = self.as_dict()
        return NetPlan(window_len=d["net.window_len"], padded_len=d["net.padded_len"],
                       kernel=d["net.kernel"], stride=d["net.stride"],
                       enc_channels=d["net.enc_channels"], disc_channels=d["net.disc_channels"],
                       prelu_init=d["net.prelu_init"], leaky_slope=d["net.leaky_slope"])

    def train_config(self, mode) -> TrainConfig:
        d = self.as_dict()
        return TrainConfig(epochs=d["train.epochs"], batch_size=d["train.batch_size"],
                           lr=d["train.lr"], factor=d["train.factor"],
                           patience=d["train.patience"],
                           weights=LossWeights(d["loss.lambda"], d["loss.beta"]),
                           seed=self.seed, mode=mode, plan=self.plan,
                           adam_beta1=d["train.adam_beta1"], adam_beta2=d["train.adam_beta2"],
                           adam_eps=d["train.adam_eps"])

    def with_seed(self, seed):
        return build_config({**self.as_dict(), "run.seed": seed})

    def dumps(self):
        return "".join(f"{k} = {_render(v)}\n" for k, v in self.values)


def _cross_checks(d):
    lo, hi = d["signal.band_lo"], d["signal.band_hi"]
    if not lo < hi:
        raise ConfigError("signal.band_hi", f"must exceed signal.band_lo ({lo})")
    if hi >= FPS / 2:
        raise ConfigError("signal.band_hi", f"must be below the Nyquist rate {FPS / 2} Hz")
    if d["net.window_len"] != int(round(10.0 * FPS)):
        raise ConfigError("net.window_len", "must equal 10 s at 30 fps (300 samples)")
    try:
        NetPlan(window_len=d["net.window_len"], padded_len=d["net.padded_len"],
                kernel=d["net.kernel"], stride=d["net.stride"], enc_channels=d["net.enc_channels"],
                disc_channels=d["net.disc_channels"])
    except ValueError as exc:
        key = "net.kernel" if "kernel" in str(exc) else "net.padded_len"
        raise ConfigError(key, str(exc)) from None
    fams, counts = d["corpus.families"], d["corpus.subjects_per_family"]
    if len(set(fams)) != len(fams):
        raise ConfigError("corpus.families", "duplicate family")
    if len(counts) != len(fams):
        raise ConfigError("corpus.subjects_per_family",
                          f"needs {len(fams)} counts, one per corpus.families entry")
    if d["corpus.protocol"] == "cross":
        if d["corpus.test_family"] not in fams:
            raise ConfigError("corpus.test_family", "must be one of corpus.families")
        if len(fams) < 2:
            raise ConfigError("corpus.families", "cross protocol needs at least two families")
    elif sum(counts) < 2:
        raise ConfigError("corpus.subjects_per_family", "need at least two subjects")


def build_config(raw: dict) -> RunConfig:
    """Validate a key -> value mapping (strings or typed values) into a RunConfig."""
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key")
    values = {}
    for key, field in SCHEMA.items():
        if key in raw:
            v = raw[key]
            if isinstance(v, str):
                try:
                    v = field.parse(v)
                except ValueError as exc:
                    raise ConfigError(key, f"cannot parse {raw[key]!r}: {exc}") from None
        else:
            v = field.default
        if field.check is not None:
            msg = field.check(v)
            if msg:
                raise ConfigError(key, f"{msg} (got {_render(v)})")
        values[key] = v
    _cross_checks(values)
    return RunConfig(tuple(values.items()))


_LINE = re.compile(r"^\s*([A-Za-z_][\w]*\.[A-Za-z_][\w]*)\s*=\s*(.*?)\s*$")


def parse_config_text(text, source="<config>") -> RunConfig:
    raw = {}
    for n, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        m = _LINE.match(stripped)
        if not m:
            raise ConfigError(f"{source}:{n}", f"expected `section.key = value`, got {line!r}")
        key, value = m.groups()
        if key in raw:
            raise ConfigError(key, "given more than once")
        raw[key] = value
    return build_config(raw)


def parse_config(path=None) -> RunConfig:
    if path is None:
        return build_config({})
    return parse_config_text(Path(path).read_text(), str(path))


def default_config() -> RunConfig:
    return build_config({})


def bundled_config_path(name):
    """Path of a configuration shipped with the package (e.g. ``smoke``), or None."""
    from importlib.resources import files
    p = files("pulsegan").joinpath("data", f"{name}.cfg")
    return Path(str(p)) if p.is_file() else None
