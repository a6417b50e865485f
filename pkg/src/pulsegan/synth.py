"""Synthetic paired corpora: clean reference PPG, RGB skin traces and rough
CHROM pulses with exact ground-truth beat times.

Per subject: a two-Gaussian beat template is laid along an HR trajectory
at the oximeter rate, resampled to the camera frame rate, corrupted
(white + pink noise, baseline wander, motion spikes), and used to modulate
three colour channels. Windows of the RGB trace go through
:func:`pulsegan.chrom.chrom_pulse` to become the rough input; the matching
clean PPG window is the reference.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import dsp, io
from .chrom import RgbTrace, chrom_pulse
from .dsp import SampledSignal

SYSTOLIC_WIDTH = 0.09
DICROTIC_AMP = 0.35
DICROTIC_DELAY = 0.35   # fraction of the RR interval
DICROTIC_WIDTH = 0.12
WALK_STEP_BPM = 1.5
HR_LIMITS = (40.0, 240.0)
WINDOW_SEC = 10.0
STEPS = {"within": 0.5, "cross": 1.0}


@dataclass(frozen=True)
class NoiseProfile:
    white_sigma: float = 0.0
    pink_sigma: float = 0.0
    wander_amp: float = 0.0
    wander_hz: float = 0.15
    spike_rate_hz: float = 0.0
    spike_amp: float = 0.0
    spike_width_sec: float = 0.12

    def is_zero(self):
        return (self.white_sigma == 0 and self.pink_sigma == 0 and self.wander_amp == 0
                and (self.spike_rate_hz == 0 or self.spike_amp == 0))


@dataclass(frozen=True)
class RgbProfile:
    """Skin reflectance model. Strengths are relative pulsatile modulation
    depths per channel (green strongest); ``snr_db`` sets per-channel white
    sensor noise against each channel's pulsatile component."""

    baseline: tuple = (170.0, 120.0, 95.0)
    strength: tuple = (0.0033, 0.0077, 0.0053)
    illum_amp: float = 0.0
    illum_hz: float = 0.05
    snr_db: float = float("inf")


@dataclass(frozen=True)
class SynthSubjectConfig:
    subject_id: int
    duration_sec: float = 120.0
    hr_kind: str = "constant"        # constant | ramp | walk
    hr_bpm: float = 72.0             # constant value, ramp start, walk start
    hr_end_bpm: float = None         # ramp end
    hr_low: float = 50.0             # walk bounds
    hr_high: float = 150.0
    noise: NoiseProfile = field(default_factory=NoiseProfile)
    rgb: RgbProfile = field(default_factory=RgbProfile)
    seed: int = 0
    family: str = "default"
    fps: float = 30.0
    ppg_rate_hz: float = 60.0

    def __post_init__(self):
        if self.duration_sec < 30:
            raise ValueError("duration_sec must be >= 30")
        if self.hr_kind not in ("constant", "ramp", "walk"):
            raise ValueError(f"unknown hr_kind {self.hr_kind!r}")
        lo, hi = HR_LIMITS
        vals = [self.hr_bpm]
        if self.hr_kind == "ramp":
            if self.hr_end_bpm is None:
                raise ValueError("ramp trajectory needs hr_end_bpm")
            vals.append(self.hr_end_bpm)
        if self.hr_kind == "walk":
            if not self.hr_low <= self.hr_bpm <= self.hr_high:
                raise ValueError("walk start must lie inside [hr_low, hr_high]")
            vals += [self.hr_low, self.hr_high]
        if any(not lo <= v <= hi for v in vals):
            raise ValueError(f"heart-rate bounds must lie inside [{lo}, {hi}] bpm")

    def streams(self):
        """Independent RNG streams (beats, corruption, rgb) for this subject."""
        ss = np.random.SeedSequence([int(self.seed), int(self.subject_id)])
        return [np.random.default_rng(s) for s in ss.spawn(3)]


def beat_times(cfg: SynthSubjectConfig, rng):
    """Systolic peak times (s) following the configured HR trajectory."""
    lo, hi = cfg.hr_low, cfg.hr_high
    hr = cfg.hr_bpm
    t = rng.uniform(0.0, 60.0 / hr)
    out = []
    while t < cfg.duration_sec:
        out.append(t)
        if cfg.hr_kind == "ramp":
            hr = cfg.hr_bpm + (cfg.hr_end_bpm - cfg.hr_bpm) * min(t / cfg.duration_sec, 1.0)
        elif cfg.hr_kind == "walk":
            hr += rng.uniform(-WALK_STEP_BPM, WALK_STEP_BPM)
            # reflect at the bounds
            if hr > hi:
                hr = 2 * hi - hr
            if hr < lo:
                hr = 2 * lo - hr
        t += 60.0 / hr
    return np.asarray(out)


def _gauss(t, center, width):
    return np.exp(-0.5 * ((t - center) / width) ** 2)


def render_beats(beats, n, rate):
    """Sum of systolic + dicrotic Gaussian pairs sampled at ``rate``."""
    t = np.arange(n) / rate
    x = np.zeros(n)
    rr = np.diff(beats)
    rr = np.append(rr, rr[-1] if rr.size else 1.0)
    reach = 5 * max(SYSTOLIC_WIDTH, DICROTIC_WIDTH)
    for tb, r in zip(beats, rr):
        lo = max(int((tb - reach) * rate), 0)
        hi = min(int((tb + DICROTIC_DELAY * r + reach) * rate) + 1, n)
        tt = t[lo:hi]
        x[lo:hi] += _gauss(tt, tb, SYSTOLIC_WIDTH) + \
            DICROTIC_AMP * _gauss(tt, tb + DICROTIC_DELAY * r, DICROTIC_WIDTH)
    return x


def synth_ppg(cfg: SynthSubjectConfig, rng=None):
    """Clean reference PPG at ``cfg.ppg_rate_hz`` plus exact beat times."""
    rng = rng if rng is not None else cfg.streams()[0]
    beats = beat_times(cfg, rng)
    n = int(round(cfg.duration_sec * cfg.ppg_rate_hz))
    raw = SampledSignal(render_beats(beats, n, cfg.ppg_rate_hz), cfg.ppg_rate_hz)
    return dsp.normalize01(dsp.detrend(raw)), beats


def pink_noise(n, rng, octaves=8):
    """Unit-variance pink-ish noise from summed held white-noise octaves."""
    x = np.zeros(n)
    for o in range(octaves):
        hold = 2 ** o
        vals = rng.standard_normal(n // hold + 1)
        x += np.repeat(vals, hold)[:n]
    x -= x.mean()
    sd = x.std()
    return x / sd if sd > 0 else x


def sigma_for_snr(clean: SampledSignal, snr_db):
    """White-noise sigma giving ``snr_db`` against the zero-mean clean signal."""
    c = clean.values - clean.values.mean()
    return float(np.sqrt(np.mean(c * c)) / 10 ** (snr_db / 20.0))


def measured_snr_db(clean, noise):
    c = np.asarray(clean) - np.mean(clean)
    pn = np.mean(np.asarray(noise) ** 2)
    return float("inf") if pn == 0 else float(10 * np.log10(np.mean(c * c) / pn))


def corruption_noise(n, rate, profile: NoiseProfile, rng):
    t = np.arange(n) / rate
    noise = np.zeros(n)
    # every component draws from the stream even when zero-weighted, so
    # toggling one component leaves the others' realisations unchanged
    white = rng.standard_normal(n)
    pink = pink_noise(n, rng)
    phase = rng.uniform(0, 2 * np.pi)
    n_spikes = rng.poisson(profile.spike_rate_hz * n / rate)
    centers = rng.uniform(0, n / rate, n_spikes)
    amps = rng.choice([-1.0, 1.0], n_spikes) * rng.uniform(0.5, 1.0, n_spikes)
    noise += profile.white_sigma * white + profile.pink_sigma * pink
    noise += profile.wander_amp * np.sin(2 * np.pi * profile.wander_hz * t + phase)
    if profile.spike_amp:
        for c, a in zip(centers, amps):
            noise += profile.spike_amp * a * _gauss(t, c, profile.spike_width_sec)
    return noise


def corrupt(clean: SampledSignal, profile: NoiseProfile, rng=None):
    """Add the profile's noise and re-normalize. Returns (signal, snr_db)."""
    rng = rng if rng is not None else np.random.default_rng(0)
    noise = corruption_noise(len(clean), clean.sample_rate_hz, profile, rng)
    snr = measured_snr_db(clean.values, noise)
    return dsp.normalize01(clean.with_values(clean.values + noise)), snr


def synth_rgb_from_ppg(ppg: SampledSignal, profile: RgbProfile = RgbProfile(), rng=None) -> RgbTrace:
    """Per-channel ``baseline * (1 - strength * pulse) * illumination + noise``.

    The blood-volume pulse lowers reflected intensity, hence the minus sign;
    with the standard chrominance projection this makes the extracted pulse
    positively correlated with the PPG.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    p = ppg.values - ppg.values.mean()
    t = ppg.times
    illum = 1.0 + profile.illum_amp * np.sin(2 * np.pi * profile.illum_hz * t + rng.uniform(0, 2 * np.pi))
    chans = []
    for base, k in zip(profile.baseline, profile.strength):
        c = base * (1.0 - k * p) * illum
        white = rng.standard_normal(p.size)
        if np.isfinite(profile.snr_db):
            sd = base * k * np.sqrt(np.mean(p * p)) / 10 ** (profile.snr_db / 20.0)
            c = c + sd * white
        chans.append(c)
    return RgbTrace(*chans, fps=ppg.sample_rate_hz)


# -- subjects, windows, corpora ----------------------------------------------

@dataclass(eq=False)
class SubjectRecord:
    cfg: SynthSubjectConfig
    ppg: SampledSignal          # reference at the oximeter rate
    beats: np.ndarray
    rgb: RgbTrace
    snr_db: float

    @property
    def ppg_at_fps(self):
        return dsp.resample_linear(self.ppg, self.cfg.fps)


def simulate_subject(cfg: SynthSubjectConfig) -> SubjectRecord:
    r_beats, r_corrupt, r_rgb = cfg.streams()
    ppg, beats = synth_ppg(cfg, r_beats)
    ref = dsp.resample_linear(ppg, cfg.fps)
    noisy, snr = corrupt(ref, cfg.noise, r_corrupt)
    rgb = synth_rgb_from_ppg(noisy, cfg.rgb, r_rgb)
    return SubjectRecord(cfg, ppg, beats, rgb, snr)


@dataclass(eq=False)
class PairedWindowSet:
    rough: np.ndarray           # (N, W) in [0, 1]
    ref: np.ndarray             # (N, W) in [0, 1]
    subject_ids: np.ndarray     # (N,)
    starts: np.ndarray          # (N,) start sample within the subject
    beats: list                 # per window, beat times relative to window start (s)
    fps: float = 30.0

    def __len__(self):
        return len(self.rough)

    def take(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return PairedWindowSet(self.rough[idx], self.ref[idx], self.subject_ids[idx],
                               self.starts[idx], [self.beats[i] for i in idx], self.fps)

    @classmethod
    def concat(cls, parts, fps=30.0, width=300):
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls(np.zeros((0, width)), np.zeros((0, width)), np.zeros(0, np.int64),
                       np.zeros(0, np.int64), [], fps)
        return cls(np.concatenate([p.rough for p in parts]), np.concatenate([p.ref for p in parts]),
                   np.concatenate([p.subject_ids for p in parts]),
                   np.concatenate([p.starts for p in parts]),
                   [b for p in parts for b in p.beats], parts[0].fps)

    def window_hr(self):
        """Ground-truth mean HR (bpm) per window from beat times."""
        out = np.full(len(self), np.nan)
        for i, b in enumerate(self.beats):
            if len(b) >= 2:
                out[i] = 60.0 / np.mean(np.diff(b))
        return out


@dataclass(eq=False)
class DatasetSplits:
    train: PairedWindowSet
    val: PairedWindowSet
    test: PairedWindowSet
    protocol: str


def subject_windows(rec: SubjectRecord, step_sec, win_sec=WINDOW_SEC, starts=None,
                    band=dsp.DEFAULT_BAND, detrend_sec=dsp.DEFAULT_DETREND_SEC) -> PairedWindowSet:
    fps = rec.cfg.fps
    ref = rec.ppg_at_fps
    w = int(round(win_sec * fps))
    if starts is None:
        starts = dsp.window_starts(len(ref), w, int(round(step_sec * fps)))
    rough = np.empty((len(starts), w))
    refw = np.empty((len(starts), w))
    beats = []
    for i, s in enumerate(starts):
        rough[i] = chrom_pulse(rec.rgb.slice(s, s + w), band[0], band[1], detrend_sec).values
        refw[i] = dsp.normalize01(ref.with_values(ref.values[s:s + w])).values
        t0 = s / fps
        b = rec.beats[(rec.beats >= t0) & (rec.beats < t0 + w / fps)] - t0
        beats.append(b)
    sid = np.full(len(starts), rec.cfg.subject_id, dtype=np.int64)
    return PairedWindowSet(rough, refw, sid, np.asarray(starts, dtype=np.int64), beats, fps)


def assign_splits(configs, protocol, test_family=None, val_fraction=0.15, test_fraction=0.25):
    """Map subject_id -> split name. Splits are subject-disjoint."""
    if protocol not in STEPS:
        raise ValueError(f"protocol must be one of {tuple(STEPS)}")
    if len(configs) < 2:
        raise ValueError("need at least two subjects")
    ids = [c.subject_id for c in configs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate subject ids")
    if protocol == "cross":
        families = sorted({c.family for c in configs})
        if test_family is None:
            raise ValueError("cross protocol needs a test_family")
        if test_family not in families or len(families) < 2:
            raise ValueError("cross protocol needs the test family plus at least one training family")
        test = [c.subject_id for c in configs if c.family == test_family]
        pool = [c.subject_id for c in configs if c.family != test_family]
    else:
        order = sorted(ids)
        n_test = max(1, int(round(test_fraction * len(order))))
        n_test = min(n_test, len(order) - 1)
        test, pool = order[-n_test:], order[:-n_test]
    n_val = int(round(val_fraction * len(pool))) if len(pool) >= 3 else 0
    n_val = max(n_val, 1) if len(pool) >= 3 else 0
    # spread validation subjects through the pool (interleaved families)
    val = []
    if n_val:
        stride = len(pool) / n_val
        val = [sorted(pool)[int(i * stride + stride / 2)] for i in range(n_val)]
    out = {sid: "train" for sid in pool}
    out.update({sid: "val" for sid in val})
    out.update({sid: "test" for sid in test})
    return out


def build_dataset(configs, protocol, test_family=None, records=None, **window_kw) -> DatasetSplits:
    """Cut every subject into 10 s windows and split by subject.

    Steps are 0.5 s (``within``) or 1 s (``cross``). When a split has too
    few subjects for a separate validation subject, the last 10 % of each
    training subject's windows (by time) serve as validation instead.
    """
    splits = assign_splits(configs, protocol, test_family)
    records = records or {c.subject_id: simulate_subject(c) for c in configs}
    parts = {"train": [], "val": [], "test": []}
    for c in configs:
        parts[splits[c.subject_id]].append(subject_windows(records[c.subject_id], STEPS[protocol],
                                                           **window_kw))
    train = PairedWindowSet.concat(parts["train"])
    val = PairedWindowSet.concat(parts["val"])
    if len(val) == 0:
        keep, hold = [], []
        for sid in np.unique(train.subject_ids):
            idx = np.flatnonzero(train.subject_ids == sid)
            k = max(1, int(round(0.1 * idx.size)))
            keep.append(idx[:-k])
            hold.append(idx[-k:])
        val = train.take(np.concatenate(hold))
        train = train.take(np.concatenate(keep))
    return DatasetSplits(train, val, PairedWindowSet.concat(parts["test"]), protocol)


# -- HR-distribution families --------------------------------------------------

FAMILIES = ("broad", "bimodal", "narrow")
# every family draws from the same physiological range and differs only in
# how it distributes HR inside it, so cross-family tests never extrapolate
HR_SUPPORT = (55.0, 125.0)


def default_noise(rng, level=1.0):
    """A randomized corruption profile; ``level`` scales every component."""
    return NoiseProfile(
        white_sigma=level * rng.uniform(0.05, 0.12),
        pink_sigma=level * rng.uniform(0.08, 0.18),
        wander_amp=level * rng.uniform(0.1, 0.3),
        wander_hz=rng.uniform(0.05, 0.3),
        spike_rate_hz=rng.uniform(0.05, 0.2),
        spike_amp=level * rng.uniform(0.3, 0.8),
    )


def family_configs(family, n_subjects, seed=0, first_id=0, duration_sec=120.0, noise_level=2.0,
                   rgb_snr_db=15.0):
    """Subjects whose HR distribution mirrors one of three database shapes.

    ``broad`` spreads HR over the whole of ``HR_SUPPORT`` (random-walk
    trajectories), ``bimodal`` concentrates at both ends of it, ``narrow``
    sits near 80 bpm.
    """
    if family not in FAMILIES:
        raise ValueError(f"family must be one of {FAMILIES}")
    rng = np.random.default_rng([seed, FAMILIES.index(family), first_id])
    floor, ceil = HR_SUPPORT
    out = []
    for i in range(n_subjects):
        if family == "broad":
            spread = 12.0
            center = rng.uniform(floor + spread, ceil - spread)
        elif family == "bimodal":
            center = rng.normal(64, 3) if i % 2 == 0 else rng.normal(114, 3)
            spread = 8.0 if i % 2 == 0 else 10.0
        else:
            center, spread = rng.normal(80, 3), 6.0
        lo = float(max(center - spread, floor))
        hi = float(min(center + spread, ceil))
        start = float(np.clip(center + rng.uniform(-spread / 2, spread / 2), lo, hi))
        out.append(SynthSubjectConfig(
            subject_id=first_id + i, duration_sec=duration_sec, hr_kind="walk", hr_bpm=start,
            hr_low=lo, hr_high=hi, noise=default_noise(rng, noise_level),
            rgb=RgbProfile(illum_amp=rng.uniform(0.0, 0.02), snr_db=rgb_snr_db),
            seed=seed, family=family))
    return out


# -- on-disk corpus --------------------------------------------------------------

def _meta(cfg: SynthSubjectConfig, snr_db):
    d = asdict(cfg)
    flat = {}
    for k, v in d.items():
        if isinstance(v, dict):
            for kk, vv in v.items():
                flat[f"{k}.{kk}"] = vv
        else:
            flat[k] = v
    flat["achieved_snr_db"] = snr_db
    out = {}
    for k, v in flat.items():
        if isinstance(v, (tuple, list)):
            out[k] = ",".join(io.fmt(x) for x in v)
        elif isinstance(v, float):
            out[k] = io.fmt(v)
        else:
            out[k] = str(v)
    return out


def _config_from_meta(meta):
    def f(k):
        return float(meta[k])

    def tup(k):
        return tuple(float(x) for x in meta[k].split(","))

    noise = NoiseProfile(**{k.split(".", 1)[1]: f(k) for k in meta if k.startswith("noise.")})
    rgb = RgbProfile(baseline=tup("rgb.baseline"), strength=tup("rgb.strength"),
                     illum_amp=f("rgb.illum_amp"), illum_hz=f("rgb.illum_hz"),
                     snr_db=f("rgb.snr_db"))
    return SynthSubjectConfig(
        subject_id=int(meta["subject_id"]), duration_sec=f("duration_sec"), hr_kind=meta["hr_kind"],
        hr_bpm=f("hr_bpm"), hr_end_bpm=None if meta["hr_end_bpm"] == "None" else f("hr_end_bpm"),
        hr_low=f("hr_low"), hr_high=f("hr_high"), noise=noise, rgb=rgb, seed=int(meta["seed"]),
        family=meta["family"], fps=f("fps"), ppg_rate_hz=f("ppg_rate_hz"))


def write_corpus(root, records, splits, protocol, test_family=None):
    """One directory per subject (rgb.csv, ppg.csv, beats.csv, meta) plus
    ``windows.csv`` listing (subject, start_sample, split) and ``corpus.meta``."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for sid in sorted(records):
        rec = records[sid]
        d = root / f"subject_{sid:03d}"
        io.write_rgb_csv(d / "rgb.csv", rec.rgb)
        io.write_signal_csv(d / "ppg.csv", rec.ppg)
        io.write_table(d / "beats.csv", ["beat_sec"], ([b] for b in rec.beats))
        io.write_keyvalue(d / "meta", _meta(rec.cfg, rec.snr_db))
    rows = []
    for name in ("train", "val", "test"):
        ws = getattr(splits, name)
        rows += [[str(int(s)), str(int(st)), name] for s, st in zip(ws.subject_ids, ws.starts)]
    io.write_table(root / "windows.csv", ["subject", "start_sample", "split"], rows)
    io.write_keyvalue(root / "corpus.meta", {"protocol": protocol, "test_family": test_family or "",
                                             "window_sec": io.fmt(WINDOW_SEC),
                                             "step_sec": io.fmt(STEPS[protocol])})


def read_subject(d) -> SubjectRecord:
    d = Path(d)
    meta = io.read_keyvalue(d / "meta")
    cfg = _config_from_meta(meta)
    _, beats = io.read_numeric_table(d / "beats.csv", ["beat_sec"])
    return SubjectRecord(cfg, io.read_signal_csv(d / "ppg.csv"), beats[:, 0],
                         io.read_rgb_csv(d / "rgb.csv"), float(meta["achieved_snr_db"]))


def read_corpus(root, **window_kw):
    """Rebuild (records, DatasetSplits) from a corpus directory."""
    root = Path(root)
    cmeta = io.read_keyvalue(root / "corpus.meta")
    records = {}
    for d in sorted(root.glob("subject_*")):
        rec = read_subject(d)
        records[rec.cfg.subject_id] = rec
    _, rows = io.read_table(root / "windows.csv")
    per = {"train": {}, "val": {}, "test": {}}
    for sid, start, split in rows:
        per[split].setdefault(int(sid), []).append(int(start))
    parts = {}
    for split, by_subject in per.items():
        sets = [subject_windows(records[sid], 0, starts=np.asarray(st), **window_kw)
                for sid, st in by_subject.items()]
        parts[split] = PairedWindowSet.concat(sets)
    return records, DatasetSplits(parts["train"], parts["val"], parts["test"], cmeta["protocol"])


def with_noise(cfg: SynthSubjectConfig, noise: NoiseProfile):
    return replace(cfg, noise=noise)
