"""Peaks to interbeat intervals, then HR, AVNN, SDNN and the padded IBI error."""
import numpy as np

from pulsegan import dsp
from pulsegan.metrics import (
    bland_altman,
    detect_peaks,
    hr_from_ibi,
    hrv_features,
    ibi_ae,
    ibi_from_peaks,
)
from pulsegan.synth import NoiseProfile, SynthSubjectConfig, corrupt, synth_ppg

cfg = SynthSubjectConfig(subject_id=3, duration_sec=60, hr_kind="walk", hr_bpm=75,
                         hr_low=65, hr_high=90, seed=2)
ppg, beats = synth_ppg(cfg)
clean = dsp.resample_linear(ppg, 30.0)
noisy, snr = corrupt(clean, NoiseProfile(white_sigma=0.06, pink_sigma=0.05), np.random.default_rng(0))
print(f"corrupted copy at {snr:.1f} dB SNR")

hr_ref, hr_noisy = [], []
for start in range(0, len(clean) - 300, 150):
    ref_ibi = ibi_from_peaks(detect_peaks(clean.with_values(clean.values[start:start + 300])), 30.0)
    est_ibi = ibi_from_peaks(detect_peaks(noisy.with_values(noisy.values[start:start + 300])), 30.0)
    avnn, sdnn = hrv_features(est_ibi)
    hr_ref.append(hr_from_ibi(ref_ibi))
    hr_noisy.append(hr_from_ibi(est_ibi))
    print(f"{start / 30:5.1f} s  HR {hr_noisy[-1]:6.2f} (ref {hr_ref[-1]:6.2f})  "
          f"AVNN {avnn:6.1f} ms  SDNN {sdnn:5.1f} ms  IBI_ae {ibi_ae(est_ibi, ref_ibi, 300):6.2f} ms")

ba = bland_altman(hr_noisy, hr_ref)
print(f"Bland-Altman: bias {ba.bias:+.2f} bpm, limits [{ba.lower:.2f}, {ba.upper:.2f}]")
