"""Train the adversarial model and the waveform-only ablation on a small corpus.

Subjects from all three HR families are split by subject (within protocol).

A narrowed channel plan keeps this to a couple of minutes; the full plan
is the default for the command-line pipeline.
"""
from dataclasses import replace

from pulsegan.evaluation import evaluate_windows, format_table, summarize
from pulsegan.models import NetPlan
from pulsegan.synth import build_dataset, family_configs
from pulsegan.training import TrainConfig, train

configs = (family_configs("broad", 4, duration_sec=120)
           + family_configs("bimodal", 4, duration_sec=120, first_id=100)
           + family_configs("narrow", 2, duration_sec=120, first_id=200))
ds = build_dataset(configs, "within")
plan = NetPlan(enc_channels=(8, 8, 16, 16, 32, 32), disc_channels=(8, 8, 16, 16, 32, 32))
base = TrainConfig(epochs=15, plan=plan)

preds = {"chrom": ds.test.rough}
for mode in ("dae", "pulsegan"):
    res = train(replace(base, mode=mode), ds.train, ds.val)
    print(f"{mode}: validation L1 {res.initial_val_l1:.4f} -> {res.final_val_l1:.4f}")
    preds[mode] = res.state.gen.denoise(ds.test.rough)

print(format_table(summarize(evaluate_windows(ds.test.ref, preds))))
