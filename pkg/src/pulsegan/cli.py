"""``pulsegan`` command line: synthesize, extract, train, denoise, evaluate, report, grad-check.

Exit status: 0 success, 1 invalid configuration or inputs, 2 runtime
failure, 3 gradient-check failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from types import SimpleNamespace

from . import checkpoint, evaluation, io, synth
from .config import FPS, RunConfig, bundled_config_path, parse_config
from .errors import ConfigError
from .gradsuite import CASES, run_suite
from .training import LOG_HEADER, train

log = logging.getLogger("pulsegan")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_GRADCHECK = 0, 1, 2, 3
LOG_ENV = "PULSEGAN_LOG_LEVEL"
SPLITS = ("train", "val", "test")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; route it to the validation status instead
    def error(self, message):
        raise UsageError(message)


def _require(path, what):
    path = Path(path)
    if not path.exists():
        raise UsageError(f"{what} not found: {path}")
    return path


def _setup_logging(out=None):
    level = os.environ.get(LOG_ENV, "INFO").upper()
    if not isinstance(logging.getLevelName(level), int):
        raise UsageError(f"{LOG_ENV}={level!r} is not a logging level")
    log.setLevel(level)
    log.handlers.clear()
    fmt = logging.Formatter("%(levelname)s %(name)s: %(message)s")
    h = logging.StreamHandler(sys.stderr)
    h.setFormatter(fmt)
    log.addHandler(h)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        fh = logging.FileHandler(out / "pulsegan.log", mode="a", encoding="utf-8")
        fh.setFormatter(fmt)
        log.addHandler(fh)
    log.propagate = False


def _close_logging():
    for h in list(log.handlers):
        h.close()
        log.removeHandler(h)


def _echo_config(cfg: RunConfig, out: Path):
    for line in cfg.dumps().splitlines():
        log.debug("config %s", line)
    io.atomic_write_text(out / "config.cfg", cfg.dumps())


# -- subcommands -------------------------------------------------------------------

def corpus_configs(cfg: RunConfig):
    d = cfg.as_dict()
    out = []
    for i, (fam, n) in enumerate(zip(d["corpus.families"], d["corpus.subjects_per_family"])):
        out += synth.family_configs(fam, n, seed=cfg.seed, first_id=100 * i,
                                    duration_sec=d["corpus.duration_sec"],
                                    noise_level=d["corpus.noise_level"],
                                    rgb_snr_db=d["corpus.rgb_snr_db"])
    return out


def _window_kw(cfg):
    return {"band": cfg.band, "detrend_sec": cfg["signal.detrend_sec"]}


def cmd_synth(cfg: RunConfig, args):
    configs = corpus_configs(cfg)
    protocol = cfg["corpus.protocol"]
    test_family = cfg["corpus.test_family"] if protocol == "cross" else None
    records = {c.subject_id: synth.simulate_subject(c) for c in configs}
    splits = synth.build_dataset(configs, protocol, test_family, records=records, **_window_kw(cfg))
    synth.write_corpus(args.out, records, splits, protocol, test_family)
    log.info("corpus: %d subjects, windows train/val/test = %d/%d/%d", len(records),
             len(splits.train), len(splits.val), len(splits.test))


def cmd_extract(cfg: RunConfig, args):
    corpus = _require(args.corpus, "corpus directory")
    _require(corpus / "corpus.meta", "corpus manifest")
    _, splits = synth.read_corpus(corpus, **_window_kw(cfg))
    for name in SPLITS:
        ws = getattr(splits, name)
        io.write_windows(args.out / f"rough_{name}.csv", ws.subject_ids, ws.starts, ws.rough)
        io.write_windows(args.out / f"ref_{name}.csv", ws.subject_ids, ws.starts, ws.ref)
        log.info("%s: %d windows", name, len(ws))


def _pairs(windows: Path, split):
    _, _, rough = io.read_windows(_require(windows / f"rough_{split}.csv", f"{split} rough windows"))
    _, _, ref = io.read_windows(_require(windows / f"ref_{split}.csv", f"{split} reference windows"))
    if rough.shape != ref.shape:
        raise UsageError(f"{split}: rough and reference window files disagree in shape")
    return SimpleNamespace(rough=rough, ref=ref)


def cmd_train(cfg: RunConfig, args):
    windows = _require(args.windows, "window directory")
    tr, va = _pairs(windows, "train"), _pairs(windows, "val")
    if tr.rough.shape[1] != cfg.plan.window_len:
        raise UsageError(f"windows have {tr.rough.shape[1]} samples, net.window_len is "
                         f"{cfg.plan.window_len}")
    modes = [args.mode] if args.mode else list(cfg["train.modes"])
    for mode in modes:
        tc = cfg.train_config(mode)
        log.info("training %s: %d train / %d val windows, %d epochs", mode, len(tr.rough),
                 len(va.rough), tc.epochs)
        res = train(tc, tr, va)
        checkpoint.save_checkpoint(res.state, args.out / f"{mode}.ckpt")
        io.write_table(args.out / f"{mode}_log.csv", LOG_HEADER,
                       ([str(int(r[0]))] + [io.fmt(v) for v in r[1:]] for r in res.log_rows))
        log.info("%s: validation L1 %.4f -> %.4f", mode, res.initial_val_l1, res.final_val_l1)


def cmd_denoise(cfg: RunConfig, args):
    ckpt = _require(args.checkpoint, "checkpoint")
    windows = _require(args.windows, "window directory")
    state = checkpoint.load_checkpoint(ckpt)
    mode = state.cfg.mode
    for split in args.split:
        sid, starts, rough = io.read_windows(_require(windows / f"rough_{split}.csv",
                                                      f"{split} rough windows"))
        io.write_windows(args.out / f"{mode}_{split}.csv", sid, starts, state.gen.denoise(rough))
        log.info("denoised %d %s windows with the %s generator", len(rough), split, mode)


def cmd_evaluate(cfg: RunConfig, args):
    windows = _require(args.windows, "window directory")
    _, _, ref = io.read_windows(_require(windows / "ref_test.csv", "test reference windows"))
    _, _, rough = io.read_windows(_require(windows / "rough_test.csv", "test rough windows"))
    preds = {"chrom": rough}
    if args.denoised is not None:
        den = _require(args.denoised, "denoised directory")
        for method in evaluation.METHODS[1:]:
            f = den / f"{method}_test.csv"
            if f.exists():
                preds[method] = io.read_windows(f)[2]
    rows = evaluation.evaluate_windows(ref, preds, FPS, cfg.band)
    for method in preds:
        evaluation.write_window_csv(args.out / f"eval_{method}.csv",
                                    [r for r in rows if r[1] == method])
    log.info("evaluated %d windows for %s", ref.shape[0], ", ".join(preds))


def cmd_report(cfg: RunConfig, args):
    src = _require(args.eval, "evaluation directory")
    rows = []
    for method in evaluation.METHODS:
        f = src / f"eval_{method}.csv"
        if f.exists():
            rows += evaluation.read_window_csv(f)
    if not rows:
        raise UsageError(f"no eval_<method>.csv files in {src}")
    reports = evaluation.summarize(rows)
    evaluation.write_report(args.out / "report.csv", reports)
    evaluation.write_bland_altman(args.out / "bland_altman.csv", evaluation.bland_altman_rows(rows))
    table = evaluation.format_table(reports)
    io.atomic_write_text(args.out / "report.txt", table + "\n")
    print(table)


def cmd_grad_check(cfg: RunConfig, args):
    unknown = [c for c in args.case or [] if c not in CASES]
    if unknown:
        raise UsageError(f"unknown gradient case(s) {unknown}; choose from {', '.join(CASES)}")
    results, cpu = run_suite(cfg["gradcheck.seeds"], cfg["gradcheck.tolerance"],
                             cfg["gradcheck.step"], cases=args.case or None)
    failed = [r for r in results if not r.passed]
    by_case = {}
    for r in results:
        by_case.setdefault(r.case, []).append(r)
    for case, rs in by_case.items():
        worst = max(r.max_rel_error for r in rs)
        status = "ok" if all(r.passed for r in rs) else "FAIL"
        print(f"{case:<18} seeds={len(rs):<3} max_rel_error={worst:.3e} {status}")
    print(f"{len(results) - len(failed)}/{len(results)} configurations passed "
          f"(tolerance {cfg['gradcheck.tolerance']:g}, {cpu:.1f} s CPU)")
    if args.out is not None:
        io.write_table(args.out / "gradcheck.csv",
                       ["case", "seed", "max_rel_error", "checked", "skipped", "passed"],
                       ([r.case, str(r.seed), io.fmt(r.max_rel_error), str(r.checked),
                         str(r.skipped), str(int(r.passed))] for r in results))
    return EXIT_GRADCHECK if failed else EXIT_OK


def cmd_pipeline(cfg: RunConfig, args):
    """synth -> extract-chrom -> train -> denoise -> evaluate -> report under one directory."""
    out = args.out
    steps = [
        (cmd_synth, {"out": out / "corpus"}),
        (cmd_extract, {"corpus": out / "corpus", "out": out / "windows"}),
        (cmd_train, {"windows": out / "windows", "out": out / "models", "mode": None}),
    ]
    for fn, kw in steps:
        fn(cfg, SimpleNamespace(**kw))
    for mode in cfg["train.modes"]:
        cmd_denoise(cfg, SimpleNamespace(checkpoint=out / "models" / f"{mode}.ckpt",
                                         windows=out / "windows", split=["test"],
                                         out=out / "denoised"))
    cmd_evaluate(cfg, SimpleNamespace(windows=out / "windows", denoised=out / "denoised",
                                      out=out / "eval"))
    cmd_report(cfg, SimpleNamespace(eval=out / "eval", out=out / "report"))


COMMANDS = {
    "synth": cmd_synth,
    "extract-chrom": cmd_extract,
    "train": cmd_train,
    "denoise": cmd_denoise,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "grad-check": cmd_grad_check,
    "pipeline": cmd_pipeline,
}


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path,
                        help="flat `section.key = value` file, or a bundled name (smoke)")
    common.add_argument("--seed", type=int, help="overrides run.seed")
    common.add_argument("--out", type=Path, help="output directory")

    p = _Parser(prog="pulsegan", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("synth", parents=[common], help="write a synthetic corpus")
    s = sub.add_parser("extract-chrom", parents=[common], help="cut windows and run CHROM")
    s.add_argument("--corpus", type=Path, required=True)
    s = sub.add_parser("train", parents=[common], help="train generators (pulsegan and/or dae)")
    s.add_argument("--windows", type=Path, required=True)
    s.add_argument("--mode", choices=("pulsegan", "dae"), help="train only this model")
    s = sub.add_parser("denoise", parents=[common], help="apply a checkpoint to rough windows")
    s.add_argument("--checkpoint", type=Path, required=True)
    s.add_argument("--windows", type=Path, required=True)
    s.add_argument("--split", nargs="+", choices=SPLITS, default=["test"])
    s = sub.add_parser("evaluate", parents=[common], help="per-window metrics per method")
    s.add_argument("--windows", type=Path, required=True)
    s.add_argument("--denoised", type=Path)
    s = sub.add_parser("report", parents=[common], help="aggregate evaluation CSVs")
    s.add_argument("--eval", type=Path, required=True)
    s = sub.add_parser("grad-check", parents=[common], help="finite-difference gradient suite")
    s.add_argument("--case", action="append", help="restrict to a case (repeatable)")
    sub.add_parser("pipeline", parents=[common], help="run every stage into --out")
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.out is None and args.command != "grad-check":
            raise UsageError(f"{args.command}: --out is required")
        _setup_logging(args.out)
        path = args.config
        if path is not None and not path.exists():
            path = bundled_config_path(str(path))
            if path is None:
                raise UsageError(f"config file not found: {args.config}")
        cfg = parse_config(path)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("run.seed", "must be >= 0")
            cfg = cfg.with_seed(args.seed)
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            _echo_config(cfg, args.out)
        status = COMMANDS[args.command](cfg, args)
        return EXIT_OK if status is None else status
    except (UsageError, ConfigError) as exc:
        print(f"pulsegan: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        log.error("%s: %s", type(exc).__name__, exc)
        if not log.handlers:
            print(f"pulsegan: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        _close_logging()


if __name__ == "__main__":
    sys.exit(main())
