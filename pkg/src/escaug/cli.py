"""Command-line pipeline orchestrator.

Subcommands map onto the library stages: ingest -> preprocess ->
augment / gan-train -> gan-generate -> gan-filter -> clf-train /
evaluate -> report, plus selftest.  Every run writes a reproducibility
header (config hash, seed, versions) into the output directory; fixed
inputs, config, and seed give byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import zlib
from pathlib import Path

import numpy as np

from . import __version__
from . import audio_io, augment, config as cfgmod, features, gan, manifest as mani, metrics, simfilter
from .manifest import ManifestRow

# CLI scheme flag -> internal augmentation scheme (None = no augmentation rows)
SCHEME_MAP = {
    "baseline": None,
    "time_stretch": "time_stretch",
    "pitch_shift1": "pitch_shift_int",
    "pitch_shift2": "pitch_shift_frac",
    "drcomp": "dynamic_range",
    "background": "background_mix",
    "GAN": "gan",
}


class CliError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):          # unknown flag -> usage + exit 1
        self.print_usage(sys.stderr)
        raise SystemExit(1)


def _load_config(path: str | None) -> dict:
    if path is None:
        return cfgmod.default_config()
    if path in ("full", "desk"):     # packaged profile names
        return cfgmod.load_profile(path)
    return cfgmod.load_config(path)


def _write_header(out: Path, command: str, cfg: dict, seed: int, args: dict, suffix: str = ""):
    out.mkdir(parents=True, exist_ok=True)
    name = f"run_header_{command}{('_' + suffix) if suffix else ''}.json"
    header = {
        "command": command,
        "config_hash": cfgmod.config_hash(cfg),
        "seed": seed,
        "args": {k: v for k, v in sorted(args.items())
                 if v is not None and k not in ("fn", "command", "seed")},
        "versions": {
            "package": __version__,
            "numpy": np.__version__,
            "python": ".".join(map(str, sys.version_info[:3])),
        },
    }
    (out / name).write_text(json.dumps(header, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _write_csv(path: Path, header: list[str], rows: list[list]):
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _file_rng(seed: int, rel_path: str) -> np.random.Generator:
    # keyed by path so results are independent of manifest row order
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(rel_path.encode())]))


# -- subcommands ---------------------------------------------------------

def cmd_ingest(args) -> int:
    cfg = _load_config(args.config)
    rows = mani.ingest(args.data, args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mani.save_manifest(out / "manifest.csv", rows)
    _write_header(out, "ingest", cfg, args.seed, vars(args))
    classes = sorted({r.class_id for r in rows})
    print(f"ingested {len(rows)} clips, {len(classes)} classes, folds 1..10 -> {out / 'manifest.csv'}")
    return 0


def cmd_preprocess(args) -> int:
    cfg = _load_config(args.config)
    out = Path(args.out)
    rows = mani.load_manifest(out / "manifest.csv")
    rate = cfg["audio.sample_rate"]
    new_rows = []
    for r in rows:
        wf = audio_io.read_wav(Path(args.data) / r.file)
        wf = audio_io.resample(wf, rate)
        rel = f"processed/{r.file}"
        dest = out / rel
        dest.parent.mkdir(parents=True, exist_ok=True)
        audio_io.write_wav(dest, wf)
        new_rows.append(ManifestRow(rel, r.fold, r.class_id, r.class_name, "original"))
    mani.save_manifest(out / "processed" / "manifest.csv", new_rows)
    _write_header(out, "preprocess", cfg, args.seed, vars(args))
    print(f"preprocessed {len(new_rows)} clips at {rate} Hz -> {out / 'processed'}")
    return 0


def _load_scenes(cfg: dict, seed: int) -> dict:
    names = cfgmod.parse_name_list(cfg["augment.background_scenes"])
    rate = cfg["audio.sample_rate"]
    secs = cfg["augment.scene_seconds"]
    scenes = {}
    for i, name in enumerate(sorted(names)):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 7700 + i]))
        scenes[name] = augment.synth_scene(name, secs, rate, rng)
    return scenes


def _scheme_factors_from_config(internal: str, cfg: dict):
    if internal == "time_stretch":
        return list(cfgmod.parse_float_list(cfg["augment.stretch_rates"], "augment.stretch_rates"))
    if internal == "pitch_shift_int":
        return list(cfgmod.parse_float_list(cfg["augment.pitch_semitones_int"], "augment.pitch_semitones_int"))
    if internal == "pitch_shift_frac":
        return list(cfgmod.parse_float_list(cfg["augment.pitch_semitones_frac"], "augment.pitch_semitones_frac"))
    if internal == "dynamic_range":
        return list(cfgmod.parse_name_list(cfg["augment.drc_profiles"]))
    if internal == "background_mix":
        return sorted(cfgmod.parse_name_list(cfg["augment.background_scenes"]))
    raise CliError(f"no factors for scheme {internal!r}")


def cmd_augment(args) -> int:
    cfg = _load_config(args.config)
    internal = SCHEME_MAP.get(args.scheme)
    if internal is None or internal == "gan":
        raise CliError(f"--scheme must be a classical scheme, not {args.scheme!r}")
    out = Path(args.out)
    rows = mani.load_manifest(out / "processed" / "manifest.csv")
    scenes = _load_scenes(cfg, args.seed) if internal == "background_mix" else None
    profiles = {name: cfgmod.drc_profile_from_config(cfg, name)
                for name in cfgmod.parse_name_list(cfg["augment.drc_profiles"])}
    w_range = (cfg["augment.background_w_min"], cfg["augment.background_w_max"])
    factors = _scheme_factors_from_config(internal, cfg)
    new_rows = []
    for r in rows:
        wf = audio_io.read_wav(out / r.file)
        rng = _file_rng(args.seed, r.file)
        variants = augment.build_augmented_set([(r.file, wf)], internal, rng,
                                               scenes=scenes, w_range=w_range,
                                               profiles=profiles, factors=factors)
        stem = r.file.replace("/", "__").removesuffix(".wav")
        for k, (rec, aug_wf) in enumerate(variants):
            rel = f"augmented/{args.scheme}/{stem}__v{k}.wav"
            dest = out / rel
            dest.parent.mkdir(parents=True, exist_ok=True)
            audio_io.write_wav(dest, aug_wf)
            new_rows.append(ManifestRow(rel, r.fold, r.class_id, r.class_name, "classical_aug"))
    mani.save_manifest(out / "augmented" / f"manifest_{args.scheme}.csv", new_rows)
    _write_header(out, "augment", cfg, args.seed, vars(args), suffix=args.scheme)
    print(f"scheme {args.scheme}: wrote {len(new_rows)} variants "
          f"({len(new_rows) // max(1, len(rows))} per clip) -> {out / 'augmented' / args.scheme}")
    return 0


def _class_rows(rows: list[ManifestRow], class_name: str) -> list[ManifestRow]:
    picked = [r for r in rows if r.class_name == class_name]
    if not picked:
        known = sorted({r.class_name for r in rows})
        raise CliError(f"class {class_name!r} not in manifest; classes: {', '.join(known)}")
    return picked


def _fit_length(x: np.ndarray, n: int) -> np.ndarray:
    if x.size >= n:
        start = (x.size - n) // 2
        return x[start:start + n]
    out = np.zeros(n, dtype=x.dtype)
    out[:x.size] = x
    return out


def cmd_gan_train(args) -> int:
    cfg = _load_config(args.config)
    if not args.cls:
        raise CliError("gan-train needs --class")
    out = Path(args.out)
    rows = _class_rows(mani.load_manifest(out / "processed" / "manifest.csv"), args.cls)
    arch = cfgmod.arch_from_config(cfg)
    tcfg = cfgmod.gan_train_from_config(cfg)
    clips = np.stack([
        _fit_length(audio_io.read_wav(out / r.file).samples.astype(np.float32), arch.output_len)
        for r in rows])
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, zlib.crc32(args.cls.encode())]))
    log_rows = []

    def cb(row):
        log_rows.append([row["epoch"], _fmt(row["critic_loss"]), _fmt(row["gen_loss"]),
                         _fmt(row["wasserstein"])])
        if row["epoch"] % 50 == 0 or row["epoch"] == tcfg.epochs:
            print(f"  epoch {row['epoch']}/{tcfg.epochs} critic={row['critic_loss']:+.4f} "
                  f"gen={row['gen_loss']:+.4f} W={row['wasserstein']:+.4f}")

    print(f"training on {len(clips)} clips of class {args.cls!r} ({tcfg.epochs} epochs)")
    g, c, _ = gan.train_gan(clips, arch, tcfg, rng, log_cb=cb)
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    gan.save_gan_checkpoint(ckpt_dir / f"{args.cls}.ckpt", arch, g, c)
    _write_csv(out / "reports" / f"gan_train_{args.cls}.csv",
               ["epoch", "critic_loss", "gen_loss", "wasserstein_estimate"], log_rows)
    _write_header(out, "gan-train", cfg, args.seed, vars(args), suffix=args.cls)
    print(f"checkpoint -> {ckpt_dir / (args.cls + '.ckpt')}")
    return 0


def cmd_gan_generate(args) -> int:
    cfg = _load_config(args.config)
    if not args.cls:
        raise CliError("gan-generate needs --class")
    out = Path(args.out)
    arch, g, _ = gan.load_gan_checkpoint(out / "checkpoints" / f"{args.cls}.ckpt")
    n = cfg["gan.generate_count"]
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 1, zlib.crc32(args.cls.encode())]))
    waves = gan.generate(g, arch, n, rng)
    rate = cfg["audio.sample_rate"]
    gen_dir = out / "generated" / args.cls
    gen_dir.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(n - 1)))
    for i in range(n):
        audio_io.write_wav(gen_dir / f"gan_{i:0{width}d}.wav",
                           audio_io.Waveform(waves[i, :, 0].astype(np.float64), rate))
    _write_header(out, "gan-generate", cfg, args.seed, vars(args), suffix=args.cls)
    print(f"generated {n} clips of {arch.output_len} samples -> {gen_dir}")
    return 0


def cmd_gan_filter(args) -> int:
    cfg = _load_config(args.config)
    if not args.cls:
        raise CliError("gan-filter needs --class")
    out = Path(args.out)
    rows = _class_rows(mani.load_manifest(out / "processed" / "manifest.csv"), args.cls)
    refs = [(r.file, audio_io.read_wav(out / r.file).samples) for r in rows]
    gen_dir = out / "generated" / args.cls
    gen_files = sorted(gen_dir.glob("gan_*.wav"))
    if not gen_files:
        raise CliError(f"no generated clips under {gen_dir}; run gan-generate first")
    cand = [(p.name, audio_io.read_wav(p).samples) for p in gen_files]
    decisions = simfilter.filter_generated(cand, refs,
                                           threshold=cfg["filter.threshold"],
                                           guard=cfg["filter.guard"],
                                           reject_above=cfg["filter.reject_above"])
    class_id = rows[0].class_id
    filt_dir = out / "filtered" / args.cls
    filt_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 2, zlib.crc32(args.cls.encode())]))
    new_rows = []
    accepted = 0
    for p, dec in zip(gen_files, decisions):
        if not dec.accepted:
            continue
        accepted += 1
        rel = f"filtered/{args.cls}/{p.name}"
        (out / rel).write_bytes(p.read_bytes())
        fold = int(rng.integers(1, mani.N_FOLDS + 1))   # synthetic clips draw a uniform fold
        new_rows.append(ManifestRow(rel, fold, class_id, args.cls, "gan"))
    _write_csv(out / "reports" / f"filter_{args.cls}.csv",
               ["clip_id", "best_reference", "score", "accepted"],
               [[d.clip_id, d.best_reference, _fmt(d.score), str(d.accepted).lower()] for d in decisions])
    # merge with other classes' rows so one manifest covers all synthetic clips
    gan_manifest = out / "filtered" / "manifest_gan.csv"
    existing = []
    if gan_manifest.exists():
        existing = [r for r in mani.load_manifest(gan_manifest, validate=False)
                    if r.class_name != args.cls]
    merged = sorted(existing + new_rows, key=lambda r: r.file)
    mani.save_manifest(gan_manifest, merged)
    _write_header(out, "gan-filter", cfg, args.seed, vars(args), suffix=args.cls)
    print(f"kept {accepted}/{len(decisions)} generated clips -> {filt_dir}")
    return 0


def _parse_folds(text: str | None) -> list[int]:
    if not text:
        return list(range(1, mani.N_FOLDS + 1))
    try:
        folds = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise CliError(f"--folds must be comma-separated integers, got {text!r}") from None
    bad = [f for f in folds if not 1 <= f <= mani.N_FOLDS]
    if bad:
        raise CliError(f"--folds values {bad} outside 1..{mani.N_FOLDS}")
    return folds


def _compose_rows(out: Path, scheme: str) -> list[ManifestRow]:
    rows = mani.load_manifest(out / "processed" / "manifest.csv")
    internal = SCHEME_MAP[scheme]
    if internal == "gan":
        extra = out / "filtered" / "manifest_gan.csv"
        if not extra.exists():
            raise CliError(f"scheme GAN needs {extra}; run gan-filter first")
        rows += mani.load_manifest(extra, validate=False)
    elif internal is not None:
        extra = out / "augmented" / f"manifest_{scheme}.csv"
        if not extra.exists():
            raise CliError(f"scheme {scheme} needs {extra}; run augment first")
        rows += mani.load_manifest(extra, validate=False)
    return rows


def _patch_dataset(out: Path, rows: list[ManifestRow], cfg: dict, seed: int):
    fcfg = cfgmod.feature_from_config(cfg)
    fb = features.mel_filterbank(fcfg.n_mels, fcfg.frame_len // 2 + 1,
                                 fcfg.sample_rate, fcfg.fmin, fcfg.fmax)
    patches = np.empty((len(rows), fcfg.patch_frames, fcfg.n_mels, 1), dtype=np.float32)
    for i, r in enumerate(rows):
        wf = audio_io.read_wav(out / r.file)
        patches[i] = features.waveform_patch(wf.samples, fcfg, fb, _file_rng(seed, r.file))
    labels = np.array([r.class_id for r in rows])
    folds = np.array([r.fold for r in rows])
    origins = np.array([r.origin for r in rows])
    return patches, labels, folds, origins


def _eval_scheme(out: Path, scheme: str, folds: list[int], cfg: dict, seed: int, progress=True):
    from .classifier import cross_validate
    rows = _compose_rows(out, scheme)
    patches, labels, fold_arr, origins = _patch_dataset(out, rows, cfg, seed)
    spec = cfgmod.cnn_from_config(cfg)
    tcfg = cfgmod.clf_train_from_config(cfg)

    def cb(result):
        if progress:
            sc = metrics.scores(result["confusion"])
            print(f"  fold {result['fold']}: n_train={result['n_train']} "
                  f"n_test={result['n_test']} accuracy={sc['accuracy']:.3f}")

    results, warns = cross_validate(patches, labels, fold_arr, origins, tcfg,
                                    seed, spec=spec, fold_ids=folds, log_cb=cb)
    for w in warns:
        print(f"  warning: {w}", file=sys.stderr)
    return results, warns


def _fold_metric_rows(results) -> list[dict]:
    per_fold = []
    for r in results:
        sc = metrics.scores(r["confusion"])
        sc["kappa"] = metrics.cohen_kappa(r["confusion"])
        sc["fold"] = r["fold"]
        per_fold.append(sc)
    return per_fold


METRIC_NAMES = ("accuracy", "precision", "recall", "f1", "kappa")


def cmd_clf_train(args) -> int:
    from .classifier import cross_validate
    cfg = _load_config(args.config)
    out = Path(args.out)
    scheme = args.scheme or "baseline"
    if scheme not in SCHEME_MAP:
        raise CliError(f"unknown scheme {scheme!r}; choices: {', '.join(SCHEME_MAP)}")
    folds = _parse_folds(args.folds)
    results, _ = _eval_scheme(out, scheme, folds, cfg, args.seed)
    if not results:
        raise CliError("no folds were evaluable (no original clips in the requested folds)")
    per_fold = _fold_metric_rows(results)
    _write_csv(out / "reports" / f"clf_train_{scheme}.csv",
               ["fold"] + list(METRIC_NAMES),
               [[r["fold"]] + [_fmt(r[m]) for m in METRIC_NAMES] for r in per_fold])
    _write_header(out, "clf-train", cfg, args.seed, vars(args), suffix=scheme)
    for r in per_fold:
        print(f"fold {r['fold']}: " + " ".join(f"{m}={r[m]:.3f}" for m in METRIC_NAMES))
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args.config)
    out = Path(args.out)
    scheme = args.scheme or "baseline"
    if scheme not in SCHEME_MAP:
        raise CliError(f"unknown scheme {scheme!r}; choices: {', '.join(SCHEME_MAP)}")
    folds = _parse_folds(args.folds)
    results, _ = _eval_scheme(out, scheme, folds, cfg, args.seed)
    if not results:
        raise CliError("no folds were evaluable (no original clips in the requested folds)")
    per_fold = _fold_metric_rows(results)
    agg = metrics.aggregate_folds([{m: r[m] for m in METRIC_NAMES} for r in per_fold])

    _write_csv(out / "reports" / f"folds_{scheme}.csv",
               ["fold"] + list(METRIC_NAMES),
               [[r["fold"]] + [_fmt(r[m]) for m in METRIC_NAMES] for r in per_fold])
    n_classes = cfg["clf.n_classes"]
    cm_rows = []
    for r in results:
        for t in range(n_classes):
            cm_rows.append([r["fold"], t] + [int(v) for v in r["confusion"][t]])
    _write_csv(out / "reports" / f"cm_{scheme}.csv",
               ["fold", "true_class"] + [f"pred_{j}" for j in range(n_classes)], cm_rows)
    header = ["scheme"]
    row = [scheme]
    for m in METRIC_NAMES:
        header += [f"{m}_mean", f"{m}_std"]
        mean, std = agg[m]
        row += [_fmt(mean), _fmt(std)]
    _write_csv(out / "reports" / f"eval_{scheme}.csv", header, [row])
    _write_header(out, "evaluate", cfg, args.seed, vars(args), suffix=scheme)
    print(",".join(header))
    print(",".join(str(v) for v in row))
    return 0


def _load_summed_cm(path: Path, n_classes: int) -> np.ndarray:
    if not path.exists():
        raise CliError(f"missing {path}; run evaluate for that scheme first")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for rec in csv.DictReader(fh):
            t = int(rec["true_class"])
            for j in range(n_classes):
                cm[t, j] += int(rec[f"pred_{j}"])
    return cm


def cmd_report(args) -> int:
    cfg = _load_config(args.config)
    out = Path(args.out)
    scheme = args.scheme or "GAN"
    if scheme not in SCHEME_MAP or scheme == "baseline":
        raise CliError("report needs --scheme set to a non-baseline scheme")
    n_classes = cfg["clf.n_classes"]
    cm_s = _load_summed_cm(out / "reports" / f"cm_{scheme}.csv", n_classes)
    cm_b = _load_summed_cm(out / "reports" / "cm_baseline.csv", n_classes)
    diff = metrics.difference_matrix(cm_s, cm_b)
    _write_csv(out / "reports" / f"diff_{scheme}_vs_baseline.csv",
               ["true_class"] + [f"pred_{j}" for j in range(n_classes)],
               [[t] + [_fmt(v) for v in diff[t]] for t in range(n_classes)])
    _write_header(out, "report", cfg, args.seed, vars(args), suffix=scheme)
    gain = float(np.trace(diff)) / n_classes
    print(f"mean per-class diagonal change vs baseline: {gain:+.4f} "
          f"-> {out / 'reports' / f'diff_{scheme}_vs_baseline.csv'}")
    return 0


def cmd_selftest(args) -> int:
    from .nn import gradcheck
    from .nn import tensor as T
    from .nn.tensor import Tensor
    from .gan import ArchConfig, build_generator, build_critic, gradient_penalty
    from .classifier import CnnSpec, build_cnn

    failures = []

    def check(name, fn, tol=1e-4):
        err = fn()
        ok = err < tol
        print(f"  {'ok' if ok else 'FAIL'} {name}: max rel err {err:.2e}")
        if not ok:
            failures.append(name)

    rng = np.random.default_rng(0)
    print("gradient checks (finite differences, float64):")
    xd = Tensor(rng.normal(size=(3, 4)))
    wd = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    check("dense", lambda: gradcheck.check_scalar_fn(lambda: T.sum_(T.matmul(xd, wd)), [wd]))
    x1 = Tensor(rng.normal(size=(2, 9, 3)))
    w1 = Tensor(rng.normal(size=(4, 3, 5)), requires_grad=True)
    check("conv1d", lambda: gradcheck.check_scalar_fn(
        lambda: T.sum_(T.conv1d(x1, w1, stride=2, pad=(1, 1))), [w1]))
    xt = Tensor(rng.normal(size=(2, 5, 3)))
    wt = Tensor(rng.normal(size=(4, 3, 7)), requires_grad=True)
    check("tconv1d", lambda: gradcheck.check_scalar_fn(
        lambda: T.sum_(T.tconv1d(xt, wt, stride=3)), [wt]))
    x2 = Tensor(rng.normal(size=(2, 6, 6, 2)))
    w2 = Tensor(rng.normal(size=(3, 3, 2, 4)), requires_grad=True)
    check("conv2d", lambda: gradcheck.check_scalar_fn(
        lambda: T.sum_(T.conv2d(x2, w2, pad=(1, 1))), [w2]))
    xm = Tensor(rng.normal(size=(2, 4, 6, 3)), requires_grad=True)
    check("maxpool2d", lambda: gradcheck.check_scalar_fn(
        lambda: T.sum_(T.maxpool2d(xm, 2, 2)), [xm]))

    print("shape conformance (reduced width d=2):")
    arch = ArchConfig(d=2)
    g = build_generator(arch)
    c = build_critic(arch)
    ok = g.out_shape == (196608, 1) and c.out_shape == (1,) and g.shapes[2] == (16, 384)
    print(f"  {'ok' if ok else 'FAIL'} generator/critic ladders ({len(g.shapes)} + {len(c.shapes)} shapes)")
    if not ok:
        failures.append("gan shapes")
    cnn = build_cnn(CnnSpec())
    ok = cnn.shapes[1:] and cnn.out_shape == (10,) and dict(zip([n for n, _ in cnn.layers], cnn.shapes[1:]))["flatten"] == (12288,)
    print(f"  {'ok' if ok else 'FAIL'} classifier stack (flatten 12288, out 10)")
    if not ok:
        failures.append("cnn shapes")

    print("gradient penalty analytics:")
    from .nn import layers as L
    net = L.Network([("flatten", L.Flatten()), ("score", L.Dense(4, 1))], in_shape=(4, 1))
    net.init(np.random.default_rng(0), np.float64)
    p = dict(net.params())
    p["score.w"].data = np.full((4, 1), 3.0)
    p["score.b"].data = np.zeros(1)
    r2 = np.random.default_rng(2)
    gp = float(gradient_penalty(net, r2.uniform(-1, 1, (8, 4, 1)), r2.uniform(-1, 1, (8, 4, 1)), r2).data)
    ok = abs(gp - 25.0) < 1e-8
    print(f"  {'ok' if ok else 'FAIL'} slope-6 critic penalty = {gp:.6f} (want 25)")
    if not ok:
        failures.append("gradient penalty")

    if failures:
        raise RuntimeError(f"selftest failures: {', '.join(failures)}")
    print("selftest passed")
    return 0


# -- argument wiring -----------------------------------------------------

def build_parser() -> _Parser:
    p = _Parser(prog="escaug", description=__doc__)
    p.add_argument("--version", action="version", version=f"escaug {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_data=False):
        sp.add_argument("--config", help="key=value config file (defaults: full-scale profile)")
        sp.add_argument("--seed", type=int, default=None, help="override run.seed")
        sp.add_argument("--out", default="out", help="pipeline output directory")
        if needs_data:
            sp.add_argument("--data", required=True, help="dataset root (fold<j>/ subdirectories)")

    sp = sub.add_parser("ingest", help="validate a dataset and write the canonical manifest")
    common(sp, needs_data=True)
    sp.add_argument("--manifest", required=True, help="source metadata CSV")
    sp.set_defaults(fn=cmd_ingest)

    sp = sub.add_parser("preprocess", help="resample originals to mono at the working rate")
    common(sp, needs_data=True)
    sp.set_defaults(fn=cmd_preprocess)

    sp = sub.add_parser("augment", help="apply one classical augmentation scheme (4 variants/clip)")
    common(sp)
    sp.add_argument("--scheme", required=True,
                    choices=[s for s, v in SCHEME_MAP.items() if v not in (None, "gan")])
    sp.set_defaults(fn=cmd_augment)

    sp = sub.add_parser("gan-train", help="adversarially train one class's generator")
    common(sp)
    sp.add_argument("--class", dest="cls", required=True, help="class name from the manifest")
    sp.set_defaults(fn=cmd_gan_train)

    sp = sub.add_parser("gan-generate", help="sample clips from a trained generator")
    common(sp)
    sp.add_argument("--class", dest="cls", required=True)
    sp.set_defaults(fn=cmd_gan_generate)

    sp = sub.add_parser("gan-filter", help="similarity-filter generated clips against originals")
    common(sp)
    sp.add_argument("--class", dest="cls", required=True)
    sp.set_defaults(fn=cmd_gan_filter)

    sp = sub.add_parser("clf-train", help="train/evaluate the classifier on selected folds")
    common(sp)
    sp.add_argument("--scheme", choices=list(SCHEME_MAP))
    sp.add_argument("--folds", help="comma-separated test folds (default all)")
    sp.set_defaults(fn=cmd_clf_train)

    sp = sub.add_parser("evaluate", help="cross-validate one augmentation scheme")
    common(sp)
    sp.add_argument("--scheme", choices=list(SCHEME_MAP))
    sp.add_argument("--folds", help="comma-separated test folds (default all)")
    sp.set_defaults(fn=cmd_evaluate)

    sp = sub.add_parser("report", help="difference matrix of a scheme against baseline")
    common(sp)
    sp.add_argument("--scheme", choices=[s for s in SCHEME_MAP if s != "baseline"])
    sp.set_defaults(fn=cmd_report)

    sp = sub.add_parser("selftest", help="gradient checks and shape conformance")
    common(sp)
    sp.set_defaults(fn=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.seed is None:
            cfg = _load_config(getattr(args, "config", None))
            args.seed = cfg["run.seed"]
        return args.fn(args)
    except (ValueError, FileNotFoundError) as e:   # validation problems
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:                          # runtime failures
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
