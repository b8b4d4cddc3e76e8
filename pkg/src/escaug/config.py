"""Flat key=value pipeline configuration.

Every tunable lives in one typed defaults table; a config file overrides
a subset and unknown keys are rejected.  ``config_hash`` fingerprints the
effective (fully resolved) configuration for reproducibility headers.
"""

from __future__ import annotations

import hashlib
from importlib import resources

# (type, default) per key.  Types: int, float, bool, str.
_SCHEMA: dict[str, tuple[type, object]] = {
    "audio.sample_rate": (int, 44100),
    "features.frame_len": (int, 1024),
    "features.hop": (int, 1024),
    "features.n_mels": (int, 128),
    "features.fmin": (float, 0.0),
    "features.fmax": (float, 22050.0),
    "features.floor": (float, 1e-6),
    "features.patch_frames": (int, 128),
    "gan.latent_dim": (int, 100),
    "gan.d": (int, 64),
    "gan.c": (int, 1),
    "gan.base_len": (int, 16),
    "gan.kernel": (int, 25),
    "gan.ladder": (str, "4x96,4x48,4x24,4x12,4x6,4x3,3xc"),
    "gan.epochs": (int, 2500),
    "gan.batch_size": (int, 64),
    "gan.n_critic": (int, 5),
    "gan.lambda_gp": (float, 10.0),
    "gan.lr": (float, 1e-4),
    "gan.beta1": (float, 0.5),
    "gan.beta2": (float, 0.9),
    "gan.shuffle_n": (int, 2),
    "gan.generate_count": (int, 50),
    "clf.epochs": (int, 150),
    "clf.batch_size": (int, 128),
    "clf.lr": (float, 1e-3),
    "clf.beta1": (float, 0.9),
    "clf.beta2": (float, 0.999),
    "clf.dropout": (float, 0.5),
    "clf.dense_width": (int, 64),
    "clf.n_classes": (int, 10),
    "clf.maxnorm_c": (float, 3.0),
    "clf.early_stop_train_acc": (float, 0.0),   # 0 disables early stopping
    "augment.stretch_rates": (str, "0.85,0.95,1.05,1.15"),
    "augment.pitch_semitones_int": (str, "-2,-1,1,2"),
    "augment.pitch_semitones_frac": (str, "-1.5,-0.5,0.5,1.5"),
    "augment.drc_profiles": (str, "speech,podcast,music,voice_radio"),
    "augment.background_scenes": (str, "background_noise,football_crowd,elaborate_thunder,creepy_background"),
    "augment.background_w_min": (float, 0.1),
    "augment.background_w_max": (float, 0.5),
    "augment.scene_seconds": (float, 8.0),
    "drc.speech": (str, "-20,4,6,5,100,6"),
    "drc.podcast": (str, "-24,3,6,10,150,8"),
    "drc.music": (str, "-16,2.5,9,15,250,4"),
    "drc.voice_radio": (str, "-18,6,3,3,80,9"),
    "filter.threshold": (float, 0.1),
    "filter.guard": (float, 1e-4),
    "filter.reject_above": (bool, False),
    "run.seed": (int, 0),
}


class ConfigError(ValueError):
    pass


def default_config() -> dict:
    return {k: v for k, (_, v) in _SCHEMA.items()}


def _parse_value(key: str, raw: str):
    typ, _ = _SCHEMA[key]
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r} as {typ.__name__}") from None


def parse_config(text: str, source: str = "<string>") -> dict:
    """Full effective config: defaults overridden by the file's key=value
    lines.  '#' starts a comment; unknown keys are an error."""
    cfg = default_config()
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line.strip()!r}")
        key, raw = body.split("=", 1)
        key = key.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        cfg[key] = _parse_value(key, raw)
    return cfg


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), source=str(path))


def load_profile(name: str) -> dict:
    """Load a packaged profile: 'full' or 'desk'."""
    ref = resources.files("escaug.configs").joinpath(f"{name}.cfg")
    try:
        text = ref.read_text(encoding="utf-8")
    except (FileNotFoundError, OSError):
        known = sorted(p.name[:-4] for p in resources.files("escaug.configs").iterdir()
                       if p.name.endswith(".cfg"))
        raise ConfigError(f"unknown profile {name!r}; packaged profiles: {', '.join(known)}")
    return parse_config(text, source=f"{name}.cfg")


def _canonical(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(cfg: dict) -> str:
    unknown = set(cfg) - set(_SCHEMA)
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    return "".join(f"{k}={_canonical(cfg[k])}\n" for k in sorted(cfg))


def write_config(path, cfg: dict):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_config(cfg))


def config_hash(cfg: dict) -> str:
    """sha256 of the canonical serialization of the effective config."""
    full = default_config()
    full.update(cfg)
    return hashlib.sha256(format_config(full).encode("utf-8")).hexdigest()


# -- typed views over the flat dict -------------------------------------

def parse_ladder(text: str, key: str = "gan.ladder") -> tuple:
    """'4x96,4x48,...,3xc' -> ((4,96),(4,48),...,(3,None))."""
    stages = []
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"{key}: empty ladder")
    for i, part in enumerate(parts):
        if "x" not in part:
            raise ConfigError(f"{key}: stage {part!r} is not STRIDExWIDTH")
        s_raw, w_raw = part.split("x", 1)
        try:
            stride = int(s_raw)
        except ValueError:
            raise ConfigError(f"{key}: bad stride in {part!r}") from None
        if w_raw.strip() == "c":
            width = None
            if i != len(parts) - 1:
                raise ConfigError(f"{key}: 'c' width only allowed on the last stage")
        else:
            try:
                width = int(w_raw)
            except ValueError:
                raise ConfigError(f"{key}: bad width in {part!r}") from None
        stages.append((stride, width))
    if stages[-1][1] is not None:
        raise ConfigError(f"{key}: last stage must have width 'c'")
    return tuple(stages)


def parse_float_list(text: str, key: str) -> tuple:
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"{key}: bad float list {text!r}") from None


def parse_name_list(text: str) -> tuple:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def arch_from_config(cfg: dict):
    from .gan import ArchConfig
    return ArchConfig(
        latent_dim=cfg["gan.latent_dim"],
        d=cfg["gan.d"],
        c=cfg["gan.c"],
        base_len=cfg["gan.base_len"],
        kernel=cfg["gan.kernel"],
        ladder=parse_ladder(cfg["gan.ladder"]),
    )


def gan_train_from_config(cfg: dict):
    from .gan import GanTrainConfig
    from .nn.optim import AdamConfig
    return GanTrainConfig(
        epochs=cfg["gan.epochs"],
        batch_size=cfg["gan.batch_size"],
        n_critic=cfg["gan.n_critic"],
        lambda_gp=cfg["gan.lambda_gp"],
        adam=AdamConfig(cfg["gan.lr"], cfg["gan.beta1"], cfg["gan.beta2"]),
    )


def feature_from_config(cfg: dict):
    from .features import FeatureConfig
    return FeatureConfig(
        sample_rate=cfg["audio.sample_rate"],
        frame_len=cfg["features.frame_len"],
        hop=cfg["features.hop"],
        n_mels=cfg["features.n_mels"],
        fmin=cfg["features.fmin"],
        fmax=cfg["features.fmax"],
        floor=cfg["features.floor"],
        patch_frames=cfg["features.patch_frames"],
    )


def cnn_from_config(cfg: dict):
    from .classifier import CnnSpec
    return CnnSpec(
        in_h=cfg["features.patch_frames"],
        in_w=cfg["features.n_mels"],
        dropout=cfg["clf.dropout"],
        dense_width=cfg["clf.dense_width"],
        n_classes=cfg["clf.n_classes"],
        maxnorm_c=cfg["clf.maxnorm_c"],
    )


def clf_train_from_config(cfg: dict):
    from .classifier import ClfTrainConfig
    from .nn.optim import AdamConfig
    early = cfg["clf.early_stop_train_acc"]
    return ClfTrainConfig(
        epochs=cfg["clf.epochs"],
        batch_size=cfg["clf.batch_size"],
        adam=AdamConfig(cfg["clf.lr"], cfg["clf.beta1"], cfg["clf.beta2"]),
        early_stop_train_acc=None if early == 0.0 else early,
    )


def drc_profile_from_config(cfg: dict, name: str):
    from .augment import DrcProfile
    key = f"drc.{name}"
    if key not in _SCHEMA:
        raise ConfigError(f"unknown compressor profile {name!r}")
    vals = parse_float_list(cfg[key], key)
    if len(vals) != 6:
        raise ConfigError(f"{key}: need 6 numbers (threshold_db, ratio, knee_db, attack_ms, release_ms, makeup_db)")
    return DrcProfile(name, *vals)
