"""Key-value config files for generator, kernel, similarity, and ensemble defaults.

Format: one `section.key = value` per line, `#` comments, blank lines
ignored.  Values are parsed as int, float, bool, comma tuples of numbers,
or left as strings.  Example:

    # dataset generation
    generator.n_id = 900
    generator.n_ood = 100
    generator.sample_rate_hz = 30
    # shared GP kernel (omit to fit by marginal likelihood)
    kernel.lengthscales = 0.4, 0.4
    kernel.signal_variance = 0.5
    kernel.noise_variance = 0.005
    similarity.kappa = 1.0
    similarity.window = 90
    ensemble.chunk_size = 30
    ensemble.decay = 0.8
    prediction.k_neighbors = 10
    prediction.inducing_ratio = 0.4
"""
from __future__ import annotations

from dataclasses import fields
from pathlib import Path

from .dataset import GeneratorConfig
from .similarity import SimilarityConfig
from .spgp import KernelParams


class ConfigError(ValueError):
    pass


def _parse_value(raw: str):
    raw = raw.strip()
    if "," in raw:
        return tuple(_parse_value(part) for part in raw.split(","))
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def load_config(path) -> dict:
    """Flat dict of dotted keys -> parsed values."""
    out: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'section.key = value'")
        key, _, raw = stripped.partition("=")
        out[key.strip()] = _parse_value(raw)
    return out


def _section(cfg: dict, prefix: str) -> dict:
    plen = len(prefix) + 1
    return {k[plen:]: v for k, v in cfg.items() if k.startswith(prefix + ".")}


def generator_config(cfg: dict) -> GeneratorConfig:
    known = {f.name for f in fields(GeneratorConfig)}
    vals = _section(cfg, "generator")
    unknown = set(vals) - known
    if unknown:
        raise ConfigError(f"unknown generator keys: {sorted(unknown)}")
    return GeneratorConfig(**vals)


def kernel_params(cfg: dict) -> KernelParams | None:
    vals = _section(cfg, "kernel")
    if not vals:
        return None
    ls = vals.get("lengthscales", (0.4, 0.4))
    if not isinstance(ls, tuple):
        ls = (ls, ls)
    return KernelParams(lengthscales=ls,
                        signal_variance=vals.get("signal_variance", 0.5),
                        noise_variance=vals.get("noise_variance", 5e-3))


def sim_config(cfg: dict) -> SimilarityConfig:
    vals = _section(cfg, "similarity")
    return SimilarityConfig(kappa=vals.get("kappa", 1.0),
                            min_speed=vals.get("min_speed", 0.05),
                            window=vals.get("window", 90))


def ensemble_settings(cfg: dict) -> tuple[int, float]:
    vals = _section(cfg, "ensemble")
    return int(vals.get("chunk_size", 30)), float(vals.get("decay", 0.8))


def prediction_settings(cfg: dict) -> dict:
    vals = _section(cfg, "prediction")
    return {"k_neighbors": int(vals.get("k_neighbors", 10)),
            "inducing_ratio": float(vals.get("inducing_ratio", 0.4))}
