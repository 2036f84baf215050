"""Scenario configuration, RNG substreams and circular Gaussian sampling."""

from __future__ import annotations

import configparser
import dataclasses
import json
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """Raised when a NetworkConfig violates one or more invariants.

    ``errors`` holds every violation, each message starting with the field name.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class NetworkConfig:
    L: int = 42
    L_C: int = 10
    N_C: int = 4
    alpha: float = 0.9987
    M: int = 4
    snr_db: float = 35.0
    # Charlie's loop-interference level and Alice->Charlie channel variance are
    # not published; these values make the error bound's minimiser land on the
    # published operating points (see README).
    rho: float = 1e-6
    sigma2_ac: float = 4.0
    n: int = 100
    d: float = 10.0
    seed: int = 0
    f: int | None = None
    noise_power: float | None = None

    @property
    def n_mimic_pairs(self) -> int:
        return self.L_C // 2

    @property
    def n_normal(self) -> int:
        return self.L - self.L_C - 2

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def with_(self, **changes) -> "NetworkConfig":
        """Copy with ``changes`` applied and derived fields recomputed."""
        if "snr_db" in changes and "noise_power" not in changes:
            changes["noise_power"] = None
        if "n" in changes and "f" not in changes:
            changes["f"] = None
        return validate_config(replace(self, **changes))


def snr_to_noise_power(snr_db: float) -> float:
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    return 10.0 ** (-snr_db / 10.0)


def _is_power_of_two(m) -> bool:
    return isinstance(m, (int, np.integer)) and m >= 2 and (m & (m - 1)) == 0


def validate_config(cfg: NetworkConfig) -> NetworkConfig:
    """Check every invariant and return the config with derived fields filled.

    All violations are collected before raising, so a bad config file reports
    everything at once.
    """
    errors = []
    if cfg.L < 4:
        errors.append("L must be at least 4")
    if cfg.L_C % 2 != 0:
        errors.append("L_C must be even")
    if cfg.L_C < 0 or cfg.L_C > cfg.L - 2:
        errors.append("L_C must satisfy 0 <= L_C <= L-2")
    if cfg.N_C < 1:
        errors.append("N_C must be at least 1")
    if not 0.0 < cfg.alpha < 1.0:
        errors.append("alpha must lie strictly in (0, 1)")
    if not _is_power_of_two(cfg.M):
        errors.append("M must be a power of two >= 2")
    if not math.isfinite(cfg.snr_db):
        errors.append("snr_db must be finite")
    if not 0.0 < cfg.rho < 1.0:
        errors.append("rho must lie strictly in (0, 1)")
    if not cfg.sigma2_ac > 0.0:
        errors.append("sigma2_ac must be positive")
    if cfg.n < 1:
        errors.append("n must be at least 1")
    if not cfg.d > 0.0:
        errors.append("d must be positive")

    f = 2 * cfg.n if cfg.f is None else cfg.f
    if f != 2 * cfg.n:
        errors.append("f must equal 2n (Dave observes whole frames)")

    noise_power = cfg.noise_power
    if math.isfinite(cfg.snr_db):
        expected = snr_to_noise_power(cfg.snr_db)
        if noise_power is None:
            noise_power = expected
        elif not math.isclose(noise_power, expected, rel_tol=1e-12):
            errors.append("noise_power must equal 10^(-snr_db/10)")

    if errors:
        raise ConfigError(errors)
    return replace(cfg, f=f, noise_power=noise_power)


_CASTS = {f.name: f.type for f in fields(NetworkConfig)}


def _cast(name, raw):
    kind = _CASTS[name]
    if "int" in kind and "float" not in kind:
        return int(raw)
    return float(raw)


def load_config(path, **overrides) -> NetworkConfig:
    """Read a ``key = value`` (or JSON) config file, apply overrides, validate."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        values = json.loads(text)
    else:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        parser.read_string("[network]\n" + text)
        values = dict(parser["network"])
    unknown = sorted(set(values) - set(_CASTS))
    if unknown:
        raise ConfigError([f"{k} is not a NetworkConfig field" for k in unknown])
    kwargs = {k: _cast(k, v) for k, v in values.items() if v is not None}
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return validate_config(NetworkConfig(**kwargs))


def dump_config(cfg: NetworkConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in cfg.to_dict().items() if v is not None)


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the substream addressed by ``key``.

    The same (seed, key) always yields the same stream, regardless of which
    other streams were drawn before it, so trial chunks can run anywhere.
    """
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def sample_cscg(rng: np.random.Generator, variance: float, size) -> np.ndarray:
    """Circularly-symmetric complex Gaussian draws with E|h|^2 = variance."""
    if variance < 0:
        raise ValueError("variance must be non-negative")
    size = (size,) if np.isscalar(size) else tuple(size)
    z = rng.standard_normal(size + (2,)).view(np.complex128)[..., 0]
    z *= math.sqrt(variance / 2.0)
    return z
