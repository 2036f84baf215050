"""Dave's countermeasure detector and the residual entropy of the helper band.

Dave knows everything about the scheme except the keys: alpha, the noise
level, M and the frame timing.  Per slot pair he compares three
likelihoods -- D1 (countermeasure, embedded bit 0), D2 (countermeasure,
embedded bit 1) and D3 (ordinary M-PSK traffic) -- and counts how often
D1 or D2 strictly beats D3.

Two likelihood models are provided:

``coherent`` (default)
    Dave tracks the channel from each band's incumbent user to himself, so
    the rotated, boosted slot n+k constellation of an embedded 0 is
    visible.  Unknown symbols are maximised out; the poured OOK term rides
    an unknown channel and is treated as Gaussian.
``energy``
    Dave has no channel knowledge; every slot is a zero-mean circular
    Gaussian whose variance depends on the hypothesis.  Here D2 and D3
    coincide, and ties go to D3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import NetworkConfig, rng_stream
from .keystream import derive_bits
from .relay import crossover_profile, detect_energy, receive_at_charlie
from .waveforms import BandKind, synthesize_frame

MODES = ("coherent", "energy")


@dataclass(frozen=True)
class BandScore:
    band: int
    m: float
    p: float
    p_n: float


@dataclass
class EntropyReport:
    H: float
    H_norm: float
    ideal: float
    scores: list = field(default_factory=list)


def ideal_normalized_entropy(L: int, L_C: int) -> float:
    return math.log2(L_C + 1) / math.log2(L - 1)


def _abs2(z):
    return z.real ** 2 + z.imag ** 2


def cpdf_log_triplet(y_k, y_nk, alpha, noise_power):
    """Energy-model log densities (logD1, logD2, logD3) of a slot pair."""
    a2, b2 = _abs2(np.asarray(y_k)), _abs2(np.asarray(y_nk))

    def pair(v_k, v_nk):
        return -a2 / v_k - math.log(math.pi * v_k) - b2 / v_nk - math.log(math.pi * v_nk)

    unit = 1.0 + noise_power
    return (pair(alpha + noise_power, 2.0 - alpha + noise_power), pair(unit, unit), pair(unit, unit))


def _psk_fit(y, g, amp, rot, M, var):
    """max over PSK symbols of log CN(y; amp g w e^{i rot}, var), up to -ln(pi)."""
    c = np.conj(y) * g
    mag = np.abs(c)
    step = 2.0 * np.pi / M
    delta = np.abs(np.mod(np.angle(c) + rot + step / 2.0, step) - step / 2.0)
    dist2 = _abs2(y) + amp * amp * _abs2(g) - 2.0 * amp * mag * np.cos(delta)
    return -dist2 / var - math.log(var)


def coherent_log_triplet(y_k, y_nk, g_k, g_nk, alpha, noise_power, M):
    """Coherent-model log densities (logD1, logD2, logD3) of a slot pair.

    ``g_k`` / ``g_nk`` are the incumbent user's channels to Dave.
    """
    n0 = noise_power
    sa, sb = math.sqrt(alpha), math.sqrt(2.0 - alpha)
    plain_nk = _psk_fit(y_nk, g_nk, 1.0, 0.0, M, n0)
    d1 = _psk_fit(y_k, g_k, sa, 0.0, M, n0) + _psk_fit(y_nk, g_nk, sb, math.pi / M, M, n0)
    d2 = _psk_fit(y_k, g_k, sa, 0.0, M, n0 + 1.0 - alpha) + plain_nk
    d3 = _psk_fit(y_k, g_k, 1.0, 0.0, M, n0) + plain_nk
    return d1, d2, d3


def classify_band(d_k, d_nk, alpha, noise_power, *, M=None, g_k=None, g_nk=None, n=None):
    """Fraction m_l of slot pairs in which the countermeasure model strictly wins.

    Reduces over the trailing axis (the n slot pairs of a frame).  Passing
    the channel estimates ``g_k`` / ``g_nk`` (and M) selects the coherent
    model, otherwise the energy model is used.
    """
    d_k, d_nk = np.asarray(d_k), np.asarray(d_nk)
    if d_k.shape != d_nk.shape:
        raise ValueError("slot k and slot n+k sample arrays must have equal shape")
    if n is not None and d_k.shape[-1] != n:
        raise ValueError(f"frame must hold 2n = {2 * n} samples, got {2 * d_k.shape[-1]}")
    if g_k is None:
        d1, d2, d3 = cpdf_log_triplet(d_k, d_nk, alpha, noise_power)
    else:
        if M is None:
            raise ValueError("M is required for the coherent model")
        d1, d2, d3 = coherent_log_triplet(d_k, d_nk, g_k, g_nk, alpha, noise_power, M)
    return (np.maximum(d1, d2) > d3).mean(axis=-1)


def _entropy_bits(m, d):
    """Softmax scores and entropy along the trailing axis."""
    z = d * np.asarray(m, dtype=float)
    z = z - z.max(axis=-1, keepdims=True)  # shift-invariant; avoids overflow
    p = np.exp(z)
    p_n = p / p.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p_n > 0, -p_n * np.log2(p_n), 0.0)
    return p_n, terms.sum(axis=-1)


def score_and_entropy(m, d, L, L_C) -> EntropyReport:
    m = np.asarray(m, dtype=float)
    if m.shape != (L - 1,):
        raise ValueError(f"expected {L - 1} band scores, got shape {m.shape}")
    if np.any((m < 0) | (m > 1)):
        raise ValueError("m_l must lie in [0, 1]")
    p_n, H = _entropy_bits(m, d)
    with np.errstate(over="ignore"):  # the unnormalised score may overflow; p_n never does
        p = np.exp(d * m)
    scores = [BandScore(l + 1, float(m[l]), float(p[l]), float(p_n[l])) for l in range(L - 1)]
    return EntropyReport(H=float(H), H_norm=float(H) / math.log2(L - 1),
                         ideal=ideal_normalized_entropy(L, L_C), scores=scores)


@dataclass
class AttackResult:
    h_norm: float
    ci_halfwidth: float
    ideal: float
    frames: int
    m_helper: np.ndarray
    m_mimic: np.ndarray
    m_normal: np.ndarray
    h_norm_per_frame: np.ndarray
    mode: str = "coherent"

    def summary(self) -> dict:
        def stats(a):
            a = np.asarray(a, dtype=float).ravel()
            if a.size == 0:
                return {"mean": None, "sem": None}
            sem = float(a.std(ddof=1) / math.sqrt(a.size)) if a.size > 1 else float("inf")
            return {"mean": float(a.mean()), "sem": sem}
        return {"h_norm": self.h_norm, "ci_halfwidth": self.ci_halfwidth, "ideal": self.ideal,
                "frames": self.frames, "mode": self.mode,
                "m_helper": stats(self.m_helper), "m_mimic": stats(self.m_mimic),
                "m_normal": stats(self.m_normal)}


def _band_m(obs, cfg, mode):
    if mode == "coherent":
        return classify_band(obs.dave_k, obs.dave_nk, cfg.alpha, cfg.noise_power, M=cfg.M,
                             g_k=obs.channels["dave_own_k"], g_nk=obs.channels["dave_own_nk"])
    return classify_band(obs.dave_k, obs.dave_nk, cfg.alpha, cfg.noise_power)


def simulate_attack(cfg: NetworkConfig, frames: int, seed: int | None = None, *,
                    mode: str = "coherent", chunk: int = 200) -> AttackResult:
    """Dave's measured normalised entropy, averaged over ``frames`` frames.

    Per frame Dave observes every band except f_AB: the helper band, the
    L_C mimic bands and the normal bands.
    """
    if frames < 1:
        raise ValueError("frames must be at least 1")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    seed = cfg.seed if seed is None else seed
    prof = crossover_profile(cfg)
    n = cfg.n
    helper, mimic, normal, hn = [], [], [], []
    done = 0
    for c in range(math.ceil(frames / chunk)):
        m_frames = min(chunk, frames - done)
        done += m_frames

        rng = rng_stream(seed, 1000 + c, 0)
        x = rng.integers(0, 2, size=(m_frames, n))
        x_hat = detect_energy(receive_at_charlie(x, cfg, rng), prof.tau)
        cb = synthesize_frame(cfg, BandKind.CB, rng, bits=x, relay_decisions=x_hat, receivers=("dave",))
        m_cb = _band_m(cb, cfg, mode)[:, None]

        m_hb = np.zeros((m_frames, 0))
        if cfg.L_C:
            rng = rng_stream(seed, 1000 + c, 1)
            p = np.stack([derive_bits(seed, f"attack-mimic{j}/chunk{c}", m_frames * n).bits.reshape(m_frames, n)
                          for j in range(cfg.L_C)], axis=1)
            hb = synthesize_frame(cfg, BandKind.HB, rng, bits=p, receivers=("dave",))
            m_hb = _band_m(hb, cfg, mode)

        m_nb = np.zeros((m_frames, 0))
        if cfg.n_normal:
            rng = rng_stream(seed, 1000 + c, 2)
            nb = synthesize_frame(cfg, BandKind.NORMAL, rng, shape=(m_frames, cfg.n_normal, n),
                                  receivers=("dave",))
            m_nb = _band_m(nb, cfg, mode)

        m_all = np.concatenate([m_cb, m_hb, m_nb], axis=1)
        _, H = _entropy_bits(m_all, cfg.d)
        hn.append(H / math.log2(cfg.L - 1))
        helper.append(m_cb[:, 0])
        mimic.append(m_hb)
        normal.append(m_nb)

    hn = np.concatenate(hn)
    ci = 1.959963984540054 * hn.std(ddof=1) / math.sqrt(hn.size) if hn.size > 1 else float("inf")
    return AttackResult(
        h_norm=float(hn.mean()), ci_halfwidth=float(ci),
        ideal=ideal_normalized_entropy(cfg.L, cfg.L_C), frames=frames,
        m_helper=np.concatenate(helper), m_mimic=np.concatenate(mimic, axis=0),
        m_normal=np.concatenate(normal, axis=0), h_norm_per_frame=hn, mode=mode,
    )
