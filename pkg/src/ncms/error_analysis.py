"""Monte Carlo error rates of the network and the closed-form upper bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import decoders
from .config import NetworkConfig, rng_stream
from .keystream import derive_bits
from .relay import (
    CrossoverProfile,
    crossover_probabilities,
    crossover_profile,
    detect_energy,
    hypothesis_variances,
    optimal_threshold,
    receive_at_charlie,
)
from .waveforms import BandKind, synthesize_frame

# Exponential-family fit of the Gaussian tail used throughout the bound.
K_COEFFS = np.array([0.168, 0.144, 0.002])
T_COEFFS = np.array([0.876, 0.525, 0.603])

Z95 = 1.959963984540054


def _ksum(x):
    """sum_i k_i / (t_i x + 1), broadcasting over x."""
    x = np.asarray(x, dtype=float)[..., None]
    return np.sum(K_COEFFS / (T_COEFFS * x + 1.0), axis=-1)


@dataclass(frozen=True)
class BoundTerms:
    c11: np.ndarray
    c12: np.ndarray
    c13: np.ndarray
    c14: np.ndarray
    c21: np.ndarray
    c22: np.ndarray
    v11: np.ndarray
    v12: np.ndarray
    v13: np.ndarray
    v14: np.ndarray
    v21: np.ndarray
    v22: np.ndarray
    v23: np.ndarray
    n1b: np.ndarray
    e_dist: np.ndarray

    def as_dict(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items()}


def bound_terms(alpha, noise_power, M) -> BoundTerms:
    alpha, n0 = np.broadcast_arrays(np.asarray(alpha, dtype=float), np.asarray(noise_power, dtype=float))
    n1b = n0 + 1.0 - alpha
    e_dist = np.sqrt(3.0 - alpha - 2.0 * np.sqrt(2.0 - alpha) * np.cos(np.pi / M))
    v13 = 1.0 / (n1b * np.sqrt(alpha) / (1.0 - alpha) ** 2 + 1.0)
    v14 = 1.0 / (n1b * np.sqrt(2.0 * alpha) / (1.0 - alpha) ** 2 + 1.0)
    shrink = (n0 / n1b) ** (n1b / (1.0 - alpha))
    return BoundTerms(
        c11=_ksum(alpha / n0),
        c12=_ksum(2.0 * alpha / n0),
        c13=_ksum(alpha / n1b),
        c14=_ksum(2.0 * alpha / n1b),
        c21=_ksum(1.0 / (2.0 * n0)),
        c22=_ksum((2.0 - alpha) / n0),
        v11=shrink * v13,
        v12=shrink * v14,
        v13=v13,
        v14=v14,
        v21=_ksum(e_dist / (2.0 * n0)),
        v22=_ksum(2.0 * (2.0 - alpha) / n0),
        v23=_ksum(2.0 / n0),
        n1b=n1b,
        e_dist=e_dist,
    )


def pe_th_components(terms: BoundTerms, prof: CrossoverProfile):
    """(cb_th1, cb_th2, hb_th1, hb_th2) for the helper and mimic bands."""
    t = terms
    cb1 = (2.0 * (t.c11 + t.c13 + t.v11 + t.v13) + t.c12 + t.v12 + t.c14 + t.v14) / 2.0
    hb1 = (2.0 * (t.c11 + t.c13) + t.c12 + t.c14) / 2.0
    p00 = 1.0 - prof.p01
    p11 = 1.0 - prof.p10
    cb2 = 0.5 * (2.0 * p11 * (t.v21 + t.c21) + 2.0 * p00 * (t.v21 + t.c22)
                 + (prof.p01 + prof.p10) * (1.0 - t.v21))
    hb2 = (2.0 * (t.c21 + t.c22) + t.v22 + t.v23) / 2.0
    return cb1, cb2, hb1, hb2


def pe_nh_th(noise_power, M):
    """Nearest-neighbour union bound on Rayleigh-faded coherent M-PSK SER."""
    g = 2.0 * math.sin(math.pi / M) ** 2
    return 2.0 * _ksum(g / np.asarray(noise_power, dtype=float))


def _profile_for(alpha, cfg: NetworkConfig) -> CrossoverProfile:
    s0, s1 = hypothesis_variances(alpha, cfg.noise_power, cfg.rho, cfg.sigma2_ac)
    tau = optimal_threshold(s0, s1, cfg.N_C)
    p01, p10 = crossover_probabilities(tau, s0, s1, cfg.N_C)
    return CrossoverProfile(tau=tau, p01=p01, p10=p10, sigma0_sq=s0, sigma1_sq=s1)


def pe_th_curve(cfg: NetworkConfig, alphas) -> np.ndarray:
    """Bound evaluated on an array of alpha values (profile recomputed per alpha)."""
    alphas = np.asarray(alphas, dtype=float)
    prof = _profile_for(alphas, cfg)
    cb1, cb2, hb1, hb2 = pe_th_components(bound_terms(alphas, cfg.noise_power, cfg.M), prof)
    nh = pe_nh_th(cfg.noise_power, cfg.M)
    return (cb1 + cb2 + cfg.L_C * (hb1 + hb2) + 2.0 * cfg.n_normal * nh) / cfg.L


def pe_th_total(cfg: NetworkConfig, prof: CrossoverProfile | None = None) -> float:
    if prof is None:
        prof = crossover_profile(cfg)
    cb1, cb2, hb1, hb2 = pe_th_components(bound_terms(cfg.alpha, cfg.noise_power, cfg.M), prof)
    nh = pe_nh_th(cfg.noise_power, cfg.M)
    return float((cb1 + cb2 + cfg.L_C * (hb1 + hb2) + 2.0 * cfg.n_normal * nh) / cfg.L)


@dataclass
class ErrorStats:
    pe_ac: float
    pe_h: float
    pe_nh: float
    pe: float
    trials: int
    ci_halfwidth: dict = field(default_factory=dict)
    pe_th: float | None = None
    detail: dict = field(default_factory=dict)

    @property
    def sigma(self) -> float:
        """Standard error of ``pe``."""
        return self.ci_halfwidth["pe"] / Z95

    def to_dict(self) -> dict:
        return {"pe_ac": self.pe_ac, "pe_h": self.pe_h, "pe_nh": self.pe_nh, "pe": self.pe,
                "trials": self.trials, "ci_halfwidth": dict(self.ci_halfwidth),
                "pe_th": self.pe_th, **self.detail}


class _Moments:
    def __init__(self):
        self.n = 0
        self.s = 0.0
        self.ss = 0.0

    def add(self, values):
        values = np.asarray(values, dtype=float)
        self.n += values.size
        self.s += float(values.sum())
        self.ss += float((values ** 2).sum())

    @property
    def mean(self):
        return self.s / self.n if self.n else float("nan")

    @property
    def halfwidth(self):
        if self.n < 2:
            return float("inf")
        var = max(self.ss / self.n - self.mean ** 2, 0.0) * self.n / (self.n - 1)
        return Z95 * math.sqrt(var / self.n)


_HELPER, _MIMIC, _NORMAL = 0, 1, 2


def simulate_pe(cfg: NetworkConfig, trials: int, seed: int | None = None, *,
                chunk: int = 20000, ac_weights=(1.0, 1.0, 1.0),
                decoder: str = "disjoint") -> ErrorStats:
    """Monte Carlo estimate of the network-average decoding error.

    One trial is one (k, n+k) slot pair on every band.  Helper-band error
    is the weighted mean of three events (Alice's bit, z_k, z_{n+k}); mimic
    and normal users count symbol errors averaged over both slots.  The
    random draws do not depend on alpha, so sweeping alpha with a fixed
    seed gives common random numbers.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if decoder not in ("disjoint", "jmap"):
        raise ValueError(f"unknown decoder {decoder!r}")
    seed = cfg.seed if seed is None else seed
    prof = crossover_profile(cfg)
    alpha, M, n0 = cfg.alpha, cfg.M, cfg.noise_power
    w = np.asarray(ac_weights, dtype=float)
    w = w / w.sum()

    acc = {name: _Moments() for name in ("ac", "h", "nh", "pe")}
    counts = {"alice_bit": 0, "z_k": 0, "z_nk": 0, "relay_crossovers": 0}
    done = 0
    for c in range(math.ceil(trials / chunk)):
        m = min(chunk, trials - done)
        done += m

        rng = rng_stream(seed, c, _HELPER)
        x = rng.integers(0, 2, size=m)
        x_hat = detect_energy(receive_at_charlie(x, cfg, rng), prof.tau)
        cb = synthesize_frame(cfg, BandKind.CB, rng, bits=x, relay_decisions=x_hat,
                              shape=(m,), receivers=("bob",))
        h_k, h_nk = cb.channels["bob_own_k"], cb.channels["bob_own_nk"]
        if decoder == "jmap":
            dec = decoders.decode_jmap_reference(cb.bob_k, cb.bob_nk, h_k, h_nk, alpha, M, n0, prof)
        else:
            dec = decoders.decode_disjoint(cb.bob_k, cb.bob_nk, h_k, h_nk, alpha, M, n0, prof)
        e_bit = decoders.end_to_end_bit(x, x_hat, dec.r_hat)
        e_zk = dec.z_hat_k != cb.sym_k
        e_znk = dec.z_hat_nk != cb.sym_nk
        ac = w[0] * e_bit + w[1] * e_zk + w[2] * e_znk
        counts["alice_bit"] += int(e_bit.sum())
        counts["z_k"] += int(e_zk.sum())
        counts["z_nk"] += int(e_znk.sum())
        counts["relay_crossovers"] += int((x_hat != x).sum())

        h = np.zeros(m)
        if cfg.L_C:
            rng = rng_stream(seed, c, _MIMIC)
            p = np.stack([derive_bits(seed, f"mimic{j}/chunk{c}", m).bits
                          for j in range(cfg.L_C)], axis=-1)
            hb = synthesize_frame(cfg, BandKind.HB, rng, bits=p, shape=p.shape, receivers=("bob",))
            u_k = decoders.decode_hb_slot_k(hb.bob_k, p, hb.channels["bob_own_k"], alpha, M, n0)
            u_nk = decoders.decode_hb_slot_nk(hb.bob_nk, p, hb.channels["bob_own_nk"], alpha, M, n0)
            h = ((u_k != hb.sym_k).astype(float) + (u_nk != hb.sym_nk)).mean(axis=-1) / 2.0

        nh = np.zeros(m)
        if cfg.n_normal:
            rng = rng_stream(seed, c, _NORMAL)
            nb = synthesize_frame(cfg, BandKind.NORMAL, rng, shape=(m, cfg.n_normal), receivers=("bob",))
            s_k = decoders.decode_coherent_psk(nb.bob_k, nb.channels["bob_own_k"], M, n0)
            s_nk = decoders.decode_coherent_psk(nb.bob_nk, nb.channels["bob_own_nk"], M, n0)
            nh = ((s_k != nb.sym_k).astype(float) + (s_nk != nb.sym_nk)).mean(axis=-1) / 2.0

        acc["ac"].add(ac)
        acc["h"].add(h)
        acc["nh"].add(nh)
        acc["pe"].add((ac + cfg.L_C * h + cfg.n_normal * nh) / cfg.L)

    pe_ac, pe_h, pe_nh = acc["ac"].mean, acc["h"].mean, acc["nh"].mean
    return ErrorStats(
        pe_ac=pe_ac,
        pe_h=pe_h if cfg.L_C else 0.0,
        pe_nh=pe_nh if cfg.n_normal else 0.0,
        pe=(pe_ac + cfg.L_C * pe_h + cfg.n_normal * pe_nh) / cfg.L,
        trials=trials,
        ci_halfwidth={k: v.halfwidth for k, v in acc.items()},
        pe_th=pe_th_total(cfg, prof),
        detail={"event_counts": counts, "profile": prof.to_dict()},
    )
