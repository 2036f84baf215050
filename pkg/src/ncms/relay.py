"""Charlie's full-duplex listening and energy detection of Alice's bit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, gammaincc

from .config import NetworkConfig, sample_cscg


@dataclass(frozen=True)
class CrossoverProfile:
    tau: float
    p01: float
    p10: float
    sigma0_sq: float
    sigma1_sq: float

    @property
    def p00(self) -> float:
        return 1.0 - self.p01

    @property
    def p11(self) -> float:
        return 1.0 - self.p10

    def to_dict(self) -> dict:
        return {"tau": self.tau, "p01": self.p01, "p10": self.p10,
                "p00": self.p00, "p11": self.p11,
                "sigma0_sq": self.sigma0_sq, "sigma1_sq": self.sigma1_sq}


def hypothesis_variances(alpha, noise_power, rho, sigma2_ac):
    """Per-antenna received variance at Charlie when Alice sends 0 and 1."""
    sigma0_sq = noise_power + alpha * rho
    return sigma0_sq, sigma0_sq + (1.0 - alpha) * sigma2_ac


def receive_at_charlie(x, cfg: NetworkConfig, rng: np.random.Generator) -> np.ndarray:
    """Charlie's N_C-antenna observation; trailing axis is the antenna."""
    x = np.asarray(x)
    shape = x.shape + (cfg.N_C,)
    h_ac = sample_cscg(rng, cfg.sigma2_ac, shape)
    h_cc = sample_cscg(rng, cfg.alpha * cfg.rho, shape)
    noise = sample_cscg(rng, cfg.noise_power, shape)
    return np.sqrt(1.0 - cfg.alpha) * h_ac * x[..., None] + h_cc + noise


def optimal_threshold(sigma0_sq, sigma1_sq, N_C):
    """Equal-prior likelihood-ratio threshold on the total received energy.

    Under each hypothesis the energy summed over N_C antennas is Erlang with
    shape N_C; the two densities cross at the returned value.
    """
    sigma0_sq = np.asarray(sigma0_sq, dtype=float)
    sigma1_sq = np.asarray(sigma1_sq, dtype=float)
    if np.any(sigma0_sq <= 0):
        raise ValueError("sigma0_sq must be positive")
    if np.any(sigma1_sq <= sigma0_sq):
        raise ValueError("non-identifiable: sigma1_sq must exceed sigma0_sq")
    tau = N_C * sigma0_sq * sigma1_sq * np.log(sigma1_sq / sigma0_sq) / (sigma1_sq - sigma0_sq)
    return tau if tau.ndim else float(tau)


def detect_energy(y_c, tau) -> np.ndarray:
    """1 where the energy over the trailing (antenna) axis exceeds tau; ties give 0."""
    energy = np.sum(np.abs(np.asarray(y_c)) ** 2, axis=-1)
    return (energy > tau).astype(np.int8)


def crossover_probabilities(tau, sigma0_sq, sigma1_sq, N_C):
    """(P_01, P_10) of the energy detector from the Erlang tails."""
    p01 = gammaincc(N_C, np.asarray(tau) / sigma0_sq)
    p10 = gammainc(N_C, np.asarray(tau) / sigma1_sq)
    if np.ndim(p01) == 0:
        return float(p01), float(p10)
    return p01, p10


def crossover_profile(cfg: NetworkConfig) -> CrossoverProfile:
    s0, s1 = hypothesis_variances(cfg.alpha, cfg.noise_power, cfg.rho, cfg.sigma2_ac)
    tau = optimal_threshold(s0, s1, cfg.N_C)
    p01, p10 = crossover_probabilities(tau, s0, s1, cfg.N_C)
    return CrossoverProfile(tau=tau, p01=p01, p10=p10, sigma0_sq=s0, sigma1_sq=s1)
