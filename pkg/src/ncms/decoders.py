"""Bob's decision rules.

Each rule is exposed twice: ``*_metrics`` returns the full table of
hypothesis log-likelihoods (trailing axes enumerate the hypotheses) and the
``decode_*`` wrapper picks the winner.  Everything broadcasts over leading
axes, so a whole Monte Carlo batch is decoded in one call.

Ties go to the smallest symbol index, then to bit 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .relay import CrossoverProfile
from .waveforms import embedded_amplitude, embedded_phase, psk_points

TIE_RTOL = 1e-12


@dataclass(frozen=True)
class CbDecision:
    r_hat: np.ndarray
    z_hat_k: np.ndarray
    z_hat_nk: np.ndarray


def gaussian_logpdf(y, mean, var):
    """Log density of CN(mean, var) at y."""
    d = y - mean
    return -(d.real ** 2 + d.imag ** 2) / var - np.log(np.pi * var)


def first_argmax(metrics, ndim=1):
    """Flat index of the best hypothesis over the trailing ``ndim`` axes.

    Values within a relative 1e-12 of the maximum count as tied and the
    lowest flat index wins.
    """
    lead = metrics.shape[:metrics.ndim - ndim]
    flat = metrics.reshape(lead + (-1,))
    best = flat.max(axis=-1, keepdims=True)
    tied = flat >= best - TIE_RTOL * np.maximum(1.0, np.abs(best))
    return np.argmax(tied, axis=-1)


def _expand(a, extra):
    a = np.asarray(a)
    return a.reshape(a.shape + (1,) * extra)


def cb_slot_k_metrics(y, h_cb, alpha, M, noise_power):
    """Table over (s_k, x_k): Charlie's symbol plus Alice's unknown-channel OOK."""
    w = psk_points(M)[:, None]
    var = _expand(noise_power, 2) + _expand(1.0 - np.asarray(alpha), 2) * np.array([0.0, 1.0])
    mean = _expand(np.sqrt(alpha) * h_cb, 2) * w
    return gaussian_logpdf(_expand(y, 2), mean, var)


def decode_cb_slot_k(y, h_cb, alpha, M, noise_power):
    idx = first_argmax(cb_slot_k_metrics(y, h_cb, alpha, M, noise_power), ndim=2)
    return idx // 2


def embedded_bit_log_prior(prof: CrossoverProfile):
    """log P(x_hat = 0), log P(x_hat = 1) for equiprobable Alice bits."""
    with np.errstate(divide="ignore"):
        return np.log(np.array([(prof.p00 + prof.p10) / 2.0, (prof.p01 + prof.p11) / 2.0]))


def _slot_nk_means(h, alpha, M):
    """Means over (s, r): r=0 is the boosted, rotated symbol, r=1 the plain one."""
    h = np.asarray(h)
    gains = np.stack(np.broadcast_arrays(np.sqrt(2.0 - alpha) * np.exp(1j * np.pi / M) * h, h), axis=-1)
    return gains[..., None, :] * psk_points(M)[:, None]


def cb_slot_nk_metrics(y, h_cb, alpha, M, noise_power, prof: CrossoverProfile):
    """Table over (s_nk, r): embedded bit hypotheses weighted by their priors."""
    ll = gaussian_logpdf(_expand(y, 2), _slot_nk_means(h_cb, alpha, M), _expand(noise_power, 2))
    return ll + embedded_bit_log_prior(prof)


def decode_cb_slot_nk(y, h_cb, alpha, M, noise_power, prof: CrossoverProfile):
    """Returns (r_hat, s_hat): Charlie's embedded bit and his slot n+k symbol."""
    idx = first_argmax(cb_slot_nk_metrics(y, h_cb, alpha, M, noise_power, prof), ndim=2)
    return idx % 2, idx // 2


def decode_disjoint(y_k, y_nk, h_k, h_nk, alpha, M, noise_power, prof) -> CbDecision:
    s_k = decode_cb_slot_k(y_k, h_k, alpha, M, noise_power)
    r, s_nk = decode_cb_slot_nk(y_nk, h_nk, alpha, M, noise_power, prof)
    return CbDecision(r, s_k, s_nk)


def end_to_end_bit(x_true, x_charlie, r_bob):
    """Alice's bit is lost iff Bob's estimate differs from what she sent.

    Charlie's decision is accepted for symmetry with the bound's event split
    but cannot change the verdict on its own.
    """
    del x_charlie
    return np.asarray(r_bob) != np.asarray(x_true)


def jmap_metrics(y_k, y_nk, h_k, h_nk, alpha, M, noise_power, prof: CrossoverProfile):
    """Exact joint log-CPDF over (s_k, s_nk, r) -- 2 M^2 hypotheses.

    Slot n+k is a two-component Gaussian mixture weighted by Charlie's
    transition probabilities P(x_hat | x = r).
    """
    slot_k = cb_slot_k_metrics(y_k, h_k, alpha, M, noise_power)                      # (..., s_k, r)
    nk = gaussian_logpdf(_expand(y_nk, 2), _slot_nk_means(h_nk, alpha, M), _expand(noise_power, 2))  # (..., s_nk, x_hat)
    with np.errstate(divide="ignore"):
        trans = np.log(np.array([[prof.p00, prof.p01], [prof.p10, prof.p11]]))   # [r, x_hat]
    mix = np.logaddexp(nk[..., None, 0] + trans[:, 0], nk[..., None, 1] + trans[:, 1])  # (..., s_nk, r)
    return slot_k[..., :, None, :] + mix[..., None, :, :]


def decode_jmap_reference(y_k, y_nk, h_k, h_nk, alpha, M, noise_power, prof) -> CbDecision:
    idx = first_argmax(jmap_metrics(y_k, y_nk, h_k, h_nk, alpha, M, noise_power, prof), ndim=3)
    s_k, rest = np.divmod(idx, 2 * M)
    s_nk, r = np.divmod(rest, 2)
    return CbDecision(r, s_k, s_nk)


def hb_slot_k_metrics(y, p_k, h_hb, alpha, M, noise_power):
    """Henry's symbol with Tom's pour (when p_k = 1) as Rayleigh interference."""
    var = _expand(noise_power + (1.0 - np.asarray(alpha)) * np.asarray(p_k), 1)
    mean = _expand(np.sqrt(alpha) * h_hb, 1) * psk_points(M)
    return gaussian_logpdf(_expand(y, 1), mean, var)


def decode_hb_slot_k(y, p_k, h_hb, alpha, M, noise_power):
    # the pour only inflates the variance, shared by all symbols
    return nearest_psk(y, np.sqrt(alpha) * h_hb, M, noise_power + (1.0 - alpha) * np.asarray(p_k))


def hb_slot_nk_metrics(y, p_k, h_hb, alpha, M, noise_power):
    """Henry's slot n+k constellation, boosted and rotated when p_k = 0."""
    gain = embedded_amplitude(p_k, alpha) * np.exp(1j * embedded_phase(p_k, M))
    mean = _expand(h_hb * gain, 1) * psk_points(M)
    return gaussian_logpdf(_expand(y, 1), mean, _expand(noise_power, 1))


def decode_hb_slot_nk(y, p_k, h_hb, alpha, M, noise_power):
    gain = embedded_amplitude(p_k, alpha) * np.exp(1j * embedded_phase(p_k, M))
    return nearest_psk(y, h_hb * gain, M, noise_power)


def coherent_psk_metrics(y, h, M, noise_power):
    return gaussian_logpdf(_expand(y, 1), _expand(h, 1) * psk_points(M), _expand(noise_power, 1))


def decode_coherent_psk(y, h, M, noise_power):
    return nearest_psk(y, h, M, noise_power)


def nearest_psk(y, g, M, var):
    """Index of the PSK point w_s maximising CN(y; g w_s, var), found from the phase.

    Valid whenever all M hypotheses share one variance.  Samples within
    1e-9 of a decision boundary are re-decided from the full metric table
    so the tie rule matches ``first_argmax``.
    """
    y, g = np.broadcast_arrays(np.asarray(y), np.asarray(g))
    shape = y.shape
    y, g = y.reshape(-1), g.reshape(-1)
    t = -np.angle(y * np.conj(g)) * (M / (2.0 * np.pi))
    r = np.rint(t)
    s = r.astype(np.int64) % M
    near = np.abs(np.abs(t - r) - 0.5) < 1e-9
    if near.any():
        v = np.broadcast_to(var, y.shape)[near]
        table = gaussian_logpdf(y[near][:, None], g[near][:, None] * psk_points(M), v[:, None])
        s[near] = first_argmax(table)
    return s.reshape(shape) if shape else s[0]
