import cmath
import math

import numpy as np
import pytest
from scipy import integrate

from ncms import decoders as D
from ncms.config import NetworkConfig
from ncms.error_analysis import simulate_pe
from ncms.relay import CrossoverProfile
from ncms.waveforms import psk_points

N_INSTANCES = 10**4


# ---- brute-force reference rules, one hypothesis at a time ----

def logpdf(y, mean, var):
    return -abs(y - mean) ** 2 / var - math.log(math.pi * var)


def w(s, M):
    return cmath.exp(-2j * math.pi * s / M)


def pick(hyps):
    """First hypothesis with the largest metric (strict improvement only)."""
    best, arg = -math.inf, None
    for h, m in hyps:
        if m > best:
            best, arg = m, h
    return arg


def ref_cb_k(y, h, a, M, n0):
    return pick(((s, x), logpdf(y, math.sqrt(a) * h * w(s, M), n0 + (1 - a) * x))
                for s in range(M) for x in (0, 1))[0]


def ref_cb_nk(y, h, a, M, n0, prof):
    prior = [math.log((prof.p00 + prof.p10) / 2), math.log((prof.p01 + prof.p11) / 2)]
    gain = [math.sqrt(2 - a) * cmath.exp(1j * math.pi / M), 1.0]
    r, s = None, None
    (s, r) = pick(((s, r), logpdf(y, gain[r] * h * w(s, M), n0) + prior[r])
                  for s in range(M) for r in (0, 1))
    return r, s


def ref_jmap(yk, ynk, hk, hnk, a, M, n0, prof):
    trans = [[prof.p00, prof.p01], [prof.p10, prof.p11]]
    gain = [math.sqrt(2 - a) * cmath.exp(1j * math.pi / M), 1.0]
    hyps = []
    for sk in range(M):
        for snk in range(M):
            for r in (0, 1):
                lk = logpdf(yk, math.sqrt(a) * hk * w(sk, M), n0 + (1 - a) * r)
                mix = sum(trans[r][xh] * math.exp(logpdf(ynk, gain[xh] * hnk * w(snk, M), n0))
                          for xh in (0, 1))
                hyps.append(((sk, snk, r), lk + math.log(mix) if mix > 0 else -math.inf))
    return pick(hyps)


def ref_hb_k(y, p, h, a, M, n0):
    return pick((s, logpdf(y, math.sqrt(a) * h * w(s, M), n0 + (1 - a) * p)) for s in range(M))


def ref_hb_nk(y, p, h, a, M, n0):
    g = 1.0 if p else math.sqrt(2 - a) * cmath.exp(1j * math.pi / M)
    return pick((s, logpdf(y, g * h * w(s, M), n0)) for s in range(M))


def ref_psk(y, h, M, n0):
    return pick((s, logpdf(y, h * w(s, M), n0)) for s in range(M))


def instances(seed, M, n=N_INSTANCES):
    """Observations drawn from the model itself, with random alpha and SNR."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.5, 0.9999, n)
    n0 = 10 ** (-rng.uniform(0, 35, n) / 10)
    cs = lambda: (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2)
    h1, h2, h3 = cs(), cs(), cs()
    bits = rng.integers(0, 2, n)
    sk, snk = rng.integers(0, M, n), rng.integers(0, M, n)
    pts = psk_points(M)
    yk = np.sqrt(a) * h1 * pts[sk] + np.sqrt(1 - a) * bits * h3 + np.sqrt(n0) * cs()
    gain = np.where(bits == 0, np.sqrt(2 - a) * np.exp(1j * np.pi / M), 1.0)
    ynk = gain * h2 * pts[snk] + np.sqrt(n0) * cs()
    return a, n0, h1, h2, bits, yk, ynk


def profile(p01=0.03, p10=0.07):
    return CrossoverProfile(tau=1.0, p01=p01, p10=p10, sigma0_sq=1.0, sigma1_sq=2.0)


@pytest.mark.parametrize("M", [2, 4, 8])
def test_cb_slot_k_matches_enumeration(M):
    a, n0, h1, _, _, yk, _ = instances(1, M)
    got = np.array([D.decode_cb_slot_k(yk[i], h1[i], a[i], M, n0[i]) for i in range(N_INSTANCES)])
    ref = np.array([ref_cb_k(yk[i], h1[i], a[i], M, n0[i]) for i in range(N_INSTANCES)])
    assert np.array_equal(got, ref)


@pytest.mark.parametrize("M", [2, 4, 8])
def test_cb_slot_nk_matches_enumeration(M):
    a, n0, _, h2, _, _, ynk = instances(2, M)
    prof = profile()
    r, s = D.decode_cb_slot_nk(ynk, h2, a[0], M, n0[0], prof)  # batched path, fixed alpha/N0
    for i in range(N_INSTANCES):
        assert (int(r[i]), int(s[i])) == ref_cb_nk(ynk[i], h2[i], a[0], M, n0[0], prof)


@pytest.mark.parametrize("M", [2, 4])
def test_jmap_matches_enumeration(M):
    a, n0, h1, h2, _, yk, ynk = instances(3, M)
    prof = profile(0.01, 0.2)
    dec = D.decode_jmap_reference(yk, ynk, h1, h2, a[0], M, n0[0], prof)
    for i in range(N_INSTANCES):
        want = ref_jmap(yk[i], ynk[i], h1[i], h2[i], a[0], M, n0[0], prof)
        assert (int(dec.z_hat_k[i]), int(dec.z_hat_nk[i]), int(dec.r_hat[i])) == want


@pytest.mark.parametrize("M", [2, 4, 8])
def test_mimic_decoders_match_enumeration(M):
    a, n0, h1, h2, bits, yk, ynk = instances(4, M)
    uk = D.decode_hb_slot_k(yk, bits, h1, a, M, n0)
    unk = D.decode_hb_slot_nk(ynk, bits, h2, a, M, n0)
    for i in range(N_INSTANCES):
        assert uk[i] == ref_hb_k(yk[i], bits[i], h1[i], a[i], M, n0[i])
        assert unk[i] == ref_hb_nk(ynk[i], bits[i], h2[i], a[i], M, n0[i])


@pytest.mark.parametrize("M", [2, 4, 8, 16])
def test_coherent_psk_matches_enumeration(M):
    _, n0, h1, _, _, yk, _ = instances(5, M)
    s = D.decode_coherent_psk(yk, h1, M, n0)
    for i in range(N_INSTANCES):
        assert s[i] == ref_psk(yk[i], h1[i], M, n0[i])


def test_jmap_m2_single_instance_table():
    prof = profile(0.05, 0.1)
    yk, ynk, hk, hnk, a, n0 = 0.3 - 0.5j, -0.8 + 0.4j, 0.7 + 0.2j, -0.6 + 0.9j, 0.9, 0.05
    table = D.jmap_metrics(yk, ynk, hk, hnk, a, 2, n0, prof)
    assert table.shape == (2, 2, 2)
    for sk in range(2):
        for snk in range(2):
            for r in range(2):
                lk = logpdf(yk, math.sqrt(a) * hk * w(sk, 2), n0 + (1 - a) * r)
                t = [[prof.p00, prof.p01], [prof.p10, prof.p11]][r]
                mix = t[0] * math.exp(logpdf(ynk, math.sqrt(2 - a) * 1j * hnk * w(snk, 2), n0)) \
                    + t[1] * math.exp(logpdf(ynk, hnk * w(snk, 2), n0))
                assert table[sk, snk, r] == pytest.approx(lk + math.log(mix), rel=1e-12)


def test_hypothesis_counts():
    M = 8
    prof = profile()
    assert D.cb_slot_k_metrics(0j, 1, 0.9, M, 0.1).size == 2 * M
    assert D.cb_slot_nk_metrics(0j, 1, 0.9, M, 0.1, prof).size == 2 * M
    assert D.jmap_metrics(0j, 0j, 1, 1, 0.9, M, 0.1, prof).size == 2 * M * M
    assert D.hb_slot_k_metrics(0j, 1, 1, 0.9, M, 0.1).size == M
    assert D.hb_slot_nk_metrics(0j, 1, 1, 0.9, M, 0.1).size == M
    assert D.coherent_psk_metrics(0j, 1, M, 0.1).size == M


def test_noiseless_recovery():
    M, a, h = 4, 0.95, 0.8 - 0.3j
    prof = profile()
    for s in range(M):
        assert D.decode_cb_slot_k(math.sqrt(a) * h * w(s, M), h, a, M, 1e-9) == s
        y0 = math.sqrt(2 - a) * h * w(s, M) * cmath.exp(1j * math.pi / M)
        assert tuple(map(int, D.decode_cb_slot_nk(y0, h, a, M, 1e-9, prof))) == (0, s)
        assert tuple(map(int, D.decode_cb_slot_nk(h * w(s, M), h, a, M, 1e-9, prof))) == (1, s)
        assert D.decode_hb_slot_k(np.sqrt(a) * h * w(s, M), 0, h, a, M, 1e-9) == s
        assert D.decode_hb_slot_nk(y0, 0, h, a, M, 1e-9) == s
        assert D.decode_hb_slot_nk(h * w(s, M), 1, h, a, M, 1e-9) == s
        assert D.decode_coherent_psk(h * w(s, M), h, M, 1e-9) == s
        dec = D.decode_jmap_reference(math.sqrt(a) * h * w(s, M), y0, h, h, a, M, 1e-9, prof)
        assert (int(dec.z_hat_k), int(dec.z_hat_nk), int(dec.r_hat)) == (s, s, 0)


def test_cb_slot_k_reduces_to_coherent_as_alpha_to_one():
    _, n0, h1, _, _, yk, _ = instances(6, 4, 2000)
    a = 1 - 1e-12
    assert np.array_equal(D.decode_cb_slot_k(yk, h1, a, 4, n0), D.decode_coherent_psk(yk, np.sqrt(a) * h1, 4, n0))


def test_mimic_slot_k_ignores_pour_flag():
    a, n0, h1, _, _, yk, _ = instances(7, 8, 2000)
    assert np.array_equal(D.decode_hb_slot_k(yk, 0, h1, a, 8, n0), D.decode_hb_slot_k(yk, 1, h1, a, 8, n0))


def test_boundary_tie_goes_to_smaller_index():
    M, h = 4, 1.0 + 0j
    for s in range(M):
        y_plus = w(s, M) * cmath.exp(1j * math.pi / M)   # halfway to s-1
        y_minus = w(s, M) * cmath.exp(-1j * math.pi / M)  # halfway to s+1
        assert D.decode_coherent_psk(y_plus, h, M, 0.1) == min(s, (s - 1) % M)
        assert D.decode_coherent_psk(y_minus, h, M, 0.1) == min(s, (s + 1) % M)


def test_argmax_invariant_to_positive_scaling():
    rng = np.random.default_rng(8)
    m = rng.standard_normal((500, 4, 2))
    for c in (0.01, 3.0, 1e6):
        assert np.array_equal(D.first_argmax(m, 2), D.first_argmax(c * m, 2))


@pytest.mark.parametrize("x, xh, r, err", [(0, 0, 0, False), (1, 0, 0, True), (1, 0, 1, False), (0, 1, 1, True)])
def test_end_to_end_bit(x, xh, r, err):
    assert bool(D.end_to_end_bit(x, xh, r)) is err


def rayleigh_mpsk_ser(snr, M):
    g = snr * math.sin(math.pi / M) ** 2
    val, _ = integrate.quad(lambda t: 1.0 / (1.0 + g / math.sin(t) ** 2), 1e-12, (M - 1) * math.pi / M)
    return val / math.pi


def test_coherent_psk_ser_matches_rayleigh_integral():
    n, M, n0 = 10**6, 4, 0.01
    rng = np.random.default_rng(9)
    h = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2)
    s = rng.integers(0, M, n)
    y = h * psk_points(M)[s] + math.sqrt(n0 / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    ser = np.mean(D.decode_coherent_psk(y, h, M, n0) != s)
    p = rayleigh_mpsk_ser(1 / n0, M)
    assert abs(ser - p) <= 4 * math.sqrt(p * (1 - p) / n)


def test_error_rates_fall_with_snr():
    rows = [simulate_pe(NetworkConfig(snr_db=s, alpha=0.99).with_(), 10**5, seed=4) for s in (10, 15, 20, 25, 30)]
    for key in ("ac", "h", "nh"):
        vals = [getattr(r, f"pe_{key}") for r in rows]
        ses = [r.ci_halfwidth[key] / 1.959963984540054 for r in rows]
        for i in range(4):
            assert vals[i + 1] < vals[i] + 3 * math.hypot(ses[i], ses[i + 1])
