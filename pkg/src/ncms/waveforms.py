"""Transmit programs for every band type and received-sample synthesis.

Slot k and slot n+k of a frame are kept in separate arrays (``*_k`` and
``*_nk``); the trailing axis runs over the n slot pairs, leading axes are
free batch dimensions.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .config import NetworkConfig, sample_cscg


class BandKind(str, enum.Enum):
    CB = "CB"          # helper band: Alice + Charlie
    AB = "AB"          # Alice's vacated band, filled with poured OOK
    HB = "HB"          # mimic band
    NORMAL = "NORMAL"  # non-participating user


def psk_points(M: int) -> np.ndarray:
    return np.exp(-2j * np.pi * np.arange(M) / M)


@dataclass(frozen=True)
class PskSymbol:
    index: int
    M: int

    def __post_init__(self):
        if not 0 <= self.index < self.M:
            raise ValueError(f"symbol index {self.index} outside 0..{self.M - 1}")

    @property
    def value(self) -> complex:
        return complex(np.exp(-2j * np.pi * self.index / self.M))


@dataclass(frozen=True)
class Contribution:
    amplitude: float
    symbol: Union[PskSymbol, int]  # PSK symbol, or an OOK bit (always 1 when active)
    phase: float = 0.0
    source: str = field(default="", compare=False)

    @property
    def value(self) -> complex:
        s = self.symbol.value if isinstance(self.symbol, PskSymbol) else float(self.symbol)
        return self.amplitude * s * np.exp(1j * self.phase)


@dataclass(frozen=True)
class SlotTransmission:
    band_kind: BandKind
    slot_phase: str  # "k" or "n+k"
    contributions: tuple = ()

    @property
    def program(self):
        """(amplitude, symbol, phase) triples, independent of who transmits them."""
        return tuple((c.amplitude, c.symbol, c.phase) for c in self.contributions)

    @property
    def energy(self) -> float:
        return sum(c.amplitude ** 2 for c in self.contributions)


def embedded_amplitude(bit, alpha):
    """Slot n+k amplitude: sqrt(2 - alpha) for an embedded 0, unity for a 1."""
    return np.where(np.asarray(bit) == 0, np.sqrt(2.0 - alpha), 1.0)


def embedded_phase(bit, M):
    return np.where(np.asarray(bit) == 0, np.pi / M, 0.0)


def _pour_then_own(kind, bit, symbol, alpha, pour_source, own_source):
    contribs = []
    if bit:
        contribs.append(Contribution(math.sqrt(1.0 - alpha), 1, 0.0, pour_source))
    contribs.append(Contribution(math.sqrt(alpha), symbol, 0.0, own_source))
    return SlotTransmission(kind, "k", tuple(contribs))


def _embedded(kind, bit, symbol, alpha, M, source):
    amp = float(embedded_amplitude(bit, alpha))
    phase = float(embedded_phase(bit, M))
    return SlotTransmission(kind, "n+k", (Contribution(amp, symbol, phase, source),))


def tx_cb_slot_k(x_k: int, z_k: PskSymbol, alpha: float) -> SlotTransmission:
    return _pour_then_own(BandKind.CB, x_k, z_k, alpha, "alice", "charlie")


def tx_cb_slot_nk(x_hat: int, z_nk: PskSymbol, alpha: float, M: int) -> SlotTransmission:
    return _embedded(BandKind.CB, x_hat, z_nk, alpha, M, "charlie")


def tx_ab_slot_k(a_k: int, alpha: float) -> SlotTransmission:
    if not a_k:
        return SlotTransmission(BandKind.AB, "k", ())
    return SlotTransmission(BandKind.AB, "k", (
        Contribution(math.sqrt(alpha), 1, 0.0, "alice"),
        Contribution(math.sqrt(1.0 - alpha), 1, 0.0, "charlie"),
    ))


def tx_ab_slot_nk(b: int) -> SlotTransmission:
    # Charlie is silent; Alice keeps the OOK pattern going on her own.
    if not b:
        return SlotTransmission(BandKind.AB, "n+k", ())
    return SlotTransmission(BandKind.AB, "n+k", (Contribution(1.0, 1, 0.0, "alice"),))


def tx_hb_slot_k(p_k: int, u_k: PskSymbol, alpha: float) -> SlotTransmission:
    return _pour_then_own(BandKind.HB, p_k, u_k, alpha, "tom", "henry")


def tx_hb_slot_nk(p_k: int, u_nk: PskSymbol, alpha: float, M: int) -> SlotTransmission:
    return _embedded(BandKind.HB, p_k, u_nk, alpha, M, "henry")


def tx_normal_slot(symbol: PskSymbol, slot_phase: str = "k") -> SlotTransmission:
    return SlotTransmission(BandKind.NORMAL, slot_phase, (Contribution(1.0, symbol, 0.0, "user"),))


def slot_components(kind, alpha, M, bits=None, embedded=None, sym_k=None, sym_nk=None, bits_nk=None):
    """Vectorised transmit components of each slot.

    Returns ``(own_k, aux_k, own_nk)``: the band owner's complex transmit
    value in each slot and the poured OOK amplitude on slot k.  The owner is
    Charlie / Henry / the normal user, or Alice on f_AB.
    """
    kind = BandKind(kind)
    w = psk_points(M)
    if kind is BandKind.NORMAL:
        own_k = w[sym_k]
        aux_k = np.zeros(own_k.shape)
        own_nk = w[sym_nk]
    elif kind is BandKind.AB:
        own_k = np.sqrt(alpha) * bits.astype(float) + 0j
        aux_k = np.sqrt(1.0 - alpha) * bits.astype(float)
        own_nk = bits_nk.astype(float) + 0j
    else:
        flag = bits if kind is BandKind.HB else embedded
        own_k = np.sqrt(alpha) * w[sym_k]
        aux_k = np.sqrt(1.0 - alpha) * bits.astype(float)
        own_nk = embedded_amplitude(flag, alpha) * w[sym_nk] * np.exp(1j * embedded_phase(flag, M))
    return own_k, aux_k, own_nk


@dataclass
class FrameObservation:
    band_kind: BandKind
    sym_k: Optional[np.ndarray]
    sym_nk: Optional[np.ndarray]
    bits: Optional[np.ndarray]
    embedded: Optional[np.ndarray]
    bits_nk: Optional[np.ndarray]
    bob_k: Optional[np.ndarray] = None
    bob_nk: Optional[np.ndarray] = None
    dave_k: Optional[np.ndarray] = None
    dave_nk: Optional[np.ndarray] = None
    charlie: Optional[np.ndarray] = None
    channels: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        arr = self.bob_k if self.bob_k is not None else self.dave_k
        return arr.shape[-1]


def _receive(rng, own_k, aux_k, own_nk, noise_power, tag, channels, has_aux):
    shape = own_k.shape
    h_own_k = sample_cscg(rng, 1.0, shape)
    h_own_nk = sample_cscg(rng, 1.0, shape)
    y_k = own_k * h_own_k + sample_cscg(rng, noise_power, shape)
    y_nk = own_nk * h_own_nk + sample_cscg(rng, noise_power, shape)
    channels[f"{tag}_own_k"] = h_own_k
    channels[f"{tag}_own_nk"] = h_own_nk
    if has_aux:
        h_aux_k = sample_cscg(rng, 1.0, shape)
        y_k += aux_k * h_aux_k
        channels[f"{tag}_aux_k"] = h_aux_k
    return y_k, y_nk


def synthesize_frame(cfg: NetworkConfig, band_kind, rng: np.random.Generator, *,
                     bits=None, relay_decisions=None, bits_nk=None, shape=None,
                     receivers=("bob", "dave"), charlie=None) -> FrameObservation:
    """Build a frame of ``shape`` slot pairs (default ``(cfg.n,)``) for one band.

    ``bits`` is Alice's data on f_CB, the shared key p on a mimic band and the
    pour key a on f_AB; missing bits are drawn from ``rng``.  On f_CB,
    ``relay_decisions`` (Charlie's detected bits) are mandatory.  Channel
    coefficients toward each receiver are stored under ``bob_*`` / ``dave_*``.
    """
    kind = BandKind(band_kind)
    if kind is BandKind.CB and relay_decisions is None:
        raise ValueError("relay decisions are required for the CB band")
    if shape is None:
        shape = np.shape(bits) if bits is not None else (cfg.n,)
    shape = tuple(shape)
    M = cfg.M

    sym_k = sym_nk = None
    if kind is not BandKind.AB:
        sym_k = rng.integers(0, M, size=shape)
        sym_nk = rng.integers(0, M, size=shape)
    if kind is not BandKind.NORMAL and bits is None:
        bits = rng.integers(0, 2, size=shape)
    if kind is BandKind.AB and bits_nk is None:
        bits_nk = rng.integers(0, 2, size=shape)
    if bits is not None:
        bits = np.asarray(bits)
    embedded = np.asarray(relay_decisions) if kind is BandKind.CB else None

    own_k, aux_k, own_nk = slot_components(kind, cfg.alpha, M, bits, embedded, sym_k, sym_nk, bits_nk)
    obs = FrameObservation(kind, sym_k, sym_nk, bits, embedded, bits_nk, charlie=charlie)
    for rx in ("bob", "dave"):
        if rx in receivers:
            y_k, y_nk = _receive(rng, own_k, aux_k, own_nk, cfg.noise_power, rx, obs.channels,
                                 has_aux=kind is not BandKind.NORMAL)
            setattr(obs, f"{rx}_k", y_k)
            setattr(obs, f"{rx}_nk", y_nk)
    return obs


def write_frame_dump(obs: FrameObservation, path, band_label: str = "") -> None:
    """One CSV row per slot: band, slot, truth, Bob and Dave samples."""
    label = band_label or obs.band_kind.value
    n = obs.n
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["band", "slot", "bit", "embedded", "symbol",
                         "bob_re", "bob_im", "dave_re", "dave_im"])
        for half, offset in (("k", 0), ("nk", n)):
            sym = getattr(obs, f"sym_{half}")
            bob = getattr(obs, f"bob_{half}")
            dave = getattr(obs, f"dave_{half}")
            for i in range(n):
                bit = obs.bits[i] if obs.bits is not None else ""
                if half == "nk" and obs.bits_nk is not None:
                    bit = obs.bits_nk[i]
                emb = obs.embedded[i] if obs.embedded is not None else ""
                symbol = sym[i] if sym is not None else ""
                writer.writerow([label, offset + i + 1, bit, emb, symbol]
                                + _pair(bob, i) + _pair(dave, i))


def _pair(arr, i):
    if arr is None:
        return ["", ""]
    return ["%.9g" % arr[i].real, "%.9g" % arr[i].imag]
