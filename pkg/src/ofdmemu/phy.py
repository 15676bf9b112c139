"""Bit-exact 802.11a-style OFDM baseband transmit and receive chains.

Transmit order: scramble, rate-1/2 convolutional encode, puncture,
block-interleave, QAM map, pilot insertion, unitary IFFT plus cyclic
prefix.  Receive order mirrors it: FFT, (identity) equalization, hard
QAM demap, deinterleave, depuncture with erasure marks, hard-decision
Viterbi decode, descramble.

Both DFTs carry the unitary 1/sqrt(fft_size) scale so Parseval holds
exactly between grid and time domains.  Bits travel as uint8 arrays of
0/1; erasure-marked streams use int8 with -1 for erased positions.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .config import (
    BITS_PER_SYMBOL,
    CONV_G1,
    CONV_G2,
    KMOD_SQUARED,
    PUNCTURE_PATTERNS,
    PhyConfig,
)
from .errors import ConfigError, FramingError

__all__ = [
    "BitBlock",
    "BasebandFrame",
    "lfsr_sequence",
    "scramble",
    "conv_encode",
    "conv_step_state",
    "puncture",
    "depuncture",
    "interleave",
    "deinterleave",
    "qam_map",
    "qam_hard_demap",
    "qam_quantize",
    "assemble_grid",
    "extract_data",
    "equalize",
    "ofdm_modulate",
    "ofdm_demodulate",
    "modulate_symbols",
    "demodulate_frame",
    "viterbi_decode",
    "viterbi_path_metric",
    "tx_chain",
    "tx_chain_stages",
    "rx_chain",
]


@dataclass
class BitBlock:
    """A bit vector tagged with its position in the chain.

    Roles: raw, scrambled, coded, punctured, interleaved, received.
    """

    bits: np.ndarray
    role: str = "raw"

    def __post_init__(self) -> None:
        self.bits = np.asarray(self.bits)
        if self.bits.ndim != 1:
            raise FramingError("BitBlock expects a 1-D bit vector")

    def __len__(self) -> int:
        return int(self.bits.size)


@dataclass
class BasebandFrame:
    """Complex baseband samples covering whole OFDM symbols."""

    samples: np.ndarray
    ofdm_symbol_count: int

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.samples.ndim != 1:
            raise FramingError("BasebandFrame expects a 1-D sample vector")

    @classmethod
    def from_samples(cls, samples: np.ndarray, cfg: PhyConfig) -> "BasebandFrame":
        samples = np.asarray(samples, dtype=np.complex128)
        spo = cfg.samples_per_ofdm
        if samples.size % spo != 0:
            raise FramingError(
                f"frame length {samples.size} is not a multiple of {spo} samples per OFDM symbol"
            )
        return cls(samples, samples.size // spo)

    def __len__(self) -> int:
        return int(self.samples.size)

    def average_power(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))


# ---------------------------------------------------------------------------
# T1 / R6: scrambler
# ---------------------------------------------------------------------------

def lfsr_sequence(length: int, seed: int) -> np.ndarray:
    """Output stream of the x^7 + x^4 + 1 shift register.

    ``seed`` bit i is register cell i; the feedback (cell 6 XOR cell 3)
    is both the output bit and the new cell 0 after the shift.
    """
    if not 1 <= seed <= 127:
        raise ConfigError(f"scrambler seed must be a nonzero 7-bit value, got {seed}")
    state = seed
    out = np.empty(length, dtype=np.uint8)
    for n in range(length):
        fb = ((state >> 6) ^ (state >> 3)) & 1
        out[n] = fb
        state = ((state << 1) | fb) & 0x7F
    return out


def scramble(bits: np.ndarray, seed: int) -> np.ndarray:
    """XOR a bit vector with the scrambler stream.  Self-inverse."""
    bits = _as_bits(bits)
    return (bits ^ lfsr_sequence(bits.size, seed)).astype(np.uint8)


# ---------------------------------------------------------------------------
# T2 / R5: convolutional code
# ---------------------------------------------------------------------------

def _taps(poly: int) -> np.ndarray:
    """Octal generator polynomial to MSB-first tap vector of length 7."""
    return np.array([(poly >> (6 - j)) & 1 for j in range(7)], dtype=np.uint8)


def conv_encode(
    bits: np.ndarray, state: int = 0, g1: int = CONV_G1, g2: int = CONV_G2
) -> tuple[np.ndarray, int]:
    """Rate-1/2 mother encoder, constraint length 7.

    ``state`` is the 6-bit register content carried across calls: bit i
    holds the input from i+1 steps back.  Output interleaves the two
    generator streams as A0 B0 A1 B1 ...  Returns (coded, new_state).
    """
    bits = _as_bits(bits)
    if not 0 <= state <= 63:
        raise ConfigError(f"encoder state must lie in [0, 63], got {state}")
    past = np.array([(state >> i) & 1 for i in range(5, -1, -1)], dtype=np.uint8)
    xx = np.concatenate([past, bits])
    a = np.convolve(xx, _taps(g1))[6 : 6 + bits.size] % 2
    b = np.convolve(xx, _taps(g2))[6 : 6 + bits.size] % 2
    coded = np.empty(2 * bits.size, dtype=np.uint8)
    coded[0::2] = a
    coded[1::2] = b
    tail = xx[-6:]
    new_state = 0
    for i in range(6):
        new_state |= int(tail[5 - i]) << i
    return coded, new_state


def conv_step_state(state: int, bit: int) -> int:
    """Register content after shifting one input bit in."""
    return ((state << 1) | (bit & 1)) & 0x3F


# ---------------------------------------------------------------------------
# puncturing
# ---------------------------------------------------------------------------

def _pattern(rate: Fraction | str) -> np.ndarray:
    rate = Fraction(rate)
    if rate not in PUNCTURE_PATTERNS:
        raise ConfigError(f"unsupported coding rate {rate}")
    return np.asarray(PUNCTURE_PATTERNS[rate], dtype=bool)


def puncture(coded: np.ndarray, rate: Fraction | str) -> np.ndarray:
    """Drop mother-code bits according to the standard pattern for ``rate``."""
    coded = _as_bits(coded)
    pat = _pattern(rate)
    if pat.all():
        return coded.copy()
    mask = np.resize(pat, coded.size)
    return coded[mask]


def depuncture(kept: np.ndarray, rate: Fraction | str) -> np.ndarray:
    """Re-expand a punctured stream, marking dropped positions with -1."""
    kept = np.asarray(kept)
    pat = _pattern(rate)
    keep_per_period = int(pat.sum())
    if kept.size % keep_per_period != 0:
        raise FramingError(
            f"punctured length {kept.size} is not a multiple of {keep_per_period}"
        )
    periods = kept.size // keep_per_period
    out = np.full(periods * pat.size, -1, dtype=np.int8)
    mask = np.resize(pat, out.size)
    out[mask] = kept.astype(np.int8)
    return out


# ---------------------------------------------------------------------------
# T3 / R4: block interleaver
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _interleave_perm(n_cbps: int, n_bpsc: int) -> np.ndarray:
    """Final position of input bit k after the two block permutations."""
    s = max(n_bpsc // 2, 1)
    k = np.arange(n_cbps)
    i = (n_cbps // 16) * (k % 16) + k // 16
    j = s * (i // s) + (i + n_cbps - (16 * i) // n_cbps) % s
    return j


def interleave(bits: np.ndarray, n_cbps: int, n_bpsc: int) -> np.ndarray:
    bits = _as_bits(bits)
    if bits.size != n_cbps:
        raise FramingError(f"interleaver block must hold {n_cbps} bits, got {bits.size}")
    out = np.empty_like(bits)
    out[_interleave_perm(n_cbps, n_bpsc)] = bits
    return out


def deinterleave(bits: np.ndarray, n_cbps: int, n_bpsc: int) -> np.ndarray:
    bits = np.asarray(bits)
    if bits.size != n_cbps:
        raise FramingError(f"deinterleaver block must hold {n_cbps} bits, got {bits.size}")
    return bits[_interleave_perm(n_cbps, n_bpsc)]


# ---------------------------------------------------------------------------
# T4 / R3: QAM constellation
# ---------------------------------------------------------------------------

# Per-axis Gray tables indexed by the MSB-first axis bit group.
_AXIS_LEVELS = {
    1: np.array([-1, 1], dtype=np.float64),
    2: np.array([-3, -1, 3, 1], dtype=np.float64),
    3: np.array([-7, -5, -1, -3, 7, 5, 1, 3], dtype=np.float64),
}


@lru_cache(maxsize=None)
def _axis_tables(m: int) -> tuple[np.ndarray, np.ndarray, int]:
    """(gray index -> level, level slot -> gray index, bits per axis)."""
    half = (BITS_PER_SYMBOL[m] + 1) // 2
    levels = _AXIS_LEVELS[half]
    nlev = levels.size
    inverse = np.empty(nlev, dtype=np.int64)
    for g, lv in enumerate(levels):
        inverse[int((lv + nlev - 1) // 2)] = g
    return levels, inverse, half


def _bits_to_axis_index(bits: np.ndarray, width: int) -> np.ndarray:
    idx = np.zeros(bits.shape[0], dtype=np.int64)
    for i in range(width):
        idx = (idx << 1) | bits[:, i]
    return idx


def _axis_index_to_bits(idx: np.ndarray, width: int) -> np.ndarray:
    out = np.empty((idx.size, width), dtype=np.uint8)
    for i in range(width):
        out[:, i] = (idx >> (width - 1 - i)) & 1
    return out


def qam_map(bits: np.ndarray, m: int) -> np.ndarray:
    """Gray-map bit groups to unit-average-power constellation points.

    The first half of each ``log2(m)``-bit group selects the I level,
    the second half the Q level (BPSK uses the real axis only).
    """
    if m not in BITS_PER_SYMBOL:
        raise ConfigError(f"unsupported modulation order {m}")
    nb = BITS_PER_SYMBOL[m]
    bits = _as_bits(bits)
    if bits.size % nb != 0:
        raise FramingError(f"bit count {bits.size} is not a multiple of {nb}")
    groups = bits.reshape(-1, nb)
    levels, _, half = _axis_tables(m)
    scale = 1.0 / np.sqrt(KMOD_SQUARED[m])
    i_level = levels[_bits_to_axis_index(groups[:, :half], half)]
    if m == 2:
        q_level = np.zeros_like(i_level)
    else:
        q_level = levels[_bits_to_axis_index(groups[:, half:], half)]
    return (i_level + 1j * q_level) * scale


def _quantize_axis(values: np.ndarray, nlev: int) -> np.ndarray:
    """Nearest odd level slot with midpoints rounded toward zero."""
    raw = (values + (nlev - 1)) / 2.0
    idx = np.floor(raw + 0.5)
    frac = raw - np.floor(raw)
    midpoint = frac == 0.5
    idx = np.where(midpoint & (values > 0), idx - 1, idx)
    return np.clip(idx, 0, nlev - 1).astype(np.int64)


def qam_quantize(points: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Snap arbitrary complex values to the nearest constellation point.

    Quantization runs independently per axis; values beyond the outer
    level clip to it, and exact midpoints round toward the level nearer
    zero.  Returns (quantized points, Gray bit labels).
    """
    points = np.asarray(points, dtype=np.complex128).ravel()
    levels, inverse, half = _axis_tables(m)
    nlev = levels.size
    scale = 1.0 / np.sqrt(KMOD_SQUARED[m])
    i_slot = _quantize_axis(points.real / scale, nlev)
    i_level = (2 * i_slot - (nlev - 1)).astype(np.float64)
    i_bits = _axis_index_to_bits(inverse[i_slot], half)
    if m == 2:
        q_level = np.zeros_like(i_level)
        labels = i_bits
    else:
        q_slot = _quantize_axis(points.imag / scale, nlev)
        q_level = (2 * q_slot - (nlev - 1)).astype(np.float64)
        labels = np.concatenate([i_bits, _axis_index_to_bits(inverse[q_slot], half)], axis=1)
    quantized = (i_level + 1j * q_level) * scale
    return quantized, labels.reshape(-1)


def qam_hard_demap(points: np.ndarray, m: int) -> np.ndarray:
    """Per-axis nearest-level hard decisions, as a flat bit vector."""
    _, labels = qam_quantize(points, m)
    return labels


# ---------------------------------------------------------------------------
# T5: pilot insertion / grid handling
# ---------------------------------------------------------------------------

def assemble_grid(data_points: np.ndarray, symbol_index: int, cfg: PhyConfig) -> np.ndarray:
    """Place data and pilots on an fft_size grid; all other bins stay null."""
    data_points = np.asarray(data_points, dtype=np.complex128)
    if data_points.size != cfg.n_data:
        raise FramingError(
            f"expected {cfg.n_data} data points per OFDM symbol, got {data_points.size}"
        )
    grid = np.zeros(cfg.fft_size, dtype=np.complex128)
    grid[cfg.data_bin_array] = data_points
    grid[cfg.pilot_bin_array] = cfg.pilot_values(symbol_index)
    return grid


def extract_data(grid: np.ndarray, cfg: PhyConfig) -> np.ndarray:
    grid = np.asarray(grid)
    if grid.shape[-1] != cfg.fft_size:
        raise FramingError(f"grid must hold {cfg.fft_size} bins")
    return grid[..., cfg.data_bin_array]


def equalize(grid: np.ndarray, channel_gain: complex = 1.0) -> np.ndarray:
    """Frequency-domain one-tap equalizer (identity for the unit channel)."""
    return np.asarray(grid) / channel_gain


# ---------------------------------------------------------------------------
# T6 / R1: OFDM modulation
# ---------------------------------------------------------------------------

def ofdm_modulate(grid: np.ndarray, cfg: PhyConfig) -> np.ndarray:
    """Unitary IFFT of one grid plus cyclic prefix."""
    grid = np.asarray(grid, dtype=np.complex128)
    if grid.shape[-1] != cfg.fft_size:
        raise FramingError(f"grid must hold {cfg.fft_size} bins")
    body = np.fft.ifft(grid, axis=-1) * np.sqrt(cfg.fft_size)
    return np.concatenate([body[..., cfg.fft_size - cfg.cp_len :], body], axis=-1)


def ofdm_demodulate(samples: np.ndarray, cfg: PhyConfig) -> np.ndarray:
    """Discard the cyclic prefix and apply the unitary FFT."""
    samples = np.asarray(samples, dtype=np.complex128)
    if samples.shape[-1] != cfg.samples_per_ofdm:
        raise FramingError(
            f"expected {cfg.samples_per_ofdm} samples per OFDM symbol, got {samples.shape[-1]}"
        )
    body = samples[..., cfg.cp_len :]
    return np.fft.fft(body, axis=-1) / np.sqrt(cfg.fft_size)


def modulate_symbols(grids: np.ndarray, cfg: PhyConfig) -> np.ndarray:
    """Modulate a (count, fft_size) stack of grids into a flat sample vector."""
    grids = np.atleast_2d(np.asarray(grids, dtype=np.complex128))
    return ofdm_modulate(grids, cfg).reshape(-1)


def demodulate_frame(samples: np.ndarray, cfg: PhyConfig) -> np.ndarray:
    """Split a flat frame into OFDM symbols and demodulate each."""
    samples = np.asarray(samples, dtype=np.complex128)
    spo = cfg.samples_per_ofdm
    if samples.size % spo != 0:
        raise FramingError(f"frame length {samples.size} is not a multiple of {spo}")
    return ofdm_demodulate(samples.reshape(-1, spo), cfg)


# ---------------------------------------------------------------------------
# R5: Viterbi decoder
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _trellis(g1: int, g2: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Predecessor and output-pattern tables for the 64-state trellis.

    For each next state n the two predecessors are n >> 1 (lower) and
    (n >> 1) | 32; the consumed input bit is n & 1.  Output patterns are
    encoded as 2*A + B.
    """
    n = np.arange(64)
    u = n & 1
    prev0 = n >> 1
    prev1 = (n >> 1) | 32
    # Pack taps so bit j of the mask weights the input from j steps back.
    g1m = int(sum(int(t) << j for j, t in enumerate(_taps(g1))))
    g2m = int(sum(int(t) << j for j, t in enumerate(_taps(g2))))

    def out_pattern(prev: np.ndarray) -> np.ndarray:
        full = (prev << 1) | u
        a = np.bitwise_count(full & g1m) & 1
        b = np.bitwise_count(full & g2m) & 1
        return (2 * a + b).astype(np.int64)

    return prev0, prev1, out_pattern(prev0), out_pattern(prev1)


def viterbi_decode(
    received: np.ndarray,
    rate: Fraction | str = Fraction(1, 2),
    g1: int = CONV_G1,
    g2: int = CONV_G2,
) -> np.ndarray:
    """Hard-decision Viterbi decode of the rate-1/2 mother stream.

    ``received`` may carry -1 erasure marks (zero branch cost).  A plain
    0/1 stream at a punctured rate is depunctured internally.  The
    encoder is assumed to start in state 0; the survivor ends at the
    best final state, ties broken toward the lower-numbered predecessor
    and final state.
    """
    received = np.asarray(received)
    rate = Fraction(rate)
    if rate != Fraction(1, 2) and received.size and received.min() >= 0:
        received = depuncture(received, rate)
    received = received.astype(np.int8)
    if received.size % 2 != 0:
        raise FramingError("mother stream length must be even")
    steps = received.size // 2
    if steps == 0:
        return np.empty(0, dtype=np.uint8)

    r0 = received[0::2]
    r1 = received[1::2]
    # Branch cost of each of the four output patterns at every step.
    # The bool masks must widen before the add, or it collapses to OR.
    bm = np.empty((steps, 4), dtype=np.float64)
    for pat in range(4):
        a, b = pat >> 1, pat & 1
        bm[:, pat] = ((r0 >= 0) & (r0 != a)).astype(np.float64) + (
            (r1 >= 0) & (r1 != b)
        )

    prev0, prev1, pat0, pat1 = _trellis(g1, g2)
    metric = np.full(64, np.inf)
    metric[0] = 0.0
    backptr = np.empty((steps, 64), dtype=np.uint8)
    for t in range(steps):
        row = bm[t]
        cand0 = metric[prev0] + row[pat0]
        cand1 = metric[prev1] + row[pat1]
        take1 = cand1 < cand0
        metric = np.where(take1, cand1, cand0)
        backptr[t] = take1

    state = int(np.argmin(metric))
    bits = np.empty(steps, dtype=np.uint8)
    for t in range(steps - 1, -1, -1):
        bits[t] = state & 1
        state = int(prev1[state] if backptr[t, state] else prev0[state])
    return bits


def viterbi_path_metric(
    received: np.ndarray,
    candidate_bits: np.ndarray,
    rate: Fraction | str = Fraction(1, 2),
    g1: int = CONV_G1,
    g2: int = CONV_G2,
) -> float:
    """Hamming cost of one candidate input sequence against ``received``.

    Re-encodes from state 0 and counts disagreements on non-erased
    positions, using the same depuncture convention as the decoder.
    """
    received = np.asarray(received)
    rate = Fraction(rate)
    if rate != Fraction(1, 2) and received.size and received.min() >= 0:
        received = depuncture(received, rate)
    received = received.astype(np.int8)
    coded, _ = conv_encode(_as_bits(candidate_bits), 0, g1, g2)
    if coded.size != received.size:
        raise FramingError("candidate length does not match the received stream")
    valid = received >= 0
    return float(np.sum(valid & (coded != received)))


# ---------------------------------------------------------------------------
# full chains
# ---------------------------------------------------------------------------

def tx_chain(bits: np.ndarray, cfg: PhyConfig) -> BasebandFrame:
    """Information bits to a baseband frame of whole OFDM symbols."""
    stages = tx_chain_stages(bits, cfg)
    return stages["frame"]


def tx_chain_stages(bits: np.ndarray, cfg: PhyConfig) -> dict:
    """Run the transmit chain, keeping every labeled intermediate stage."""
    bits = _as_bits(bits)
    if bits.size == 0 or bits.size % cfg.n_dbps != 0:
        raise FramingError(
            f"packet length {bits.size} is not a positive multiple of {cfg.n_dbps} bits"
        )
    n_sym = bits.size // cfg.n_dbps
    scrambled = scramble(bits, cfg.scrambler_seed)
    coded, _ = conv_encode(scrambled, 0, cfg.conv_g1, cfg.conv_g2)
    punctured = puncture(coded, cfg.coding_rate)
    blocks = punctured.reshape(n_sym, cfg.n_cbps)
    interleaved = np.empty_like(blocks)
    grids = np.empty((n_sym, cfg.fft_size), dtype=np.complex128)
    for s in range(n_sym):
        interleaved[s] = interleave(blocks[s], cfg.n_cbps, cfg.n_bpsc)
        points = qam_map(interleaved[s], cfg.modulation_order)
        grids[s] = assemble_grid(points, s, cfg)
    samples = modulate_symbols(grids, cfg)
    return {
        "raw": BitBlock(bits, "raw"),
        "scrambled": BitBlock(scrambled, "scrambled"),
        "coded": BitBlock(coded, "coded"),
        "punctured": BitBlock(punctured, "punctured"),
        "interleaved": BitBlock(interleaved.reshape(-1), "interleaved"),
        "grids": grids,
        "frame": BasebandFrame(samples, n_sym),
    }


def rx_chain(frame: BasebandFrame | np.ndarray, cfg: PhyConfig) -> np.ndarray:
    """Baseband frame back to information bits."""
    samples = frame.samples if isinstance(frame, BasebandFrame) else np.asarray(frame)
    grids = equalize(demodulate_frame(samples, cfg))
    n_sym = grids.shape[0]
    received = np.empty((n_sym, cfg.n_cbps), dtype=np.uint8)
    for s in range(n_sym):
        hard = qam_hard_demap(extract_data(grids[s], cfg), cfg.modulation_order)
        received[s] = deinterleave(hard, cfg.n_cbps, cfg.n_bpsc)
    mother = depuncture(received.reshape(-1), cfg.coding_rate)
    decoded = viterbi_decode(mother, Fraction(1, 2), cfg.conv_g1, cfg.conv_g2)
    return scramble(decoded, cfg.scrambler_seed)


def _as_bits(bits: np.ndarray) -> np.ndarray:
    arr = np.asarray(bits)
    if arr.dtype != np.uint8:
        arr = arr.astype(np.uint8)
    return arr.ravel()
