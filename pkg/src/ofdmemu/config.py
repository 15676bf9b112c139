"""Baseband configuration for the 802.11a-style OFDM transceiver.

The layout follows the 20 MHz 802.11a profile: 64-point FFT, 16-sample
cyclic prefix, 52 active subcarriers of which 4 carry pilots (logical
indices -21, -7, +7, +21) and 48 carry data.  Only the data portion of a
packet is modeled here: no preamble, SIGNAL field, tail or pad bits, so
the scrambler and convolutional encoder run continuously across all OFDM
symbols of a packet and reset only at packet start.

Logical subcarrier index k (negative below DC) maps to FFT bin k mod
fft_size; DC and the outer guard bins stay null.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigError

# Generator polynomials of the rate-1/2 mother code (octal, constraint length 7).
CONV_G1 = 0o133
CONV_G2 = 0o171
CONSTRAINT_LENGTH = 7

# Bits removed from the rate-1/2 mother stream to reach higher rates.
# Patterns run over consecutive (A_i, B_i) output pairs; 1 = keep.
PUNCTURE_PATTERNS: dict[Fraction, tuple[int, ...]] = {
    Fraction(1, 2): (1, 1),
    Fraction(2, 3): (1, 1, 1, 0),
    Fraction(3, 4): (1, 1, 1, 0, 0, 1),
    Fraction(5, 6): (1, 1, 1, 0, 0, 1, 1, 0, 0, 1),
}

SUPPORTED_MODULATIONS = (2, 4, 16, 64)

# Coded bits per subcarrier for each modulation order.
BITS_PER_SYMBOL = {2: 1, 4: 2, 16: 4, 64: 6}

# Per-modulation amplitude normalization (unit average constellation power).
KMOD_SQUARED = {2: 1, 4: 2, 16: 10, 64: 42}

MODULATION_NAMES = {
    "bpsk": 2,
    "qpsk": 4,
    "16qam": 16,
    "64qam": 64,
}

_LOGICAL_ACTIVE = tuple(k for k in range(-26, 27) if k != 0)
_LOGICAL_PILOTS = (-21, -7, 7, 21)
_LOGICAL_DATA = tuple(k for k in _LOGICAL_ACTIVE if k not in _LOGICAL_PILOTS)

# Pilot amplitudes for logical bins (-21, -7, +7, +21), before the
# per-symbol polarity sign.
PILOT_BASE = (1, 1, 1, -1)


def _pilot_polarity_sequence() -> np.ndarray:
    """127-periodic pilot polarity signs from the all-ones scrambler state."""
    reg = [1] * 7
    seq = np.empty(127, dtype=np.int8)
    for n in range(127):
        fb = reg[6] ^ reg[3]
        seq[n] = 1 if fb == 0 else -1
        reg = [fb] + reg[:-1]
    return seq


PILOT_POLARITY = _pilot_polarity_sequence()


def logical_to_bin(k: int, fft_size: int = 64) -> int:
    """Map a logical subcarrier index (negative below DC) to its FFT bin."""
    return k % fft_size

def default_pilot_bins(fft_size: int = 64) -> tuple[int, ...]:
    return tuple(logical_to_bin(k, fft_size) for k in _LOGICAL_PILOTS)


def default_data_bins(fft_size: int = 64) -> tuple[int, ...]:
    """The 48 standard data bins, in ascending logical order."""
    return tuple(logical_to_bin(k, fft_size) for k in _LOGICAL_DATA)


def bin_to_logical(b: int, fft_size: int = 64) -> int:
    """Inverse of :func:`logical_to_bin` for the standard 64-bin layout."""
    return b if b <= fft_size // 2 else b - fft_size


@dataclass(frozen=True)
class PhyConfig:
    """Static description of one transceiver configuration.

    ``data_subcarriers`` and ``pilot_subcarriers`` hold FFT bin indices;
    the order of ``data_subcarriers`` fixes the order in which coded bits
    fill the grid.  ``conv_g1``/``conv_g2`` default to the standard
    generator polynomials and exist only as a debugging knob; the
    conformance self-test pins the standard values.
    """

    fft_size: int = 64
    cp_len: int = 16
    modulation_order: int = 64
    coding_rate: Fraction = Fraction(3, 4)
    scrambler_seed: int = 0b1011101
    data_subcarriers: tuple[int, ...] = field(default_factory=default_data_bins)
    pilot_subcarriers: tuple[int, ...] = field(default_factory=default_pilot_bins)
    pilot_base: tuple[int, ...] = PILOT_BASE
    conv_g1: int = CONV_G1
    conv_g2: int = CONV_G2

    def __post_init__(self) -> None:
        if self.fft_size <= 0 or (self.fft_size & (self.fft_size - 1)) != 0:
            raise ConfigError(f"fft_size must be a positive power of two, got {self.fft_size}")
        if not 0 <= self.cp_len <= self.fft_size:
            raise ConfigError(f"cp_len must lie in [0, fft_size], got {self.cp_len}")
        if self.modulation_order not in SUPPORTED_MODULATIONS:
            raise ConfigError(
                f"modulation_order must be one of {SUPPORTED_MODULATIONS}, got {self.modulation_order}"
            )
        rate = Fraction(self.coding_rate)
        object.__setattr__(self, "coding_rate", rate)
        if rate not in PUNCTURE_PATTERNS:
            raise ConfigError(f"coding_rate must be one of {sorted(PUNCTURE_PATTERNS)}, got {rate}")
        if not 1 <= self.scrambler_seed <= 127:
            raise ConfigError(
                f"scrambler_seed must be a nonzero 7-bit value, got {self.scrambler_seed}"
            )
        for name in ("data_subcarriers", "pilot_subcarriers"):
            bins = getattr(self, name)
            object.__setattr__(self, name, tuple(int(b) for b in bins))
        data = self.data_subcarriers
        pilots = self.pilot_subcarriers
        allbins = data + pilots
        if len(set(allbins)) != len(allbins):
            raise ConfigError("data and pilot subcarrier sets must be disjoint and duplicate-free")
        for b in allbins:
            if not 0 <= b < self.fft_size:
                raise ConfigError(f"subcarrier bin {b} outside [0, {self.fft_size})")
        if 0 in allbins:
            raise ConfigError("DC bin must stay null")
        if len(pilots) != len(self.pilot_base):
            raise ConfigError("pilot_base length must match pilot_subcarriers")
        if not 0 < self.conv_g1 < 128 or not 0 < self.conv_g2 < 128:
            raise ConfigError("generator polynomials must be 7-bit octal values")
        # Coded/info bits per OFDM symbol must come out integral, and the
        # puncture pattern must align with the per-symbol block boundary so
        # every OFDM symbol sees the same puncture phase.
        n_dbps = rate * len(data) * BITS_PER_SYMBOL[self.modulation_order]
        if n_dbps.denominator != 1:
            raise ConfigError(
                f"coding_rate * data_count * bits_per_subcarrier = {n_dbps} is not an integer"
            )
        period = len(PUNCTURE_PATTERNS[rate])
        if (2 * int(n_dbps)) % period != 0:
            raise ConfigError("puncture pattern does not align with the OFDM symbol boundary")

    # -- derived sizes ---------------------------------------------------

    @property
    def n_data(self) -> int:
        """Data subcarriers per OFDM symbol (48 in the standard layout)."""
        return len(self.data_subcarriers)

    @property
    def n_bpsc(self) -> int:
        """Coded bits per subcarrier."""
        return BITS_PER_SYMBOL[self.modulation_order]

    @property
    def n_cbps(self) -> int:
        """Coded bits per OFDM symbol."""
        return self.n_data * self.n_bpsc

    @property
    def n_dbps(self) -> int:
        """Information bits per OFDM symbol."""
        return int(self.coding_rate * self.n_cbps)

    @property
    def samples_per_ofdm(self) -> int:
        return self.fft_size + self.cp_len

    @property
    def k_mod(self) -> float:
        """Amplitude scale of the constellation (1/sqrt of KMOD_SQUARED)."""
        return 1.0 / float(np.sqrt(KMOD_SQUARED[self.modulation_order]))

    def pilot_polarity(self, symbol_index: int) -> int:
        """Polarity sign applied to all pilots of one OFDM symbol."""
        return int(PILOT_POLARITY[symbol_index % 127])

    def pilot_values(self, symbol_index: int) -> np.ndarray:
        p = self.pilot_polarity(symbol_index)
        return np.asarray(self.pilot_base, dtype=np.complex128) * p

    @cached_property
    def data_bin_array(self) -> np.ndarray:
        return np.asarray(self.data_subcarriers, dtype=np.intp)

    @cached_property
    def pilot_bin_array(self) -> np.ndarray:
        return np.asarray(self.pilot_subcarriers, dtype=np.intp)

    def fingerprint(self) -> str:
        """Stable hex digest identifying this configuration."""
        desc = (
            f"fft={self.fft_size};cp={self.cp_len};m={self.modulation_order};"
            f"r={self.coding_rate};seed={self.scrambler_seed};"
            f"data={','.join(map(str, self.data_subcarriers))};"
            f"pilots={','.join(map(str, self.pilot_subcarriers))};"
            f"base={','.join(map(str, self.pilot_base))};"
            f"g1={self.conv_g1:o};g2={self.conv_g2:o}"
        )
        return hashlib.sha256(desc.encode()).hexdigest()[:16]

    # -- config file loading --------------------------------------------

    @classmethod
    def from_mapping(cls, kv: dict[str, str]) -> "PhyConfig":
        kwargs: dict = {}
        if "fft_size" in kv:
            kwargs["fft_size"] = _parse_int(kv["fft_size"], "fft_size")
        if "cp_len" in kv:
            kwargs["cp_len"] = _parse_int(kv["cp_len"], "cp_len")
        if "modulation" in kv:
            kwargs["modulation_order"] = parse_modulation(kv["modulation"])
        if "coding_rate" in kv:
            kwargs["coding_rate"] = parse_rate(kv["coding_rate"])
        if "scrambler_seed" in kv:
            kwargs["scrambler_seed"] = _parse_int(kv["scrambler_seed"], "scrambler_seed")
        if "conv_g1" in kv:
            kwargs["conv_g1"] = _parse_int(kv["conv_g1"], "conv_g1", base=8)
        if "conv_g2" in kv:
            kwargs["conv_g2"] = _parse_int(kv["conv_g2"], "conv_g2", base=8)
        smap = kv.get("subcarrier_map", "standard").strip().lower()
        if smap == "standard":
            pass
        elif smap == "custom":
            try:
                kwargs["data_subcarriers"] = _parse_int_list(kv["data_subcarriers"])
                kwargs["pilot_subcarriers"] = _parse_int_list(kv["pilot_subcarriers"])
            except KeyError as exc:
                raise ConfigError(
                    "subcarrier_map = custom needs data_subcarriers and pilot_subcarriers"
                ) from exc
            if "pilot_base" in kv:
                kwargs["pilot_base"] = _parse_int_list(kv["pilot_base"])
        else:
            raise ConfigError(f"subcarrier_map must be 'standard' or 'custom', got {smap!r}")
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "PhyConfig":
        sections = parse_config_file(path)
        kv = dict(sections.get("", {}))
        kv.update(sections.get("phy", {}))
        return cls.from_mapping(kv)


def parse_modulation(text: str) -> int:
    t = str(text).strip().lower()
    if t in MODULATION_NAMES:
        return MODULATION_NAMES[t]
    try:
        m = int(t)
    except ValueError:
        raise ConfigError(f"unknown modulation {text!r}") from None
    if m not in SUPPORTED_MODULATIONS:
        raise ConfigError(f"unknown modulation {text!r}")
    return m


def parse_rate(text: str) -> Fraction:
    try:
        r = Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"bad coding rate {text!r}") from None
    if r not in PUNCTURE_PATTERNS:
        raise ConfigError(f"unsupported coding rate {text!r}")
    return r


def _parse_int(text: str, name: str, base: int = 10) -> int:
    try:
        return int(str(text).strip(), base)
    except ValueError:
        raise ConfigError(f"bad integer for {name}: {text!r}") from None


def _parse_int_list(text: str) -> tuple[int, ...]:
    items = [t for t in str(text).replace(",", " ").split() if t]
    try:
        return tuple(int(t) for t in items)
    except ValueError:
        raise ConfigError(f"bad integer list: {text!r}") from None


def parse_config_file(path: str | Path) -> dict[str, dict[str, str]]:
    """Parse a plain text ``key = value`` file with optional [section] headers.

    Keys before any header land in the "" section.  '#' and ';' start
    comments.  Returns {section: {key: value}} with lower-cased keys.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    sections: dict[str, dict[str, str]] = {"": {}}
    current = ""
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        sections[current][key.strip().lower()] = value.strip()
    return sections
