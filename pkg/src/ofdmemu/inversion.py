"""Per-OFDM-symbol linear model of the coded bit pipeline over GF(2).

Scrambled info bits x (one OFDM symbol's worth) pass through the
convolutional encoder, puncturer and interleaver; because every stage is
linear over GF(2) the interleaved bit vector equals C*x XOR d(state),
where the affine offset d depends only on the 6-bit encoder state at the
symbol boundary.  The matrix is assembled here directly from the
generator tap structure and the puncture/interleave index maps, not by
running the encoder, so agreement with the sequential chain is a
meaningful cross-check.

Row i of the system corresponds to coded bit i of the interleaved block,
i.e. bit (i mod n_bpsc) of the QAM label on the (i div n_bpsc)-th data
subcarrier.  Restricting rows to a subcarrier subset and solving the
restricted system recovers info bits that pin those subcarriers to
chosen QAM points; the remaining (dummy) subcarriers carry whatever the
solved bits imply.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import PUNCTURE_PATTERNS, PhyConfig, bin_to_logical
from .errors import SelectionError
from .gf2 import Gf2Matrix, Gf2Vector, Gf2Solver, rank
from .phy import _interleave_perm, _taps, conv_encode, interleave, puncture

__all__ = [
    "SymbolSystem",
    "build_symbol_system",
    "max_usable_subcarriers",
    "default_subset",
    "restrict_rows",
    "restrict_offsets",
    "certify_subset",
    "verify_against_pipeline",
]


@dataclass
class SymbolSystem:
    """Affine GF(2) model of one OFDM symbol's bit pipeline."""

    cfg: PhyConfig
    matrix: Gf2Matrix
    state_offsets: np.ndarray  # (64, alpha) uint8
    data_positions: dict[int, int] = field(repr=False)

    @property
    def alpha(self) -> int:
        return self.matrix.rows

    @property
    def beta(self) -> int:
        return self.matrix.cols

    def row_index_of(self, subcarrier_bin: int, bit: int) -> int:
        """System row carrying label bit ``bit`` of a data subcarrier."""
        nb = self.cfg.n_bpsc
        if subcarrier_bin not in self.data_positions:
            raise SelectionError(f"bin {subcarrier_bin} is not a data subcarrier")
        if not 0 <= bit < nb:
            raise SelectionError(f"label bit index {bit} outside [0, {nb})")
        return self.data_positions[subcarrier_bin] * nb + bit

    def predict(self, x_bits: np.ndarray, state: int) -> np.ndarray:
        """C*x XOR offset(state), as a 0/1 array of length alpha."""
        y = self.matrix.matvec(Gf2Vector.from_bits(x_bits)).to_bits()
        return (y ^ self.state_offsets[state]) & 1

    @staticmethod
    def outgoing_state(x_bits: np.ndarray) -> int:
        """Encoder register content after consuming one symbol's bits."""
        x_bits = np.asarray(x_bits).ravel()
        s = 0
        for i in range(6):
            s |= int(x_bits[-1 - i] & 1) << i
        return s


def build_symbol_system(cfg: PhyConfig) -> SymbolSystem:
    beta = cfg.n_dbps
    alpha = cfg.n_cbps
    taps1 = _taps(cfg.conv_g1)
    taps2 = _taps(cfg.conv_g2)

    # Mother-stream rows over [info bits | state bits]: output bit 2t (+1)
    # is the parity of taps applied to inputs t, t-1, ..., t-6, where
    # negative time indexes the incoming state (bit q-1 = input q back).
    m_info = np.zeros((2 * beta, beta), dtype=np.uint8)
    m_state = np.zeros((2 * beta, 6), dtype=np.uint8)
    for t in range(beta):
        for j in range(7):
            src = t - j
            if taps1[j]:
                if src >= 0:
                    m_info[2 * t, src] ^= 1
                else:
                    m_state[2 * t, -src - 1] ^= 1
            if taps2[j]:
                if src >= 0:
                    m_info[2 * t + 1, src] ^= 1
                else:
                    m_state[2 * t + 1, -src - 1] ^= 1

    pattern = np.asarray(PUNCTURE_PATTERNS[cfg.coding_rate], dtype=bool)
    keep = np.nonzero(np.resize(pattern, 2 * beta))[0]
    perm = _interleave_perm(alpha, cfg.n_bpsc)

    c_dense = np.empty((alpha, beta), dtype=np.uint8)
    u_dense = np.empty((alpha, 6), dtype=np.uint8)
    c_dense[perm] = m_info[keep]
    u_dense[perm] = m_state[keep]

    state_bits = np.array([[(s >> i) & 1 for i in range(6)] for s in range(64)], dtype=np.uint8)
    offsets = (state_bits @ u_dense.T) % 2

    positions = {b: p for p, b in enumerate(cfg.data_subcarriers)}
    return SymbolSystem(
        cfg=cfg,
        matrix=Gf2Matrix.from_dense(c_dense),
        state_offsets=offsets.astype(np.uint8),
        data_positions=positions,
    )


def max_usable_subcarriers(cfg: PhyConfig) -> int:
    """Largest exactly-controllable subcarrier count per OFDM symbol."""
    return int(cfg.coding_rate * cfg.n_data)


def default_subset(cfg: PhyConfig, count: int | None = None) -> tuple[int, ...]:
    """The ``count`` data subcarriers closest to DC, in logical order.

    Dummies then sit at the band edges where real front ends are least
    reliable anyway.
    """
    if count is None:
        count = max_usable_subcarriers(cfg)
    if not 0 < count <= cfg.n_data:
        raise SelectionError(f"subset size {count} outside (0, {cfg.n_data}]")
    by_distance = sorted(
        cfg.data_subcarriers,
        key=lambda b: (abs(bin_to_logical(b, cfg.fft_size)), bin_to_logical(b, cfg.fft_size)),
    )
    subset = by_distance[:count]
    return tuple(sorted(subset, key=lambda b: bin_to_logical(b, cfg.fft_size)))


def _selection_rows(sys: SymbolSystem, chosen: tuple[int, ...]) -> np.ndarray:
    if len(set(chosen)) != len(chosen):
        raise SelectionError("chosen subcarriers contain duplicates")
    nb = sys.cfg.n_bpsc
    rows = np.empty(len(chosen) * nb, dtype=np.intp)
    for i, b in enumerate(chosen):
        base = sys.row_index_of(b, 0)
        rows[i * nb : (i + 1) * nb] = np.arange(base, base + nb)
    return rows


def restrict_rows(sys: SymbolSystem, chosen: tuple[int, ...]) -> Gf2Matrix:
    """Rows of the system for the chosen subcarriers, in (subcarrier, bit) order."""
    return sys.matrix.take_rows(_selection_rows(sys, chosen))


def restrict_offsets(sys: SymbolSystem, chosen: tuple[int, ...]) -> np.ndarray:
    """State offsets restricted to the chosen rows: (64, len(chosen)*n_bpsc)."""
    return sys.state_offsets[:, _selection_rows(sys, chosen)]


def _climb_to_full_rank(
    sys: SymbolSystem, chosen: list[int], target: int
) -> tuple[list[int], list[tuple[int, int]], int]:
    """First-improvement hill climb on selection rank.  Deterministic."""
    swaps: list[tuple[int, int]] = []
    r = rank(restrict_rows(sys, tuple(chosen)))
    while r < target:
        improved = False
        for i in range(len(chosen)):
            for u in sys.cfg.data_subcarriers:
                if u in chosen:
                    continue
                trial = list(chosen)
                trial[i] = u
                r_trial = rank(restrict_rows(sys, tuple(trial)))
                if r_trial > r:
                    swaps.append((chosen[i], u))
                    chosen, r = trial, r_trial
                    improved = True
                    break
            if improved:
                break
        if not improved:
            break
    return chosen, swaps, r


def certify_subset(
    sys: SymbolSystem, chosen: tuple[int, ...], max_restarts: int = 8
) -> tuple[tuple[int, ...], list[tuple[int, int]]]:
    """Certify full row rank for a selection, swapping subcarriers if needed.

    At the exact capacity bound, most selections (including the centered
    default) sit a few rows short of full rank because the last info
    bits of a symbol touch only a handful of coded bits before the
    encoder state rolls into the next symbol.  A deterministic
    first-improvement hill climb over single-subcarrier swaps repairs
    this; if it stalls in a local maximum, seeded random restarts
    continue the search.  Returns the certified selection (sorted by
    logical index) and the swaps applied to the original.
    """
    _selection_rows(sys, chosen)  # validates bins and duplicates
    nb = sys.cfg.n_bpsc
    target = len(chosen) * nb
    fixed, swaps, r = _climb_to_full_rank(sys, list(chosen), target)
    restart = 0
    while r < target and restart < max_restarts:
        rng = np.random.default_rng(restart)
        start = sorted(
            rng.choice(np.asarray(sys.cfg.data_subcarriers), len(chosen), replace=False).tolist()
        )
        fixed, _, r = _climb_to_full_rank(sys, start, target)
        restart += 1
    if r < target:
        raise SelectionError(f"no subcarrier swap reaches full rank (stuck at {r}/{target})")
    final = tuple(
        sorted(fixed, key=lambda b: bin_to_logical(b, sys.cfg.fft_size))
    )
    original = set(chosen)
    swaps = [(b, a) for b, a in zip(sorted(original - set(final)), sorted(set(final) - original))]
    return final, swaps


def verify_against_pipeline(
    sys: SymbolSystem, probes: int, seed: int = 0
) -> int:
    """Count bit mismatches between the matrix model and the live chain.

    Each probe draws random info bits and a random encoder state, runs
    encode -> puncture -> interleave, and compares with predict().
    Returns the total number of mismatching bits (0 when the model is
    faithful).
    """
    cfg = sys.cfg
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(probes):
        x = rng.integers(0, 2, sys.beta, dtype=np.uint8)
        state = int(rng.integers(0, 64))
        coded, _ = conv_encode(x, state, cfg.conv_g1, cfg.conv_g2)
        actual = interleave(puncture(coded, cfg.coding_rate), cfg.n_cbps, cfg.n_bpsc)
        mismatches += int(np.sum(actual != sys.predict(x, state)))
    return mismatches
