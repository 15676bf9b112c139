"""Independent straight-line references for the coded chain.

Everything here is written from the published definitions with table
lookups and explicit index lists, sharing no code or structure with the
package under test.  Slow on purpose; used only as ground truth.
"""

import numpy as np

# ---------------------------------------------------------------------------
# scrambler: x^7 + x^4 + 1, seed bit i = register cell i


def scramble_reference(bits, seed):
    out = []
    s = int(seed)
    for b in bits:
        fb = ((s >> 6) & 1) ^ ((s >> 3) & 1)
        out.append(int(b) ^ fb)
        s = ((s << 1) & 0x7F) | fb
    return np.array(out, dtype=np.uint8)


# ---------------------------------------------------------------------------
# rate-1/2 convolutional encoder via a (state, bit) -> (a, b, next) table


def _conv_table():
    table = {}
    for state in range(64):
        for bit in (0, 1):
            window = [bit] + [(state >> i) & 1 for i in range(6)]
            a = window[0] ^ window[2] ^ window[3] ^ window[5] ^ window[6]  # 133
            b = window[0] ^ window[1] ^ window[2] ^ window[3] ^ window[6]  # 171
            nxt = ((state << 1) | bit) & 0x3F
            table[(state, bit)] = (a, b, nxt)
    return table


_CONV = _conv_table()


def conv_encode_reference(bits, state=0):
    out = []
    s = int(state)
    for b in bits:
        a, g, s = _CONV[(s, int(b))]
        out.extend((a, g))
    return np.array(out, dtype=np.uint8), s


# ---------------------------------------------------------------------------
# puncturing via keep-masks over one period of the mother-code output


PUNCTURE_KEEP = {
    "1/2": [1, 1],
    "2/3": [1, 1, 1, 0],
    "3/4": [1, 1, 1, 0, 0, 1],
    "5/6": [1, 1, 1, 0, 0, 1, 1, 0, 0, 1],
}


def puncture_reference(coded, rate):
    mask = PUNCTURE_KEEP[rate]
    return np.array(
        [b for i, b in enumerate(coded) if mask[i % len(mask)]], dtype=np.uint8
    )


# ---------------------------------------------------------------------------
# two-permutation block interleaver


def interleave_reference(bits, n_cbps, n_bpsc):
    s = max(n_bpsc // 2, 1)
    first = [0] * n_cbps
    for k in range(n_cbps):
        i = (n_cbps // 16) * (k % 16) + k // 16
        first[i] = bits[k]
    out = [0] * n_cbps
    for i in range(n_cbps):
        j = s * (i // s) + (i + n_cbps - (16 * i) // n_cbps) % s
        out[j] = first[i]
    return np.array(out, dtype=np.uint8)


def deinterleave_reference(bits, n_cbps, n_bpsc):
    s = max(n_bpsc // 2, 1)
    first = [0] * n_cbps
    for j in range(n_cbps):
        i = s * (j // s) + (j + (16 * j) // n_cbps) % s
        first[i] = bits[j]
    out = [0] * n_cbps
    for i in range(n_cbps):
        k = 16 * i - (n_cbps - 1) * ((16 * i) // n_cbps)
        out[k] = first[i]
    return np.array(out, dtype=np.uint8)


# ---------------------------------------------------------------------------
# gray mapping tables straight from the published per-axis listings


_AXIS_LEVELS = {
    1: {(0,): -1, (1,): 1},
    2: {(0, 0): -3, (0, 1): -1, (1, 1): 1, (1, 0): 3},
    3: {
        (0, 0, 0): -7,
        (0, 0, 1): -5,
        (0, 1, 1): -3,
        (0, 1, 0): -1,
        (1, 1, 0): 1,
        (1, 1, 1): 3,
        (1, 0, 1): 5,
        (1, 0, 0): 7,
    },
}

_NORM = {2: 1.0, 4: np.sqrt(2.0), 16: np.sqrt(10.0), 64: np.sqrt(42.0)}


def qam_map_reference(bits, m):
    n_bpsc = {2: 1, 4: 2, 16: 4, 64: 6}[m]
    axis_bits = n_bpsc // 2 if m > 2 else 1
    table = _AXIS_LEVELS[axis_bits]
    points = []
    for i in range(0, len(bits), n_bpsc):
        group = [int(b) for b in bits[i : i + n_bpsc]]
        re = table[tuple(group[:axis_bits])]
        if m == 2:
            points.append(complex(re, 0.0))
        else:
            im = table[tuple(group[axis_bits:])]
            points.append(complex(re, im))
    return np.array(points, dtype=np.complex128) / _NORM[m]


# ---------------------------------------------------------------------------
# exhaustive maximum-likelihood decoding of short blocks


def exhaustive_ml_decode(received, n_info, state=0):
    """Best info word by Hamming distance over all 2^n_info candidates.

    Returns (info_bits, distance); ties resolve to the lowest word, so
    compare distances rather than words when checking a decoder.
    """
    best_bits, best_dist = None, None
    for word in range(1 << n_info):
        bits = [(word >> (n_info - 1 - i)) & 1 for i in range(n_info)]
        coded, _ = conv_encode_reference(bits, state)
        dist = int(np.sum(coded != received))
        if best_dist is None or dist < best_dist:
            best_bits, best_dist = bits, dist
    return np.array(best_bits, dtype=np.uint8), best_dist
