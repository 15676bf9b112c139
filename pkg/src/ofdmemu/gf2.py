"""Dense GF(2) linear algebra on bit-packed rows.

Rows are stored as little-endian uint64 words so row XOR and
matrix-vector products run as word-wide operations; a 216x216 system
solves in tens of microseconds after a one-time factorization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FramingError

__all__ = ["Gf2Matrix", "Gf2Vector", "Unsolvable", "Gf2Solver", "rank", "solve"]


def _word_count(bits: int) -> int:
    return (bits + 63) // 64


class Gf2Vector:
    """A fixed-length bit vector packed into uint64 words."""

    __slots__ = ("length", "words")

    def __init__(self, length: int, words: np.ndarray | None = None):
        self.length = int(length)
        if words is None:
            self.words = np.zeros(_word_count(length), dtype=np.uint64)
        else:
            self.words = np.asarray(words, dtype=np.uint64).copy()

    @classmethod
    def from_bits(cls, bits: np.ndarray) -> "Gf2Vector":
        bits = np.asarray(bits, dtype=np.uint8).ravel()
        nwords = _word_count(bits.size)
        padded = np.zeros(nwords * 64, dtype=np.uint8)
        padded[: bits.size] = bits & 1
        words = np.packbits(padded, bitorder="little").view("<u8")
        return cls(bits.size, words)

    def to_bits(self) -> np.ndarray:
        raw = np.unpackbits(self.words.view(np.uint8), bitorder="little")
        return raw[: self.length].astype(np.uint8)

    def get(self, i: int) -> int:
        return int((self.words[i >> 6] >> np.uint64(i & 63)) & np.uint64(1))

    def set(self, i: int, value: int) -> None:
        mask = np.uint64(1) << np.uint64(i & 63)
        if value & 1:
            self.words[i >> 6] |= mask
        else:
            self.words[i >> 6] &= ~mask

    def __xor__(self, other: "Gf2Vector") -> "Gf2Vector":
        if self.length != other.length:
            raise FramingError("vector length mismatch")
        return Gf2Vector(self.length, self.words ^ other.words)

    def any(self) -> bool:
        return bool(np.any(self.words))

    def popcount(self) -> int:
        return int(np.bitwise_count(self.words).sum())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Gf2Vector)
            and self.length == other.length
            and bool(np.array_equal(self.words, other.words))
        )

    def __repr__(self) -> str:
        return f"Gf2Vector({''.join(map(str, self.to_bits()))})"


class Gf2Matrix:
    """A rows x cols matrix over GF(2) with bit-packed rows."""

    __slots__ = ("rows", "cols", "words", "data")

    def __init__(self, rows: int, cols: int, data: np.ndarray | None = None):
        self.rows = int(rows)
        self.cols = int(cols)
        self.words = _word_count(cols)
        if data is None:
            self.data = np.zeros((self.rows, self.words), dtype=np.uint64)
        else:
            data = np.asarray(data, dtype=np.uint64)
            if data.shape != (self.rows, self.words):
                raise FramingError(f"expected packed shape {(self.rows, self.words)}")
            self.data = data.copy()

    @classmethod
    def from_dense(cls, arr: np.ndarray) -> "Gf2Matrix":
        arr = np.asarray(arr, dtype=np.uint8) & 1
        if arr.ndim != 2:
            raise FramingError("dense input must be 2-D")
        rows, cols = arr.shape
        nwords = _word_count(cols)
        padded = np.zeros((rows, nwords * 64), dtype=np.uint8)
        padded[:, :cols] = arr
        data = np.packbits(padded, axis=1, bitorder="little").view("<u8")
        return cls(rows, cols, data)

    @classmethod
    def identity(cls, n: int) -> "Gf2Matrix":
        m = cls(n, n)
        for i in range(n):
            m.data[i, i >> 6] = np.uint64(1) << np.uint64(i & 63)
        return m

    def to_dense(self) -> np.ndarray:
        raw = np.unpackbits(self.data.view(np.uint8), axis=1, bitorder="little")
        return raw[:, : self.cols].astype(np.uint8)

    def copy(self) -> "Gf2Matrix":
        return Gf2Matrix(self.rows, self.cols, self.data)

    def get(self, i: int, j: int) -> int:
        return int((self.data[i, j >> 6] >> np.uint64(j & 63)) & np.uint64(1))

    def set(self, i: int, j: int, value: int) -> None:
        mask = np.uint64(1) << np.uint64(j & 63)
        if value & 1:
            self.data[i, j >> 6] |= mask
        else:
            self.data[i, j >> 6] &= ~mask

    def row(self, i: int) -> Gf2Vector:
        return Gf2Vector(self.cols, self.data[i])

    def set_row(self, i: int, v: Gf2Vector) -> None:
        if v.length != self.cols:
            raise FramingError("row length mismatch")
        self.data[i] = v.words

    def take_rows(self, indices) -> "Gf2Matrix":
        indices = np.asarray(indices, dtype=np.intp)
        return Gf2Matrix(indices.size, self.cols, self.data[indices])

    def matvec(self, v: Gf2Vector) -> Gf2Vector:
        """Row-parity product: out[i] = parity(row_i AND v)."""
        if v.length != self.cols:
            raise FramingError(f"vector length {v.length} != cols {self.cols}")
        bits = (np.bitwise_count(self.data & v.words[None, :]).sum(axis=1) & 1).astype(np.uint8)
        return Gf2Vector.from_bits(bits)

    def column_bits(self, j: int) -> np.ndarray:
        """Column j as a 0/1 array over all rows."""
        return ((self.data[:, j >> 6] >> np.uint64(j & 63)) & np.uint64(1)).astype(np.uint8)

    def dump(self) -> str:
        """Textual form: one row per line as 0/1 characters."""
        dense = self.to_dense()
        return "\n".join("".join("1" if b else "0" for b in row) for row in dense)

    @classmethod
    def parse(cls, text: str) -> "Gf2Matrix":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not lines:
            return cls(0, 0)
        width = len(lines[0])
        for ln in lines:
            if len(ln) != width or set(ln) - {"0", "1"}:
                raise FramingError("matrix dump rows must be equal-length 0/1 strings")
        dense = np.array([[1 if ch == "1" else 0 for ch in ln] for ln in lines], dtype=np.uint8)
        return cls.from_dense(dense)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Gf2Matrix)
            and self.rows == other.rows
            and self.cols == other.cols
            and bool(np.array_equal(self.data, other.data))
        )

    def __repr__(self) -> str:
        return f"Gf2Matrix({self.rows}x{self.cols})"


@dataclass(frozen=True)
class Unsolvable:
    """Returned (not raised) when a system has no solution.

    ``row`` is the index, in the eliminated row order, of the first zero
    row whose target bit is 1.
    """

    row: int


class Gf2Solver:
    """Factor-once / solve-many Gaussian elimination.

    Construction reduces the matrix to reduced row echelon form while
    mirroring every row operation on an identity matrix T, so each later
    solve costs one T*y product plus a scatter of pivot bits.  Free
    variables are fixed to zero, making solutions deterministic.
    """

    def __init__(self, matrix: Gf2Matrix):
        self.matrix = matrix
        self.rows = matrix.rows
        self.cols = matrix.cols
        red = matrix.copy()
        tr = Gf2Matrix.identity(self.rows)
        pivots: list[int] = []
        r = 0
        for c in range(self.cols):
            if r >= self.rows:
                break
            col = red.column_bits(c)
            cand = np.nonzero(col[r:])[0]
            if cand.size == 0:
                continue
            p = r + int(cand[0])
            if p != r:
                red.data[[r, p]] = red.data[[p, r]]
                tr.data[[r, p]] = tr.data[[p, r]]
            col = red.column_bits(c)
            col[r] = 0
            hit = np.nonzero(col)[0]
            if hit.size:
                red.data[hit] ^= red.data[r]
                tr.data[hit] ^= tr.data[r]
            pivots.append(c)
            r += 1
        self.rank = r
        self.pivot_cols = np.asarray(pivots, dtype=np.intp)
        self._transform = tr
        self._reduced = red
        # Scatter tables: pivot bit i of the transformed target lands in
        # solution word/bit position of pivot column i.
        self._pivot_word = (self.pivot_cols >> 6).astype(np.intp)
        self._pivot_shift = (self.pivot_cols & 63).astype(np.uint64)

    def solve(self, target: Gf2Vector | np.ndarray) -> Gf2Vector | Unsolvable:
        if not isinstance(target, Gf2Vector):
            target = Gf2Vector.from_bits(target)
        if target.length != self.rows:
            raise FramingError(f"target length {target.length} != rows {self.rows}")
        z = np.bitwise_count(self._transform.data & target.words[None, :]).sum(axis=1) & 1
        if self.rank < self.rows:
            bad = np.nonzero(z[self.rank :])[0]
            if bad.size:
                return Unsolvable(self.rank + int(bad[0]))
        x = Gf2Vector(self.cols)
        zp = z[: self.rank].astype(np.uint64)
        np.bitwise_or.at(x.words, self._pivot_word, zp << self._pivot_shift)
        return x

    def residual(self, x: Gf2Vector, target: Gf2Vector) -> Gf2Vector:
        """A*x XOR target, for verification."""
        return self.matrix.matvec(x) ^ target

    def certify_unsolvable(self, cert: "Unsolvable", target: Gf2Vector | np.ndarray) -> bool:
        """Check the left-null-vector proof behind an Unsolvable result.

        The certificate names an eliminated row r; with u the r-th row of
        the accumulated transform, unsolvability means u*A = 0 while
        u*target = 1.  Both products are recomputed against the original
        matrix here, so a buggy elimination cannot certify itself.
        """
        if not isinstance(target, Gf2Vector):
            target = Gf2Vector.from_bits(target)
        u = self._transform.data[cert.row]
        acc = np.zeros(self.matrix.data.shape[1], dtype=np.uint64)
        for i in range(self.rows):
            if (u[i >> 6] >> np.uint64(i & 63)) & np.uint64(1):
                acc ^= self.matrix.data[i]
        if np.any(acc):
            return False
        dot = int(np.bitwise_count(u & target.words).sum() & 1)
        return dot == 1


def rank(matrix: Gf2Matrix) -> int:
    """Rank by forward elimination on a scratch copy."""
    data = matrix.data.copy()
    rows, cols = matrix.rows, matrix.cols
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        colbits = (data[r:, c >> 6] >> np.uint64(c & 63)) & np.uint64(1)
        cand = np.nonzero(colbits)[0]
        if cand.size == 0:
            continue
        p = r + int(cand[0])
        if p != r:
            data[[r, p]] = data[[p, r]]
        below = (data[r + 1 :, c >> 6] >> np.uint64(c & 63)) & np.uint64(1)
        hit = np.nonzero(below)[0] + r + 1
        if hit.size:
            data[hit] ^= data[r]
        r += 1
    return r


def solve(matrix: Gf2Matrix, target: Gf2Vector | np.ndarray) -> Gf2Vector | Unsolvable:
    """One-shot deterministic solve; see :class:`Gf2Solver` for batches."""
    return Gf2Solver(matrix).solve(target)
