import numpy as np
import pytest

from ofdmemu.errors import FramingError
from ofdmemu.gf2 import Gf2Matrix, Gf2Solver, Gf2Vector, Unsolvable, rank, solve


def random_matrix(rows, cols, rng):
    bits = rng.integers(0, 2, (rows, cols), dtype=np.uint8)
    return Gf2Matrix.from_dense(bits), bits


def test_vector_roundtrip(rng):
    bits = rng.integers(0, 2, 131, dtype=np.uint8)
    assert np.array_equal(Gf2Vector.from_bits(bits).to_bits(), bits)


def test_vector_xor(rng):
    a = rng.integers(0, 2, 70, dtype=np.uint8)
    b = rng.integers(0, 2, 70, dtype=np.uint8)
    out = Gf2Vector.from_bits(a) ^ Gf2Vector.from_bits(b)
    assert np.array_equal(out.to_bits(), a ^ b)


def test_matvec_matches_numpy(rng):
    for rows, cols in [(5, 9), (64, 64), (70, 130), (216, 216)]:
        m, bits = random_matrix(rows, cols, rng)
        x = rng.integers(0, 2, cols, dtype=np.uint8)
        want = bits @ x % 2
        got = m.matvec(Gf2Vector.from_bits(x)).to_bits()
        assert np.array_equal(got, want)


def test_rank_matches_numpy_gauss(rng):
    def numpy_rank(a):
        a = a.copy() % 2
        r = 0
        for c in range(a.shape[1]):
            piv = np.nonzero(a[r:, c])[0]
            if piv.size == 0:
                continue
            p = r + piv[0]
            a[[r, p]] = a[[p, r]]
            hits = np.nonzero(a[:, c])[0]
            for h in hits:
                if h != r:
                    a[h] ^= a[r]
            r += 1
            if r == a.shape[0]:
                break
        return r

    for rows, cols in [(10, 10), (20, 35), (40, 25), (64, 64)]:
        m, bits = random_matrix(rows, cols, rng)
        assert rank(m) == numpy_rank(bits)


def test_solver_recovers_known_solution(rng):
    m, bits = random_matrix(48, 48, rng)
    solver = Gf2Solver(m)
    for _ in range(20):
        x = rng.integers(0, 2, 48, dtype=np.uint8)
        y = bits @ x % 2
        got = solver.solve(y)
        assert not isinstance(got, Unsolvable)
        # any solution must reproduce the target exactly
        assert np.array_equal(bits @ got.to_bits() % 2, y)


def test_solver_unsolvable_certificate(rng):
    # duplicate rows with differing targets force inconsistency
    bits = rng.integers(0, 2, (30, 20), dtype=np.uint8)
    bits[29] = bits[0]
    m = Gf2Matrix.from_dense(bits)
    solver = Gf2Solver(m)
    x = rng.integers(0, 2, 20, dtype=np.uint8)
    y = bits @ x % 2
    y[29] ^= 1  # contradict the duplicated row
    res = solver.solve(y)
    assert isinstance(res, Unsolvable)
    assert solver.certify_unsolvable(res, y)
    # and the certificate rejects a solvable target
    ok = solver.solve(bits @ x % 2)
    assert not isinstance(ok, Unsolvable)


def test_solver_rejects_bad_target_length(rng):
    m, _ = random_matrix(16, 16, rng)
    solver = Gf2Solver(m)
    with pytest.raises(FramingError):
        solver.solve(np.zeros(17, dtype=np.uint8))


def test_one_shot_solve_helper(rng):
    m, bits = random_matrix(25, 31, rng)
    x = rng.integers(0, 2, 31, dtype=np.uint8)
    y = bits @ x % 2
    got = solve(m, y)
    assert not isinstance(got, Unsolvable)
    assert np.array_equal(bits @ got.to_bits() % 2, y)


def test_dump_parse_roundtrip(rng):
    m, _ = random_matrix(7, 12, rng)
    assert Gf2Matrix.parse(m.dump()) == m


def test_take_rows_selects(rng):
    m, bits = random_matrix(12, 9, rng)
    sel = [3, 0, 7, 7]
    sub = m.take_rows(sel)
    assert np.array_equal(sub.to_dense(), bits[sel])


def test_free_variables_fixed_to_zero(rng):
    # wide system: cols beyond the pivots stay zero, so solves repeat exactly
    m, bits = random_matrix(10, 30, rng)
    solver = Gf2Solver(m)
    y = bits @ rng.integers(0, 2, 30, dtype=np.uint8) % 2
    a = solver.solve(y).to_bits()
    b = solver.solve(y).to_bits()
    assert np.array_equal(a, b)
    pivot_set = set(int(c) for c in solver.pivot_cols)
    for c in range(30):
        if c not in pivot_set:
            assert a[c] == 0
