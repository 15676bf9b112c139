import numpy as np
import pytest

from ofdmemu.errors import FramingError
from ofdmemu.framefile import (
    FRAME_MAGIC,
    frame_bytes,
    frame_from_bytes,
    load_checkpoint,
    read_frame,
    read_model_into,
    read_records,
    save_checkpoint,
    write_frame,
    write_loss_trace,
    write_model,
    write_records,
)
from ofdmemu.link import TargetSymbols, emulated_link
from ofdmemu.nn.layers import Dense
from ofdmemu.sources import gaussian_symbols


def test_frame_roundtrip_bytes(rng):
    z = rng.normal(size=50) + 1j * rng.normal(size=50)
    blob = frame_bytes(z)
    assert blob.startswith(FRAME_MAGIC)
    assert np.array_equal(frame_from_bytes(blob), z)


def test_frame_roundtrip_file(tmp_path, rng):
    z = rng.normal(size=17) + 1j * rng.normal(size=17)
    p = tmp_path / "wave.bin"
    write_frame(p, z)
    assert np.array_equal(read_frame(p), z)


def test_frame_corruption_detected(rng):
    z = rng.normal(size=5) + 1j * rng.normal(size=5)
    blob = frame_bytes(z)
    with pytest.raises(FramingError):
        frame_from_bytes(b"XXXX" + blob[4:])
    with pytest.raises(FramingError):
        frame_from_bytes(blob[:-8])  # truncated payload
    with pytest.raises(FramingError):
        frame_from_bytes(blob[:6])  # truncated header


def test_model_roundtrip(tmp_path, rng):
    a = Dense(5, 3, rng)
    b = Dense(5, 3, np.random.default_rng(77))
    p = tmp_path / "dense.model"
    write_model(p, a)
    assert not np.array_equal(b.state_vector(), a.state_vector())
    read_model_into(p, b)
    assert np.array_equal(b.state_vector(), a.state_vector())


def test_model_fingerprint_mismatch(tmp_path, rng):
    a = Dense(5, 3, rng)
    wrong = Dense(4, 3, rng)
    p = tmp_path / "dense.model"
    write_model(p, a)
    with pytest.raises(FramingError):
        read_model_into(p, wrong)


def test_records_roundtrip(tmp_path, default_setup, rng):
    records = []
    for i in range(3):
        targets = TargetSymbols.unit_power(gaussian_symbols(20, rng), default_setup.cfg)
        _, rec = emulated_link(
            targets, 12.0, 100 + i, default_setup, with_clean_replay=(i == 0)
        )
        records.append(rec)
    write_records(tmp_path / "recs", records)
    back = read_records(tmp_path / "recs")
    assert len(back) == 3
    for orig, got in zip(records, back):
        assert np.array_equal(got.tx_frame, orig.tx_frame)
        assert np.array_equal(got.reference, orig.reference)
        assert np.array_equal(got.estimates, orig.estimates)
        assert got.snr_db == orig.snr_db
        assert got.seed == orig.seed
        assert got.mode == orig.mode
        assert got.config_fingerprint == orig.config_fingerprint
        assert got.n_chosen == orig.n_chosen
        assert got.clip_rate == orig.clip_rate
        if orig.clean_waveform is None:
            assert got.clean_waveform is None
        else:
            assert np.array_equal(got.clean_waveform, orig.clean_waveform)


def test_read_records_missing_dir(tmp_path):
    with pytest.raises(FramingError):
        read_records(tmp_path / "nope")


def test_loss_trace_formats(tmp_path):
    flat = tmp_path / "flat.csv"
    write_loss_trace(flat, [0.5, 0.25, 0.125])
    lines = flat.read_text().strip().splitlines()
    assert lines[0] == "epoch,loss"
    assert len(lines) == 4

    staged = tmp_path / "staged.csv"
    write_loss_trace(staged, [(0, "probe", 1.0), (1, "A", 0.5)])
    lines = staged.read_text().strip().splitlines()
    assert lines[0] == "cycle,phase,loss"
    assert lines[1].startswith("0,probe,")


def test_checkpoint_roundtrip(tmp_path, rng):
    a = Dense(6, 2, rng)
    b = Dense(2, 6, rng)
    save_checkpoint(tmp_path / "ckpt", {"enc": a, "dec": b}, {"note": "x", "seed": 3})
    enc2 = Dense(6, 2, np.random.default_rng(1))
    dec2 = Dense(2, 6, np.random.default_rng(2))
    manifest = load_checkpoint(tmp_path / "ckpt", {"enc": enc2, "dec": dec2})
    assert np.array_equal(enc2.state_vector(), a.state_vector())
    assert np.array_equal(dec2.state_vector(), b.state_vector())
    assert manifest["note"] == "x"
    assert manifest["seed"] == "3"


def test_checkpoint_missing_model_file(tmp_path, rng):
    a = Dense(6, 2, rng)
    save_checkpoint(tmp_path / "ckpt", {"enc": a}, {})
    with pytest.raises(FramingError):
        load_checkpoint(tmp_path / "ckpt", {"enc": a, "extra": a})
