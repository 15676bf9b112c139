import math
from fractions import Fraction

import numpy as np
import pytest

from ofdmemu.config import PhyConfig
from ofdmemu.errors import CapacityError, FramingError, SelectionError
from ofdmemu.link import (
    TargetSymbols,
    awgn,
    box_edge,
    box_scale,
    emulated_link,
    extract_estimates,
    float_serialization_link,
    ideal_analog_link,
    receiver_recover_hard,
    receiver_recover_soft,
    reference_waveform,
    sender_invert,
    targets_from_waveform,
    waveform_from_values,
)
from ofdmemu.phy import BasebandFrame, tx_chain


def uniform_box_targets(n, cfg, rng, margin=1.0):
    lim = box_edge(cfg) * margin
    re = rng.uniform(-lim, lim, n)
    im = rng.uniform(-lim, lim, n)
    return TargetSymbols(re + 1j * im, 1.0)


@pytest.mark.parametrize(
    "mod,edge",
    [(2, 1.0), (4, 1 / math.sqrt(2)), (16, 3 / math.sqrt(10)), (64, 7 / math.sqrt(42))],
)
def test_box_edge_values(mod, edge):
    cfg = PhyConfig(modulation_order=mod, coding_rate=Fraction(1, 2))
    assert box_edge(cfg) == pytest.approx(edge)
    assert box_scale(cfg) == pytest.approx(edge * math.sqrt(2) / 3)


def test_target_symbols_validation():
    with pytest.raises(FramingError):
        TargetSymbols(np.array([]), 1.0)
    with pytest.raises(FramingError):
        TargetSymbols(np.array([np.nan + 0j]), 1.0)
    with pytest.raises(FramingError):
        TargetSymbols(np.array([1 + 1j]), 0.0)
    with pytest.raises(FramingError):
        TargetSymbols(np.array([1 + 1j]), -2.0)


def test_setup_build_caches_and_bounds(default_cfg, default_setup):
    again = type(default_setup).build(default_cfg)
    assert again is default_setup
    with pytest.raises(CapacityError):
        type(default_setup).build(default_cfg, n_chosen=default_setup.n_chosen + 1)


def test_sender_invert_quantizes_within_half_step(default_setup, rng):
    cfg = default_setup.cfg
    targets = uniform_box_targets(100, cfg, rng)
    plan = sender_invert(targets, default_setup)
    scaled = targets.symbols  # scale is 1.0
    q = plan.quantized.reshape(-1)[: targets.count]
    assert np.max(np.abs(q.real - scaled.real)) <= cfg.k_mod + 1e-12
    assert np.max(np.abs(q.imag - scaled.imag)) <= cfg.k_mod + 1e-12
    assert plan.clip_count == 0


def test_sender_invert_counts_clipped_axes(default_setup):
    cfg = default_setup.cfg
    edge = box_edge(cfg)
    syms = np.array([2 * edge + 2j * edge, 0.1 + 0.1j, -2 * edge + 0.0j])
    plan = sender_invert(TargetSymbols(syms, 1.0), default_setup)
    assert plan.clip_count == 3
    assert plan.clip_rate == pytest.approx(3 / 6)


def test_noiseless_soft_recovery_hits_quantized_points(default_setup, rng):
    targets = uniform_box_targets(80, default_setup.cfg, rng)
    plan = sender_invert(targets, default_setup)
    frame = tx_chain(plan.bitstream, default_setup.cfg)
    est, recon = receiver_recover_soft(frame, plan, default_setup)
    want = plan.quantized.reshape(-1)[: targets.count] / plan.scale
    assert np.allclose(est, want, atol=1e-9)
    assert recon.shape == (frame.samples.size,)


def test_noiseless_hard_recovery_matches_soft(default_setup, rng):
    targets = uniform_box_targets(80, default_setup.cfg, rng)
    plan = sender_invert(targets, default_setup)
    frame = tx_chain(plan.bitstream, default_setup.cfg)
    est = receiver_recover_hard(frame, plan, default_setup)
    want = plan.quantized.reshape(-1)[: targets.count] / plan.scale
    assert np.allclose(est, want, atol=1e-9)


def test_quantization_error_statistics(default_setup, rng):
    # uniform in-box targets: per-axis error uniform on one half step,
    # so complex RMS error = sqrt(2) * step / sqrt(12)
    cfg = default_setup.cfg
    targets = uniform_box_targets(5000, cfg, rng)
    plan = sender_invert(targets, default_setup)
    err = plan.quantized.reshape(-1)[: targets.count] - targets.symbols
    rms = float(np.sqrt(np.mean(np.abs(err) ** 2)))
    expect = math.sqrt(2) * (2 * cfg.k_mod) / math.sqrt(12)
    assert rms == pytest.approx(expect, rel=0.1)


def test_awgn_hits_requested_snr(rng):
    x = (rng.normal(size=20000) + 1j * rng.normal(size=20000)) / math.sqrt(2)
    y = awgn(x, 10.0, 7)
    measured = np.mean(np.abs(x) ** 2) / np.mean(np.abs(y - x) ** 2)
    assert 10 * math.log10(measured) == pytest.approx(10.0, abs=0.2)
    # deterministic in the seed
    assert np.array_equal(awgn(x, 10.0, 7), y)
    assert not np.array_equal(awgn(x, 10.0, 8), y)


def test_awgn_infinite_snr_is_identity(rng):
    x = rng.normal(size=64) + 1j * rng.normal(size=64)
    assert np.array_equal(awgn(x, math.inf, 1), x)
    frame = BasebandFrame(x.copy(), 0)
    out = awgn(frame, math.inf, 1)
    assert isinstance(out, BasebandFrame)
    assert np.array_equal(out.samples, x)


def test_ideal_analog_noise_law(rng):
    n = 200_000
    syms = np.zeros(n, dtype=np.complex128)
    out = ideal_analog_link(syms, 10.0, rng)
    mse = float(np.mean(np.abs(out) ** 2))
    assert mse == pytest.approx(0.1, rel=0.02)
    assert np.array_equal(ideal_analog_link(syms, math.inf, 1), syms)


def test_float_serialization_roundtrip_noiseless(default_cfg, rng):
    vals = rng.normal(size=200)
    out = float_serialization_link(vals, math.inf, 3, default_cfg)
    assert np.array_equal(out, vals.astype(np.float32).astype(np.float64))


def test_float_serialization_saturates(default_cfg, rng):
    vals = rng.normal(size=200)
    out = float_serialization_link(vals, -10.0, 3, default_cfg, saturation=50.0)
    assert np.all(np.isfinite(out))
    assert np.max(np.abs(out)) <= 50.0


def test_waveform_value_roundtrip(default_setup, rng):
    nch = default_setup.n_chosen
    vals = rng.normal(size=3 * nch) + 1j * rng.normal(size=3 * nch)
    wave = waveform_from_values(vals, default_setup)
    back = targets_from_waveform(wave, default_setup, scale=1.0)
    assert np.allclose(back.symbols, vals, atol=1e-9)
    with pytest.raises(FramingError):
        waveform_from_values(vals[:-1], default_setup)
    with pytest.raises(FramingError):
        targets_from_waveform(wave[:-1], default_setup)


def test_reference_waveform_shape(default_setup, rng):
    targets = uniform_box_targets(default_setup.n_chosen + 3, default_setup.cfg, rng)
    ref = reference_waveform(targets, default_setup)
    assert ref.size == 2 * default_setup.cfg.samples_per_ofdm


def test_emulated_link_soft_record(default_setup, rng):
    targets = uniform_box_targets(60, default_setup.cfg, rng)
    est, rec = emulated_link(targets, 20.0, 11, default_setup, with_clean_replay=True)
    assert est.size == 60
    assert rec.mode == "soft"
    assert rec.seed == 11
    assert rec.n_chosen == default_setup.n_chosen
    assert rec.config_fingerprint == default_setup.cfg.fingerprint()
    assert rec.clean_waveform is not None
    # same seed reproduces, different seed does not
    est2, _ = emulated_link(targets, 20.0, 11, default_setup)
    assert np.array_equal(est, est2)
    est3, _ = emulated_link(targets, 20.0, 12, default_setup)
    assert not np.array_equal(est, est3)


def test_emulated_link_estimates_stay_in_box(default_setup, rng):
    targets = uniform_box_targets(60, default_setup.cfg, rng)
    est, _ = emulated_link(targets, -5.0, 5, default_setup)
    lim = box_edge(default_setup.cfg) + 1e-12  # scale is 1.0
    assert np.max(np.abs(est.real)) <= lim
    assert np.max(np.abs(est.imag)) <= lim


def test_emulated_link_hard_mode(default_setup, rng):
    targets = uniform_box_targets(60, default_setup.cfg, rng)
    est, rec = emulated_link(targets, math.inf, 1, default_setup, mode="hard")
    plan = sender_invert(targets, default_setup)
    want = plan.quantized.reshape(-1)[:60] / plan.scale
    assert np.allclose(est, want, atol=1e-9)
    assert rec.output_waveform is None
    with pytest.raises(SelectionError):
        emulated_link(targets, 10.0, 1, default_setup, mode="hard", compensator=lambda w: w)
    with pytest.raises(SelectionError):
        emulated_link(targets, 10.0, 1, default_setup, mode="through")


def test_emulated_link_compensator_hook(default_setup, rng):
    targets = uniform_box_targets(40, default_setup.cfg, rng)
    est_id, _ = emulated_link(targets, 15.0, 4, default_setup, compensator=lambda w: w)
    est_plain, _ = emulated_link(targets, 15.0, 4, default_setup)
    assert np.allclose(est_id, est_plain, atol=1e-9)
    with pytest.raises(FramingError):
        emulated_link(targets, 15.0, 4, default_setup, compensator=lambda w: w[:-1])


def test_extract_estimates_clips(default_setup, rng):
    targets = uniform_box_targets(default_setup.n_chosen, default_setup.cfg, rng)
    plan = sender_invert(targets, default_setup)
    big = waveform_from_values(
        np.full(default_setup.n_chosen, 100 + 100j), default_setup
    )
    est = extract_estimates(big, plan, default_setup)
    lim = box_edge(default_setup.cfg) / plan.scale
    assert np.all(np.abs(est.real) <= lim + 1e-9)
    assert np.all(np.abs(est.imag) <= lim + 1e-9)
