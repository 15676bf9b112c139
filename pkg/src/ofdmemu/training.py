"""Three-stage training: compensator warm-up, link surrogate fit, and
alternating end-to-end optimization of the image codec.

Stage 1 teaches the compensator the link's deterministic distortion on
temporally-structured waveforms.  Stage 2 fits the differentiable proxy
to measured link records and calibrates its injected noise to what the
link actually delivers.  Stage 3 alternates between (A) training codec
and compensator through the frozen proxy and (B) refreshing the proxy
on fresh real-link records from the current encoder.

All stages derive their randomness from one master seed and are exactly
reproducible.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, TrainingError
from .link import (
    EmulationSetup,
    LinkRecord,
    TargetSymbols,
    box_scale,
    emulated_link,
    reference_waveform,
    receiver_recover_soft,
    sender_invert,
    targets_from_waveform,
)
from .nn import (
    CompensatorModel,
    PeriodSpec,
    ProxyModel,
    SGDMomentum,
    Tensor,
    ToyJsccModel,
    complex_to_wave,
)
from .phy import demodulate_frame, tx_chain
from .sources import gaussian_symbols, glyph_images, longest_chosen_run, smooth_waveform

__all__ = [
    "TrainConfig",
    "Curriculum",
    "StageResult",
    "collect_link_records",
    "stage1_train_compensator",
    "stage2_train_proxy",
    "stage3_alternate",
    "train_jscc_ideal",
    "evaluate_image_link",
    "zero_shot_deploy",
]

# fixed child indices into the master SeedSequence spawn, so each
# consumer gets an independent stream no matter which stages run
_SEED_CHILDREN = 12
(
    _S1_DATA,
    _S1_INIT,
    _S1_SHUFFLE,
    _S2_DATA,
    _S2_INIT,
    _S2_SHUFFLE,
    _S3_INIT,
    _S3_LOOP,
    _S3_REFRESH,
    _ZS_INIT,
    _ZS_LOOP,
    _EVAL,
) = range(_SEED_CHILDREN)


@dataclass
class TrainConfig:
    """Knobs for all three stages; defaults are desk-scale."""

    master_seed: int = 0
    batch_size: int = 12
    image_batch_size: int = 32
    step_comp: float = 0.1
    step_proxy: float = 0.05
    step_jscc: float = 0.05
    momentum: float = 0.9
    gamma: float = 0.5
    tolerance: float = 1e-3
    # stage 1
    stage1_epochs: int = 50
    stage1_waveforms: int = 48
    stage1_val_waveforms: int = 16
    stage1_ofdm_symbols: int = 4
    stage1_snr_db: float = math.inf
    # stage 2
    stage2_epochs: int = 30
    stage2_records: int = 64
    stage2_snr_db: float = 15.0
    stage2_ofdm_symbols: int = 4
    # stage 3
    stage3_max_cycles: int = 4
    stage3_phase_a_epochs: int = 60
    stage3_images: int = 256
    refresh_batch_count: int = 24
    stage3_refresh_epochs: int = 8

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0):
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        counts = (
            self.batch_size,
            self.image_batch_size,
            self.stage1_epochs,
            self.stage1_waveforms,
            self.stage1_val_waveforms,
            self.stage1_ofdm_symbols,
            self.stage2_epochs,
            self.stage2_records,
            self.stage2_ofdm_symbols,
            self.stage3_max_cycles,
            self.stage3_phase_a_epochs,
            self.stage3_images,
            self.refresh_batch_count,
            self.stage3_refresh_epochs,
        )
        if any(c < 1 for c in counts):
            raise ConfigError("all training counts must be >= 1")
        if self.tolerance <= 0:
            raise ConfigError("tolerance must be positive")

    def child_rng(self, index: int) -> np.random.Generator:
        children = np.random.SeedSequence(self.master_seed).spawn(_SEED_CHILDREN)
        return np.random.default_rng(children[index])


@dataclass
class Curriculum:
    """SNR sampling policy and target source for training batches."""

    mode: str = "uniform"  # "uniform" or "fixed"
    snr_db: float = 15.0
    snr_range: tuple[float, float] = (5.0, 25.0)
    source: str = "gaussian"  # "gaussian" or "jscc"

    SWEEP_BOUNDS = (-5.0, 35.0)

    def __post_init__(self):
        if self.mode not in ("uniform", "fixed"):
            raise ConfigError(f"unknown curriculum mode {self.mode!r}")
        if self.source not in ("gaussian", "jscc"):
            raise ConfigError(f"unknown curriculum source {self.source!r}")
        lo, hi = self.snr_range
        bl, bh = self.SWEEP_BOUNDS
        if not (bl <= lo <= hi <= bh):
            raise ConfigError(
                f"snr range {self.snr_range} outside sweep bounds {self.SWEEP_BOUNDS}"
            )
        if self.mode == "fixed" and not (bl <= self.snr_db <= bh):
            raise ConfigError(f"fixed snr {self.snr_db} outside sweep bounds")

    def sample(self, rng: np.random.Generator) -> float:
        if self.mode == "fixed":
            return self.snr_db
        lo, hi = self.snr_range
        return float(rng.uniform(lo, hi))


@dataclass
class StageResult:
    model: object
    loss_trace: list
    metrics: dict = field(default_factory=dict)


def _mse(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean((np.asarray(a) - np.asarray(b)) ** 2))


def _check_finite(loss: float, stage: str, trace: list) -> None:
    if not math.isfinite(loss):
        raise TrainingError(f"{stage}: loss went non-finite ({loss})", trace)


# ---------------------------------------------------------------------------
# stage 1
# ---------------------------------------------------------------------------

def _stage1_pairs(
    setup: EmulationSetup, count: int, n_ofdm: int, snr_db: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Distorted/clean waveform pairs from the link on smooth sources."""
    cfg = setup.cfg
    carrier, _ = longest_chosen_run(setup)
    n = n_ofdm * cfg.samples_per_ofdm
    xs, ys = [], []
    for _ in range(count):
        wave = smooth_waveform(n, rng, carrier, cfg.fft_size, bandwidth_bins=4.0)
        targets = targets_from_waveform(wave, setup)
        seed = int(rng.integers(2**63))
        _, record = emulated_link(targets, snr_db, seed, setup, mode="soft")
        xs.append(complex_to_wave(record.output_waveform))
        ys.append(complex_to_wave(wave))
    return np.stack(xs), np.stack(ys)


def stage1_train_compensator(
    setup: EmulationSetup,
    train_cfg: TrainConfig,
    model: CompensatorModel | None = None,
    pairs: tuple[np.ndarray, np.ndarray] | None = None,
    val_pairs: tuple[np.ndarray, np.ndarray] | None = None,
) -> StageResult:
    """Fit the compensator to the link's deterministic distortion.

    ``pairs`` (distorted, clean) can be injected for synthetic tests;
    by default they come from the real link on smooth waveforms at the
    configured stage-1 SNR (noiseless by default).
    """
    data_rng = train_cfg.child_rng(_S1_DATA)
    if pairs is None:
        pairs = _stage1_pairs(
            setup,
            train_cfg.stage1_waveforms,
            train_cfg.stage1_ofdm_symbols,
            train_cfg.stage1_snr_db,
            data_rng,
        )
        val_pairs = _stage1_pairs(
            setup,
            train_cfg.stage1_val_waveforms,
            train_cfg.stage1_ofdm_symbols,
            train_cfg.stage1_snr_db,
            data_rng,
        )
    xs, ys = pairs
    if val_pairs is None:
        val_pairs = pairs
    if model is None:
        spec = PeriodSpec.from_config(setup.cfg, setup.n_chosen)
        model = CompensatorModel(spec, train_cfg.child_rng(_S1_INIT))

    opt = SGDMomentum(model.parameters(), train_cfg.step_comp, train_cfg.momentum)
    shuffle = train_cfg.child_rng(_S1_SHUFFLE)
    trace: list[float] = []
    for _ in range(train_cfg.stage1_epochs):
        perm = shuffle.permutation(len(xs))
        epoch_losses = []
        for lo in range(0, len(xs), train_cfg.batch_size):
            idx = perm[lo : lo + train_cfg.batch_size]
            loss = (model(Tensor(xs[idx])) - Tensor(ys[idx])).square().mean()
            opt.zero_grad()
            loss.backward()
            opt.apply()
            epoch_losses.append(loss.item())
        epoch_loss = float(np.mean(epoch_losses))
        _check_finite(epoch_loss, "stage1", trace)
        trace.append(epoch_loss)

    vx, vy = val_pairs
    base = _mse(vx, vy)  # untrained residual model is the identity
    after = _mse(model(Tensor(vx)).data, vy)
    return StageResult(
        model=model,
        loss_trace=trace,
        metrics={
            "val_mse_uncompensated": base,
            "val_mse_compensated": after,
            "improvement": (base - after) / base if base > 0 else 0.0,
        },
    )


# ---------------------------------------------------------------------------
# stage 2
# ---------------------------------------------------------------------------

def collect_link_records(
    setup: EmulationSetup,
    count: int,
    snr_db: float,
    rng: np.random.Generator,
    n_ofdm: int = 4,
    symbols_fn=None,
) -> list[LinkRecord]:
    """Soft-mode link records (with noiseless replays) for proxy training."""
    k = n_ofdm * setup.n_chosen
    records = []
    for _ in range(count):
        symbols = symbols_fn(k, rng) if symbols_fn else gaussian_symbols(k, rng)
        targets = TargetSymbols.unit_power(symbols, setup.cfg)
        seed = int(rng.integers(2**63))
        _, record = emulated_link(
            targets, snr_db, seed, setup, mode="soft", with_clean_replay=True
        )
        records.append(record)
    return records


def _calibrate_noise(records: list[LinkRecord]) -> tuple[float, float, float]:
    """Fit (gain, floor) of the proxy noise law to measured records.

    floor: mean squared deterministic distortion (clean replay vs
    reference).  gain: measured stochastic variance regressed against
    the nominal 10^(-snr/10) law.  Also returns the mean measured
    stochastic variance for reporting.
    """
    floors, variances, nominals = [], [], []
    for r in records:
        if r.clean_waveform is None:
            raise TrainingError("records lack clean replays; collect with replay on")
        floors.append(np.mean(np.abs(r.clean_waveform - r.reference) ** 2))
        var = np.mean(np.abs(r.output_waveform - r.clean_waveform) ** 2)
        variances.append(var)
        nominals.append(10.0 ** (-r.snr_db / 10.0))
    floor = float(np.mean(floors))
    nominals = np.asarray(nominals)
    variances = np.asarray(variances)
    denom = float(np.sum(nominals**2))
    gain = float(np.sum(variances * nominals) / denom) if denom > 0 else 0.0
    return gain, floor, float(np.mean(variances))


def stage2_train_proxy(
    records: list[LinkRecord],
    train_cfg: TrainConfig,
    model: ProxyModel | None = None,
    shuffle_labels: bool = False,
) -> StageResult:
    """Fit the proxy's deterministic part to link records and calibrate
    its noise injection.

    ``shuffle_labels`` deliberately mismatches input/output pairs; it
    exists for the control experiment showing the fit is real.
    """
    if len(records) < 8:
        raise TrainingError(f"need at least 8 records for a train/held-out split, got {len(records)}")
    n_held = max(2, len(records) // 4)
    train_recs = records[:-n_held]
    held_recs = records[-n_held:]

    if model is None:
        model = ProxyModel(train_cfg.child_rng(_S2_INIT))
    gain, floor, sigma_sq = _calibrate_noise(train_recs)
    model.noise_gain = gain
    model.noise_floor = floor

    xs = np.stack([complex_to_wave(r.reference) for r in train_recs])
    ys = np.stack([complex_to_wave(r.output_waveform) for r in train_recs])
    if shuffle_labels:
        ys = ys[train_cfg.child_rng(_S2_SHUFFLE).permutation(len(ys))]

    opt = SGDMomentum(model.parameters(), train_cfg.step_proxy, train_cfg.momentum)
    shuffle = train_cfg.child_rng(_S2_SHUFFLE)
    trace: list[float] = []
    for _ in range(train_cfg.stage2_epochs):
        perm = shuffle.permutation(len(xs))
        epoch_losses = []
        for lo in range(0, len(xs), train_cfg.batch_size):
            idx = perm[lo : lo + train_cfg.batch_size]
            # deterministic fit: noise off, noisy targets average out
            pred = model(Tensor(xs[idx]), inject_noise=False)
            loss = (pred - Tensor(ys[idx])).square().mean()
            opt.zero_grad()
            loss.backward()
            opt.apply()
            epoch_losses.append(loss.item())
        epoch_loss = float(np.mean(epoch_losses))
        _check_finite(epoch_loss, "stage2", trace)
        trace.append(epoch_loss)

    held_x = np.stack([complex_to_wave(r.reference) for r in held_recs])
    held_y = np.stack([complex_to_wave(r.output_waveform) for r in held_recs])
    pred = model(Tensor(held_x), inject_noise=False).data
    # complex per-sample MSE = 2x the per-real-component MSE
    held_mse = 2.0 * _mse(pred, held_y)
    _, held_floor, held_sigma_sq = _calibrate_noise(held_recs)
    bound = 2.0 * held_sigma_sq + held_floor
    return StageResult(
        model=model,
        loss_trace=trace,
        metrics={
            "noise_gain": gain,
            "noise_floor": floor,
            "sigma_sq": sigma_sq,
            "held_out_mse": held_mse,
            "held_out_bound": bound,
            "held_out_sigma_sq": held_sigma_sq,
            "held_out_floor": held_floor,
            "within_bound": held_mse <= bound,
        },
    )


# ---------------------------------------------------------------------------
# stage 3
# ---------------------------------------------------------------------------

class _SymbolFraming:
    """Constant linear maps between latent reals and reference waveforms.

    Built by probing the link's own framing and extraction with basis
    vectors, so the in-graph matrices agree with the real link by
    construction.  Latent layout: reals (2K,) with even indices real
    parts, odd indices imaginary parts.  Wave layout: (N_s, 2).
    """

    def __init__(self, setup: EmulationSetup, pairs: int):
        self.setup = setup
        self.pairs = pairs
        cfg = setup.cfg
        nch = setup.n_chosen
        n_sym = (pairs + nch - 1) // nch
        self.n_samples = n_sym * cfg.samples_per_ofdm
        frame = np.zeros((2 * self.n_samples, 2 * pairs))
        for k in range(pairs):
            basis = np.zeros(pairs, dtype=np.complex128)
            basis[k] = 1.0
            col = complex_to_wave(
                reference_waveform(TargetSymbols(basis, 1.0), setup)
            ).reshape(-1)
            frame[:, 2 * k] = col
            basis[k] = 1.0j
            col = complex_to_wave(
                reference_waveform(TargetSymbols(basis, 1.0), setup)
            ).reshape(-1)
            frame[:, 2 * k + 1] = col
        self.frame_matrix = frame

        extract = np.zeros((2 * pairs, 2 * self.n_samples))
        for j in range(2 * self.n_samples):
            wave = np.zeros(self.n_samples, dtype=np.complex128)
            wave[j // 2] = 1.0 if j % 2 == 0 else 1.0j
            grids = demodulate_frame(wave, cfg)
            vals = grids[:, setup.chosen_bins].reshape(-1)[:pairs]
            extract[0::2, j] = vals.real
            extract[1::2, j] = vals.imag
        self.extract_matrix = extract

    def frame(self, latent: Tensor) -> Tensor:
        """(B, 2K) latent -> (B, N_s, 2) reference waveform."""
        flat = latent @ Tensor(self.frame_matrix.T)
        return flat.reshape(flat.shape[0], self.n_samples, 2)

    def extract(self, wave: Tensor) -> Tensor:
        """(B, N_s, 2) waveform -> (B, 2K) latent estimates."""
        flat = wave.reshape(wave.shape[0], 2 * self.n_samples)
        return flat @ Tensor(self.extract_matrix.T)


def _latent_to_symbols(latent: np.ndarray) -> np.ndarray:
    return latent[0::2] + 1j * latent[1::2]


def stage3_alternate(
    jscc: ToyJsccModel,
    comp: CompensatorModel,
    proxy: ProxyModel,
    setup: EmulationSetup,
    train_cfg: TrainConfig,
    curriculum: Curriculum | None = None,
) -> StageResult:
    """Alternate codec/compensator training through the frozen proxy
    (phase A) with proxy refresh on fresh real-link records (phase B).

    Stops when the relative joint-loss improvement over one full cycle
    drops below the tolerance, or after the cycle cap.  A joint loss
    exceeding 10x its initial value aborts with the trace attached.
    """
    if curriculum is None:
        curriculum = Curriculum()
    framing = _SymbolFraming(setup, jscc.latent_pairs)
    loop_rng = train_cfg.child_rng(_S3_LOOP)
    refresh_rng = train_cfg.child_rng(_S3_REFRESH)
    images = glyph_images(train_cfg.stage3_images, train_cfg.child_rng(_S3_INIT))
    flat_images = images.reshape(len(images), -1)

    ab_params = jscc.parameters() + comp.parameters()
    opt_a = SGDMomentum(ab_params, train_cfg.step_jscc, train_cfg.momentum)
    opt_b = SGDMomentum(proxy.parameters(), train_cfg.step_proxy, train_cfg.momentum)
    gamma = train_cfg.gamma

    def joint_loss(imgs: np.ndarray, snr_db: float, seed) -> Tensor:
        z = jscc.encode(Tensor(imgs))
        ref = framing.frame(z)
        sim = proxy(ref, snr_db=snr_db, seed=seed)
        corrected = comp(sim)
        recon = jscc.decode(framing.extract(corrected))
        loss = (recon - Tensor(imgs)).square().mean()
        if gamma > 0:
            loss = loss + gamma * ((corrected - ref).square().mean())
        return loss

    # fixed probe for the stopping rule: mid-curriculum SNR, frozen seed
    probe_imgs = flat_images[: train_cfg.image_batch_size]
    probe_snr = (
        curriculum.snr_db
        if curriculum.mode == "fixed"
        else sum(curriculum.snr_range) / 2.0
    )

    def probe() -> float:
        return joint_loss(probe_imgs, probe_snr, seed=0xC0FFEE).item()

    trace: list[tuple[int, str, float]] = []
    initial = probe()
    trace.append((0, "probe", initial))
    previous = initial

    for cycle in range(1, train_cfg.stage3_max_cycles + 1):
        # phase A: codec + compensator through the frozen proxy
        for _ in range(train_cfg.stage3_phase_a_epochs):
            perm = loop_rng.permutation(len(flat_images))
            for lo in range(0, len(flat_images), train_cfg.image_batch_size):
                idx = perm[lo : lo + train_cfg.image_batch_size]
                snr = curriculum.sample(loop_rng)
                seed = int(loop_rng.integers(2**63))
                loss = joint_loss(flat_images[idx], snr, seed)
                opt_a.zero_grad()
                proxy.zero_grad()
                loss.backward()
                opt_a.apply()
                value = loss.item()
                _check_finite(value, "stage3/phaseA", trace)
            trace.append((cycle, "A", value))

        # phase B: fresh records from the current encoder, proxy refresh
        fresh: list[LinkRecord] = []
        for _ in range(train_cfg.refresh_batch_count):
            pick = refresh_rng.integers(len(flat_images))
            symbols = _latent_to_symbols(
                jscc.encode(Tensor(flat_images[pick : pick + 1])).data[0]
            )
            targets = TargetSymbols(symbols, box_scale(setup.cfg))
            snr = curriculum.sample(refresh_rng)
            seed = int(refresh_rng.integers(2**63))
            _, record = emulated_link(
                targets, snr, seed, setup, mode="soft", with_clean_replay=True
            )
            fresh.append(record)
        n_held = max(1, len(fresh) // 4)
        fresh_x = np.stack([complex_to_wave(r.reference) for r in fresh])
        fresh_y = np.stack([complex_to_wave(r.output_waveform) for r in fresh])
        held_x, held_y = fresh_x[-n_held:], fresh_y[-n_held:]
        pre_refresh = 2.0 * _mse(
            proxy(Tensor(held_x), inject_noise=False).data, held_y
        )
        for _ in range(train_cfg.stage3_refresh_epochs):
            perm = refresh_rng.permutation(len(fresh) - n_held)
            for lo in range(0, len(perm), train_cfg.batch_size):
                idx = perm[lo : lo + train_cfg.batch_size]
                pred = proxy(Tensor(fresh_x[idx]), inject_noise=False)
                loss = (pred - Tensor(fresh_y[idx])).square().mean()
                opt_b.zero_grad()
                loss.backward()
                opt_b.apply()
                value = loss.item()
                _check_finite(value, "stage3/phaseB", trace)
        post_refresh = 2.0 * _mse(
            proxy(Tensor(held_x), inject_noise=False).data, held_y
        )
        trace.append((cycle, "B", value))

        current = probe()
        trace.append((cycle, "probe", current))
        if current > 10.0 * initial:
            raise TrainingError(
                f"stage3 diverged: joint loss {current:.4g} > 10x initial {initial:.4g}",
                trace,
            )
        improvement = (previous - current) / previous if previous > 0 else 0.0
        previous = current
        if improvement < train_cfg.tolerance and cycle >= 2:
            break

    return StageResult(
        model=(jscc, comp, proxy),
        loss_trace=trace,
        metrics={
            "initial_joint_loss": initial,
            "final_joint_loss": previous,
            "cycles": cycle,
            "refresh_fidelity_pre": pre_refresh,
            "refresh_fidelity_post": post_refresh,
        },
    )


# ---------------------------------------------------------------------------
# ideal-analog training and deployment evaluation
# ---------------------------------------------------------------------------

def train_jscc_ideal(
    train_cfg: TrainConfig,
    curriculum: Curriculum | None = None,
    epochs: int | None = None,
    jscc: ToyJsccModel | None = None,
) -> StageResult:
    """Train the toy codec assuming a perfect analog channel.

    This produces the zero-shot baseline: symbol-level AWGN at the
    nominal SNR law, no link in the loop.
    """
    if curriculum is None:
        curriculum = Curriculum()
    if epochs is None:
        epochs = train_cfg.stage3_max_cycles * train_cfg.stage3_phase_a_epochs
    if jscc is None:
        jscc = ToyJsccModel(train_cfg.child_rng(_ZS_INIT))
    loop_rng = train_cfg.child_rng(_ZS_LOOP)
    images = glyph_images(train_cfg.stage3_images, train_cfg.child_rng(_S3_INIT))
    flat_images = images.reshape(len(images), -1)
    opt = SGDMomentum(jscc.parameters(), train_cfg.step_jscc, train_cfg.momentum)

    trace: list[float] = []
    for _ in range(epochs):
        perm = loop_rng.permutation(len(flat_images))
        for lo in range(0, len(flat_images), train_cfg.image_batch_size):
            idx = perm[lo : lo + train_cfg.image_batch_size]
            snr = curriculum.sample(loop_rng)
            var = 10.0 ** (-snr / 10.0)
            z = jscc.encode(Tensor(flat_images[idx]))
            noise = loop_rng.normal(0.0, math.sqrt(var / 2.0), size=z.shape)
            recon = jscc.decode(z + Tensor(noise))
            loss = (recon - Tensor(flat_images[idx])).square().mean()
            opt.zero_grad()
            loss.backward()
            opt.apply()
            value = loss.item()
            _check_finite(value, "ideal-analog", trace)
        trace.append(value)
    return StageResult(model=jscc, loss_trace=trace)


def evaluate_image_link(
    jscc: ToyJsccModel,
    setup: EmulationSetup,
    snr_db: float,
    seed: int,
    images: np.ndarray,
    compensator: CompensatorModel | None = None,
    mode: str = "soft",
) -> dict:
    """Image and symbol MSE through the real emulated link.

    Each image rides its own one-body transmission, matching how the
    compensator and codec see waveforms during training.  Per-image noise
    seeds derive from ``seed`` so runs stay reproducible.
    """
    flat = images.reshape(len(images), -1)
    pairs = jscc.latent_pairs
    z = jscc.encode(Tensor(flat)).data  # (B, 2K), unit average power
    symbols = np.empty((len(flat), pairs), dtype=np.complex128)
    symbols.real = z[:, 0::2]
    symbols.imag = z[:, 1::2]
    comp_fn = compensator.compensate_array if compensator is not None else None
    seq = np.random.SeedSequence(seed)
    est = np.empty_like(symbols)
    clip_total = 0.0
    for i, child in enumerate(seq.spawn(len(flat))):
        targets = TargetSymbols(symbols[i], box_scale(setup.cfg))
        est[i], record = emulated_link(
            targets,
            snr_db,
            np.random.default_rng(child),
            setup,
            mode=mode,
            compensator=comp_fn,
        )
        clip_total += record.clip_rate
    zhat = np.empty_like(z)
    zhat[:, 0::2] = est.real
    zhat[:, 1::2] = est.imag
    recon = jscc.decode(Tensor(zhat)).data
    per_image = np.mean((recon - flat) ** 2, axis=1)
    return {
        "image_mse": _mse(recon, flat),
        "symbol_mse": float(np.mean(np.abs(est - symbols) ** 2)),
        "clip_rate": clip_total / len(flat),
        "per_image_sq_err": per_image,
        "symbol_power": float(np.mean(np.abs(symbols) ** 2)),
    }


def zero_shot_deploy(
    jscc: ToyJsccModel,
    setup: EmulationSetup,
    snr_list: list[float],
    seed: int,
    images: np.ndarray,
    mode: str = "soft",
) -> list[dict]:
    """Evaluate an ideal-analog-trained codec on the real link, no
    adaptation, one row per SNR point."""
    rows = []
    for i, snr in enumerate(snr_list):
        result = evaluate_image_link(jscc, setup, snr, seed + i, images, mode=mode)
        result["snr_db"] = float(snr)
        rows.append(result)
    return rows


def clone_model(model):
    """Deep copy of a model (fresh parameter tensors, no shared state)."""
    fresh = copy.deepcopy(model)
    for _, p in fresh.named_parameters():
        p.grad = None
    return fresh


@dataclass
class PipelineResult:
    """Everything the harness needs after a full training run."""

    compensator: CompensatorModel
    proxy: ProxyModel
    jscc: ToyJsccModel
    stage0_jscc: ToyJsccModel
    zero_shot_jscc: ToyJsccModel
    stage1: StageResult
    stage2: StageResult
    stage3: StageResult
    zero_shot: StageResult


def run_training_pipeline(
    setup: EmulationSetup,
    train_cfg: TrainConfig,
    curriculum: Curriculum | None = None,
) -> PipelineResult:
    """Run all three stages plus the zero-shot baseline, one master seed.

    The codec that enters stage 3 starts from the zero-shot weights (a
    codec trained on the ideal analog channel, never on the link), so
    stage 3 is pure link adaptation.  The stage-0 snapshot is that same
    untouched starting point.
    """
    curriculum = curriculum or Curriculum()
    stage1 = stage1_train_compensator(setup, train_cfg)
    records = collect_link_records(
        setup,
        train_cfg.stage2_records,
        train_cfg.stage2_snr_db,
        train_cfg.child_rng(_S2_DATA),
        n_ofdm=train_cfg.stage2_ofdm_symbols,
    )
    stage2 = stage2_train_proxy(records, train_cfg)
    zero_shot = train_jscc_ideal(train_cfg, curriculum)
    jscc = clone_model(zero_shot.model)
    stage0 = clone_model(jscc)
    stage3 = stage3_alternate(
        jscc, stage1.model, stage2.model, setup, train_cfg, curriculum
    )
    return PipelineResult(
        compensator=stage1.model,
        proxy=stage2.model,
        jscc=jscc,
        stage0_jscc=stage0,
        zero_shot_jscc=zero_shot.model,
        stage1=stage1,
        stage2=stage2,
        stage3=stage3,
        zero_shot=zero_shot,
    )
