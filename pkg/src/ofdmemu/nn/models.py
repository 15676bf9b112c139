"""Waveform-domain models: periodicity folds, compensator, link proxy,
and a toy image codec.

Waveforms travel as (N_s, 2) real arrays (I and Q columns); helpers
convert to and from the complex vectors the link layer uses.  Batched
model inputs carry a leading batch axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..config import PhyConfig
from .autodiff import Tensor, concat, conv2d
from .layers import Conv2d, Dense, Module

__all__ = [
    "PeriodSpec",
    "complex_to_wave",
    "wave_to_complex",
    "reshape_period",
    "inverse_reshape_trunc",
    "CompensatorModel",
    "ProxyModel",
    "ToyJsccModel",
]


def complex_to_wave(samples: np.ndarray) -> np.ndarray:
    """Complex vector -> (N_s, 2) I/Q array."""
    samples = np.asarray(samples, dtype=np.complex128).ravel()
    return np.stack([samples.real, samples.imag], axis=1)


def wave_to_complex(wave: np.ndarray) -> np.ndarray:
    """(N_s, 2) I/Q array -> complex vector."""
    wave = np.asarray(wave, dtype=np.float64)
    return wave[..., 0] + 1j * wave[..., 1]


@dataclass(frozen=True)
class PeriodSpec:
    """The two fold periods the compensator synchronizes to."""

    ofdm_period: int  # samples per OFDM symbol (fft + cp)
    source_period: int  # samples per transported symbol, on average

    def __post_init__(self):
        if self.ofdm_period < 1 or self.source_period < 1:
            raise ValueError("fold periods must be >= 1")

    @classmethod
    def from_config(cls, cfg: PhyConfig, n_chosen: int) -> "PeriodSpec":
        src = max(1, round(cfg.samples_per_ofdm / n_chosen))
        return cls(cfg.samples_per_ofdm, src)

    @property
    def periods(self) -> tuple[int, int]:
        return (self.ofdm_period, self.source_period)


def reshape_period(wave: Tensor | np.ndarray, period: int) -> Tensor:
    """Zero-pad an (N_s, 2) waveform to a period multiple and fold it
    into (rows, period, 2)."""
    w = wave if isinstance(wave, Tensor) else Tensor(wave)
    if period < 1:
        raise ValueError("period must be >= 1")
    n = w.shape[0]
    pad = (-n) % period
    if pad:
        w = concat([w, Tensor(np.zeros((pad, 2)))], axis=0)
    return w.reshape((n + pad) // period, period, 2)


def inverse_reshape_trunc(folded: Tensor | np.ndarray, n_samples: int) -> Tensor:
    """Unfold (rows, period, 2) back to a waveform and drop the padding."""
    t = folded if isinstance(folded, Tensor) else Tensor(folded)
    rows, period, _ = t.shape
    flat = t.reshape(rows * period, 2)
    if rows * period == n_samples:
        return flat
    return flat[:n_samples]


def _positional_channels(rows: int, period: int) -> np.ndarray:
    """Per-column phase channels so the shared conv can locate fixed
    structure (the cyclic-prefix columns) inside each fold."""
    phase = 2.0 * math.pi * np.arange(period) / period
    cols = np.stack([np.cos(phase), np.sin(phase)], axis=1)  # (period, 2)
    return np.broadcast_to(cols, (rows, period, 2)).copy()


class _ConvStack(Module):
    """conv -> tanh -> ... -> conv with a zero-initialized final layer."""

    def __init__(
        self,
        channels_in: int,
        channels_out: int,
        hidden: int,
        depth: int,
        kernel: tuple[int, int],
        rng: np.random.Generator,
    ):
        super().__init__()
        if depth < 2:
            raise ValueError("stack needs at least input and output layers")
        self.layers: list[Conv2d] = []
        for i in range(depth):
            cin = channels_in if i == 0 else hidden
            cout = channels_out if i == depth - 1 else hidden
            layer = Conv2d(cin, cout, kernel, rng, zero_init=(i == depth - 1))
            self.layers.append(self._sub(f"conv{i}", layer))

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers[:-1]:
            x = layer(x).tanh()
        return self.layers[-1](x)


class CompensatorModel(Module):
    """Learned correction of structured link distortion.

    One shared convolution stack runs over two foldings of the input
    waveform (OFDM-symbol period and source-symbol period); the branch
    outputs are unfolded, truncated, and summed.  With the residual
    flag the input is added, so the zero-initialized model is the
    identity; without it the untrained model outputs zero.
    """

    def __init__(
        self,
        period_spec: PeriodSpec,
        rng: np.random.Generator,
        channels: int = 8,
        depth: int = 3,
        kernel: tuple[int, int] = (5, 11),
        residual: bool = True,
    ):
        super().__init__()
        self.period_spec = period_spec
        self.channels = channels
        self.depth = depth
        self.kernel = tuple(kernel)
        self.residual = bool(residual)
        # input channels: I, Q, plus the two positional channels
        self.stack = self._sub("stack", _ConvStack(4, 2, channels, depth, kernel, rng))

    def describe(self) -> str:
        return (
            f"compensator(periods={self.period_spec.periods},"
            f" channels={self.channels}, depth={self.depth},"
            f" kernel={self.kernel}, residual={self.residual})"
        )

    def _branch(self, w: Tensor, period: int) -> Tensor:
        batch, n, _ = w.shape
        pad = (-n) % period
        if pad:
            w = concat([w, Tensor(np.zeros((batch, pad, 2)))], axis=1)
        rows = (n + pad) // period
        folded = w.reshape(batch, rows, period, 2)
        pos = np.broadcast_to(
            _positional_channels(rows, period), (batch, rows, period, 2)
        ).copy()
        x = concat([folded, Tensor(pos)], axis=3)
        y = self.stack(x)
        flat = y.reshape(batch, rows * period, 2)
        return flat if pad == 0 else flat[:, :n, :]

    def __call__(self, wave: Tensor | np.ndarray) -> Tensor:
        w = wave if isinstance(wave, Tensor) else Tensor(wave)
        single = len(w.shape) == 2
        if single:
            w = w.reshape(1, *w.shape)
        out = self._branch(w, self.period_spec.ofdm_period)
        out = out + self._branch(w, self.period_spec.source_period)
        if self.residual:
            out = out + w
        return out.reshape(out.shape[1], 2) if single else out

    def compensate_array(self, samples: np.ndarray) -> np.ndarray:
        """Complex-in, complex-out convenience for link callbacks."""
        wave = complex_to_wave(samples)
        return wave_to_complex(self(Tensor(wave)).data)


class ProxyModel(Module):
    """Differentiable stand-in for the physical link.

    Sender stack -> seeded additive Gaussian noise -> receiver stack,
    all shape-preserving over (B, N_s, 2).  Residual connections around
    both stacks plus zero-initialized final layers make the untrained,
    noise-free proxy an identity map.

    The injected per-sample complex variance is
    ``noise_gain * 10^(-snr/10) + noise_floor``.  The defaults (1, 0)
    give the nominal unit-reference-power law; stage-2 training
    calibrates both constants against measured link records so the
    surrogate noise matches what the real link actually delivers.
    """

    def __init__(
        self,
        rng: np.random.Generator,
        channels: int = 8,
        depth: int = 3,
        kernel_width: int = 9,
    ):
        super().__init__()
        self.channels = channels
        self.depth = depth
        self.kernel_width = kernel_width
        self.noise_gain = 1.0
        self.noise_floor = 0.0
        kern = (1, kernel_width)
        self.sender = self._sub("sender", _ConvStack(2, 2, channels, depth, kern, rng))
        self.receiver = self._sub(
            "receiver", _ConvStack(2, 2, channels, depth, kern, rng)
        )

    def describe(self) -> str:
        return (
            f"proxy(channels={self.channels}, depth={self.depth},"
            f" kernel_width={self.kernel_width})"
        )

    def _run(self, stack: _ConvStack, w: Tensor) -> Tensor:
        batch, n, _ = w.shape
        x = w.reshape(batch, 1, n, 2)
        y = stack(x).reshape(batch, n, 2)
        return y + w

    def __call__(
        self,
        wave: Tensor | np.ndarray,
        snr_db: float = math.inf,
        seed: int | np.random.Generator | None = None,
        inject_noise: bool = True,
    ) -> Tensor:
        w = wave if isinstance(wave, Tensor) else Tensor(wave)
        single = len(w.shape) == 2
        if single:
            w = w.reshape(1, *w.shape)
        h = self._run(self.sender, w)
        base = 0.0 if (math.isinf(snr_db) and snr_db > 0) else 10.0 ** (-snr_db / 10.0)
        var = self.noise_gain * base + self.noise_floor
        if var > 0 and inject_noise:
            if seed is None:
                raise ValueError("noisy proxy evaluation requires a seed")
            rng = (
                seed
                if isinstance(seed, np.random.Generator)
                else np.random.default_rng(seed)
            )
            noise = rng.normal(0.0, math.sqrt(var / 2.0), size=h.shape)
            h = h + Tensor(noise)
        y = self._run(self.receiver, h)
        return y.reshape(y.shape[1], 2) if single else y


class ToyJsccModel(Module):
    """Small dense autoencoder mapping images to complex channel symbols.

    The encoder emits 2K reals, normalized per image so the paired
    complex symbols have unit average power, then soft-clipped so every
    axis stays strictly inside the link's quantizer box (the box edge
    sits at 3 per-axis sigma, i.e. 3/sqrt(2) in these units).  Bounded
    latents mean the real link never hard-clips codec outputs, and the
    codec cannot drift into amplitude regimes a link surrogate has
    never seen.  Latent pairing: consecutive reals become (real, imag)
    of one symbol.
    """

    def __init__(
        self,
        rng: np.random.Generator,
        image_shape: tuple[int, int, int] = (8, 8, 1),
        latent_pairs: int = 24,
        hidden: int = 48,
        latent_bound: float = 2.0,
    ):
        super().__init__()
        self.image_shape = tuple(image_shape)
        self.latent_pairs = int(latent_pairs)
        self.hidden = int(hidden)
        self.latent_bound = float(latent_bound)
        pixels = int(np.prod(self.image_shape))
        self.pixels = pixels
        self.enc1 = self._sub("enc1", Dense(pixels, hidden, rng))
        self.enc2 = self._sub("enc2", Dense(hidden, 2 * latent_pairs, rng))
        self.dec1 = self._sub("dec1", Dense(2 * latent_pairs, hidden, rng))
        self.dec2 = self._sub("dec2", Dense(hidden, pixels, rng))
        self._half = Tensor(np.sqrt(0.5))

    def describe(self) -> str:
        return (
            f"jscc(image={self.image_shape}, pairs={self.latent_pairs},"
            f" hidden={self.hidden}, bound={self.latent_bound})"
        )

    def encode(self, images: Tensor) -> Tensor:
        """(B, pixels) -> (B, 2K) bounded near-unit-power latent reals."""
        z = self.enc2(self.enc1(images).tanh())
        power = z.square() @ Tensor(np.full((2 * self.latent_pairs, 1), 1.0 / (2 * self.latent_pairs)))
        rms = (power + 1e-12).sqrt()
        z = z / rms * self._half
        b = self.latent_bound
        return (z * (1.0 / b)).tanh() * b

    def decode(self, latent: Tensor) -> Tensor:
        """(B, 2K) -> (B, pixels)."""
        return self.dec2(self.dec1(latent).tanh())

    # -- numpy convenience for deployment ------------------------------------

    def encode_symbols(self, image: np.ndarray) -> np.ndarray:
        """Single image -> K unit-average-power complex symbols."""
        flat = np.asarray(image, dtype=np.float64).reshape(1, -1)
        if flat.size != self.pixels:
            raise ValueError(
                f"image has {flat.size} pixels, model expects {self.pixels}"
            )
        z = self.encode(Tensor(flat)).data[0]
        return z[0::2] + 1j * z[1::2]

    def decode_symbols(self, symbols: np.ndarray) -> np.ndarray:
        """K complex symbol estimates -> image array."""
        symbols = np.asarray(symbols, dtype=np.complex128).ravel()
        if symbols.size != self.latent_pairs:
            raise ValueError(
                f"got {symbols.size} symbols, model expects {self.latent_pairs}"
            )
        z = np.empty(2 * self.latent_pairs)
        z[0::2] = symbols.real
        z[1::2] = symbols.imag
        out = self.decode(Tensor(z.reshape(1, -1))).data[0]
        return out.reshape(self.image_shape)
