"""Binary file formats: waveform frames, model parameters, link record
batches, and training checkpoints.

Frames store complex samples as a small header plus interleaved 64-bit
little-endian I/Q pairs.  Model files carry an architecture fingerprint
so parameters can never be loaded into the wrong network shape.  Both
formats are deliberately dumb: fixed headers, raw floats, no compression.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import FramingError
from .link import LinkRecord

FRAME_MAGIC = b"OFRM"
FRAME_VERSION = 1
_FRAME_HEADER = struct.Struct("<4sIQ")

MODEL_MAGIC = b"OMDL"
MODEL_VERSION = 1
_MODEL_HEADER = struct.Struct("<4sI16sQ")


def frame_bytes(samples: np.ndarray) -> bytes:
    """Serialize a complex sample vector to the flat frame format."""
    samples = np.asarray(samples, dtype=np.complex128).ravel()
    inter = np.empty(2 * samples.size, dtype="<f8")
    inter[0::2] = samples.real
    inter[1::2] = samples.imag
    return _FRAME_HEADER.pack(FRAME_MAGIC, FRAME_VERSION, samples.size) + inter.tobytes()


def frame_from_bytes(blob: bytes) -> np.ndarray:
    if len(blob) < _FRAME_HEADER.size:
        raise FramingError("frame blob shorter than its header")
    magic, version, count = _FRAME_HEADER.unpack_from(blob)
    if magic != FRAME_MAGIC:
        raise FramingError(f"bad frame magic {magic!r}")
    if version != FRAME_VERSION:
        raise FramingError(f"unsupported frame version {version}")
    body = np.frombuffer(blob, dtype="<f8", offset=_FRAME_HEADER.size)
    if body.size != 2 * count:
        raise FramingError(
            f"frame payload has {body.size} floats, header promised {2 * count}"
        )
    return body[0::2] + 1j * body[1::2]


def write_frame(path: str | Path, samples: np.ndarray) -> None:
    Path(path).write_bytes(frame_bytes(samples))


def read_frame(path: str | Path) -> np.ndarray:
    return frame_from_bytes(Path(path).read_bytes())


def write_model(path: str | Path, model) -> None:
    """Parameters in declaration order behind an architecture fingerprint."""
    state = model.state_vector().astype("<f8")
    fp = model.architecture_fingerprint().encode("ascii")
    header = _MODEL_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, fp, state.size)
    Path(path).write_bytes(header + state.tobytes())


def read_model_into(path: str | Path, model) -> None:
    """Load parameters, refusing on any fingerprint or size mismatch."""
    blob = Path(path).read_bytes()
    if len(blob) < _MODEL_HEADER.size:
        raise FramingError("model blob shorter than its header")
    magic, version, fp, count = _MODEL_HEADER.unpack_from(blob)
    if magic != MODEL_MAGIC:
        raise FramingError(f"bad model magic {magic!r}")
    if version != MODEL_VERSION:
        raise FramingError(f"unsupported model version {version}")
    want = model.architecture_fingerprint().encode("ascii")
    if fp != want:
        raise FramingError(
            f"architecture fingerprint {fp.decode()} does not match "
            f"model ({want.decode()})"
        )
    state = np.frombuffer(blob, dtype="<f8", offset=_MODEL_HEADER.size)
    if state.size != count:
        raise FramingError(f"model payload has {state.size} floats, header promised {count}")
    model.load_state_vector(np.array(state))


_RECORD_PARTS = ("tx", "ref", "out", "est", "clean")


def write_records(directory: str | Path, records: list[LinkRecord]) -> None:
    """One frame file per waveform plus a text manifest, one line per record."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    for i, rec in enumerate(records):
        arrays = {
            "tx": rec.tx_frame,
            "ref": rec.reference,
            "out": rec.output_waveform,
            "est": rec.estimates,
            "clean": rec.clean_waveform,
        }
        present = []
        for part in _RECORD_PARTS:
            if arrays[part] is None:
                continue
            write_frame(directory / f"rec{i:04d}.{part}.bin", arrays[part])
            present.append(part)
        lines.append(
            f"record={i} snr_db={rec.snr_db!r} seed={rec.seed} mode={rec.mode} "
            f"fingerprint={rec.config_fingerprint} n_chosen={rec.n_chosen} "
            f"clip_rate={rec.clip_rate!r} parts={','.join(present)}"
        )
    (directory / "manifest.txt").write_text("\n".join(lines) + "\n")


def read_records(directory: str | Path) -> list[LinkRecord]:
    directory = Path(directory)
    manifest = directory / "manifest.txt"
    if not manifest.exists():
        raise FramingError(f"no manifest.txt under {directory}")
    records = []
    for line in manifest.read_text().splitlines():
        if not line.strip():
            continue
        kv = dict(tok.split("=", 1) for tok in line.split())
        i = int(kv["record"])
        parts = kv["parts"].split(",")
        def load(part):
            if part not in parts:
                return None
            return read_frame(directory / f"rec{i:04d}.{part}.bin")
        records.append(
            LinkRecord(
                tx_frame=load("tx"),
                reference=load("ref"),
                output_waveform=load("out"),
                estimates=load("est"),
                snr_db=float(kv["snr_db"]),
                seed=int(kv["seed"]),
                mode=kv["mode"],
                config_fingerprint=kv["fingerprint"],
                n_chosen=int(kv["n_chosen"]),
                clip_rate=float(kv["clip_rate"]),
                clean_waveform=load("clean"),
            )
        )
    return records


def write_loss_trace(path: str | Path, trace) -> None:
    """Loss trace rows as CSV: (cycle, phase, loss) or (epoch, loss)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if trace and isinstance(trace[0], (tuple, list)):
            writer.writerow(["cycle", "phase", "loss"])
            for row in trace:
                writer.writerow(list(row))
        else:
            writer.writerow(["epoch", "loss"])
            for i, v in enumerate(trace):
                writer.writerow([i, v])


def save_checkpoint(directory: str | Path, models: dict, manifest: dict) -> None:
    """Named models to .model files plus a key=value manifest.

    ``manifest`` values must render round-trippably with str(); model
    fingerprints are appended automatically.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = dict(manifest)
    for name, model in models.items():
        write_model(directory / f"{name}.model", model)
        entries[f"fingerprint_{name}"] = model.architecture_fingerprint()
    lines = [f"{k}={entries[k]}" for k in sorted(entries)]
    (directory / "checkpoint.txt").write_text("\n".join(lines) + "\n")


def load_checkpoint(directory: str | Path, models: dict) -> dict:
    """Fill caller-constructed models from a checkpoint; returns the manifest."""
    directory = Path(directory)
    manifest_path = directory / "checkpoint.txt"
    if not manifest_path.exists():
        raise FramingError(f"no checkpoint.txt under {directory}")
    manifest = {}
    for line in manifest_path.read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            manifest[key] = value
    for name, model in models.items():
        path = directory / f"{name}.model"
        if not path.exists():
            raise FramingError(f"checkpoint is missing {path.name}")
        read_model_into(path, model)
    return manifest
