"""Command-line front end.

Subcommands: selftest, tx, rx, emulate, sweep, train-comp, train-proxy,
train-e2e.  Every subcommand accepts --config <file>, --seed <u64>, and
--out <dir>.  Exit codes: 0 success, 1 invariant failure, 2 bad
configuration or usage.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .config import PhyConfig, parse_config_file
from .errors import ConfigError, OfdmEmuError
from .framefile import (
    read_frame,
    read_model_into,
    save_checkpoint,
    write_frame,
    write_loss_trace,
)
from .harness import (
    CheckpointMissing,
    ExperimentSpec,
    emit_plotdata,
    run_sweep,
    selftest,
    write_csv,
)
from .link import EmulationSetup, TargetSymbols, box_scale, emulated_link
from .phy import BasebandFrame, rx_chain, tx_chain

DEFAULT_OUT = "ofdmemu_out"


def _load_sections(args) -> dict:
    if getattr(args, "config", None):
        return parse_config_file(args.config)
    return {}


def _phy_config(args) -> PhyConfig:
    if getattr(args, "config", None):
        return PhyConfig.from_file(args.config)
    return PhyConfig()


def _train_config(args, sections: dict):
    from .training import TrainConfig

    fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    kwargs = {}
    for key, raw in sections.get("train", {}).items():
        if key not in fields:
            raise ConfigError(f"unknown [train] key {key!r}")
        ftype = fields[key].type
        caster = float if "float" in str(ftype) else int
        try:
            kwargs[key] = caster(raw)
        except ValueError:
            raise ConfigError(f"bad value for [train] {key}: {raw!r}") from None
    if args.seed is not None:
        kwargs["master_seed"] = args.seed
    return TrainConfig(**kwargs)


def _experiment_spec(args, sections: dict, cfg: PhyConfig) -> ExperimentSpec:
    kv = sections.get("sweep", {})
    kwargs: dict = {"cfg": cfg}
    if "snr_list" in kv:
        kwargs["snr_list"] = tuple(float(t) for t in kv["snr_list"].replace(",", " ").split())
    if "n_symbols" in kv:
        kwargs["n_symbols"] = int(kv["n_symbols"])
    if "n_images" in kv:
        kwargs["n_images"] = int(kv["n_images"])
    if "systems" in kv:
        kwargs["systems"] = tuple(t for t in kv["systems"].replace(",", " ").split() if t)
    if args.systems:
        kwargs["systems"] = tuple(args.systems.split(","))
    if args.seed is not None:
        kwargs["master_seed"] = args.seed
    return ExperimentSpec(**kwargs)


def _out_dir(args) -> Path:
    out = Path(args.out or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _bits_from_file(path: str) -> np.ndarray:
    return np.unpackbits(np.frombuffer(Path(path).read_bytes(), dtype=np.uint8), bitorder="little")


def cmd_selftest(args) -> int:
    cfg = _phy_config(args)
    report = selftest(cfg, quick=args.quick)
    print(report.render())
    if args.out:
        out = _out_dir(args)
        (out / "selftest.txt").write_text(report.render() + "\n")
    return 0 if report.passed else 1


def cmd_tx(args) -> int:
    cfg = _phy_config(args)
    bits = _bits_from_file(args.infile)
    pad = (-bits.size) % cfg.n_dbps
    payload = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)])
    frame = tx_chain(payload, cfg)
    out = _out_dir(args)
    write_frame(out / "waveform.bin", frame.samples)
    print(
        f"transmitted {bits.size} payload bits ({pad} pad) as "
        f"{frame.samples.size} samples -> {out / 'waveform.bin'}"
    )
    return 0


def cmd_rx(args) -> int:
    cfg = _phy_config(args)
    samples = read_frame(args.infile)
    frame = BasebandFrame.from_samples(samples, cfg)
    decoded = rx_chain(frame, cfg)
    out = _out_dir(args)
    (out / "decoded.bin").write_bytes(np.packbits(decoded, bitorder="little").tobytes())
    print(f"decoded {decoded.size} bits -> {out / 'decoded.bin'}")
    return 0


def cmd_emulate(args) -> int:
    cfg = _phy_config(args)
    setup = EmulationSetup.build(cfg)
    seed = args.seed if args.seed is not None else 0
    if args.infile:
        symbols = read_frame(args.infile)
    else:
        rng = np.random.default_rng(seed)
        symbols = (
            rng.standard_normal(args.symbols) + 1j * rng.standard_normal(args.symbols)
        ) / np.sqrt(2.0)
    targets = TargetSymbols(symbols, box_scale(cfg))
    estimates, record = emulated_link(targets, args.snr, seed, setup, mode=args.mode)
    est = estimates[: symbols.size]
    mse = float(np.mean(np.abs(est - symbols) ** 2))
    evm = float(np.sqrt(mse / np.mean(np.abs(symbols) ** 2)) * 100.0)
    out = _out_dir(args)
    write_frame(out / "estimates.bin", est)
    write_frame(out / "tx_waveform.bin", record.tx_frame)
    print(
        f"{symbols.size} targets at {args.snr:g} dB ({args.mode}): "
        f"symbol mse {mse:.6g}, evm {evm:.2f}%, clip rate {record.clip_rate:.4g}"
    )
    return 0


def _load_zero_shot(models_dir: str | None, setup: EmulationSetup):
    from .nn import ToyJsccModel

    if models_dir is None:
        raise CheckpointMissing(
            "sweep includes the zero_shot system but no --models directory was "
            "given; run `ofdmemu train-e2e --out <dir>` first and pass that "
            "directory via --models"
        )
    path = Path(models_dir) / "zero_shot.model"
    if not path.exists():
        raise CheckpointMissing(
            f"{path} not found; run `ofdmemu train-e2e --out {models_dir}` "
            "to produce it"
        )
    jscc = ToyJsccModel(np.random.default_rng(0))
    read_model_into(path, jscc)
    return jscc


def cmd_sweep(args) -> int:
    sections = _load_sections(args)
    cfg = _phy_config(args)
    spec = _experiment_spec(args, sections, cfg)
    setup = None
    models = {}
    if {"emulated", "zero_shot"} & set(spec.systems):
        setup = EmulationSetup.build(cfg)
    if "zero_shot" in spec.systems:
        models["zero_shot"] = _load_zero_shot(args.models, setup)
    rows = run_sweep(spec, setup, models)
    out = _out_dir(args)
    write_csv(rows, out / "sweep.csv")
    emit_plotdata(rows, out / "plotdata")
    print(f"{len(rows)} sweep cells -> {out / 'sweep.csv'} and {out / 'plotdata'}/")
    return 0


def cmd_train_comp(args) -> int:
    from .training import stage1_train_compensator

    sections = _load_sections(args)
    cfg = _phy_config(args)
    tc = _train_config(args, sections)
    setup = EmulationSetup.build(cfg)
    result = stage1_train_compensator(setup, tc)
    out = _out_dir(args)
    save_checkpoint(
        out,
        {"compensator": result.model},
        {"master_seed": tc.master_seed, "phy_fingerprint": cfg.fingerprint()},
    )
    write_loss_trace(out / "stage1_trace.csv", result.loss_trace)
    print(
        f"stage-1 validation mse {result.metrics['val_mse_uncompensated']:.5f} -> "
        f"{result.metrics['val_mse_compensated']:.5f} "
        f"({100 * result.metrics['improvement']:.1f}% better) -> {out}"
    )
    return 0


def cmd_train_proxy(args) -> int:
    from .training import _S2_DATA, collect_link_records, stage2_train_proxy

    sections = _load_sections(args)
    cfg = _phy_config(args)
    tc = _train_config(args, sections)
    setup = EmulationSetup.build(cfg)
    records = collect_link_records(
        setup,
        tc.stage2_records,
        tc.stage2_snr_db,
        tc.child_rng(_S2_DATA),
        n_ofdm=tc.stage2_ofdm_symbols,
    )
    result = stage2_train_proxy(records, tc)
    out = _out_dir(args)
    save_checkpoint(
        out,
        {"proxy": result.model},
        {"master_seed": tc.master_seed, "phy_fingerprint": cfg.fingerprint()},
    )
    write_loss_trace(out / "stage2_trace.csv", result.loss_trace)
    print(
        f"stage-2 held-out mse {result.metrics['held_out_mse']:.5f} "
        f"(bound {result.metrics['held_out_bound']:.5f}) -> {out}"
    )
    return 0


def cmd_train_e2e(args) -> int:
    from .training import run_training_pipeline

    sections = _load_sections(args)
    cfg = _phy_config(args)
    tc = _train_config(args, sections)
    setup = EmulationSetup.build(cfg)
    result = run_training_pipeline(setup, tc)
    out = _out_dir(args)
    manifest = {"master_seed": tc.master_seed, "phy_fingerprint": cfg.fingerprint()}
    for f in dataclasses.fields(tc):
        manifest[f"train_{f.name}"] = getattr(tc, f.name)
    save_checkpoint(
        out,
        {
            "compensator": result.compensator,
            "proxy": result.proxy,
            "jscc": result.jscc,
            "zero_shot": result.zero_shot_jscc,
        },
        manifest,
    )
    write_loss_trace(out / "stage1_trace.csv", result.stage1.loss_trace)
    write_loss_trace(out / "stage2_trace.csv", result.stage2.loss_trace)
    write_loss_trace(out / "stage3_trace.csv", result.stage3.loss_trace)
    write_loss_trace(out / "zero_shot_trace.csv", result.zero_shot.loss_trace)
    print(
        f"stage-1 improvement {100 * result.stage1.metrics['improvement']:.1f}%, "
        f"stage-2 held-out {result.stage2.metrics['held_out_mse']:.5f}, "
        f"stage-3 cycles {result.stage3.metrics['cycles']} -> {out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ofdmemu",
        description="OFDM link emulation: waveform-level transport experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="plain-text key=value config file")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("selftest", help="conformance and sanity checks")
    common(p)
    p.add_argument("--quick", action="store_true", help="fewer vectors per check")
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("tx", help="payload bits to a waveform frame file")
    common(p)
    p.add_argument("--in", dest="infile", required=True, help="payload byte file")
    p.set_defaults(func=cmd_tx)

    p = sub.add_parser("rx", help="waveform frame file to decoded payload bits")
    common(p)
    p.add_argument("--in", dest="infile", required=True, help="waveform frame file")
    p.set_defaults(func=cmd_rx)

    p = sub.add_parser("emulate", help="transport target symbols over the link")
    common(p)
    p.add_argument("--in", dest="infile", help="frame file of complex targets")
    p.add_argument("--symbols", type=int, default=1000, help="generated target count")
    p.add_argument("--snr", type=float, default=15.0)
    p.add_argument("--mode", choices=("soft", "hard"), default="soft")
    p.set_defaults(func=cmd_emulate)

    p = sub.add_parser("sweep", help="SNR sweep over the transport systems")
    common(p)
    p.add_argument("--systems", help="comma list, e.g. ideal_analog,emulated")
    p.add_argument("--models", help="checkpoint directory from train-e2e")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("train-comp", help="stage 1: compensator warm-up")
    common(p)
    p.set_defaults(func=cmd_train_comp)

    p = sub.add_parser("train-proxy", help="stage 2: link surrogate fit")
    common(p)
    p.set_defaults(func=cmd_train_proxy)

    p = sub.add_parser("train-e2e", help="full three-stage pipeline plus baseline")
    common(p)
    p.set_defaults(func=cmd_train_e2e)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OfdmEmuError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
