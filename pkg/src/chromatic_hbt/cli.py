"""Command-line pipeline: protocol check, stream synthesis, analysis, fitting.

Subcommands
-----------
protocol    exact single-stage simulation of the configured input state
simulate    write synthetic click streams plus a manifest into the out dir
analyze     turn a manifest or stream file into a g2 curve CSV
fit         fit a curve CSV and write the result as JSON
reproduce   chain simulate/analyze/fit in memory for the fig2 or fig3 study
model       evaluate the configured analytic fringe on its grid, to CSV

Exit codes: 0 success, 2 configuration error, 3 I/O or data error,
4 fit did not converge.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import G2Curve, scan_delay, scan_tau
from .config import ConfigError, RunConfig
from .fitting import FitResult, fit_delay_model, fit_tau_model
from .fock import SPEED_OF_LIGHT, StateVector, apply_creation
from .protocol import (
    ErasureDetectorConfig,
    build_erasure_registry,
    run_erasure_pipeline,
)
from .streams import StreamConfig, StreamFormatError, read_stream, simulate_stream, write_stream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NO_CONVERGENCE = 4


class DataError(RuntimeError):
    """I/O or data-content failure distinct from configuration mistakes."""


def _fmt_complex(z: complex) -> str:
    return f"{z.real:+.6f}{z.imag:+.6f}j"


def cmd_protocol(config: RunConfig, dump_state: bool) -> int:
    freqs = config.modes.frequencies()
    print("modes:")
    print(f"  f1 = {freqs.f1 / 1e12:.6f} THz   (wavelength_1)")
    print(f"  f2 = {freqs.f2 / 1e12:.6f} THz   (wavelength_2)")
    print(f"  f3 = {freqs.f3 / 1e12:.6f} THz   (wavelength_3)")
    print(f"  input color difference f2 - f1 = {freqs.delta_f21 / 1e9:.3f} GHz")
    s = config.conversion
    print("conversion angles:")
    print(f"  theta_31 = {s.theta_31:.6f} rad   theta_32 = {s.theta_32:.6f} rad")
    print(f"  theta_2p2 = {s.theta_2p2:.6f} rad  theta_1p1 = {s.theta_1p1:.6f} rad")
    print(f"  phi_31 = {s.phi_31:.6f} rad   phi_32 = {s.phi_32:.6f} rad")

    alpha, beta = config.scenario.alpha, config.scenario.beta
    norm2 = abs(alpha) ** 2 + abs(beta) ** 2
    if norm2 > 1.0 + 1e-9:
        raise ConfigError("scenario.alpha", f"|alpha|^2 + |beta|^2 = {norm2:.6g} exceeds 1")
    registry, arms = build_erasure_registry(freqs)
    vacuum = StateVector.vacuum(registry)
    state = apply_creation(vacuum, arms.arm_a.f1).scaled(alpha).plus(
        apply_creation(vacuum, arms.arm_a.f2).scaled(beta)
    )
    detector = ErasureDetectorConfig(settings=s, label="A")
    run = run_erasure_pipeline(state, registry, arms, detector)
    pre_filter = run.stages["after_second_beamsplitter"]
    print("input weights:")
    print(f"  alpha = {_fmt_complex(alpha)}   beta = {_fmt_complex(beta)}")
    print("pre-filter amplitudes on detection arm:")
    for color in ("f1", "f2", "f3", "f1_shift", "f2_shift"):
        amp = pre_filter.amplitude_of({getattr(arms.arm_a, color): 1})
        print(f"  {color:9s} {_fmt_complex(amp)}")
    print(f"detection amplitude (arm a, f3): {_fmt_complex(run.detection_amplitude)}")
    print(f"post-selection probability: {run.detection_probability:.6f}")
    print(f"filter discarded probability: {run.discarded_probability:.6f}")
    if detector.is_ideal_tuning():
        print("tuning: ideal (detection amplitude equals (alpha + beta) / 2)")
    if dump_state:
        out = config.out_dir
        out.mkdir(parents=True, exist_ok=True)
        path = out / "protocol_states.json"
        payload = {name: st.to_json_dict() for name, st in run.stages.items()}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True))
        print(f"wrote {path}")
    return EXIT_OK


def _delay_stream_config(config: RunConfig) -> StreamConfig:
    scan = config.delay_scan
    return StreamConfig(
        bin_width=scan.bin_width,
        rate_a=scan.rate_a,
        rate_b=scan.rate_b,
        seed=config.seed,
        model=scan.model(),
        delay_schedule=scan.schedule(),
        dark_rate_a=scan.dark_rate_a,
        dark_rate_b=scan.dark_rate_b,
    )


def _tau_stream_config(config: RunConfig) -> StreamConfig:
    scan = config.tau_scan
    return StreamConfig(
        bin_width=scan.bin_width,
        rate_a=scan.rate_a,
        rate_b=scan.rate_b,
        seed=config.seed,
        model=scan.model(),
        delay_schedule=((0.0, scan.duration),),
        dark_rate_a=scan.dark_rate_a,
        dark_rate_b=scan.dark_rate_b,
    )


def cmd_simulate(config: RunConfig, kind: str, binary: bool) -> int:
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    suffix = ".tdc" if binary else ".txt"
    manifest: dict = {"kind": kind, "streams": []}
    if kind == "delay":
        stream = simulate_stream(_delay_stream_config(config))
        for index, (t_delay, sub) in enumerate(stream.split_segments()):
            name = f"delay_step_{index:02d}{suffix}"
            write_stream(sub, out / name, binary=binary)
            manifest["streams"].append({"file": name, "t_delay": t_delay})
    else:
        stream = simulate_stream(_tau_stream_config(config))
        name = f"tau_stream{suffix}"
        write_stream(stream, out / name, binary=binary)
        manifest["streams"].append({"file": name, "t_delay": 0.0})
        manifest["taus"] = list(config.tau_scan.taus())
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2))
    total = sum(1 for _ in manifest["streams"])
    print(f"wrote {total} stream file(s) and {manifest_path}")
    return EXIT_OK


def _analyze_manifest(config: RunConfig, manifest_path: Path) -> G2Curve:
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{manifest_path}: not valid manifest JSON ({exc})") from None
    base = manifest_path.parent
    kind = manifest.get("kind")
    entries = manifest.get("streams", [])
    if not entries:
        raise DataError(f"{manifest_path}: manifest lists no streams")
    if kind == "delay":
        pairs = []
        for entry in entries:
            stream = read_stream(base / entry["file"])
            pairs.append((float(entry["t_delay"]), stream))
        return scan_delay(pairs)
    if kind == "tau":
        stream = read_stream(base / entries[0]["file"])
        taus = manifest.get("taus") or config.tau_scan.taus()
        return scan_tau(stream, [float(t) for t in taus])
    raise DataError(f"{manifest_path}: unknown manifest kind {kind!r}")


def cmd_analyze(config: RunConfig, input_path: Path | None) -> int:
    if input_path is None:
        input_path = config.analyze_input
    if input_path is None:
        raise ConfigError("analyze.input", "no input given (flag --input or config key)")
    if not input_path.exists():
        raise DataError(f"input not found: {input_path}")
    if input_path.suffix == ".json":
        curve = _analyze_manifest(config, input_path)
    else:
        stream = read_stream(input_path)
        if len(stream) == 0:
            raise DataError(f"{input_path}: stream holds no click records")
        curve = scan_tau(stream, config.tau_scan.taus())
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    curve_path = out / "curve.csv"
    curve.to_csv(curve_path)
    print(f"wrote {curve_path} ({len(curve)} points, x_kind={curve.x_kind})")
    return EXIT_OK


def _fit_curve(config: RunConfig, curve: G2Curve, model_kind: str | None) -> FitResult:
    if model_kind is None:
        model_kind = "tau" if curve.x_kind == "tau" else "delay"
    fit_fn = fit_tau_model if model_kind == "tau" else fit_delay_model
    return fit_fn(
        curve,
        weighted=config.fit.weighted,
        max_iterations=config.fit.max_iterations,
        band=config.fit.band,
    )


def cmd_fit(config: RunConfig, curve_path: Path, model_kind: str | None) -> int:
    if not curve_path.exists():
        raise DataError(f"curve file not found: {curve_path}")
    try:
        curve = G2Curve.from_csv(curve_path)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    result = _fit_curve(config, curve, model_kind)
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    fit_path = out / "fit.json"
    fit_path.write_text(result.to_json())
    for line in result.summary_lines():
        print(line)
    print(f"wrote {fit_path}")
    if not result.converged:
        print("fit did not converge", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def cmd_model(config: RunConfig, kind: str) -> int:
    """Evaluate the configured analytic fringe on its scan grid, to CSV."""
    from .protocol import g2_tau_model, g2_zero_model

    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"model_{kind}.csv"
    if kind == "delay":
        model = config.delay_scan.model()
        xs = [t for t, _ in config.delay_scan.schedule()]
        values = [float(g2_zero_model(model, x)) for x in xs]
        x_kind = "t_delay"
    else:
        model = config.tau_scan.model()
        xs = config.tau_scan.taus()
        values = [float(g2_tau_model(model, x)) for x in xs]
        x_kind = "tau"
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# x_kind={x_kind} x_unit=s\n")
        fh.write("x,g2\n")
        for x, g2 in zip(xs, values):
            fh.write(f"{float(x)!r},{g2!r}\n")
    print(f"wrote {path} ({len(xs)} points)")
    return EXIT_OK


def _write_plot_data(path: Path, curve: G2Curve, result: FitResult) -> None:
    from .fitting import delay_fringe, tau_fringe

    params = np.array([value for value, _ in result.params.values()])
    model_fn = tau_fringe if result.model == "tau" else delay_fringe
    model = model_fn(params, curve.x)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# x_kind={curve.x_kind} x_unit={curve.x_unit}\n")
        fh.write("x,g2_data,sigma,g2_model\n")
        for x, g2, sigma, m in zip(curve.x, curve.g2, curve.sigma, model):
            fh.write(f"{float(x)!r},{float(g2)!r},{float(sigma)!r},{float(m)!r}\n")


def cmd_reproduce(config: RunConfig, figure: str) -> int:
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        if figure == "fig2":
            truth = config.delay_scan.model()
            print(
                f"injected fringe: visibility {truth.visibility}, phase {truth.phase} rad, "
                f"beat {truth.frequency / 1e9:.4g} GHz"
            )
            stream = simulate_stream(_delay_stream_config(config))
            curve = scan_delay(stream.split_segments())
            result = _fit_curve(config, curve, "delay")
        else:
            truth = config.tau_scan.model()
            print(
                f"injected fringe: visibility {truth.visibility}, linewidth "
                f"{truth.linewidth / 1e6:.4g} MHz, phase {truth.phase} rad, "
                f"beat {truth.frequency / 1e6:.4g} MHz"
            )
            stream = simulate_stream(_tau_stream_config(config))
            curve = scan_tau(stream, config.tau_scan.taus())
            result = _fit_curve(config, curve, "tau")

        curve_path = out / f"{figure}_curve.csv"
        curve.to_csv(curve_path)
        written.append(curve_path)
        fit_path = out / f"{figure}_fit.json"
        fit_path.write_text(result.to_json())
        written.append(fit_path)
        plot_path = out / f"{figure}_plotdata.csv"
        _write_plot_data(plot_path, curve, result)
        written.append(plot_path)
    except Exception:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    for line in result.summary_lines():
        print(line)
    if figure == "fig2":
        freq, freq_err = result.params["frequency"]
        length = SPEED_OF_LIGHT / freq
        err = SPEED_OF_LIGHT * (freq_err / freq**2) if freq_err else float("nan")
        print(f"fringe period as path length: {length * 1e3:.4f} +/- {err * 1e3:.4f} mm")
    for path in written:
        print(f"wrote {path}")
    if not result.converged:
        print("fit did not converge", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chbt",
        description="Two-color intensity interferometry simulation pipeline",
    )
    parser.add_argument("--config", type=Path, default=None, help="INI config file")
    parser.add_argument("--seed", type=int, default=None, help="override [run] seed")
    parser.add_argument("--out-dir", type=Path, default=None, help="override [run] out_dir")
    parser.add_argument(
        "--dump-state", action="store_true", help="write stage state vectors as JSON (protocol)"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("protocol", help="run the single-stage erasure pipeline exactly")

    p_sim = sub.add_parser("simulate", help="generate click streams and a manifest")
    p_sim.add_argument("--kind", choices=("delay", "tau"), default="delay")
    p_sim.add_argument("--binary", action="store_true", help="write compact binary streams")

    p_ana = sub.add_parser("analyze", help="estimate a g2 curve from streams")
    p_ana.add_argument("--input", type=Path, default=None, help="manifest.json or stream file")

    p_fit = sub.add_parser("fit", help="fit a fringe model to a curve CSV")
    p_fit.add_argument("--curve", type=Path, required=True)
    p_fit.add_argument("--model", choices=("delay", "tau"), default=None)

    p_rep = sub.add_parser("reproduce", help="simulate, analyze and fit one study")
    p_rep.add_argument("figure", choices=("fig2", "fig3"))

    p_model = sub.add_parser("model", help="evaluate the configured analytic fringe to CSV")
    p_model.add_argument("--kind", choices=("delay", "tau"), default="delay")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = RunConfig.load(args.config, seed=args.seed, out_dir=args.out_dir)
        if args.command == "protocol":
            return cmd_protocol(config, args.dump_state)
        if args.command == "simulate":
            return cmd_simulate(config, args.kind, args.binary)
        if args.command == "analyze":
            return cmd_analyze(config, args.input)
        if args.command == "fit":
            return cmd_fit(config, args.curve, args.model)
        if args.command == "reproduce":
            return cmd_reproduce(config, args.figure)
        if args.command == "model":
            return cmd_model(config, args.kind)
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, StreamFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
