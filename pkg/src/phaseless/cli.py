"""Command-line driver: one config in, one reproducible bundle out.

Every subcommand reads a JSON experiment config, writes its artifacts
under the output directory, and finishes with a report JSON that embeds
the exact config plus content hashes, so a bundle can always be traced
back to the run that produced it.  Identical configs give byte-identical
outputs; nothing here consults the clock or the process id.

Exit codes: 0 success, 2 config error, 3 solver failure, 4 a configured
acceptance threshold was not met.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bounds import bounds_report, fit_decay
from .config import ExperimentConfig, config_to_dict, load_config
from .exceptions import (
    BackgroundValidationError,
    ConfigError,
    DegenerateDataError,
    DegenerateFitError,
    EnergyShellError,
    GridMismatchError,
    NoDataError,
    OutOfBallError,
    SolverConvergenceError,
    SupportOutsideBoxError,
    UnresolvedGridError,
)

_THRESHOLD_ERRORS = (DegenerateDataError,)
from .fieldio import write_field
from .geometry import EnergySet, channel
from .potentials import analytic_hat, rasterize
from .reconstruct import reconstruct
from .solver import WaveVector, scattering_amplitude, solve_lippmann_schwinger
from .synthesis import (
    read_dataset,
    synthesize,
    translation_twin_demo,
    validate_backgrounds,
    write_dataset,
)

__all__ = ["main"]

_BUNDLE_SCHEMA = "phaseless-bundle/1"

_CONFIG_ERRORS = (
    ConfigError,
    BackgroundValidationError,
    GridMismatchError,
    UnresolvedGridError,
    SupportOutsideBoxError,
    OutOfBallError,
    EnergyShellError,
    NoDataError,
    DegenerateFitError,
)


def _canonical(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _json_safe(obj):
    """Numpy scalars to python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, complex):
        return [_json_safe(obj.real), _json_safe(obj.imag)]
    return obj


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class _Bundle:
    """Collects a run's artifacts and writes the final report once."""

    def __init__(self, command: str, cfg: ExperimentConfig, outdir: Path):
        self.command = command
        self.cfg_dict = config_to_dict(cfg)
        self.outdir = outdir
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.files: dict[str, str] = {}
        self.inputs: dict[str, str] = {"config": _sha256_text(_canonical(self.cfg_dict))}

    def track(self, *paths: Path) -> None:
        for p in paths:
            self.files[p.name] = _sha256_file(p)

    def write_text(self, name: str, text: str) -> Path:
        path = self.outdir / name
        path.write_text(text)
        self.track(path)
        return path

    def note_input(self, name: str, digest: str) -> None:
        self.inputs[name] = digest

    def finish(self, results: dict) -> Path:
        report = {
            "schema": _BUNDLE_SCHEMA,
            "command": self.command,
            "config": self.cfg_dict,
            "input_sha256": self.inputs,
            "outputs_sha256": dict(sorted(self.files.items())),
            "results": _json_safe(results),
        }
        path = self.outdir / f"{self.command}_report.json"
        path.write_text(_canonical(report))
        return path


def _outgoing_directions(dim: int) -> np.ndarray:
    """Deterministic unit directions covering the measurement sphere."""
    if dim == 2:
        theta = 2.0 * np.pi * np.arange(72) / 72
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    lat = np.pi * (np.arange(12) + 0.5) / 12
    lon = 2.0 * np.pi * np.arange(24) / 24
    t, ph = np.meshgrid(lat, lon, indexing="ij")
    return np.stack(
        [np.sin(t) * np.cos(ph), np.sin(t) * np.sin(ph), np.cos(t)], axis=-1
    ).reshape(-1, 3)


def cmd_forward(cfg: ExperimentConfig, outdir: Path, workers: int) -> int:
    """Solve the total field per energy and tabulate far-field amplitudes."""
    bundle = _Bundle("forward", cfg, outdir)
    field_v = rasterize(cfg.target, cfg.grid)
    dirs = _outgoing_directions(cfg.dimension)
    rows = ["E," + ",".join(f"l_{a + 1}" for a in range(cfg.dimension)) + ",re_f,im_f,abs2_f"]
    reports = {}
    zero = np.zeros(cfg.dimension)
    for i, E in enumerate(cfg.energies):
        ch = channel(E, zero, cfg.convention)
        k = WaveVector(ch.incident)
        psi, rep = solve_lippmann_schwinger(field_v, k, cfg.solver)
        base = outdir / f"forward_psi_E{i}"
        bundle.track(*write_field(psi, base))
        reports[repr(float(E))] = {
            "incident": list(ch.incident),
            "method": rep.method,
            "iterations": rep.iterations,
            "residual": rep.residual,
            "converged": rep.converged,
            "field_file": base.name,
        }
        for d in dirs:
            l = np.sqrt(E) * d
            f = scattering_amplitude(field_v, psi, k, l)
            cells = [repr(float(E))] + [repr(float(x)) for x in l]
            cells += [repr(f.real), repr(f.imag), repr(abs(f) ** 2)]
            rows.append(",".join(cells))
    bundle.write_text("forward_amplitudes.csv", "\n".join(rows) + "\n")
    report = bundle.finish({"per_energy": reports, "target_is_zero": cfg.target.is_zero()})
    print(f"forward: wrote {len(cfg.energies)} field(s) -> {report}")
    return 0


def cmd_synthesize(cfg: ExperimentConfig, outdir: Path, workers: int) -> int:
    bundle = _Bundle("synthesize", cfg, outdir)
    pgrid = cfg.probe()
    ds = synthesize(
        cfg.target,
        cfg.references,
        cfg.energies,
        pgrid,
        cfg.mode,
        grid=cfg.grid,
        solver=cfg.solver,
        convention=cfg.convention,
        workers=workers,
    )
    base = outdir / "dataset"
    write_dataset(ds, str(base), target=cfg.target)
    bundle.track(base.with_suffix(".csv"), base.with_suffix(".json"))
    results: dict = {"rows": len(ds.channels), "n_refs": ds.n_refs, "mode": ds.mode}
    if cfg.references is not None:
        rep = validate_backgrounds(
            cfg.references,
            pgrid,
            cfg.reconstruction["eps_zero"],
            cfg.reconstruction["eps_pair"],
        )
        results["background_report"] = {
            "zero_fraction": rep.zero_fraction,
            "zero_radii": rep.zero_radii,
            "degenerate_pair_fraction": rep.degenerate_pair_fraction,
            "translate_degeneracy": rep.translate_degeneracy,
            "estimated_shift": rep.estimated_shift,
            "warnings": rep.warnings,
        }
        for w in rep.warnings:
            print(f"warning: {w}", file=sys.stderr)
    report = bundle.finish(results)
    print(f"synthesize: {len(ds.channels)} rows -> {report}")
    return 0


def _mask_index_lists(mask) -> dict:
    return {
        "target_null": np.nonzero(mask.target_null)[0].tolist(),
        "ref_null": [np.nonzero(r)[0].tolist() for r in mask.ref_null],
        "pair_degenerate": np.nonzero(mask.pair_degenerate)[0].tolist(),
        "out_of_ball": np.nonzero(mask.out_of_ball)[0].tolist(),
        "solver_failed": np.nonzero(mask.solver_failed)[0].tolist(),
        "masked_fraction": mask.masked_fraction,
        "thresholds": dict(mask.thresholds),
    }


def cmd_reconstruct(
    cfg: ExperimentConfig, outdir: Path, workers: int, dataset: str | None
) -> int:
    bundle = _Bundle("reconstruct", cfg, outdir)
    if cfg.references is None:
        raise ConfigError("reconstruct needs reference scatterers in the config")
    if dataset is not None:
        ds = read_dataset(dataset)
        bundle.note_input("dataset_csv", _sha256_file(Path(dataset + ".csv")))
    else:
        ds = synthesize(
            cfg.target,
            cfg.references,
            cfg.energies,
            cfg.probe(),
            cfg.mode,
            grid=cfg.grid,
            solver=cfg.solver,
            convention=cfg.convention,
            workers=workers,
        )
    options = cfg.reconstruction_options()
    out = reconstruct(ds, cfg.references, options)
    branches = out if isinstance(out, tuple) else (out,)
    results: dict = {"branches": []}
    for res in branches:
        tag = {"two-reference": "", "one-reference-plus": "_plus", "one-reference-minus": "_minus"}[
            res.branch
        ]
        spec_base = outdir / f"recon_spectrum{tag}"
        pot_base = outdir / f"recon_potential{tag}"
        bundle.track(*write_field(res.spectrum, spec_base))
        bundle.track(*write_field(res.potential, pot_base))
        results["branches"].append(
            {
                "branch": res.branch,
                "spectrum_file": spec_base.name,
                "potential_file": pot_base.name,
                "mask": _mask_index_lists(res.mask),
                "diagnostics": res.diagnostics,
            }
        )
    report = bundle.finish(results)
    names = ", ".join(b["branch"] for b in results["branches"])
    print(f"reconstruct: {names} -> {report}")
    return 0


def _convergence_errors(cfg: ExperimentConfig, workers: int) -> tuple[list, list]:
    """Per-energy worst intensity error against the closed-form transform."""
    pgrid = cfg.probe()
    energies, errors = [], []
    for E in cfg.energies:
        ds = synthesize(
            cfg.target,
            None,
            EnergySet((float(E),)),
            pgrid,
            cfg.mode,
            grid=cfg.grid,
            solver=cfg.solver,
            convention=cfg.convention,
            workers=workers,
        )
        ok = ds.flags == 0
        if not np.all(ok):
            raise SolverConvergenceError(
                f"{int(np.sum(~ok))} channel(s) failed at energy {E:.6g}"
            )
        truth = np.array(
            [
                abs(analytic_hat(cfg.target, np.asarray(ch.transfer))) ** 2
                for ch in ds.channels
            ]
        )
        err = float(np.max(np.abs(ds.values[:, 0] - truth)))
        energies.append(float(E))
        errors.append(err)
    return energies, errors


def cmd_convergence(cfg: ExperimentConfig, outdir: Path, workers: int) -> int:
    bundle = _Bundle("convergence", cfg, outdir)
    energies, errors = _convergence_errors(cfg, workers)
    slope, intercept = fit_decay(energies, errors)
    lo, hi = cfg.convergence["slope_window"]
    ok = lo <= slope <= hi
    rows = ["E,error"] + [f"{repr(e)},{repr(x)}" for e, x in zip(energies, errors)]
    bundle.write_text("convergence.csv", "\n".join(rows) + "\n")
    report = bundle.finish(
        {
            "energies": energies,
            "errors": errors,
            "slope": slope,
            "intercept": intercept,
            "slope_window": [lo, hi],
            "within_window": ok,
        }
    )
    print(f"convergence: slope {slope:.4f} window [{lo}, {hi}] -> {report}")
    if not ok:
        print(
            f"threshold failure: slope {slope:.4f} outside [{lo}, {hi}]",
            file=sys.stderr,
        )
        return 4
    return 0


def cmd_ambiguity_demo(cfg: ExperimentConfig, outdir: Path, workers: int) -> int:
    bundle = _Bundle("ambiguity-demo", cfg, outdir)
    if cfg.shift is None:
        raise ConfigError("ambiguity-demo needs a shift in the config")
    E = cfg.energies.top
    disc = translation_twin_demo(
        cfg.target,
        cfg.shift,
        E,
        cfg.probe(),
        cfg.mode,
        grid=cfg.grid,
        solver=cfg.solver,
        workers=workers,
    )
    shifted = rasterize(cfg.target.translate(cfg.shift), cfg.grid)
    base = outdir / "ambiguity_shifted_potential"
    bundle.track(*write_field(shifted, base))
    report = bundle.finish(
        {
            "shift": list(cfg.shift),
            "energy": float(E),
            "max_relative_discrepancy": disc,
            "shifted_potential_file": base.name,
        }
    )
    print(f"ambiguity-demo: max relative intensity discrepancy {disc:.3e}")
    print(f"shifted potential field: {base}.bin")
    print(f"report: {report}")
    return 0


def cmd_bounds(cfg: ExperimentConfig, outdir: Path, workers: int) -> int:
    bundle = _Bundle("bounds", cfg, outdir)
    if cfg.bounds["errors_csv"] is not None:
        path = Path(cfg.bounds["errors_csv"])
        bundle.note_input("errors_csv", _sha256_file(path))
        lines = path.read_text().strip().split("\n")[1:]
        energies = [float(line.split(",")[0]) for line in lines]
        errors = [float(line.split(",")[1]) for line in lines]
    else:
        energies, errors = _convergence_errors(cfg, workers)
    rep = bounds_report(
        cfg.target, energies, errors, sigma=cfg.bounds["sigma"], a0=cfg.bounds["a0"]
    )
    rows = ["E,error,bound"]
    for e, x in zip(energies, errors):
        rows.append(f"{repr(float(e))},{repr(float(x))},{repr(rep.bound_at(e))}")
    bundle.write_text("bounds_errors.csv", "\n".join(rows) + "\n")
    report = bundle.finish(
        {
            "dim": rep.dim,
            "sigma": rep.sigma,
            "a0": rep.a0,
            "c1": rep.c1,
            "c2": rep.c2,
            "norm_bound": rep.norm_bound,
            "contraction_sqrt_e": rep.contraction_sqrt_e,
            "coefficient": rep.coefficient,
            "slope": rep.slope,
            "intercept": rep.intercept,
            "implied_a0": rep.implied_a0,
            "bound_holds": rep.bound_holds(),
        }
    )
    print(f"bounds: slope {rep.slope:.4f}, bound holds: {rep.bound_holds()} -> {report}")
    return 0


def _parse(argv):
    parser = argparse.ArgumentParser(
        prog="phaseless",
        description="Phaseless scattering experiments: synthesis, inversion, diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "forward": "solve total fields and tabulate far-field amplitudes",
        "synthesize": "generate a phaseless intensity dataset",
        "reconstruct": "invert a dataset back to the target potential",
        "convergence": "measure intensity error decay across energies",
        "ambiguity-demo": "show translation invariance of the intensities",
        "bounds": "evaluate the error-bound constants against measured decay",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment JSON path")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--workers", type=int, default=1, help="solver worker processes")
        p.add_argument(
            "--mode",
            choices=("born", "full"),
            default=None,
            help="override the config's synthesis mode",
        )
        if name == "reconstruct":
            p.add_argument(
                "dataset",
                nargs="?",
                default=None,
                help="dataset base path (without .csv/.json); default: synthesize per config",
            )
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = _parse(argv)
    try:
        cfg = load_config(args.config)
        if args.mode is not None:
            cfg = replace(cfg, mode={"born": "born-oracle", "full": "full-solver"}[args.mode])
        out = args.out or cfg.output
        if out is None:
            raise ConfigError("no output directory: set config.output or pass --out")
        outdir = Path(out)
        if args.command == "forward":
            return cmd_forward(cfg, outdir, args.workers)
        if args.command == "synthesize":
            return cmd_synthesize(cfg, outdir, args.workers)
        if args.command == "reconstruct":
            return cmd_reconstruct(cfg, outdir, args.workers, args.dataset)
        if args.command == "convergence":
            return cmd_convergence(cfg, outdir, args.workers)
        if args.command == "ambiguity-demo":
            return cmd_ambiguity_demo(cfg, outdir, args.workers)
        if args.command == "bounds":
            return cmd_bounds(cfg, outdir, args.workers)
        raise ConfigError(f"unknown command {args.command!r}")
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverConvergenceError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except _THRESHOLD_ERRORS as exc:
        print(f"threshold failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
