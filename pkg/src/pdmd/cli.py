"""Command-line front end: ``pdmd {gen,fit,sim,eval,compare,svplot}``.

Exit status: 0 success, 2 usage error, 3 data/format error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import re
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (RankPolicy, ReducedModel, fit_full, load_model, projection_basis,
                   reduce, save_model, select_nz, singular_spectrum)
from .errors import DataError, NumericalError
from .lifting import ThetaScale, build_lifted
from .lpv import (eigenvalues_at, frequency_response, project_state, root_locus, simulate,
                  simulate_feedback, write_frequency_csv, write_trajectory_csv)
from .metrics import (energy_retention, gap_surface, per_output_rms_error, relative_rms_error,
                      write_gap_csv)
from .plants import FlexChainPlant, linear_family, load_plant
from .snapshots import (ArcsinRule, Signal, collect_from_plant, format_float, generate_chirp,
                        load_signal, load_snapshots, save_snapshots)

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


# ---------------------------------------------------------------- argument grammars

def chirp_spec(text: str) -> tuple[float, float, float, float]:
    """``f0:f1:duration:dt``"""
    parts = text.split(":")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(f"chirp must be f0:f1:duration:dt, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric chirp {text!r}") from None


def grid_spec(text: str) -> np.ndarray:
    """``start:stop:step`` (inclusive), ``log:lo:hi:n`` or ``lin:lo:hi:n``."""
    parts = text.split(":")
    try:
        if parts[0] in ("log", "lin") and len(parts) == 4:
            lo, hi, n = float(parts[1]), float(parts[2]), int(parts[3])
            if n < 1:
                raise ValueError
            return np.geomspace(lo, hi, n) if parts[0] == "log" else np.linspace(lo, hi, n)
        if len(parts) == 3:
            a, b, step = map(float, parts)
            if step <= 0 or b < a:
                raise ValueError
            n = int(np.floor((b - a) / step + 1e-9)) + 1
            return np.round(a + step * np.arange(n), 12)
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"bad grid {text!r}")


def float_list(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def nz_spec(text: str):
    """An integer or ``auto[:fraction]``."""
    if text.startswith("auto"):
        _, _, frac = text.partition(":")
        try:
            return ("auto", float(frac) if frac else 0.95)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad n_z value {text!r}") from None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"n_z must be an integer or auto[:frac], got {text!r}") from None


def rank_spec(text: str) -> RankPolicy:
    try:
        return RankPolicy.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def parse_theta_rule(text: str, plant=None) -> ArcsinRule:
    """``arcsin:node=last:V0=22`` (needs a flex-chain plant) or ``arcsin:index=19:V0=22``."""
    kind, *items = text.split(":")
    if kind != "arcsin":
        raise argparse.ArgumentTypeError(f"unknown theta rule {kind!r}")
    opts = dict(item.split("=", 1) for item in items if "=" in item)
    v0 = float(opts.get("V0", opts.get("v0", "nan")))
    if not np.isfinite(v0) or v0 == 0:
        raise argparse.ArgumentTypeError("theta rule needs a nonzero V0")
    if "index" in opts:
        return ArcsinRule(int(opts["index"]), v0)
    node = opts.get("node", "last")
    if not isinstance(plant, FlexChainPlant):
        raise argparse.ArgumentTypeError("node=... needs a flex-chain plant; use index=... instead")
    return plant.theta_rule(-1 if node == "last" else int(node), v0)


# ---------------------------------------------------------------- helpers

def _out_path(args, name: str | None, default: str) -> Path:
    p = Path(name or default)
    if not p.is_absolute():
        p = Path(args.out_dir) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _excitation(args) -> Signal:
    if args.chirp is not None:
        f0, f1, dur, dt = args.chirp
        return generate_chirp(f0, f1, dur, dt, amplitude=args.amplitude, phase=args.phase)
    if args.input is not None:
        return load_signal(args.input, dt=args.dt)
    raise argparse.ArgumentTypeError("need --chirp or --input")


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def _write_rows(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# ---------------------------------------------------------------- subcommands

def cmd_gen(args) -> int:
    plant = load_plant(args.plant, seed=args.seed)
    sig = _excitation(args)
    if args.dt_check and abs(sig.dt - plant.dt) > 1e-12 * plant.dt:
        raise DataError(f"excitation dt={sig.dt} differs from plant dt={plant.dt}")
    x0 = np.zeros(plant.n_x) if args.x0 is None else args.x0
    if args.theta_rule is not None:
        source = parse_theta_rule(args.theta_rule, plant)
    elif args.theta_random is not None:
        lo, hi = args.theta_random
        source = np.random.default_rng(args.seed).uniform(lo, hi, len(sig) - 1)
    else:
        source = args.theta
    ens = collect_from_plant(plant, sig, x0, source, bound=args.bound)
    out = _out_path(args, args.out, "snapshots.csv")
    save_snapshots(ens, out, comment=f"plant={plant.kind} n_x={plant.n_x} n_u={plant.n_u}")
    _say(args, f"wrote {out} (N_d={ens.n_d}, n_x={ens.n_x}, n_u={ens.n_u})")
    return 0


def _fit_from_args(args):
    ensembles = [load_snapshots(p, dt=args.dt) for p in args.data]
    theta = np.concatenate([e.theta for e in ensembles])
    scale = ThetaScale.fit(theta, enabled=not args.no_normalize)
    data = build_lifted(ensembles, args.np, scale)
    C = None
    if args.outputs is not None:
        idx = [int(i) - 1 for i in args.outputs.split(",")]
        C = np.eye(data.n_x)[idx]
    spectrum = singular_spectrum(data)
    full = fit_full(data, C, args.rank)
    r = args.rank.select(spectrum.regressor_sv)
    if isinstance(args.nz, tuple):
        n_z = select_nz(data, args.nz[1])
    else:
        n_z = args.nz
    red = reduce(full, projection_basis(data, n_z))
    info = {
        "regression_rank": r,
        "n_z": n_z,
        "nz_rule": f"auto:{args.nz[1]}" if isinstance(args.nz, tuple) else "explicit",
        "retention": energy_retention(spectrum.shifted_sv, n_z),
        "retention_prev": energy_retention(spectrum.shifted_sv, n_z - 1) if n_z > 1 else 0.0,
        "n_d": data.n_d,
    }
    return red, spectrum, info


def cmd_fit(args) -> int:
    red, spectrum, info = _fit_from_args(args)
    out = _out_path(args, args.out, "model.json")
    save_model(red, out)
    doc = json.loads(out.read_text())
    doc["fit_info"] = info
    out.write_text(json.dumps(doc, indent=1) + "\n")
    sv_out = out.with_name(out.stem + "_sv.csv")
    _write_sv(sv_out, spectrum)
    _say(args, f"wrote {out} (n_p={red.model.n_p}, n_z={red.n_z}, regression rank {info['regression_rank']}, "
               f"retention {info['retention']:.4f}) and {sv_out}")
    return 0


def _write_sv(path: Path, spectrum) -> None:
    a, b = spectrum.regressor_sv, spectrum.shifted_sv
    rows = []
    for i in range(max(a.size, b.size)):
        rows.append([str(i + 1),
                     format_float(a[i]) if i < a.size else "",
                     format_float(b[i]) if i < b.size else "",
                     format_float(energy_retention(b, i + 1)) if i < b.size and b.sum() > 0 else ""])
    _write_rows(path, ["index", "regressor_sv", "shifted_sv", "shifted_retention"], rows)


def cmd_svplot(args) -> int:
    ensembles = [load_snapshots(p, dt=args.dt) for p in args.data]
    scale = ThetaScale.fit(np.concatenate([e.theta for e in ensembles]), enabled=not args.no_normalize)
    spectrum = singular_spectrum(build_lifted(ensembles, args.np, scale))
    out = _out_path(args, args.out, "singular_values.csv")
    _write_sv(out, spectrum)
    _say(args, f"wrote {out}")
    return 0


def _initial_state(args, red: ReducedModel) -> np.ndarray:
    if args.z0 is not None and args.x0 is not None:
        raise argparse.ArgumentTypeError("give at most one of --z0 and --x0")
    if args.x0 is not None:
        return project_state(red, args.x0)
    if args.z0 is not None:
        if args.z0.shape != (red.n_z,):
            raise DataError(f"--z0 needs {red.n_z} values")
        return args.z0
    return np.zeros(red.n_z)


def cmd_sim(args) -> int:
    red = load_model(args.model)
    sig = _excitation(args)
    u = sig.samples[:-1]
    z0 = _initial_state(args, red)
    if args.theta_rule is not None:
        plant = load_plant(args.plant, seed=args.seed) if args.plant else None
        traj = simulate_feedback(red, u, parse_theta_rule(args.theta_rule, plant), z0)
    elif args.theta_csv is not None:
        th = _read_theta_column(args.theta_csv)[: u.shape[0]]
        if th.size != u.shape[0]:
            raise DataError(f"{args.theta_csv} has {th.size} theta values, need {u.shape[0]}")
        traj = simulate(red, u, th, z0)
    else:
        traj = simulate(red, u, args.theta, z0)
    out = _out_path(args, args.out, "trajectory.csv")
    write_trajectory_csv(out, traj, u, sig.dt)
    _say(args, f"wrote {out} ({u.shape[0]} steps)")
    return 0


def _read_theta_column(path) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        rows = [r for r in csv.reader(ln for ln in fh if ln.strip() and not ln.startswith("#"))]
    if "theta" not in rows[0]:
        raise DataError(f"{path}: no theta column")
    j = rows[0].index("theta")
    return np.array([float(r[j]) for r in rows[1:] if r[j] != ""])


def cmd_eval(args) -> int:
    red = load_model(args.model)
    m = red.model
    if args.theta_grid is not None:
        out = _out_path(args, args.out, "root_locus.csv")
        rows = []
        for real, imag, th in root_locus(red, args.theta_grid):
            row = [format_float(real), format_float(imag), format_float(th)]
            if args.continuous:
                s = np.log(complex(real, imag)) / m.dt
                row += [format_float(s.real), format_float(s.imag)]
            rows.append(row)
        _write_rows(out, ["re", "im", "theta"] + (["re_ct", "im_ct"] if args.continuous else []), rows)
        _say(args, f"wrote {out}")
    if args.theta is not None:
        eig = eigenvalues_at(red, args.theta)
        out = _out_path(args, None, "eigenvalues.csv")
        rows = []
        for lam in eig.eigenvalues:
            row = [format_float(args.theta), format_float(lam.real), format_float(lam.imag),
                   format_float(abs(lam))]
            if args.continuous:
                s = np.log(complex(lam)) / m.dt
                row += [format_float(s.real), format_float(s.imag)]
            rows.append(row)
        _write_rows(out, ["theta", "re", "im", "abs"] + (["re_ct", "im_ct"] if args.continuous else []), rows)
        _say(args, f"wrote {out} (spectral radius {eig.spectral_radius:.6g}, "
                   f"{'stable' if eig.stable else 'UNSTABLE'})")
        if args.omega_grid is not None:
            resp = frequency_response(red, args.theta, args.omega_grid)
            fout = _out_path(args, None, "freq_response.csv")
            write_frequency_csv(fout, resp)
            _say(args, f"wrote {fout}")
    if args.theta is None and args.theta_grid is None:
        raise argparse.ArgumentTypeError("eval needs --theta and/or --theta-grid")
    return 0


def cmd_compare(args) -> int:
    red = load_model(args.model)
    report = {"model": str(args.model)}
    if args.truth is not None:
        truth = load_snapshots(args.truth, dt=args.dt)
        C_full = red.C_full if red.C_full is not None else red.basis @ np.linalg.pinv(red.basis)
        if truth.n_x != red.n_x:
            raise DataError(f"truth has n_x={truth.n_x}, model basis expects {red.n_x}")
        z0 = project_state(red, truth.states[0])
        if args.theta_rule is not None:
            plant = load_plant(args.plant, seed=args.seed) if args.plant else None
            traj = simulate_feedback(red, truth.inputs, parse_theta_rule(args.theta_rule, plant), z0)
        else:
            traj = simulate(red, truth.inputs, truth.theta, z0)
        y_ref = truth.states @ np.asarray(C_full).T
        per = per_output_rms_error(y_ref, traj.outputs)
        report.update({"truth": str(args.truth), "n_steps": int(truth.n_d),
                       "model_error": relative_rms_error(y_ref, traj.outputs),
                       "per_output": [float(e) for e in per]})
        if args.theta_rule is not None:
            report["theta_error"] = relative_rms_error(truth.theta, traj.theta)
        eout = _out_path(args, args.errors_out, "errors.csv")
        _write_rows(eout, ["output", "rel_rms_error"],
                    [[str(i + 1), format_float(e)] for i, e in enumerate(per)])
    if args.gap:
        if args.plant is None or args.theta_grid is None or args.omega_grid is None:
            raise argparse.ArgumentTypeError("--gap needs --plant, --theta-grid and --omega-grid")
        plant = load_plant(args.plant, seed=args.seed)
        C_full = red.C_full if red.C_full is not None else np.eye(red.n_x)
        surf = gap_surface(linear_family(plant, C_full), red, args.theta_grid, args.omega_grid)
        gout = _out_path(args, args.gap_out, "gap.csv")
        write_gap_csv(gout, surf)
        report["gap_max"] = surf.max()
        report["gap_missing_cells"] = int(np.isnan(surf.gap).sum())
    if len(report) == 1:
        raise argparse.ArgumentTypeError("compare needs --truth and/or --gap")
    rout = _out_path(args, args.out, "report.json")
    rout.write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    if "model_error" in report:
        _say(args, f"model error {report['model_error']:.4%}")
    if "gap_max" in report:
        _say(args, f"max gap {report['gap_max']:.3e}")
    _say(args, f"wrote {rout}")
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for random plants / parameter draws")
    common.add_argument("--out-dir", default=".", help="directory for relative output paths")
    common.add_argument("--quiet", action="store_true")

    excite = argparse.ArgumentParser(add_help=False)
    g = excite.add_mutually_exclusive_group()
    g.add_argument("--chirp", type=chirp_spec, help="linear chirp f0:f1:duration:dt")
    g.add_argument("--input", help="input CSV with u_* columns (and t, or pass --dt)")
    excite.add_argument("--amplitude", type=float, default=1.0)
    excite.add_argument("--phase", type=float, default=0.0)

    p = argparse.ArgumentParser(prog="pdmd", parents=[common],
                                description="Parametric DMD for polynomial LPV reduced-order models.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen", parents=[common, excite], help="collect snapshots from a surrogate plant")
    s.add_argument("--plant", required=True, help="plant config (JSON)")
    th = s.add_mutually_exclusive_group()
    th.add_argument("--theta", type=float, default=0.0, help="fixed scheduling value")
    th.add_argument("--theta-rule", help="state-derived rule, e.g. arcsin:node=last:V0=22")
    th.add_argument("--theta-random", type=lambda t: tuple(float_list(t)),
                    help="uniform random per-step values lo,hi (uses --seed)")
    s.add_argument("--x0", type=float_list)
    s.add_argument("--dt", type=float)
    s.add_argument("--bound", type=float, default=1e6)
    s.add_argument("--no-dt-check", dest="dt_check", action="store_false",
                   help="allow excitation dt different from the plant dt")
    s.add_argument("--out")
    s.set_defaults(func=cmd_gen)

    fitp = argparse.ArgumentParser(add_help=False)
    fitp.add_argument("--data", required=True, action="append", help="snapshot CSV (repeatable)")
    fitp.add_argument("--np", type=int, default=4, help="polynomial order")
    fitp.add_argument("--dt", type=float)
    fitp.add_argument("--no-normalize", action="store_true", help="fit in the raw parameter")

    s = sub.add_parser("fit", parents=[common, fitp], help="fit an LPV-ROM")
    s.add_argument("--nz", type=nz_spec, default=("auto", 0.95), help="ROM order or auto[:frac]")
    s.add_argument("--rank", type=rank_spec, default=RankPolicy(),
                   help="regressor truncation: default | energy:f | rank:r | tol:t")
    s.add_argument("--outputs", help="1-based state indices forming the outputs (default: all)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("svplot", parents=[common, fitp], help="singular spectra of the data")
    s.add_argument("--out")
    s.set_defaults(func=cmd_svplot)

    s = sub.add_parser("sim", parents=[common, excite], help="simulate a fitted model")
    s.add_argument("--model", required=True)
    th = s.add_mutually_exclusive_group()
    th.add_argument("--theta", type=float, default=0.0)
    th.add_argument("--theta-csv", help="CSV with a theta column (e.g. a snapshot file)")
    th.add_argument("--theta-rule", help="rule on the reconstructed full state")
    s.add_argument("--plant", help="plant config, to resolve node=... in --theta-rule")
    s.add_argument("--z0", type=float_list)
    s.add_argument("--x0", type=float_list, help="full-order initial state, projected onto the basis")
    s.add_argument("--dt", type=float)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sim)

    s = sub.add_parser("eval", parents=[common], help="eigenvalues / frequency response at fixed theta")
    s.add_argument("--model", required=True)
    s.add_argument("--theta", type=float)
    s.add_argument("--theta-grid", type=grid_spec, help="root locus over start:stop:step")
    s.add_argument("--omega-grid", type=grid_spec, help="log:lo:hi:n or lin:lo:hi:n (rad/s)")
    s.add_argument("--continuous", action="store_true", help="also report log(lambda)/dt")
    s.add_argument("--out", help="root-locus CSV name")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("compare", parents=[common], help="compare a model against truth")
    s.add_argument("--model", required=True)
    s.add_argument("--truth", help="truth snapshot CSV")
    s.add_argument("--theta-rule", help="simulate the ROM with this rule instead of the recorded theta")
    s.add_argument("--plant", help="truth plant config (gap surface, node=... rules)")
    s.add_argument("--gap", action="store_true", help="write the pointwise gap surface")
    s.add_argument("--theta-grid", type=grid_spec)
    s.add_argument("--omega-grid", type=grid_spec)
    s.add_argument("--dt", type=float)
    s.add_argument("--out", help="report JSON name")
    s.add_argument("--errors-out")
    s.add_argument("--gap-out")
    s.set_defaults(func=cmd_compare)
    return p


_NEGATIVE_VALUE = re.compile(r"^-[\d.]")


def _attach_negative_values(argv: list[str]) -> list[str]:
    """Rewrite ``--opt -1:1:0.05`` as ``--opt=-1:1:0.05`` so argparse does not read it as a flag."""
    out: list[str] = []
    it = iter(range(len(argv)))
    for i in it:
        a = argv[i]
        if a.startswith("--") and "=" not in a and i + 1 < len(argv) and _NEGATIVE_VALUE.match(argv[i + 1]):
            out.append(f"{a}={argv[i + 1]}")
            next(it, None)
        else:
            out.append(a)
    return out


def _format_warning(message, category, filename, lineno, line=None) -> str:
    return f"warning: {message}\n"


def main(argv=None) -> int:
    parser = build_parser()
    argv = _attach_negative_values(list(sys.argv[1:] if argv is None else argv))
    warnings.formatwarning = _format_warning
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with warnings.catch_warnings():
            if args.quiet:
                warnings.simplefilter("ignore")
            return args.func(args)
    except argparse.ArgumentTypeError as exc:
        print(f"pdmd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, DataError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"pdmd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"pdmd {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


@dataclass
class ExperimentConfig:
    """One gen -> fit -> compare run, loadable from JSON (used by ``scripts/``)."""

    plant: str
    chirp: str
    out_dir: str = "out"
    amplitude: float = 1.0
    theta: float = 0.0
    theta_rule: str | None = None
    x0: list[float] | None = None
    n_p: int = 4
    n_z: str = "auto:0.95"
    rank: str = "default"
    normalize: bool = True
    validation_chirp: str | None = None
    validation_amplitude: float | None = None
    validation_phase: float = 0.0
    theta_grid: str | None = None
    omega_grid: str | None = None
    seed: int = 0
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        doc = json.loads(Path(path).read_text())
        base = Path(path).parent
        cfg = cls(**doc)
        if not Path(cfg.plant).is_absolute():
            cfg.plant = str(base / cfg.plant)
        return cfg

    def _common(self) -> list[str]:
        return ["--out-dir", self.out_dir, "--seed", str(self.seed)]

    def _theta_args(self) -> list[str]:
        if self.theta_rule:
            return ["--theta-rule", self.theta_rule]
        return ["--theta", str(self.theta)]

    def _x0_args(self) -> list[str]:
        return ["--x0", ",".join(format_float(v) for v in self.x0)] if self.x0 else []

    def run(self, quiet: bool = True) -> dict:
        q = ["--quiet"] if quiet else []
        steps = [
            ["gen", "--plant", self.plant, "--chirp", self.chirp, "--amplitude", str(self.amplitude),
             "--out", "train.csv", *self._theta_args(), *self._x0_args()],
            ["fit", "--data", str(Path(self.out_dir) / "train.csv"), "--np", str(self.n_p),
             "--nz", self.n_z, "--rank", self.rank, "--out", "model.json"]
            + ([] if self.normalize else ["--no-normalize"]),
        ]
        compare = ["compare", "--model", str(Path(self.out_dir) / "model.json"), "--plant", self.plant]
        if self.validation_chirp:
            amp = self.validation_amplitude if self.validation_amplitude is not None else self.amplitude
            steps.append(["gen", "--plant", self.plant, "--chirp", self.validation_chirp,
                          "--amplitude", str(amp), "--phase", str(self.validation_phase),
                          "--out", "validation.csv", *self._theta_args(), *self._x0_args()])
            compare += ["--truth", str(Path(self.out_dir) / "validation.csv")]
            if self.theta_rule:
                compare += ["--theta-rule", self.theta_rule]
        if self.theta_grid and self.omega_grid:
            compare += ["--gap", "--theta-grid", self.theta_grid, "--omega-grid", self.omega_grid]
        if len(compare) > 5:
            steps.append(compare)
        for argv in steps:
            code = main(argv + self._common() + q)
            if code != 0:
                raise RuntimeError(f"step {' '.join(argv[:1])} failed with exit code {code}")
        return json.loads((Path(self.out_dir) / "report.json").read_text()) if len(compare) > 5 else {}


if __name__ == "__main__":
    sys.exit(main())
