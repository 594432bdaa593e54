"""Instability-onset tracking: root loci of the truth linearization and of the ROM.

The flex-chain load coefficient grows linearly with the parameter so the net
damping vanishes at a chosen crossing value. Both models are swept over the
same parameter grid and the first unstable grid point of each is reported.
"""

import argparse
import csv
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from pdmd import (FlexChainConfig, FlexChainPlant, PDMDConfig, Signal, collect_from_plant, eigenvalues_at,
                  fit_pdmd, flexchain_instability_theta, linearize_plant, save_model)
from pdmd.snapshots import format_float


@dataclass
class InstabilityExperiment:
    theta_star: float = 0.5
    n_steps: int = 4000
    seed: int = 3
    n_p: int = 4
    grid_step: float = 0.05
    dt: float = 0.01

    def config(self) -> FlexChainConfig:
        base = FlexChainConfig.from_modal(N=10, f1=0.5, zeta=0.02, dt=self.dt, b=(0.1,) * 10)
        return replace(base, a1=base.c / self.theta_star)


def run(exp: InstabilityExperiment, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    cfg = exp.config()
    plant = FlexChainPlant(cfg)
    rng = np.random.default_rng(exp.seed)
    sig = Signal(cfg.dt, rng.standard_normal((exp.n_steps + 1, plant.n_u)))
    ens = collect_from_plant(plant, sig, np.zeros(plant.n_x), rng.uniform(-1, 1, exp.n_steps))
    red = fit_pdmd(ens, PDMDConfig(n_p=exp.n_p))
    save_model(red, out / "model.json")
    norm_grid = np.round(np.arange(-1, 1 + 1e-9, exp.grid_step), 12)
    grid = red.model.theta_scale.denormalize(norm_grid)

    rows, rom_cross = [], None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for th in grid:
            A, _ = linearize_plant(plant, np.zeros(plant.n_x), np.zeros(plant.n_u), th)
            lam_true = np.linalg.eigvals(A)
            sp = eigenvalues_at(red, th)
            if rom_cross is None and sp.spectral_radius >= 1:
                rom_cross = float(th)
            rows += [["truth", format_float(th), format_float(l.real), format_float(l.imag)] for l in lam_true]
            rows += [["rom", format_float(th), format_float(l.real), format_float(l.imag)] for l in sp.eigenvalues]
    with (out / "root_loci.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "theta", "re", "im"])
        w.writerows(rows)
    return {"analytic": exp.theta_star, "truth": flexchain_instability_theta(cfg, grid),
            "rom": rom_cross, "n_z": red.n_z}


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description="instability-onset experiment")
    ap.add_argument("--out-dir", default="out/instability")
    ap.add_argument("--theta-star", type=float, default=0.5)
    a = ap.parse_args()
    for k, v in run(InstabilityExperiment(theta_star=a.theta_star), Path(a.out_dir)).items():
        print(f"{k}: {v}")
