"""Config-driven experiment runs: build a family, run steps, collect checks."""
from __future__ import annotations

import csv
import datetime as _dt
import json
from pathlib import Path

import numpy as np

from . import builders
from . import lightcone as lc
from .config import ExperimentConfig
from .energy import TangentPair, energy, energy_density, moment_map, residue_rhs
from .families import flatness_residual, gauge_apply
from .grid import Domain, density
from .io import save_family, save_solution
from .transforms import (dual_surface, kernel_splitting, line_curvature_integral, line_degree,
                         twist, twist_block_identity)
from .verify import Row

SCHEMA_VERSION = 1


class StepError(ValueError):
    """A pipeline step that does not apply to the configured data."""


def build_solution(cfg: ExperimentConfig):
    d, s = cfg.domain, cfg.solution
    nx, ny = d["resolution"]
    if s["solver"] == "constant":
        dom = Domain.torus((nx, ny), modulus=complex(*d.get("modulus", [0.0, 1.0])))
        return builders.constant_solution(dom, cfg.q, s["target"])
    u0 = s.get("u_init", "minimum")
    if u0 == "minimum":
        u0 = builders.strip_minimum(cfg.q, s["target"])
    return builders.solve_gordon_strip(cfg.q, float(u0), float(s.get("du_init", 0.0)),
                                       target=s["target"], x_range=tuple(d.get("x_range", (-0.5, 0.5))),
                                       n=nx, ny=ny, y_range=d.get("y_range"))


def _split(fam):
    return kernel_splitting(fam.coefficient(-1).part("10"))


def _degree(fam, split):
    """Chern-Weil degree on a torus, the (boundary-sensitive) curvature integral on a patch."""
    if fam.domain.is_torus:
        return line_degree(fam, split), "line degree (Chern-Weil)"
    return line_curvature_integral(fam, split), "line curvature integral (patch)"


class Run:
    def __init__(self, cfg: ExperimentConfig, out_dir, command):
        self.cfg = cfg
        self.out = Path(out_dir)
        self.command = command
        self.results = {}
        self.rows: list[Row] = []
        self._sol = None
        self._fam = None

    @property
    def solution(self):
        if self._sol is None:
            self._sol = build_solution(self.cfg)
        return self._sol

    @property
    def family(self):
        if self._fam is None:
            self._fam = builders.family_from_uq(self.solution, label=self.cfg.name or "config")
        return self._fam

    def check(self, label, value, key):
        self.rows.append(Row(label, float(value), self.cfg.tolerance(key)))

    # steps ---------------------------------------------------------------
    def build(self):
        self.out.mkdir(parents=True, exist_ok=True)
        save_solution(self.out / "solution.sgf", self.solution)
        save_family(self.out / "family.sgf", self.family)
        res = flatness_residual(self.family)
        self.results["build"] = {"flatness_residual": {str(k): v for k, v in res.items()},
                                 "domain": self.solution.domain.to_dict(),
                                 "target": self.solution.target}
        self.check("flatness residual", max(res.values()), "flatness")

    def energy(self):
        fam = self.family
        rep = energy(fam)
        out = {"family": rep.to_dict()}
        if fam.domain.is_torus:
            es = []
            for k in range(3):
                g = builders.random_lift_perturbation(fam.domain, self.cfg.seed + k, K=6, order=3)
                es.append(energy(gauge_apply(fam, g, order=2)).energy)
            spread = max(abs(e - rep.energy) for e in es) / max(abs(rep.energy), 1e-300)
            out["lift_gauge_spread"] = spread
            self.check("energy spread under seeded lift gauges", spread, "energy_invariance")
        self.results["energy"] = out
        if "csv" in self.cfg.formats:
            self._write_density_csv(fam)

    def twist(self):
        fam = self.family
        split = _split(fam)
        tw = twist(fam, split)
        before, after = energy(fam), energy(tw)
        deg, kind = _degree(fam, split)
        resid = abs(after.energy - (2 * before.energy - deg))
        block = twist_block_identity(tw, split)
        self.results["twist"] = {"before": before.to_dict(), "after": after.to_dict(),
                                 "deg_L": deg, "deg_L_kind": kind, "relation_residual": resid,
                                 "block_identity": block}
        self.check("E(twist) = 2E - deg L residual", resid, "twist_relation")
        if fam.domain.is_torus:
            self.check("deg L distance from an integer", abs(deg - round(deg)), "degree_integrality")
        self.check("L-block curvature identity", block, "block_identity")

    def dual(self):
        fam = self.family
        split = _split(fam)
        before, after = energy(fam), energy(dual_surface(fam, split))
        deg, kind = _degree(fam, split)
        resid = abs(after.energy - (before.energy - deg))
        self.results["dual"] = {"before": before.to_dict(), "after": after.to_dict(),
                                "deg_L": deg, "deg_L_kind": kind, "relation_residual": resid}
        self.check("E(dual) = E - deg L residual", resid, "dual_relation")

    def residue(self):
        fam = self.family
        phi = fam.coefficient(-1).part("10")
        psi = fam.coefficient(1).part("01")
        ref = TangentPair(phi.conj_transpose(), phi)
        mu = moment_map(phi)
        E = energy(fam).energy
        rhs = 1j / (2 * np.pi) * residue_rhs(phi, TangentPair(psi, phi), ref, mu)
        degenerate = abs(residue_rhs(phi, ref, ref, mu) - mu)
        self.results["residue"] = {"energy_re": E.real, "energy_im": E.imag,
                                   "rhs_re": rhs.real, "rhs_im": rhs.imag,
                                   "moment_map_re": complex(mu).real,
                                   "moment_map_im": complex(mu).imag}
        self.check("E = (i/2pi) residue rhs", abs(E - rhs), "residue_identity")
        self.check("twistor-line lift returns mu", degenerate, "residue_identity")

    def lightcone(self):
        sol, fam = self.solution, self.family
        if sol.target != "H3" or sol.domain.is_torus:
            raise StepError("the lightcone step needs an H3 solution on a patch")
        Fp, Fm = lc.integrate_frame(fam, 1.0), lc.integrate_frame(fam, -1.0)
        hf = lc.embed_hatf(Fp, Fm)
        famhat = dual_surface(fam, _split(fam))
        lams = np.exp(2j * np.pi * (np.arange(8) + 0.5) / 8)
        w = lc.willmore_compare(sol, famhat, hf)
        dev = w.deviations()
        res = {"q_hatf": float(np.abs(lc.minkowski_q(hf)).max()),
               "path_residual": Fp.path_residual,
               "so5_connection": lc.so5_connection_check(sol, Fp, lams),
               "dual_connection": lc.dual_so5_equivalence(famhat, sol, lams),
               "metric_factor": w.metric_factor, **dev}
        self.results["lightcone"] = res
        self.check("q(f^)", res["q_hatf"], "lightcone_q")
        self.check("psi-frame connection deviation", res["so5_connection"], "so5_connection")
        self.check("dual-surface connection deviation", res["dual_connection"], "dual_connection")
        self.check("Willmore integrand (a) vs (b)", dev["algebraic_vs_frame"], "willmore_algebraic")
        self.check("Willmore integrand (c) vs (a)", dev["geometric_vs_algebraic"], "willmore_geometric")
        self.check("mean curvature", dev["mean_curvature"], "mean_curvature")
        if "csv" in self.cfg.formats:
            self.out.mkdir(parents=True, exist_ok=True)
            w.write_csv(self.out / "willmore.csv")

    def _write_density_csv(self, fam):
        self.out.mkdir(parents=True, exist_ok=True)
        dens = density(energy_density(fam))
        s, t = fam.domain.lattice()
        with open(self.out / "energy_density.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["s", "t", "density_re", "density_im"])
            for idx in np.ndindex(*fam.domain.shape):
                wr.writerow([f"{s[idx]:.10g}", f"{t[idx]:.10g}",
                             f"{dens[idx].real:.12g}", f"{dens[idx].imag:.12g}"])

    # ---------------------------------------------------------------------
    def execute(self, steps):
        for step in steps:
            getattr(self, step)()
        return self.report()

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    def report(self):
        return {"schema_version": SCHEMA_VERSION,
                "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
                "command": self.command,
                "config": self.cfg.to_dict() if self.cfg else None,
                "results": self.results,
                "checks": [r.to_dict() for r in self.rows],
                "pass": self.passed}


def write_report(report, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")
