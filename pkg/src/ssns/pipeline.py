"""Multi-stage runs (profile -> spectrum -> track -> ancient -> localize -> verify) with manifests."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .fields import SimilarityGrid
from .grid import RadialGrid
from .io import save_profile, save_trajectory, write_csv

log = logging.getLogger(__name__)

ORDER = ("model", "profile", "spectrum", "track", "ancient", "localize", "verify")


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage, self.cause = stage, cause


@dataclass
class StageRecord:
    name: str
    outputs: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    seconds: float = 0.0


@dataclass
class RunManifest:
    config_hash: str
    version: str = __version__
    stages: list = field(default_factory=list)
    error: str | None = None

    def summaries(self) -> dict:
        return {s.name: s.summary for s in self.stages}

    def to_json(self) -> dict:
        return {"config_hash": self.config_hash, "version": self.version, "error": self.error,
                "stages": [asdict(s) for s in self.stages]}


def check_stages(stages) -> list:
    stages = list(stages)
    if not stages:
        raise ValueError("no stages given")
    if stages[0] not in ("model", "profile"):
        raise ValueError("a pipeline starts with 'model' or 'profile'")
    start = ORDER.index(stages[0])
    if stages != list(ORDER[start:start + len(stages)]):
        raise ValueError(f"stages must follow the order {'|'.join(ORDER[:2])}, {', '.join(ORDER[2:])}")
    return stages


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, (float, np.floating)):
        return float(v) if np.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


class Pipeline:
    def __init__(self, config: RunConfig, outdir):
        self.cfg = config
        self.out = Path(outdir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.ctx: dict = {}

    @property
    def grid(self) -> SimilarityGrid:
        c = self.cfg
        return SimilarityGrid(RadialGrid(c["grid.n"], c["grid.map_scale"], 3), c["grid.lmax"])

    def datum(self):
        from .datum import swirl_datum

        return swirl_datum()

    # stages ---------------------------------------------------------------

    def model(self):
        from .acceptance import hermite_oracle
        from .model import threshold_sweep

        c = self.cfg
        herm = hermite_oracle()
        rows = threshold_sweep(c["model.n"], c["model.alpha"], c["model.kappas"], c["model.p_list"], c["model.t0"])
        path = write_csv(self.out / "model_sweep.csv", ("kappa", "lambda1", "p", "fitted_exponent", "classification"),
                         [(r.kappa, r.lambda1, r.p, r.fitted_exponent, r.classification) for r in rows])
        agree = sum((r.fitted_exponent > 0) == (r.classification == "illposed_expected") for r in rows)
        return [path], {"hermite_pass": herm.passed, "hermite_max_error": herm.measured["max_error"],
                        "sweep_rows": len(rows), "sweep_agreement": agree}

    def profile(self):
        from .norms import x_norm
        from .profile import solve_profile

        c = self.cfg
        prof = solve_profile(self.datum(), c["profile.sigma"], grid=self.grid, tol=c["tol.newton"])
        if not prof.converged:
            raise RuntimeError(f"profile did not converge (residual {prof.residual_x_norm:.3e})")
        self.ctx["profile"] = prof
        files = save_profile(prof, self.out / "profile")
        return files, {"sigma": prof.sigma, "residual": prof.residual_x_norm, "farfield_slope": prof.farfield_slope,
                       "phi_x_norm": x_norm(prof.phi), "newton_steps": len(prof.history) - 1}

    def spectrum(self):
        from .spectra import growth_bound, leading_spectrum

        c = self.cfg
        a = self.ctx["profile"].background()
        rep = leading_spectrum(a, c["spectrum.how_many"], symmetry=c["spectrum.symmetry"], T=c["spectrum.T"],
                               margin=c["spectrum.margin"], grid=self.grid, seed=c.seed)
        self.ctx["report"] = rep
        w = growth_bound(a, horizon=c["spectrum.horizon"], grid=self.grid)
        path = write_csv(self.out / "spectrum.csv", ("re", "im", "residual", "band"),
                         [(p.value.real, p.value.imag, p.residual, int(p.band)) for p in rep.ritz_pairs])
        return [path], {"abscissa_s": rep.abscissa_s, "gap_delta": rep.gap_delta, "growth_bound": w,
                        "leading": rep.leading.value if rep.ritz_pairs else None}

    def track(self):
        from .profile import ProfileProblem, continue_profiles
        from .spectra import CURVE_HEADER, classify_crossing, track_eigencurve

        c = self.cfg
        jsonl = self.out / "continuation.jsonl"
        state, _ = continue_profiles(self.datum(), c["continue.target"], c["continue.step"], grid=self.grid,
                                     tol=c["tol.newton"], sv_threshold=c["continue.sv_threshold"], jsonl=jsonl,
                                     snapshot_dir=self.out / "branch")
        curve = track_eigencurve(state, c["track.how_many"], problem=ProfileProblem(self.datum(), self.grid))
        cert = classify_crossing(curve, tol=c["track.tol"], sv_threshold=c["continue.sv_threshold"])
        self.ctx["crossing"] = cert
        path = write_csv(self.out / "eigencurve.csv", CURVE_HEADER, curve.rows())
        snaps = sorted(str(p) for p in (self.out / "branch").glob("*.ssns"))
        return [jsonl, path, *snaps], {"branch_points": len(state.branch), "fold": state.fold is not None,
                                       "kind": cert.kind, "sigma0": cert.sigma0,
                                       "max_re_lambda1": float(np.max(curve.lambda1.real))}

    def ancient(self):
        from .ancient import UnstableSplit, fixed_point_ancient, scenario_a_operator, shoot_ancient, unstable_seed
        from .heat import norm_history

        c = self.cfg
        cert = self.ctx.get("crossing")
        if cert is not None and cert.kind == "A":
            from .profile import solve_profile
            from .spectra import LinearizedOperator

            # just past the crossing, where the pair has a small positive real part
            sigma = cert.sigma0 + c["continue.step"] / 4
            prof = solve_profile(self.datum(), sigma, grid=self.grid, tol=c["tol.newton"])
            split = UnstableSplit(LinearizedOperator.from_background(prof.background()))
            synthetic = False
        elif c["ancient.synthetic"]:
            split = UnstableSplit(scenario_a_operator(self.grid, c["ancient.beta"], c["ancient.omega"]))
            synthetic = True
        else:
            raise RuntimeError("no scenario-A certificate and ancient.synthetic is false")
        seed = unstable_seed(split, c["ancient.amplitude"])
        build = fixed_point_ancient if c["ancient.method"] == "fixed_point" else shoot_ancient
        traj = build(split, seed, c["ancient.T_back"], h=c["ancient.h"])
        self.ctx["trajectory"] = (traj, split, synthetic)
        files = save_trajectory(traj, self.out / "ancient", split.Lam)
        hist = norm_history(traj.times, traj.fields)
        files.append(write_csv(self.out / "ancient_norms.csv", ("t", "l2", "l4", "x_norm", "grad_x_norm"), hist))
        return files, {"synthetic": synthetic, "beta": split.beta, "l4_rate": traj.l4_rate(),
                       "contraction_ratio": traj.contraction_ratio, "iterations": traj.iterations}

    def localize(self):
        from .localize import (TrajectoryPerturbation, certify_abscissa, nonuniqueness_certificate, split_datum,
                               synthetic_perturbation)

        c = self.cfg
        prof = self.ctx["profile"]
        a, grid = prof.background(), prof.grid
        beta1 = certify_abscissa(a, grid)
        traj = self.ctx.get("trajectory")
        if traj is not None and not traj[2]:
            pert = TrajectoryPerturbation.from_split(traj[0], traj[1])
        else:
            pert = synthetic_perturbation(grid, c["localize.eps"], c["localize.beta"])
        trunc = split_datum(prof.datum.with_sigma(prof.sigma), c["localize.R"])
        rep = nonuniqueness_certificate(a, trunc, pert, beta1, T=c["localize.T"], t_min=c["localize.t_min"],
                                        h=c["localize.h"], tol=c["tol.picard"], profile=prof)
        path = self.out / "certificate.json"
        path.write_text(json.dumps(_plain(rep.to_json()), sort_keys=True, indent=1))
        return [path], {"sep_exponent": rep.sep_exponent, "target_exponent": rep.target_exponent,
                        "l2_sup": list(rep.l2_sup), "abscissa_certificate": beta1}

    def verify(self):
        from .acceptance import determinism, run_checks

        c = self.cfg
        first = run_checks(c.criteria(), seed=c.seed)
        results = list(first)
        if c["verify.repeat"] == 2:
            results.append(determinism(first, run_checks(c.criteria(), seed=c.seed)))
        for r in results:
            print(r.line(), flush=True)
        path = self.out / "verify.json"
        path.write_text(json.dumps([r.summary() for r in results], sort_keys=True, indent=1))
        self.ctx["verify"] = results
        return [path], {f"criterion_{r.number}": r.passed for r in results}

    # driver ---------------------------------------------------------------

    def run(self, stages) -> RunManifest:
        stages = check_stages(stages)
        manifest = RunManifest(self.cfg.hash)
        (self.out / "config.txt").write_text(self.cfg.emit())
        for name in stages:
            t0 = time.perf_counter()
            log.info("stage %s", name)
            try:
                files, summary = getattr(self, name)()
            except Exception as exc:
                manifest.error = f"{name}: {exc}"
                self._write(manifest)
                raise StageError(name, exc) from exc
            rel = [str(Path(f).relative_to(self.out)) for f in files]
            manifest.stages.append(StageRecord(name, rel, _plain(summary), time.perf_counter() - t0))
            self._write(manifest)
        return manifest

    def _write(self, manifest: RunManifest):
        (self.out / "summary.json").write_text(json.dumps(_plain(manifest.summaries()), sort_keys=True, indent=1))
        full = manifest.to_json()
        full["files"] = ["config.txt", "summary.json", "manifest.json"] + [f for s in full["stages"]
                                                                            for f in s["outputs"]]
        (self.out / "manifest.json").write_text(json.dumps(_plain(full), sort_keys=True, indent=1))


def run_pipeline(config: RunConfig, stages, outdir) -> RunManifest:
    return Pipeline(config, outdir).run(stages)
