"""Command line entry point ``ssns``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure,
4 acceptance failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, parse_config

log = logging.getLogger("ssns")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 2, 3, 4


class AcceptanceFailure(Exception):
    pass


# helpers ------------------------------------------------------------------

def _config(args) -> RunConfig:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
        if args.seed is not None:
            text += f"\nseed = {args.seed}\n"  # a later line wins
        cfg = parse_config(text)
    else:
        cfg = parse_config(f"seed = {args.seed if args.seed is not None else 0}\n")
    pairs = list(args.set or [])
    return cfg.with_overrides(pairs) if pairs else cfg


def _override(cfg: RunConfig, **pairs) -> RunConfig:
    extra = [f"{k.replace('__', '.')} = {v}" for k, v in pairs.items() if v is not None]
    return cfg.with_overrides(extra) if extra else cfg


def _grid(cfg: RunConfig):
    from .fields import SimilarityGrid
    from .grid import RadialGrid

    return SimilarityGrid(RadialGrid(cfg["grid.n"], cfg["grid.map_scale"], 3), cfg["grid.lmax"])


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_profile(path):
    from .io import load_profile

    return load_profile(Path(path).with_suffix(""))


def _kappa_range(text: str) -> str:
    """'a:b:step' (inclusive) or a comma list, returned as a comma list."""
    if ":" not in text:
        return text
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise ConfigError(f"--kappa-sweep: expected a:b:step, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise ConfigError("--kappa-sweep: need step > 0 and b >= a")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return ",".join(repr(round(lo + k * step, 12)) for k in range(n))


def _write_json(path: Path, obj) -> Path:
    from .pipeline import _plain

    path.write_text(json.dumps(_plain(obj), sort_keys=True, indent=1))
    return path


# subcommands ---------------------------------------------------------------

def cmd_model(args, cfg):
    from .io import write_csv
    from .model import threshold_sweep

    cfg = _override(cfg, model__n=args.n, model__alpha=args.alpha,
                    model__kappas=_kappa_range(args.kappa_sweep) if args.kappa_sweep else None,
                    model__p_list=args.p, model__t0=args.t0)
    rows = threshold_sweep(cfg["model.n"], cfg["model.alpha"], cfg["model.kappas"], cfg["model.p_list"],
                           cfg["model.t0"])
    path = write_csv(_out(args) / "model_sweep.csv", ("kappa", "lambda1", "p", "fitted_exponent", "classification"),
                     [(r.kappa, r.lambda1, r.p, r.fitted_exponent, r.classification) for r in rows])
    for r in rows:
        print(f"kappa={r.kappa:g} lambda1={r.lambda1:.6f} p={r.p:g} exponent={r.fitted_exponent:.4f} "
              f"{r.classification}")
    print(f"wrote {path}")


def cmd_semigroup(args, cfg):
    from .acceptance import random_solenoidal
    from .heat import PropagatorSpec, norm_history, semigroup_La
    from .io import write_csv, write_snapshot

    if args.profile:
        prof = _load_profile(args.profile)
        grid, a = prof.grid, prof.background()
    else:
        grid, a = _grid(cfg), None
    phi0 = random_solenoidal(np.random.default_rng(cfg.seed), grid)
    spec = PropagatorSpec(a, args.step, args.scheme)
    phi, times, snaps = semigroup_La(spec, phi0, args.time, samples=args.samples)
    out = _out(args)
    path = write_csv(out / "semigroup_norms.csv", ("s", "l2", "l4", "x_norm", "grad_x_norm"),
                     norm_history(times, snaps))
    write_snapshot(out / "semigroup_final.ssns", phi, args.time)
    print(f"e^(s A) applied to a seeded probe up to s={args.time:g}; wrote {path}")


def cmd_profile(args, cfg):
    from .io import load_datum, save_profile
    from .norms import x_norm
    from .profile import solve_profile

    cfg = _override(cfg, profile__sigma=args.sigma)
    datum = load_datum(args.datum or cfg["datum"])
    prof = solve_profile(datum, cfg["profile.sigma"], grid=_grid(cfg), tol=cfg["tol.newton"])
    files = save_profile(prof, _out(args) / args.name)
    print(f"sigma={prof.sigma:g} residual={prof.residual_x_norm:.3e} farfield_slope={prof.farfield_slope:.4f} "
          f"||phi||_X={x_norm(prof.phi):.6e} converged={prof.converged}")
    print("wrote " + " ".join(str(f) for f in files))
    if not prof.converged:
        raise RuntimeError("Newton iteration did not reach the tolerance")


def cmd_continue(args, cfg):
    from .io import load_datum
    from .profile import continue_profiles

    cfg = _override(cfg, continue__target=args.to, continue__step=args.step)
    datum = load_datum(args.datum or cfg["datum"])
    out = _out(args)
    state, profiles = continue_profiles(datum, cfg["continue.target"], cfg["continue.step"], sigma0=args.start,
                                        grid=_grid(cfg), tol=cfg["tol.newton"],
                                        sv_threshold=cfg["continue.sv_threshold"], jsonl=out / "branch.jsonl",
                                        snapshot_dir=out / "branch")
    for p in profiles:
        print(f"sigma={p.sigma:.6f} residual={p.residual_x_norm:.3e} slope={p.farfield_slope:.3f}")
    if state.fold is not None:
        print(f"fold near sigma={state.fold['sigma']:.6f}")
    print(f"wrote {out / 'branch.jsonl'} ({len(profiles)} points)")


def cmd_spectrum(args, cfg):
    from .io import write_csv
    from .spectra import growth_bound, leading_spectrum

    cfg = _override(cfg, spectrum__how_many=args.count, spectrum__symmetry=args.symmetry)
    prof = _load_profile(args.profile)
    a = prof.background()
    rep = leading_spectrum(a, cfg["spectrum.how_many"], symmetry=cfg["spectrum.symmetry"], T=cfg["spectrum.T"],
                           margin=cfg["spectrum.margin"], grid=prof.grid, seed=cfg.seed)
    w = growth_bound(a, horizon=cfg["spectrum.horizon"], grid=prof.grid)
    path = write_csv(_out(args) / "spectrum.csv", ("re", "im", "residual", "band"),
                     [(p.value.real, p.value.imag, p.residual, int(p.band)) for p in rep.ritz_pairs])
    for p in rep.ritz_pairs:
        print(f"{p.value.real:+.8f} {p.value.imag:+.8f}i  residual={p.residual:.2e}{'  (band)' if p.band else ''}")
    print(f"abscissa s(A)={rep.abscissa_s:.8f} gap={rep.gap_delta:.4g} growth bound={w:.6f}")
    print(f"wrote {path}")


def cmd_track(args, cfg):
    from .io import load_datum, read_jsonl, read_snapshot, write_csv
    from .profile import ProfileProblem
    from .spectra import CURVE_HEADER, classify_crossing, track_eigencurve

    records = read_jsonl(args.branch)
    if not records or any(r.get("snapshot_path") is None for r in records):
        raise ConfigError(f"{args.branch}: every record needs a snapshot_path")
    base = Path(args.branch).parent
    items, problem = [], None
    for rec in records:
        snap = Path(rec["snapshot_path"])
        phi, _ = read_snapshot(snap if snap.is_absolute() or snap.exists() else base / snap)
        if problem is None:
            problem = ProfileProblem(load_datum(args.datum or cfg["datum"]), phi.grid)
        items.append((rec["sigma"], problem.jacobian(phi.flat, rec["sigma"])))
    curve = track_eigencurve(items, cfg["track.how_many"])
    cert = classify_crossing(curve, tol=cfg["track.tol"], sv_threshold=cfg["continue.sv_threshold"])
    out = _out(args)
    path = write_csv(out / "eigencurve.csv", CURVE_HEADER, curve.rows())
    _write_json(out / "crossing.json", {"kind": cert.kind, "sigma0": cert.sigma0})
    print(f"crossing: {cert.kind}" + (f" at sigma0={cert.sigma0:.6f}" if cert.kind != "none" else ""))
    print(f"wrote {path}")


def cmd_ancient(args, cfg):
    from .ancient import UnstableSplit, fixed_point_ancient, scenario_a_operator, shoot_ancient, unstable_seed
    from .heat import norm_history
    from .io import save_trajectory, write_csv
    from .spectra import LinearizedOperator

    cfg = _override(cfg, ancient__amplitude=args.amplitude, ancient__T_back=args.tback, ancient__method=args.method,
                    ancient__h=args.h)
    if args.profile:
        prof = _load_profile(args.profile)
        split = UnstableSplit(LinearizedOperator.from_background(prof.background()))
        sigma = prof.sigma
    else:
        split = UnstableSplit(scenario_a_operator(_grid(cfg), cfg["ancient.beta"], cfg["ancient.omega"]))
        sigma = np.nan
    seed = unstable_seed(split, cfg["ancient.amplitude"])
    build = fixed_point_ancient if cfg["ancient.method"] == "fixed_point" else shoot_ancient
    traj = build(split, seed, cfg["ancient.T_back"], h=cfg["ancient.h"], sigma=sigma)
    out = _out(args)
    save_trajectory(traj, out / "ancient", split.Lam)
    path = write_csv(out / "norm_history.csv", ("t", "l2", "l4", "x_norm", "grad_x_norm"),
                     norm_history(traj.times, traj.fields))
    print(f"beta={split.beta:.6f} fitted L4 rate={traj.l4_rate():.6f} method={traj.method} "
          f"contraction={traj.contraction_ratio:.3g}")
    print(f"wrote {out / 'ancient'} and {path}")


def _synthetic_b(text: str) -> dict:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, _, val = part.partition("=")
        if key not in ("beta", "eps") or not val:
            raise ConfigError(f"--synthetic-b: expected beta=...,eps=..., got {part!r}")
        try:
            out[key] = float(val)
        except ValueError:
            raise ConfigError(f"--synthetic-b: malformed {part!r}") from None
    return out


def cmd_localize(args, cfg):
    from .io import load_trajectory
    from .localize import (TrajectoryPerturbation, certify_abscissa, nonuniqueness_certificate, split_datum,
                           synthetic_perturbation)

    syn = _synthetic_b(args.synthetic_b) if args.synthetic_b else {}
    cfg = _override(cfg, localize__R=args.radius, localize__T=args.horizon, localize__t_min=args.t_min,
                    localize__h=args.h, localize__beta=syn.get("beta"), localize__eps=syn.get("eps"))
    prof = _load_profile(args.profile)
    a, grid = prof.background(), prof.grid
    beta1 = certify_abscissa(a, grid)
    if args.ancient:
        traj, V, Lam = load_trajectory(args.ancient)
        pert = TrajectoryPerturbation(traj, V, Lam)
    else:
        pert = synthetic_perturbation(grid, cfg["localize.eps"], cfg["localize.beta"])
    trunc = split_datum(prof.datum.with_sigma(prof.sigma), cfg["localize.R"])
    rep = nonuniqueness_certificate(a, trunc, pert, beta1, T=cfg["localize.T"], t_min=cfg["localize.t_min"],
                                    h=cfg["localize.h"], tol=cfg["tol.picard"], profile=prof)
    path = _write_json(_out(args) / "certificate.json", rep.to_json())
    print(f"separation exponent {rep.sep_exponent:.6f} (target {rep.target_exponent:.6f}); "
          f"sup ||u_i||_2 = {max(rep.l2_sup):.6f}")
    print(f"wrote {path}")


def cmd_verify(args, cfg):
    from .acceptance import determinism, run_checks

    if args.criteria:
        cfg = _override(cfg, verify__criteria=args.criteria)
    first = run_checks(cfg.criteria(), seed=cfg.seed)
    results = list(first)
    if cfg["verify.repeat"] == 2:
        results.append(determinism(first, run_checks(cfg.criteria(), seed=cfg.seed)))
    for r in results:
        print(r.line(), flush=True)
    _write_json(_out(args) / "verify.json", [r.summary() for r in results])
    failed = [r.number for r in results if not r.passed]
    if failed:
        raise AcceptanceFailure(f"criteria failed: {', '.join(map(str, failed))}")


def cmd_run(args, cfg):
    from .pipeline import run_pipeline

    stages = [s.strip() for s in args.stages.split(",") if s.strip()]
    try:
        from .pipeline import check_stages

        check_stages(stages)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    manifest = run_pipeline(cfg, stages, _out(args))
    for st in manifest.stages:
        print(f"{st.name}: {json.dumps(st.summary, sort_keys=True)}")
    if "verify" in stages and not all(manifest.stages[-1].summary.values()):
        raise AcceptanceFailure("some acceptance criteria failed")


# parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file (must set seed)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one configuration key")
    common.add_argument("--seed", type=int, help="random seed (default 0 without --config)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("-v", "--verbose", action="count", default=0)

    ap = argparse.ArgumentParser(prog="ssns", description="Self-similar Navier-Stokes profiles and their spectra.")
    ap.add_argument("--version", action="version", version=f"ssns {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model", parents=[common], help="scalar model threshold sweep")
    p.add_argument("--n", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--kappa-sweep", help="a:b:step or a comma list")
    p.add_argument("--p", help="comma list of L^p exponents")
    p.add_argument("--t0", type=float)
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("semigroup", parents=[common], help="apply e^{(L-K(a))s} to a seeded probe")
    p.add_argument("--profile", help="profile snapshot (default: pure drift L)")
    p.add_argument("--time", type=float, default=1.0)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--scheme", default="IMEX2", choices=("IMEX1", "IMEX2", "exact"))
    p.add_argument("--samples", type=int, default=10)
    p.set_defaults(func=cmd_semigroup)

    p = sub.add_parser("profile", parents=[common], help="solve for one profile U_sigma")
    p.add_argument("--datum", help="'swirl' or a JSON amplitude file")
    p.add_argument("--sigma", type=float)
    p.add_argument("--name", default="profile", help="output stem")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("continue", parents=[common], help="continue the branch in sigma")
    p.add_argument("--datum")
    p.add_argument("--to", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--from", dest="start", type=float, default=0.0)
    p.set_defaults(func=cmd_continue)

    p = sub.add_parser("spectrum", parents=[common], help="leading eigenvalues of L - K(U_sigma)")
    p.add_argument("--profile", required=True)
    p.add_argument("--count", type=int)
    p.add_argument("--symmetry", choices=("full", "axi", "axisymmetric_only"))
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("track", parents=[common], help="follow the leading eigenvalue along a branch")
    p.add_argument("--branch", required=True, help="JSON-lines file written by 'continue'")
    p.add_argument("--datum")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("ancient", parents=[common], help="ancient solution on the unstable manifold")
    p.add_argument("--profile", help="profile snapshot (default: planted scenario-A operator)")
    p.add_argument("--amplitude", type=float)
    p.add_argument("--tback", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--method", choices=("fixed_point", "shoot"))
    p.set_defaults(func=cmd_ancient)

    p = sub.add_parser("localize", parents=[common], help="two localized solutions and their separation")
    p.add_argument("--profile", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--ancient", help="trajectory directory written by 'ancient'")
    g.add_argument("--synthetic-b", help="beta=...,eps=... for the synthetic perturbation")
    p.add_argument("--radius", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--t-min", type=float)
    p.add_argument("--h", type=float)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("verify", parents=[common], help="run the acceptance checks")
    p.add_argument("--criteria", help="'all' or a comma list of numbers")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("run", parents=[common], help="multi-stage pipeline with a manifest")
    p.add_argument("--stages", default="profile,spectrum",
                   help="comma list, a prefix of model|profile,spectrum,track,ancient,localize,verify")
    p.set_defaults(func=cmd_run)
    return ap


def _exit_code(exc: BaseException) -> int:
    from .pipeline import StageError

    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, AcceptanceFailure):
        return EXIT_ACCEPTANCE
    if isinstance(exc, (ValueError, OSError)):
        return EXIT_CONFIG
    return EXIT_NUMERIC


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        args.func(args, cfg)
    except Exception as exc:  # every failure maps to an exit code
        code = _exit_code(exc)
        print(f"ssns {args.command}: {exc}", file=sys.stderr)
        if args.verbose:
            log.exception("details")
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
