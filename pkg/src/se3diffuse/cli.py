"""Command-line entry points.

    se3-diffuse gen-scenario --out DIR [--seed N]
    se3-diffuse diffuse      --scenario PATH --t F --n N --out PATH [--seed N] [--t-max F]
    se3-diffuse denoise      --scenario PATH --score {oracle,model} --chains N --out PATH
                             [--seed N] [--integrator {exact,quat-trans}] [--params PATH]
    se3-diffuse check        --suite {lie,irreps,igso3,equivariance,all} [--seed N]
    se3-diffuse sample-igso3 --eps F --n N --out PATH [--seed N]

Every command takes ``--seed`` and is bit-deterministic given it; all
output files embed the configuration, seed, and library version in their
provenance header.  Scenario geometry on disk is in scene units; the
commands divide by the configured length unit on load and scale back on
output.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, io as sio
from .diffusion import DemoSet, DiffusionConfig, MixtureScore, forward_diffuse, kernel_log_density
from .fields import assemble_score, build_query_set
from .igso3 import IgParams, angle_cdf_quadrature, igso3_sample_quats
from .lie import Pose, quat_angle, quat_conj, quat_mul
from .pointcloud import PointCloud
from .sampler import run_denoising
from .scenario import (
    Scenario,
    make_toy_scenario,
    read_model_params,
    read_scenario,
    sample_initial_poses,
    write_scenario,
)

__all__ = ["main"]


def _scale_pose(g: Pose, factor: float) -> Pose:
    return Pose(g.p * factor, g.r)


def _scale_cloud(pc: PointCloud, factor: float) -> PointCloud:
    return PointCloud(pc.positions * factor, pc.colors)


def _nondimensionalize(scn: Scenario) -> tuple[PointCloud, PointCloud, list[Pose]]:
    inv_l = 1.0 / scn.config.L
    scene = _scale_cloud(scn.scene, inv_l)
    grasp = _scale_cloud(scn.grasp, inv_l)
    demos = [_scale_pose(g, inv_l) for g in scn.demo_poses]
    return scene, grasp, demos


def cmd_gen_scenario(args: argparse.Namespace) -> int:
    scn = make_toy_scenario(seed=args.seed)
    path = write_scenario(args.out, scn)
    print(f"wrote {path}")
    return 0


def cmd_diffuse(args: argparse.Namespace) -> int:
    scn = read_scenario(args.scenario)
    seed = args.seed if args.seed is not None else scn.seed
    rng = np.random.default_rng(seed)
    scene, grasp, demos = _nondimensionalize(scn)
    t_lo = args.t if args.t is not None else scn.config.t
    cfg_template = dict(r=scn.config.r, L=scn.config.L)
    lines = sio.provenance_lines(seed=seed, scenario=str(args.scenario), t=t_lo,
                                 t_max=args.t_max if args.t_max else t_lo, n=args.n)
    records = []
    for k in range(args.n):
        if args.t_max:
            # documented default: log-uniform diffusion time over [t, t_max]
            u = rng.random()
            t_k = math.exp(math.log(t_lo) + u * (math.log(args.t_max) - math.log(t_lo)))
        else:
            t_k = t_lo
        cfg = DiffusionConfig(t=t_k, **cfg_template)
        g0 = demos[int(rng.choice(len(demos)))]
        g_t, p_de, dg = forward_diffuse(g0, scene, grasp, cfg, rng)
        records.append((t_k, _scale_pose(g_t, scn.config.L), p_de * scn.config.L, dg))
    out = Path(args.out)
    for k, (t_k, g_t, p_de, dg) in enumerate(records):
        lines.append(f"# sample {k}: t = {sio.fmt_float(t_k)}; p_de = "
                     + "[" + ", ".join(sio.fmt_float(v) for v in p_de) + "]"
                     + "; delta_quat = [" + ", ".join(sio.fmt_float(v) for v in dg.r.q) + "]"
                     + "; delta_pos = [" + ", ".join(sio.fmt_float(v) for v in dg.p) + "]")
    sio.write_poses(out, [g for _, g, _, _ in records], lines)
    print(f"wrote {out} ({len(records)} poses)")
    return 0


def _nearest_demo_distance(g: Pose, demos: list[Pose]) -> tuple[float, float]:
    best_rot, best_tr = math.inf, math.inf
    for g0 in demos:
        rot = float(quat_angle(quat_mul(quat_conj(g0.r.q), g.r.q)))
        tr = float(np.linalg.norm(g.p - g0.p))
        if rot + tr < best_rot + best_tr:
            best_rot, best_tr = rot, tr
    return best_rot, best_tr


def cmd_denoise(args: argparse.Namespace) -> int:
    scn = read_scenario(args.scenario)
    seed = args.seed if args.seed is not None else scn.seed
    scene, grasp, demos = _nondimensionalize(scn)
    cfg = DiffusionConfig(t=scn.config.t, r=scn.config.r, L=scn.config.L)
    if args.score == "oracle":
        score_fn = MixtureScore(DemoSet(tuple((g, scene, grasp) for g in demos)), cfg)
    else:
        model = scn.model
        if args.params:
            model = read_model_params(args.params)
        if model is None:
            print("error: --score model requires model parameters "
                  "(scenario model_params or --params)", file=sys.stderr)
            return 2
        query = build_query_set(grasp, model)

        def score_fn(g: Pose, t: float):
            return assemble_score(g, scene, grasp, t, 1.0, query, model)

    rng = np.random.default_rng(seed)
    inits = sample_initial_poses(scn, rng, args.chains)
    inits = [_scale_pose(g, 1.0 / scn.config.L) for g in inits]
    results = run_denoising(score_fn, inits, scn.schedule, rng, args.chains,
                            integrator=args.integrator, record="final")
    header = sio.provenance_lines(seed=seed, scenario=str(args.scenario),
                                  score=args.score, chains=args.chains,
                                  integrator=args.integrator)
    finals = []
    for res in results:
        rot, tr = _nearest_demo_distance(res.final, demos)
        t_final = float(scn.schedule.t[-1])
        cfg_final = DiffusionConfig(t=t_final, r=scn.config.r, L=scn.config.L)
        logdens = [kernel_log_density(res.final, g0, scene, grasp, cfg_final) for g0 in demos]
        m = max(logdens)
        mix = m + math.log(sum(math.exp(v - m) for v in logdens) / len(logdens))
        status = f"failed at step {res.failed_step}: {res.error}" if res.failed else "ok"
        header.append(
            f"# chain {res.index}: status = {status}; rot_to_demo_rad = {sio.fmt_float(rot)}; "
            f"trans_to_demo = {sio.fmt_float(tr * scn.config.L)}; "
            f"log_mixture_density = {sio.fmt_float(mix)}")
        finals.append(_scale_pose(res.final, scn.config.L))
    sio.write_poses(args.out, finals, header)
    print(f"wrote {args.out} ({len(finals)} chains)")
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    from .checks import run_suite

    results = run_suite(args.suite, seed=args.seed or 0, perturb_adjoint=args.perturb_adjoint)
    report = {
        "suite": args.suite,
        "checks": [
            {"name": r.name, "max_error": r.max_error, "tolerance": r.tolerance,
             "pass": r.passed}
            for r in results
        ],
        "pass": all(r.passed for r in results),
    }
    print(json.dumps(report, indent=2))
    return 0 if report["pass"] else 1


def cmd_sample_igso3(args: argparse.Namespace) -> int:
    if args.eps <= 0.0:
        print("error: --eps must be positive", file=sys.stderr)
        return 2
    seed = args.seed if args.seed is not None else 0
    rng = np.random.default_rng(seed)
    params = IgParams(eps=args.eps)
    quats = igso3_sample_quats(params, rng, args.n)
    angles = np.sort(quat_angle(quats))
    grid, cdf = angle_cdf_quadrature(params)
    cdf_at = np.interp(angles, grid, cdf)
    n = angles.size
    ks = float(np.max(np.maximum(np.arange(1, n + 1) / n - cdf_at,
                                 cdf_at - np.arange(n) / n)))
    hist, edges = np.histogram(angles, bins=24, range=(0.0, math.pi))
    header = sio.provenance_lines(seed=seed, eps=args.eps, n=args.n)
    header.append(f"# ks_statistic = {sio.fmt_float(ks)}")
    header.append("# angle_histogram_counts = [" + ", ".join(str(int(c)) for c in hist) + "]")
    header.append("# angle_histogram_edges = ["
                  + ", ".join(sio.fmt_float(e) for e in edges) + "]")
    lines = header + ["quat: [" + ", ".join(sio.fmt_float(v) for v in q) + "]" for q in quats]
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {args.out} (n={args.n}, KS={ks:.5f})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="se3-diffuse",
                                     description="Bi-equivariant SE(3) diffusion toolkit")
    parser.add_argument("--version", action="version", version=f"se3-diffuse {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scenario", help="write the bundled toy scenario")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_gen_scenario)

    p = sub.add_parser("diffuse", help="forward-diffuse demo poses")
    p.add_argument("--scenario", required=True)
    p.add_argument("--t", type=float, default=None, help="diffusion time (default: scenario)")
    p.add_argument("--t-max", type=float, default=None,
                   help="if set, sample t log-uniformly in [t, t-max] per sample")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_diffuse)

    p = sub.add_parser("denoise", help="run annealed Langevin denoising")
    p.add_argument("--scenario", required=True)
    p.add_argument("--score", choices=("oracle", "model"), default="oracle")
    p.add_argument("--chains", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--integrator", choices=("exact", "quat-trans"), default="exact")
    p.add_argument("--params", default=None, help="score-model parameter file")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("check", help="run invariant suites")
    p.add_argument("--suite", choices=("lie", "irreps", "igso3", "equivariance", "all"),
                   default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--perturb-adjoint", action="store_true",
                   help="negative control: inject a perturbed adjoint (suite must fail)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("sample-igso3", help="sample the rotational kernel")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_sample_igso3)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
