"""Command-line pipelines: generate -> build -> project -> analyze.

Every stage is file-mediated and writes a provenance JSON echoing its
full configuration, so any output directory can be reproduced
bit-identically by re-running the recorded command. Validation problems
exit with code 2, eigensolver failures with code 3.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bundle import load_bundle, save_bundle
from .embeddings import diffusion_maps, mode_morph, pca, time_trajectory_export
from .errors import ConvergenceFailure, SimspectraError
from .fp import assemble_fp
from .lb import assemble_lb
from .mesh import load_mesh
from .operators import save_operator
from .spectral import (
    decay_report,
    decompose,
    load_basis,
    load_coefficients,
    project_bundle,
    reconstruct,
    save_basis,
    save_coefficients,
)
from .synthetic import GeneratorSpec, generate

FRAME_DTYPE = "<f8"


def _write_provenance(out_dir: Path, command: str, config: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {"command": command, "version": __version__, "config": config}
    (out_dir / "provenance.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _config(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _parse_param(text: str):
    key, _, raw = text.partition("=")
    if not key or not raw:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    for cast in (int, float):
        try:
            return key, cast(raw)
        except ValueError:
            pass
    if raw.lower() in ("true", "false"):
        return key, raw.lower() == "true"
    return key, raw


def cmd_generate(args) -> int:
    params = dict(args.param or [])
    spec = GeneratorSpec(args.kind, seed=args.seed, m=args.m, tau=args.tau, params=params)
    result = generate(spec)
    out = Path(args.out)
    if args.kind == "latent_ito":
        bundle, record = result
        out.mkdir(parents=True, exist_ok=True)
        with (out / "latent.csv").open("w") as fh:
            dims = record.latent.shape[3]
            cols = ",".join(f"latent_{i}" for i in range(dims))
            fh.write(f"sim,step,vertex,{cols}\n")
            m, tau, n, _ = record.latent.shape
            for s in range(m):
                for t in range(tau):
                    for k in range(n):
                        vals = ",".join(repr(float(v)) for v in record.latent[s, t, k])
                        fh.write(f"{s},{t},{k},{vals}\n")
        with (out / "latent_std.csv").open("w") as fh:
            fh.write("step,marginal_std\n")
            for t, v in enumerate(record.marginal_std):
                fh.write(f"{t},{float(v)!r}\n")
    else:
        bundle = result
    save_bundle(bundle, out)
    _write_provenance(out, "generate", _config(args))
    print(f"generated {args.kind}: m={bundle.n_sims} tau={bundle.n_steps} "
          f"n_vertices={bundle.mesh.n_vertices} -> {out}")
    return 0


def _load_mesh_arg(args):
    if getattr(args, "mesh", None):
        return load_mesh(args.mesh)
    bundle = load_bundle(args.bundle)
    return bundle.mesh


def cmd_build_lb(args) -> int:
    mesh = _load_mesh_arg(args)
    op = assemble_lb(mesh, h=args.h, rho=args.rho, weighting=args.weighting, threads=args.threads)
    basis = decompose(op, args.p, solver=args.solver)
    out = Path(args.out)
    save_operator(op, out)
    save_basis(basis, out)
    _write_provenance(out, "build-lb", _config(args))
    print(f"LB operator on {mesh.n_vertices} vertices: h={op.params['h']:g} "
          f"rho={op.params['rho']:g}; {args.p} eigenpairs -> {out}")
    return 0


def cmd_build_fp(args) -> int:
    bundle = load_bundle(args.bundle)
    reference = args.reference if args.reference == "mean" else int(args.reference)
    epsilon = args.epsilon if args.epsilon == "auto" else float(args.epsilon)
    pair = assemble_fp(
        bundle, args.step, epsilon=epsilon, variant=args.variant,
        reference=reference, knn=args.knn,
    )
    basis = decompose(pair, args.p, solver=args.solver)
    out = Path(args.out)
    save_operator(pair.w_sym, out, d_d=pair.d_d)
    save_basis(basis, out)
    _write_provenance(out, "build-fp", _config(args))
    print(f"FP operator at step {args.step}: epsilon={pair.w_sym.params['epsilon']:g}; "
          f"{args.p} eigenpairs -> {out}")
    return 0


def cmd_project(args) -> int:
    bundle = load_bundle(args.bundle)
    basis = load_basis(args.basis)
    channels: list = list(args.channels.split(","))
    if args.dnd:
        a, b = (int(x) for x in args.dnd.split(","))
        channels.append(("displacement_norm_diff", a, b))
    coeffs = project_bundle(bundle, basis, channels=channels, p=args.p)
    out = Path(args.out)
    save_coefficients(coeffs, out)
    _write_provenance(out.parent, "project", _config(args))
    # round-trip fidelity summary at the stored truncation
    worst = 0.0
    for ci, ch in enumerate(coeffs.channels):
        for s in range(bundle.n_sims):
            for t in range(bundle.n_steps):
                alpha = coeffs.alpha[s, t, ci]
                rec = reconstruct(basis, alpha, p=coeffs.p)
                if ch in ("x", "y", "z"):
                    orig = bundle.frames[s, t, :, "xyz".index(ch)]
                    worst = max(worst, float(np.abs(rec.values - orig).max()))
    print(f"projected {coeffs.n_sims}x{coeffs.n_steps}x{len(coeffs.channels)} "
          f"functions onto p={coeffs.p}; max reconstruction error at this "
          f"truncation: {worst:.3e} -> {out}")
    return 0


def cmd_reconstruct(args) -> int:
    basis = load_basis(args.basis)
    coeffs = load_coefficients(args.coeffs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    p = args.p or coeffs.p
    frame = np.empty((basis.n, 3))
    for ci, ch in enumerate(("x", "y", "z")):
        alpha = coeffs.alpha[args.sim, args.step, coeffs.channels.index(ch)]
        frame[:, ci] = reconstruct(basis, alpha, p=min(p, coeffs.p)).values
    frame.astype(FRAME_DTYPE).tofile(out / f"recon_sim{args.sim}_step{args.step}.f64")
    _write_provenance(out, "reconstruct", _config(args))
    print(f"reconstructed sim {args.sim} step {args.step} with p={p} -> {out}")
    return 0


def cmd_analyze_decay(args) -> int:
    coeffs = load_coefficients(args.coeffs)
    report = decay_report(coeffs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "decay.csv").open("w") as fh:
        fh.write("channel,j,max_abs,variance\n")
        for ch, j, mx, var in report.rows():
            fh.write(f"{ch},{j},{float(mx)!r},{float(var)!r}\n")
    summary = {
        "threshold_index": report.threshold_index,
        "energy_target": 0.99,
        "p": coeffs.p,
        "channels": list(coeffs.channels),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    _write_provenance(out, "analyze-decay", _config(args))
    print(f"decay tables for p={coeffs.p}; suggested truncation p*="
          f"{report.threshold_index} (99% energy) -> {out}")
    return 0


def _feature_matrix(args):
    coeffs = load_coefficients(args.coeffs)
    return coeffs, coeffs.feature_matrix(p=args.p)


def cmd_embed_dmaps(args) -> int:
    coeffs, data = _feature_matrix(args)
    epsilon = args.epsilon if args.epsilon == "auto" else float(args.epsilon)
    emb = diffusion_maps(data, dim=args.dim, kernel_epsilon=epsilon,
                         alpha=args.alpha, items=coeffs.items())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "embedding.csv").open("w") as fh:
        cols = ",".join(f"e{i}" for i in range(emb.points.shape[1]))
        fh.write(f"sim,step,{cols}\n")
        for (s, t), row in zip(emb.items, emb.points):
            vals = ",".join(repr(float(v)) for v in row)
            fh.write(f"{s},{t},{vals}\n")
    _write_provenance(out, "embed-dmaps", _config(args))
    print(f"diffusion-maps embedding {emb.points.shape} "
          f"(epsilon={emb.params['epsilon']:g}) -> {out}")
    return 0


def cmd_embed_pca(args) -> int:
    coeffs, data = _feature_matrix(args)
    result = pca(data, dim=args.dim)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "scores.csv").open("w") as fh:
        cols = ",".join(f"pc{i}" for i in range(min(args.dim, result.scores.shape[1])))
        fh.write(f"sim,step,{cols}\n")
        for (s, t), row in zip(coeffs.items(), result.scores[:, : args.dim]):
            vals = ",".join(repr(float(v)) for v in row)
            fh.write(f"{s},{t},{vals}\n")
    with (out / "explained_variance.csv").open("w") as fh:
        fh.write("component,ratio\n")
        for i, r in enumerate(result.explained_variance_ratio):
            fh.write(f"{i},{float(r)!r}\n")
    _write_provenance(out, "embed-pca", _config(args))
    print(f"PCA scores {result.scores[:, :args.dim].shape} -> {out}")
    return 0


def cmd_trajectory(args) -> int:
    coeffs = load_coefficients(args.coeffs)
    rows = time_trajectory_export(coeffs, args.component)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w") as fh:
        fh.write("sim,step,alpha_x,alpha_y,alpha_z,step_color\n")
        for s, t, ax, ay, az, col in rows:
            fh.write(f"{s},{t},{ax!r},{ay!r},{az!r},{col!r}\n")
    _write_provenance(out.parent, "trajectory", _config(args))
    print(f"trajectory table for component {args.component}: {len(rows)} rows -> {out}")
    return 0


def cmd_morph(args) -> int:
    basis = load_basis(args.basis)
    coeffs = load_coefficients(args.coeffs)
    alphas = np.stack(
        [coeffs.alpha[args.sim, args.step, coeffs.channels.index(c)] for c in ("x", "y", "z")],
        axis=1,
    )
    sweep = [
        [float(x) for x in triple.split(",")]
        for triple in args.sweep.split(";")
        if triple.strip()
    ]
    frames = mode_morph(basis, alphas, args.component, sweep)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        frame.astype(FRAME_DTYPE).tofile(out / f"morph_{i:03d}.f64")
    _write_provenance(out, "morph", _config(args))
    print(f"{len(frames)} morph frames along component {args.component} -> {out}")
    return 0


def cmd_validate(args) -> int:
    if args.bundle:
        bundle = load_bundle(args.bundle)
        mesh = bundle.mesh
        print(f"bundle OK: m={bundle.n_sims} tau={bundle.n_steps} "
              f"n_vertices={mesh.n_vertices} n_faces={mesh.n_faces} "
              f"labels={sorted(bundle.labels)}")
    else:
        mesh = load_mesh(args.mesh)
        print(f"mesh OK: n_vertices={mesh.n_vertices} n_faces={mesh.n_faces} "
              f"area={mesh.vertex_area.sum():g} "
              f"mean_edge={mesh.mean_edge_length():g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="simspectra",
        description="Invariant-operator spectral analysis of simulation bundles.",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="subcommand", required=True)

    g = sub.add_parser("generate", help="write a synthetic bundle to disk")
    g.add_argument("--kind", required=True,
                   choices=["cylinder_rigid", "isometric_bend", "noisy_isometry", "latent_ito"])
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--m", type=int, default=10)
    g.add_argument("--tau", type=int, default=1)
    g.add_argument("--param", action="append", type=_parse_param, metavar="KEY=VALUE",
                   help="generator-specific parameter (repeatable)")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    b = sub.add_parser("build-lb", help="assemble the mesh Laplace operator and its basis")
    src = b.add_mutually_exclusive_group(required=True)
    src.add_argument("--mesh")
    src.add_argument("--bundle")
    b.add_argument("--h", type=float, default=None,
                   help="kernel bandwidth; default (2 * mean edge length)^2")
    b.add_argument("--rho", type=float, default=3.0,
                   help="truncation: max graph distance is rho * sqrt(h)")
    b.add_argument("--weighting", choices=["symmetric", "eq31"], default="symmetric")
    b.add_argument("--p", type=int, default=20)
    b.add_argument("--solver", choices=["auto", "dense", "lanczos"], default="auto")
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_build_lb)

    f = sub.add_parser("build-fp", help="assemble the Fokker-Planck operator and its basis")
    f.add_argument("--bundle", required=True)
    f.add_argument("--step", type=int, default=0)
    f.add_argument("--epsilon", default="auto",
                   help="kernel bandwidth; default median of nonzero squared distances")
    f.add_argument("--variant", choices=["sum_of_inv", "inv_of_sum"], default="sum_of_inv")
    f.add_argument("--reference", default="0",
                   help="simulation index for reference positions, or 'mean'")
    f.add_argument("--knn", type=int, default=None)
    f.add_argument("--p", type=int, default=20)
    f.add_argument("--solver", choices=["auto", "dense", "lanczos"], default="auto")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_build_fp)

    p = sub.add_parser("project", help="project bundle channels onto a basis")
    p.add_argument("--bundle", required=True)
    p.add_argument("--basis", required=True)
    p.add_argument("--channels", default="x,y,z")
    p.add_argument("--dnd", default=None, metavar="A,B",
                   help="add the displacement-norm-difference channel between steps A and B")
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_project)

    r = sub.add_parser("reconstruct", help="rebuild one frame from stored coefficients")
    r.add_argument("--basis", required=True)
    r.add_argument("--coeffs", required=True)
    r.add_argument("--sim", type=int, default=0)
    r.add_argument("--step", type=int, default=0)
    r.add_argument("--p", type=int, default=None)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_reconstruct)

    d = sub.add_parser("analyze-decay", help="coefficient magnitude/variance tables")
    d.add_argument("--coeffs", required=True)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_analyze_decay)

    e = sub.add_parser("embed-dmaps", help="diffusion-maps embedding of coefficient rows")
    e.add_argument("--coeffs", required=True)
    e.add_argument("--p", type=int, default=None, help="use only the first p coefficients")
    e.add_argument("--dim", type=int, default=3)
    e.add_argument("--epsilon", default="auto")
    e.add_argument("--alpha", type=float, default=1.0)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_embed_dmaps)

    q = sub.add_parser("embed-pca", help="PCA baseline embedding of coefficient rows")
    q.add_argument("--coeffs", required=True)
    q.add_argument("--p", type=int, default=None)
    q.add_argument("--dim", type=int, default=3)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_embed_pca)

    t = sub.add_parser("trajectory", help="per-step coefficient triples for one component")
    t.add_argument("--coeffs", required=True)
    t.add_argument("--component", type=int, default=1)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_trajectory)

    m = sub.add_parser("morph", help="mode-isolation reconstruction sweep")
    m.add_argument("--basis", required=True)
    m.add_argument("--coeffs", required=True)
    m.add_argument("--sim", type=int, default=0)
    m.add_argument("--step", type=int, default=0)
    m.add_argument("--component", type=int, required=True)
    m.add_argument("--sweep", required=True, metavar="X,Y,Z;X,Y,Z;...")
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_morph)

    v = sub.add_parser("validate", help="load and validate a mesh or bundle")
    vsrc = v.add_mutually_exclusive_group(required=True)
    vsrc.add_argument("--mesh")
    vsrc.add_argument("--bundle")
    v.set_defaults(func=cmd_validate)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (SimspectraError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
