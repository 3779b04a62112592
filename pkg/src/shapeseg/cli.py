"""Command-line front door.

Subcommands: synth, build-model, segment, energy, reinit. Exit codes: 0 on
success, 1 on usage errors, 2 on data/format errors, 3 on numerical aborts.
Human-readable summaries go to stdout, diagnostics to stderr, machine output
only to files.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import contours, descent, energy, field, io, shape_prior, synth

__version__ = "0.1.0"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="shapeseg", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic scene")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-image", required=True)
    p.add_argument("--out-truth", required=True)

    p = sub.add_parser("build-model", help="build a PCA shape model from masks")
    p.add_argument("--masks", nargs="+", required=True)
    p.add_argument("--modes", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("segment", help="run the descent on an image")
    p.add_argument("--image", required=True)
    p.add_argument("--model")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("energy", help="evaluate the energy of a state")
    p.add_argument("--image", required=True)
    p.add_argument("--phi", required=True)
    p.add_argument("--model")
    p.add_argument("--lambda", dest="lam", type=float, nargs="*")
    p.add_argument("--pose", type=float, nargs=4,
                   metavar=("TAU", "THETA", "TX", "TY"))
    p.add_argument("--config", required=True)

    p = sub.add_parser("reinit", help="re-initialize a level set toward an SDF")
    p.add_argument("--phi", required=True)
    p.add_argument("--iters", type=int, required=True)
    p.add_argument("--dt", type=float, default=0.5)
    p.add_argument("--out", required=True)
    return parser


def _load_config(path):
    return descent.config_from_kv(Path(path).read_text())


def _cmd_synth(args) -> int:
    spec = synth.scene_from_kv(Path(args.spec).read_text())
    image, truth = synth.render(spec)
    io.write_pgm(image, args.out_image)
    io.write_pgm(np.where(truth, 255.0, 0.0), args.out_truth)
    print(f"rendered {spec.width}x{spec.height} scene to {args.out_image}")
    return 0


def _cmd_build_model(args) -> int:
    masks = [io.read_pgm(p) > 127 for p in args.masks]
    sdfs = [shape_prior.sdf_from_mask(m) for m in masks]
    model = shape_prior.build_shape_model(sdfs, args.modes)
    shape_prior.write_smdl(model, args.out, n_training=len(masks))
    share = model.variances / max(model.variances.sum(), 1e-300)
    print(f"model: {len(masks)} shapes, {model.p} modes, "
          f"first-mode variance share {share[0]:.3f}")
    return 0


def _cmd_segment(args) -> int:
    image = io.read_pgm(args.image)
    model = shape_prior.read_smdl(args.model) if args.model else None
    w, cfg = _load_config(args.config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    state = descent.segment(image, model, w, cfg)
    field.write_sfld(state.phi, out / "phi.sfld")
    cs = contours.extract_contours(state.phi)
    (out / "contours.csv").write_text(io.contours_to_csv(cs))
    io.write_pgm(io.overlay(image, cs), out / "overlay.pgm")
    (out / "trace.csv").write_text(io.trace_to_csv(state.trace, cfg.record_every))
    (out / "config.txt").write_text(descent.config_to_kv(w, cfg))
    total = state.trace[-1].total if state.trace else float("nan")
    print(f"segment: {state.iter} iterations, {len(cs)} contours, "
          f"final energy {total:.6g}")
    return 0


def _cmd_energy(args) -> int:
    image = io.read_pgm(args.image)
    phi = field.read_sfld(args.phi)
    if phi.shape != image.shape:
        raise ValueError(f"phi shape {phi.shape} does not match image {image.shape}")
    w, _cfg = _load_config(args.config)
    g = energy.edge_indicator(image, w.eta, w.sigma)
    if args.model:
        model = shape_prior.read_smdl(args.model)
        lam = np.asarray(args.lam if args.lam else np.zeros(model.p))
        pose = shape_prior.Pose(*args.pose) if args.pose else shape_prior.Pose()
        pw = descent.prior_field(model, lam, pose)
        wgt = energy.heaviside_eps(-pw, w.eps)
        i_in = descent.solve_smooth_approximant(image, wgt, w.mu, 100,
                                                np.full_like(image, image.mean()))
        i_out = descent.solve_smooth_approximant(image, 1 - wgt, w.mu, 100,
                                                 np.full_like(image, image.mean()))
        bd = energy.total_energy(phi, image, g, pw, i_in, i_out, w)
    else:
        bd = energy.total_energy(phi, image, g, None, None, None, w)
    print(f"f1={bd.f1:.17g} f2={bd.f2:.17g} f3={bd.f3:.17g} "
          f"f4={bd.f4:.17g} total={bd.total:.17g}")
    return 0


def _cmd_reinit(args) -> int:
    phi = field.read_sfld(args.phi)
    out = descent.reinitialize(phi, args.iters, args.dt)
    field.write_sfld(out, args.out)
    print(f"reinit: {args.iters} iterations written to {args.out}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "build-model": _cmd_build_model,
    "segment": _cmd_segment,
    "energy": _cmd_energy,
    "reinit": _cmd_reinit,
}


def run_cli(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # --version / --help
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except descent.NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
