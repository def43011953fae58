"""Command-line driver: ``tetbiot {eval,hill,ring,scale}``.

Exit status: 0 success, 1 usage error, 2 I/O or parse error,
3 validation error.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path

import numpy as np

from .mesh import MeshFormatError, MeshParseError, MeshValidationError, load_tetgen
from .quadrature import build_fan
from .solver import EvalRequest, evaluate

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_VALIDATION = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _fmt(x) -> str:
    return repr(float(x))


def _emit(rows, header, out):
    """Write CSV to ``out`` (a path) or stdout."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    if out is None or str(out) == "-":
        sys.stdout.write(buf.getvalue())
    else:
        Path(out).write_text(buf.getvalue())


def _say(args, text):
    # summaries go to stderr when the CSV itself is on stdout
    print(text, file=sys.stderr if args.out in (None, "-") else sys.stdout)


def _load_mesh(args):
    node = Path(args.mesh)
    if node.suffix != ".node":
        node = node.with_suffix(".node")
    ele = Path(args.ele) if args.ele else node.with_suffix(".ele")
    return load_tetgen(node, ele, args.vorticity)


def _fan_orders(args):
    n_theta = args.ntheta if args.ntheta is not None else args.nphi
    return args.nphi, n_theta


# ---------------------------------------------------------------- commands

def cmd_eval(args):
    mesh = _load_mesh(args)
    fan = build_fan(*_fan_orders(args))
    idx = np.arange(mesh.n_nodes)
    res = evaluate(EvalRequest(mesh, mesh.nodes, fan, self_nodes=idx, workers=args.workers,
                               deterministic=args.deterministic))
    rows = ([int(i), *map(_fmt, mesh.nodes[i]), *map(_fmt, res.velocities[i])] for i in idx)
    _emit(rows, ["node", "x", "y", "z", "vx", "vy", "vz"], args.out)
    _say(args, f"points={mesh.n_nodes} tets={mesh.n_tets} fan={fan.size} "
               f"seconds={res.seconds:.3f} workers={args.workers}")


def cmd_hill(args):
    from .reference import HillVortex
    from .studies import hill_mesh, run_hill

    hill = HillVortex(args.A, args.radius)
    if args.mesh:
        base = _load_mesh(args)
        if args.vorticity is None:
            x, y = base.nodes[:, 0], base.nodes[:, 1]
            base = base.with_vorticity(hill.A * np.stack([-y, x, np.zeros_like(x)], axis=1))
        mesh = base
    else:
        mesh = hill_mesh(hill, args.cells)
    rows = []
    for n in args.points:
        for q in args.nquad:
            r = run_hill(n, q, seed=args.seed, workers=args.workers, mesh=mesh, hill=hill,
                         deterministic=args.deterministic, zero_vorticity=args.zero_vorticity)
            rows.append([n, q, args.workers, _fmt(r.stats.rms), f"{r.stats.seconds:.6f}"])
            _say(args, f"hill n_points={n} n_quad={q}x{q} eps={r.stats.rms:.5f} "
                       f"axial_offset={r.axial_offset:.3e} seconds={r.stats.seconds:.3f}")
    _emit(rows, ["n_points", "n_quad", "workers", "eps", "seconds"], args.out)


def cmd_ring(args):
    from .reference import GaussianRing, ring_velocity_table
    from .studies import run_ring_convergence

    ring = GaussianRing(args.ring_radius, args.sigma, args.gamma)
    if args.table_out:
        ring_velocity_table(ring).to_csv(args.table_out)
    st = run_ring_convergence(args.presets, args.nquad, ring=ring, workers=args.workers,
                              eval_stations=args.stations, deterministic=args.deterministic)
    _emit([[name, _fmt(h), q, _fmt(e)] for name, h, q, e in st.rows],
          ["resolution", "h", "n_quad", "eps"], args.out)
    if st.slope is not None:
        _say(args, f"fit eps = {st.prefactor:.4g} * h^{st.slope:.3f} at n_quad={max(args.nquad)}")
    else:
        _say(args, "slope fit skipped (needs two or more resolutions)")


def cmd_scale(args):
    from .studies import run_scaling

    cores = os.cpu_count() or 1
    if max(args.workers) > cores and not args.oversubscribe:
        raise ValueError(f"worker count {max(args.workers)} exceeds the {cores} available cores "
                         "(pass --oversubscribe to run anyway)")
    st = run_scaling(args.workers, n_points=args.points, n_quad=args.nquad, seed=args.seed,
                     deterministic=args.deterministic, repeats=args.repeats)
    _emit([[w, f"{t:.6f}"] for w, t in st.rows], ["workers", "seconds"], args.out)
    if st.exponent is not None:
        _say(args, f"fit T ~ workers^{st.exponent:.3f}; velocities identical: {st.identical}")
    else:
        _say(args, "exponent fit skipped (single worker count)")


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tetbiot", description="Biot-Savart velocities on tetrahedral meshes by ray tracing.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, multi=False):
        if multi:
            sp.add_argument("--workers", type=_positive, nargs="+", default=[1, 2, 4],
                            help="worker counts to time")
        else:
            sp.add_argument("--workers", type=_positive, default=1, help="worker threads")
        sp.add_argument("--seed", type=int, default=0, help="random seed for sampled points")
        sp.add_argument("--out", default=None, help="output CSV path (default stdout)")
        sp.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True,
                        help="fixed reduction order, bit-identical for any worker count")

    def mesh_args(sp, required):
        sp.add_argument("--mesh", required=required, help="TetGen .node file (or stem)")
        sp.add_argument("--ele", help="TetGen .ele file (default: beside --mesh)")
        sp.add_argument("--vorticity", help="CSV node,wx,wy,wz (overrides .node attributes)")

    e = sub.add_parser("eval", help="velocity at every mesh node")
    mesh_args(e, True)
    e.add_argument("--nphi", type=_positive, default=16)
    e.add_argument("--ntheta", type=_positive, default=None, help="default: same as --nphi")
    common(e)
    e.set_defaults(func=cmd_eval)

    h = sub.add_parser("hill", help="Hill's spherical vortex accuracy run")
    mesh_args(h, False)
    h.add_argument("--points", type=_positive, nargs="+", default=[1000])
    h.add_argument("--nquad", type=_positive, nargs="+", default=[4])
    h.add_argument("--cells", type=_positive, default=15, help="lattice cells per axis of the sphere mesh")
    h.add_argument("--A", type=float, default=1.0)
    h.add_argument("--radius", type=float, default=1.0)
    h.add_argument("--zero-vorticity", action="store_true")
    common(h)
    h.set_defaults(func=cmd_hill)

    r = sub.add_parser("ring", help="Gaussian vortex ring convergence study")
    r.add_argument("--presets", nargs="+", default=["low", "medium", "high"],
                   choices=["low", "medium", "high"])
    r.add_argument("--nquad", type=_positive, nargs="+", default=[64])
    r.add_argument("--stations", type=_positive, default=1, help="azimuthal stations scored")
    r.add_argument("--ring-radius", type=float, default=1.0)
    r.add_argument("--sigma", type=float, default=0.2)
    r.add_argument("--gamma", type=float, default=1.0)
    r.add_argument("--table-out", help="also write the reference table as CSV r,z,ur,uz")
    common(r)
    r.set_defaults(func=cmd_ring)

    s = sub.add_parser("scale", help="wall time against worker count")
    s.add_argument("--points", type=_positive, default=500)
    s.add_argument("--nquad", type=_positive, default=8)
    s.add_argument("--repeats", type=_positive, default=1)
    s.add_argument("--oversubscribe", action="store_true")
    common(s, multi=True)
    s.set_defaults(func=cmd_scale)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (OSError, MeshParseError, MeshFormatError) as exc:
        print(f"tetbiot: {exc}", file=sys.stderr)
        return EXIT_IO
    except (MeshValidationError, ValueError) as exc:
        print(f"tetbiot: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
