"""Command-line interface.

Exit codes: 0 ok, 2 invalid input, 3 resource limit, 4 domain error,
5 a computed result contradicts a proven property.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import io
from .cone import THRESHOLD, ConeError, obtuse_triple_search, paper_inequality_check, random_admissible_pairs
from .critical import critical_scan
from .dc import PieceOverflow, load_dc, morse_sard_check
from .field import GridSpec, MemoryCapExceeded, dump_field, load_field, sample_field
from .levelset import extract_level_set, manifold_check, mesh_to_json, radius_sweep, write_obj
from .norms import NormError, parse_norm
from .reach import ReachError, estimate_reach
from .scene import SceneError, load_scene

EXIT_OK, EXIT_INPUT, EXIT_RESOURCE, EXIT_DOMAIN, EXIT_FALSIFIED = 0, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


# --- helpers -----------------------------------------------------------------

def _field(args):
    """Load a dumped field or sample one from --scene/--norm/--bbox/--res."""
    if getattr(args, "field", None):
        try:
            return load_field(args.field)
        except (OSError, ValueError, KeyError) as exc:
            raise CliError(EXIT_INPUT, f"cannot read field: {exc}")
    if not args.scene or not args.bbox:
        raise CliError(EXIT_INPUT, "give --field, or --scene with --bbox")
    try:
        F = load_scene(args.scene)
        dim = F.dim
        norm = parse_norm(args.norm, dim)
        if len(args.bbox) != 2 * dim:
            raise CliError(EXIT_INPUT, f"--bbox needs {2 * dim} numbers for a {dim}-D scene")
        grid = GridSpec.from_bbox(args.bbox[:dim], args.bbox[dim:], args.res)
    except SceneError as exc:
        raise CliError(EXIT_INPUT, f"scene error: {exc}")
    except MemoryCapExceeded as exc:
        raise CliError(EXIT_RESOURCE, str(exc))
    except (OSError, NormError, ValueError) as exc:
        raise CliError(EXIT_INPUT, str(exc))
    return sample_field(F, norm, grid, threads=args.threads)


def _value_range(field, lo, hi):
    vmin, vmax = float(field.values.min()), float(field.values.max())
    if not (vmin < lo <= hi < vmax):
        raise CliError(EXIT_DOMAIN, f"radii [{lo}, {hi}] are outside the field values ({vmin}, {vmax})")


def _crit(field, args):
    return critical_scan(field, eta=args.eta, delta=args.delta, seed=args.seed,
                         criterion=args.criterion, threads=args.threads)


# --- commands ----------------------------------------------------------------

def cmd_field(args):
    if not args.out:
        raise CliError(EXIT_INPUT, "field needs --out for the binary dump")
    field = _field(args)
    dump_field(field, args.out)
    summary = {
        "out": args.out, "dims": list(field.grid.dims), "h": field.h, "norm": field.norm.spec(),
        "min": float(field.values.min()), "max": float(field.values.max()),
        "lipschitz_excess": field.lipschitz_violation(),
    }
    io.write_json(summary, "-")
    return EXIT_OK


def cmd_crit(args):
    field = _field(args)
    try:
        rep = _crit(field, args)
    except ValueError as exc:
        raise CliError(EXIT_INPUT, str(exc))
    io.write_json(rep.to_dict(), args.out)
    return EXIT_FALSIFIED if len(rep.stationary_violations) else EXIT_OK


def cmd_levelset(args):
    field = _field(args)
    _value_range(field, args.r, args.r)
    mesh = extract_level_set(field, args.r)
    verdict = manifold_check(mesh)
    doc = mesh_to_json(mesh)
    doc["verdict"] = verdict.status
    doc["defects"] = len(verdict.defects)
    doc["length"] = float(mesh.length()) if field.grid.dim == 2 else None
    if args.out and args.out.endswith(".obj"):
        write_obj(mesh, args.out)
        doc.pop("polylines")
        io.write_json(doc, "-")
    else:
        io.write_json(doc, args.out)
    return EXIT_OK


def cmd_sweep(args):
    field = _field(args)
    _value_range(field, args.rmin, args.rmax)
    try:
        rep = _crit(field, args)
    except ValueError as exc:
        raise CliError(EXIT_INPUT, str(exc))
    sweep = radius_sweep(field, args.rmin, args.rmax, args.count, rep.critical_values, threads=args.threads)
    links = []
    for e in sweep.entries:
        if not e.manifold:
            cv = rep.critical_values
            near = float(cv[np.argmin(np.abs(cv - e.r))]) if len(cv) else None
            links.append({"r": e.r, "nearest_critical_value": near, "distance": e.critical_distance})
    doc = {"critical": rep.to_dict(), "sweep": sweep.to_dict(), "links": links}
    io.write_json(doc, args.out)
    return EXIT_FALSIFIED if len(rep.stationary_violations) else EXIT_OK


def cmd_reach(args):
    field = _field(args)
    _value_range(field, args.r, args.r)
    try:
        rep = estimate_reach(field, args.r, boundary_samples=args.boundary_samples,
                             samples=args.samples, seed=args.seed)
    except ReachError as exc:
        raise CliError(EXIT_DOMAIN, str(exc))
    io.write_json(rep.to_dict(), args.out)
    return EXIT_OK


def cmd_dc_sard(args):
    try:
        f = load_dc(args.function)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_INPUT, f"cannot read DC function: {exc}")
    box = args.box
    if len(box) != 2 * f.dim:
        raise CliError(EXIT_INPUT, f"--box needs {2 * f.dim} numbers")
    box = (box[0], box[1]) if f.dim == 1 else ((box[0], box[2]), (box[1], box[3]))
    try:
        rep = morse_sard_check(f, box, args.delta, args.s)
    except PieceOverflow as exc:
        raise CliError(EXIT_RESOURCE, str(exc))
    est = rep.estimate
    io.write_json({"dim": f.dim, "stationary_cells": rep.cells, "stationary_values": rep.values,
                   "hausdorff": {"s": est.s, "delta": est.delta, "cover": est.cover,
                                 "premeasure": est.premeasure}}, args.out)
    return EXIT_OK


def cmd_cone(args):
    try:
        alpha = THRESHOLD if args.alpha == "auto" else float(args.alpha)
    except ValueError:
        raise CliError(EXIT_INPUT, f"alpha must be a number or 'auto', got {args.alpha!r}")
    if not (alpha > 0 and math.isfinite(alpha)):
        raise CliError(EXIT_INPUT, "alpha must be positive")
    doc = {}
    claim = alpha >= THRESHOLD
    if claim:
        pairs = random_admissible_pairs(alpha, args.pairs, args.seed)
        bad = sum(not paper_inequality_check(a, b).passed for a, b in pairs)
        doc["inequality_pairs"] = len(pairs)
        doc["inequality_violations"] = bad
    try:
        res = obtuse_triple_search(alpha, args.samples, args.seed)
    except ConeError as exc:
        raise CliError(EXIT_INPUT, str(exc))
    doc = {**res.to_dict(), **doc, "claim_applies": claim}
    io.write_json(doc, args.out)
    if claim and (res.witness is not None or doc["inequality_violations"]):
        return EXIT_FALSIFIED
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="distlab", description="Distance functions to closed sets.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, field=True):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--out", default=None, help="output path (stdout when omitted)")
        if field:
            sp.add_argument("--field", help="field dump (.bin with .json sidecar)")
            sp.add_argument("--scene", help="scene JSON, sampled in-process when --field is absent")
            sp.add_argument("--norm", default="euclid")
            sp.add_argument("--bbox", type=float, nargs="+", help="lo... hi...")
            sp.add_argument("--res", type=int, default=401, help="vertices along the longest axis")

    def crit_flags(sp):
        sp.add_argument("--eta", type=float, default=1e-3)
        sp.add_argument("--delta", type=float, default=None)
        sp.add_argument("--criterion", choices=["auto", "hull", "directional"], default="auto")

    sp = sub.add_parser("field", help="sample and dump a distance field")
    common(sp)
    sp.set_defaults(func=cmd_field)

    sp = sub.add_parser("crit", help="critical-point scan")
    common(sp)
    crit_flags(sp)
    sp.set_defaults(func=cmd_crit)

    sp = sub.add_parser("levelset", help="extract and check one distance sphere")
    common(sp)
    sp.add_argument("--r", type=float, required=True)
    sp.set_defaults(func=cmd_levelset)

    sp = sub.add_parser("sweep", help="critical scan plus a radius sweep")
    common(sp)
    crit_flags(sp)
    sp.add_argument("--rmin", type=float, required=True)
    sp.add_argument("--rmax", type=float, required=True)
    sp.add_argument("--count", type=int, default=200)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("reach", help="reach estimate of {d >= r}")
    common(sp)
    sp.add_argument("--r", type=float, required=True)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--boundary-samples", type=int, default=16)
    sp.set_defaults(func=cmd_reach)

    sp = sub.add_parser("dc-sard", help="stationary values of a piecewise-affine DC function")
    common(sp, field=False)
    sp.add_argument("--function", required=True, help='JSON {"dim", "plus", "minus"}')
    sp.add_argument("--box", type=float, nargs="+", required=True, help="lo... hi...")
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--s", type=float, default=None)
    sp.set_defaults(func=cmd_dc_sard)

    sp = sub.add_parser("cone", help="obtuse direction triples on the cone example")
    common(sp, field=False)
    sp.add_argument("--alpha", default="auto")
    sp.add_argument("--samples", type=int, default=100_000)
    sp.add_argument("--pairs", type=int, default=10_000)
    sp.set_defaults(func=cmd_cone)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except MemoryCapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
