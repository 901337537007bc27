"""
Sobolev Approximation Lab - command line

Builds explicit ReLU / ReQU networks, assembles full approximants,
measures Sobolev-norm errors, computes capacity bounds and runs the
H¹ training experiments. Every command writes its data files plus a
run manifest under the output directory.

Usage:
    python pipeline.py build --kind square -N 2 -L 3
    python pipeline.py assemble --kind relu --target sin1d -n 2 -N 1 -L 2 -d 1
    python pipeline.py capacity bound --arch 1,1,1
    python pipeline.py gap-sweep --Ms 64,128,256 --replicas 20 --seed 7
"""
import argparse
import logging
import sys
import time
import traceback
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from sobonet import __version__
from sobonet.assemble import build_relu_approximant, build_requ_approximant, sweep_points
from sobonet.complexity import (
    ArchSpec,
    bump_grid,
    dudley_bound,
    gen_bound,
    inequality_bound,
    shatter_search,
    vc_lower_search,
    vc_pdim_upper,
    warren_count,
)
from sobonet.config import RunConfig, load_config
from sobonet.errors import InvalidInputError, SobonetError
from sobonet.local_poly import build_piecewise_approx
from sobonet.metrics import GridSpec, measure_reference, rate_fit, sup_error
from sobonet.network import Network, load_network, save_network
from sobonet.relu_build import (
    build_monomial,
    build_multiprod,
    build_partition_nets,
    build_pointfit,
    build_product2,
    build_square,
    build_step,
    build_teeth,
)
from sobonet.requ_build import build_exact_poly, build_smooth_partition, monomial_feasible
from sobonet.sobolev_train import TrainConfig, gap_experiment, train
from sobonet.targets import available_targets, get_target
from utils import (
    NETWORKS_SUBDIR,
    REPORTS_SUBDIR,
    SCHEMAS,
    RunManifest,
    artifact_path,
    emit_report,
    ensure_dirs,
    load_manifest,
    parse_int_list,
    replay_argv,
)

logger = logging.getLogger("pipeline")

RULER = "=" * 70
RELU_KINDS = ["teeth", "square", "product", "multiprod", "monomial", "step", "pointfit", "partition"]
REQU_KINDS = ["requ-square", "requ-product", "requ-identity", "requ-monomial", "requ-polynomial",
              "requ-partition"]


def _banner(title: str, lines: Sequence[str] = ()) -> None:
    print(RULER)
    print(title)
    print(RULER)
    for line in lines:
        print(line)
    if lines:
        print(RULER)


def _int_tuple(text: str) -> tuple:
    return tuple(int(v) for v in text.split(","))


def _float_list(text: str) -> List[float]:
    return [float(v) for v in text.split(",")]


def _coeffs(text: str) -> Dict[tuple, float]:
    """'2,0:0.5;0,1:-1' -> {(2, 0): 0.5, (0, 1): -1.0}"""
    out = {}
    for item in text.split(";"):
        alpha, _, c = item.partition(":")
        out[_int_tuple(alpha)] = float(c)
    return out


def _save_net(net: Network, root: Path, stem: str, manifest: RunManifest) -> Path:
    path = manifest.add(save_network(net, artifact_path(root, NETWORKS_SUBDIR, stem, "json")))
    print(f"✓ {net.provenance}: width {net.width}, depth {net.depth}, {net.parameter_count} parameters")
    print(f"  Saved to: {path}")
    return path


def _report(kind: str, rows, root: Path, stem: str, manifest: RunManifest,
            schema: Optional[str] = None, meta=None) -> Path:
    path = emit_report(kind, rows, artifact_path(root, REPORTS_SUBDIR, stem, kind),
                       columns=SCHEMAS.get(schema or ""), meta=meta)
    manifest.add(path)
    print(f"  Report: {path}")
    return path


# ------------------------------------------------------------------ build
def cmd_build(args, cfg: RunConfig, manifest: RunManifest) -> None:
    kind, N, L = args.kind, args.N, args.L
    _banner(f"BUILD {kind}", [f"N={N}  L={L}  d={args.d}"])
    root = cfg.output_dir
    if kind == "teeth":
        nets = {f"teeth_i{args.i}": build_teeth(args.i)}
    elif kind == "square":
        nets = {f"square_N{N}_L{L}": build_square(N, L, a=args.a)}
    elif kind == "product":
        nets = {f"product_N{N}_L{L}": build_product2(N, L, a=args.a)}
    elif kind == "multiprod":
        nets = {f"multiprod_s{args.s}_N{N}_L{L}": build_multiprod(args.s, N, L)}
    elif kind == "monomial":
        alpha = _int_tuple(args.alpha)
        nets = {f"monomial_{args.alpha}_N{N}_L{L}": build_monomial(alpha, N, L)}
    elif kind == "step":
        delta = args.delta if args.delta is not None else 1.0 / (4 * args.K)
        nets = {f"step_K{args.K}_{args.mode}": build_step(args.K, delta, args.mode, N, L)}
    elif kind == "pointfit":
        nets = {f"pointfit_N{N}_L{L}": build_pointfit(_float_list(args.values), N, L, args.s)}
    elif kind == "partition":
        kit = build_partition_nets(N, L, args.n, args.d)
        nets = {f"phi_{''.join(map(str, m))}_K{kit.K}": net for m, net in sorted(kit.phi.items())}
    elif kind == "requ-partition":
        kit = build_smooth_partition(N, L, args.d, K=args.K)
        nets = {f"lambda_{''.join(map(str, m))}_K{kit.K}": net for m, net in sorted(kit.lam.items())}
    else:
        sub = kind.split("-", 1)[1]
        alpha = _int_tuple(args.alpha) if args.alpha else None
        coeffs = _coeffs(args.coeffs) if args.coeffs else None
        nets = {f"{kind}_d{args.d}_N{N}_L{L}": build_exact_poly(sub, N, L, args.d, alpha=alpha,
                                                                 coeffs=coeffs, bound=args.a)}
    for i, (stem, net) in enumerate(nets.items(), 1):
        print(f"\n[{i}/{len(nets)}] {stem}")
        _save_net(net, root, stem, manifest)


# --------------------------------------------------------------- assemble
def cmd_assemble(args, cfg: RunConfig, manifest: RunManifest) -> None:
    f = get_target(args.target, args.n)
    _banner(f"ASSEMBLE {args.kind.upper()} APPROXIMANT",
            [f"Target: {f.name}", f"n={args.n}  N={args.N}  L={args.L}  d={args.d}"])
    grid = GridSpec(args.d, cfg.grid.for_dim(args.d), cfg.grid.jitter)
    print("\n[1/2] Building network...")
    if args.kind == "relu":
        net, report = build_relu_approximant(f, args.n, args.N, args.L, args.d,
                                             measure=not args.no_measure, threads=cfg.threads, grid=grid)
    else:
        net, report = build_requ_approximant(f, args.n, args.N, args.L, args.d,
                                             measure=not args.no_measure, threads=cfg.threads,
                                             grid=grid, K=args.K)
    stem = f"{args.kind}_{f.name}_n{args.n}_N{args.N}_L{args.L}"
    _save_net(net, cfg.output_dir, stem, manifest)
    print(f"  Budget: width {report.width} / {report.target_width:.0f}, "
          f"depth {report.depth} / {report.target_depth:.0f}")
    print("\n[2/2] Writing assembly report...")
    for k, err in sorted(report.errors.items()):
        print(f"✓ order {k} sup error {err:.6g}")
    _report("json", [report.to_dict()], cfg.output_dir, f"assembly_{stem}", manifest)


# ---------------------------------------------------------------- measure
def cmd_measure(args, cfg: RunConfig, manifest: RunManifest) -> None:
    net = load_network(args.net)
    f = get_target(args.target, max(args.order, args.n))
    grid = GridSpec(net.input_dim, args.points or cfg.grid.for_dim(net.input_dim), cfg.grid.jitter)
    _banner("MEASURE SOBOLEV ERROR", [f"Network: {net.provenance or args.net}", f"Target: {f.name}",
                                      f"Order: {args.order}  Grid: {grid.describe()}"])
    report = sup_error(f, net, args.order, grid, cfg.threads)
    for row in report.rows():
        print(f"✓ order {row['order']}: {row['sup_err']:.6g}")
    if report.discarded:
        print(f"⚠ {report.discarded} grid points dropped at breakpoints")
    _report("csv", report.rows(), cfg.output_dir, f"measure_{Path(args.net).stem}_{f.name}", manifest, "measure")


# ----------------------------------------------------------------- approx
def cmd_approx(args, cfg: RunConfig, manifest: RunManifest) -> None:
    f = get_target(args.target, args.n)
    m = _int_tuple(args.m)
    if len(m) == 1:
        m = m * f.d
    _banner("PIECEWISE POLYNOMIAL APPROXIMATION", [f"Target: {f.name}", f"K={args.K}  m={list(m)}  n={args.n}"])
    print("\n[1/2] Averaged Taylor coefficients...")
    poly = build_piecewise_approx(f, args.K, m, args.n, threads=cfg.threads)
    stem = f"piecewise_{f.name}_K{args.K}_m{''.join(map(str, m))}_n{args.n}"
    path = manifest.add(poly.save(artifact_path(cfg.output_dir, NETWORKS_SUBDIR, stem, "json")))
    print(f"✓ {len(poly.cells)} cells, max |c| {poly.max_coefficient():.4g}")
    print(f"  Saved to: {path}")
    print("\n[2/2] Measuring on Omega_m...")
    order = min(2, args.n - 1)
    report = measure_reference(f, poly, order, GridSpec(f.d, cfg.grid.for_dim(f.d), cfg.grid.jitter))
    for row in report.rows():
        print(f"✓ order {row['order']}: {row['sup_err']:.6g}")
    _report("csv", report.rows(), cfg.output_dir, f"approx_{stem}", manifest, "approx")


# ------------------------------------------------------------- sweep-rate
def cmd_sweep_rate(args, cfg: RunConfig, manifest: RunManifest) -> None:
    f = get_target(args.target, args.n)
    Ks = args.Ks
    _banner(f"RATE SWEEP ({args.mode})", [f"Target: {f.name}  n={args.n}  d={f.d}", f"K: {Ks}"])
    rows = []
    grid = GridSpec(f.d, cfg.grid.for_dim(f.d), cfg.grid.jitter)
    if args.mode == "relu":
        plan = sweep_points(f.d, Ks)
    elif args.mode == "requ":
        if not monomial_feasible(max(f.d, args.n), args.N, args.L):
            raise InvalidInputError(f"N={args.N}, L={args.L} cannot carry degree {max(f.d, args.n)} monomials")
        plan = [(K, args.N, args.L) for K in Ks]
    else:
        plan = [(K, None, None) for K in Ks]
    for step, (K, N, L) in enumerate(plan, 1):
        print(f"\n[{step}/{len(plan)}] K={K}" + (f" (N={N}, L={L})" if N else ""))
        if args.mode == "piecewise":
            m = (1,) * f.d
            poly = build_piecewise_approx(f, K, m, args.n, threads=cfg.threads)
            order = min(1, args.n - 1)
            measured = measure_reference(f, poly, order, grid)
            errors = {k: measured.sup(k) for k in range(order + 1)}
        elif args.mode == "relu":
            _, report = build_relu_approximant(f, args.n, N, L, f.d, threads=cfg.threads, grid=grid)
            errors = report.errors
        else:
            _, report = build_requ_approximant(f, args.n, N, L, f.d, threads=cfg.threads, grid=grid, K=K)
            errors = report.errors
        for k, err in sorted(errors.items()):
            rows.append({"K": K, "N": N, "L": L, "order": k, "sup_err": err})
            print(f"✓ order {k}: {err:.6g}")
    orders = sorted({r["order"] for r in rows})
    for k in orders:
        pairs = [(r["K"], r["sup_err"]) for r in rows if r["order"] == k]
        if len(pairs) >= 3 and all(e > 0 for _, e in pairs):
            fit = rate_fit(pairs)
            print(f"  order {k} slope {fit.slope:.3f} (r2 {fit.r2:.3f})")
    _report("csv", rows, cfg.output_dir, f"sweep_{args.mode}_{f.name}_n{args.n}", manifest, "sweep-rate")


# --------------------------------------------------------------- capacity
def cmd_capacity(args, cfg: RunConfig, manifest: RunManifest) -> None:
    action = args.action
    root = cfg.output_dir
    if action == "bound":
        arch = ArchSpec.parse(args.arch, args.activation)
        report = vc_pdim_upper(arch)
        _banner("CAPACITY BOUND", [f"Architecture: {arch.widths} ({arch.activation})"])
        print(f"✓ U={report.U}  vc_upper={report.vc_upper:.4f}  pdim_upper={report.pdim_upper:.4f}")
        _report("csv", report.rows(), root, f"bound_{args.arch}", manifest)
    elif action == "shatter":
        arch = ArchSpec.parse(args.arch, args.activation)
        _banner("SHATTER SEARCH", [f"Architecture: {arch.widths}  m={args.m}  samples={args.samples}"])
        if args.search_m:
            best, history = vc_lower_search(arch, args.m, args.i, args.samples, cfg.seed, args.strategy,
                                            cfg.threads, sampler=args.sampler)
            rows = [r for inst in history for r in inst.rows()]
            print(f"✓ largest shattered m: {best} (vc_upper {vc_pdim_upper(arch).vc_upper:.2f})")
        else:
            inst = shatter_search(arch, args.m, args.i, None, args.samples, cfg.seed, args.strategy,
                                  cfg.threads, sampler=args.sampler)
            rows = inst.rows()
            mark = "✓" if inst.shattered else "✗"
            print(f"{mark} {inst.patterns_found}/{2 ** args.m} patterns after {inst.samples_used} samples")
        _report("csv", rows, root, f"shatter_{args.arch}_m{args.m}", manifest, "shatter")
    elif action == "warren":
        count = warren_count(args.M, args.D, args.W)
        _banner("WARREN BOUND")
        print(f"✓ at most {count:.6g} sign patterns (M={args.M}, D={args.D}, W={args.W})")
        _report("csv", [{"M": args.M, "D": args.D, "W": args.W, "bound": count}], root,
                f"warren_M{args.M}_D{args.D}_W{args.W}", manifest)
    elif action == "gen":
        arch = ArchSpec.parse(args.arch, args.activation)
        pdim = vc_pdim_upper(arch).pdim_upper
        bound = gen_bound(pdim, pdim, args.B, arch.d, args.M, cfg.log_base)
        dudley = dudley_bound(pdim, args.B, args.M, cfg.log_base)
        aux = inequality_bound(arch.L + 1, arch.U, (arch.L + 1) * (arch.L + 2)) \
            if (arch.L + 1) * (arch.L + 2) >= 16 else None
        _banner("GENERALIZATION BOUND", [f"Architecture: {arch.widths}  M={args.M}  B={args.B}"])
        print(f"✓ E gap <= {bound:.6g}  (Dudley {dudley:.6g})")
        _report("csv", [{"arch": args.arch, "M": args.M, "B": args.B, "pdim": pdim, "gen_bound": bound,
                         "dudley": dudley, "inequality_bound": aux}], root, f"gen_{args.arch}_M{args.M}", manifest)
    elif action == "bump":
        grid = bump_grid(args.M_grid, args.d, args.n, i=args.i, seed=cfg.seed)
        witness = grid.sign_witness()
        ok = bool(np.all(witness == grid.beta.reshape(-1)))
        sups = grid.max_derivative()
        _banner("BUMP GRID", [f"M={args.M_grid}  d={args.d}  n={args.n}"])
        print(f"{'✓' if ok else '✗'} signs of D_{args.i} h at centers match beta")
        print(f"  max sampled |D^a h| = {max(sups.values()):.4g}")
        rows = [{"alpha": ",".join(map(str, a)), "sup": v} for a, v in sorted(sups.items())]
        _report("csv", rows, root, f"bump_M{args.M_grid}_d{args.d}_n{args.n}", manifest)
        if not ok:
            raise SobonetError("bump grid sign witness does not reproduce beta")


# ------------------------------------------------------------------ train
def _train_config(args, cfg: RunConfig, samples: int) -> TrainConfig:
    f = get_target(args.target, max(1, args.n))
    arch = ArchSpec.from_hidden(f.d, _int_tuple(args.hidden), args.activation)
    return TrainConfig(arch, f, samples, args.loss, args.rate, args.decay, args.steps, cfg.seed, args.B)


def cmd_train(args, cfg: RunConfig, manifest: RunManifest) -> None:
    config = _train_config(args, cfg, args.M)
    _banner("TRAIN", [f"Target: {config.target.name}  arch {config.arch.widths} ({config.arch.activation})",
                      f"M={config.samples}  loss={config.loss}  steps={config.steps}  seed={config.seed}"])
    result = train(config)
    print(f"✓ R_S {result.trajectory[0]:.6g} -> {result.R_S:.6g} in {result.wall_clock:.1f}s")
    print(f"  R_D {result.R_D:.6g}  gap {result.gap:.6g}")
    stem = f"train_{config.target.name}_M{config.samples}_seed{config.seed}"
    _save_net(result.net, cfg.output_dir, stem, manifest)
    rows = [{"step": i, "R_S": v} for i, v in enumerate(result.trajectory)]
    _report("csv", rows, cfg.output_dir, f"{stem}_trajectory", manifest, "train")
    _report("json", [result.row()], cfg.output_dir, f"{stem}_summary", manifest)


def cmd_gap_sweep(args, cfg: RunConfig, manifest: RunManifest) -> None:
    base = _train_config(args, cfg, args.Ms[0])
    _banner("GENERALIZATION GAP SWEEP", [f"Target: {base.target.name}  arch {base.arch.widths}",
                                         f"M: {args.Ms}  replicas: {args.replicas}"])
    table = gap_experiment(base, args.Ms, args.replicas, cfg.threads)
    for row in table.rows:
        print(f"✓ M={row['M']}: median gap {row['median_gap']:.4g} (IQR {row['iqr']:.3g})")
    for key, msg in sorted(table.failures.items()):
        print(f"✗ M={key[0]} replica {key[1]}: {msg}")
    if table.slope is not None:
        print(f"  log-log slope {table.slope.slope:.3f}")
    stem = f"gap_{base.target.name}_seed{cfg.seed}"
    _report("csv", table.replica_rows, cfg.output_dir, stem, manifest, "gap-sweep")
    meta = {"note": table.note, "slope": None if table.slope is None else table.slope.slope,
            "failures": len(table.failures)}
    _report("json", table.rows, cfg.output_dir, f"{stem}_summary", manifest, meta=meta)


COMMANDS: Dict[str, Callable] = {
    "build": cmd_build,
    "assemble": cmd_assemble,
    "measure": cmd_measure,
    "approx": cmd_approx,
    "sweep-rate": cmd_sweep_rate,
    "capacity": cmd_capacity,
    "train": cmd_train,
    "gap-sweep": cmd_gap_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pipeline.py",
        description="Sobolev Approximation Lab - explicit networks, error sweeps, capacity and training",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Build a relu square network and a requ monomial
  python pipeline.py build --kind square -N 2 -L 3
  python pipeline.py build --kind requ-monomial --alpha 2,1 -d 2 -N 2 -L 2

  # Assemble and measure a full approximant
  python pipeline.py assemble --kind relu --target sin1d -n 2 -N 1 -L 2 -d 1

  # Rate sweeps and capacity
  python pipeline.py sweep-rate --mode piecewise --target sin1d -n 3 --Ks 4,8,16,32
  python pipeline.py capacity bound --arch 1,1,1
  python pipeline.py capacity shatter --arch 1,1,1 --m 2 --samples 100000 --seed 7

  # Training experiments
  python pipeline.py gap-sweep --Ms 2^6..2^12 --replicas 20 --seed 7

  # Reproduce a previous run
  python pipeline.py --replay outputs/manifest_train.json --output-dir replay
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--seed", type=int, default=None, help="Root seed for every random draw")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads (env SOBONET_THREADS)")
    parser.add_argument("--config", default=None, help="JSON run configuration")
    parser.add_argument("--output-dir", default=None, help="Where data files and the manifest go")
    parser.add_argument("--replay", default=None, help="Re-run the command recorded in a manifest")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Debug logging and tracebacks")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Warnings and errors only")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("build", help="Build one explicit network and save it as JSON")
    p.add_argument("--kind", required=True, choices=RELU_KINDS + REQU_KINDS)
    p.add_argument("-N", type=int, default=1)
    p.add_argument("-L", type=int, default=1)
    p.add_argument("-n", type=int, default=2)
    p.add_argument("-d", type=int, default=1)
    p.add_argument("--a", type=float, default=1.0, help="Input bound for square/product, coefficient bound")
    p.add_argument("--i", type=int, default=1, help="Teeth index")
    p.add_argument("--s", type=int, default=2, help="Factor count / pointfit precision")
    p.add_argument("--alpha", default=None, help="Multi-index, e.g. 2,1")
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--mode", choices=["wide", "budget"], default="wide")
    p.add_argument("--values", default="0,1", help="Pointfit values in [0, 1]")
    p.add_argument("--coeffs", default=None, help="Polynomial as 'alpha:c;alpha:c'")

    p = sub.add_parser("assemble", help="Assemble a full relu or requ approximant")
    p.add_argument("--kind", choices=["relu", "requ"], default="relu")
    p.add_argument("--target", default="sin1d", choices=available_targets())
    p.add_argument("-n", type=int, default=2)
    p.add_argument("-N", type=int, default=1)
    p.add_argument("-L", type=int, default=1)
    p.add_argument("-d", type=int, default=1)
    p.add_argument("--K", type=int, default=None, help="Cell count override (requ only)")
    p.add_argument("--no-measure", action="store_true")

    p = sub.add_parser("measure", help="Grid sup errors of a saved network against a target")
    p.add_argument("--net", required=True)
    p.add_argument("--target", required=True, choices=available_targets())
    p.add_argument("--order", type=int, default=1, choices=[0, 1, 2])
    p.add_argument("-n", type=int, default=3, help="Target smoothness")
    p.add_argument("--points", type=int, default=None, help="Grid points per axis")

    p = sub.add_parser("approx", help="Piecewise averaged-Taylor approximation on Omega_m")
    p.add_argument("--target", default="sin1d", choices=available_targets())
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--m", default="1")
    p.add_argument("-n", type=int, default=3)

    p = sub.add_parser("sweep-rate", help="Errors over K with a log-log slope")
    p.add_argument("--mode", choices=["piecewise", "relu", "requ"], default="piecewise")
    p.add_argument("--target", default="sin1d", choices=available_targets())
    p.add_argument("-n", type=int, default=3)
    p.add_argument("--Ks", type=parse_int_list, default=[4, 8, 16, 32])
    p.add_argument("-N", type=int, default=2, help="Fixed N for the requ sweep")
    p.add_argument("-L", type=int, default=1, help="Fixed L for the requ sweep")

    p = sub.add_parser("capacity", help="VC / pseudo-dimension bounds and experiments")
    p.add_argument("action", choices=["bound", "shatter", "warren", "gen", "bump"])
    p.add_argument("--arch", default="1,1,1")
    p.add_argument("--activation", choices=["relu", "requ"], default="relu")
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--i", type=int, default=0, help="Derivative coordinate")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--strategy", choices=["grid", "random"], default="grid")
    p.add_argument("--sampler", choices=["random", "grid"], default="random",
                   help="How parameters are drawn: seeded uniform draws or a deterministic lattice")
    p.add_argument("--search-m", action="store_true", help="Increase m until shattering fails")
    p.add_argument("--M", type=int, default=1024, help="Sample count (warren, gen)")
    p.add_argument("--D", type=int, default=1)
    p.add_argument("--W", type=int, default=1)
    p.add_argument("--B", type=float, default=1.0)
    p.add_argument("--M-grid", dest="M_grid", type=int, default=5)
    p.add_argument("-d", type=int, default=2)
    p.add_argument("-n", type=int, default=2)

    for name, helptext in (("train", "Gradient descent on the H1 (or L2) empirical loss"),
                           ("gap-sweep", "Generalization gap over sample sizes")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--target", default="sin1d", choices=available_targets())
        p.add_argument("-n", type=int, default=2)
        p.add_argument("--hidden", default="16", help="Hidden widths, e.g. 16,16")
        p.add_argument("--activation", choices=["relu", "requ"], default="relu")
        p.add_argument("--loss", choices=["h1", "l2"], default="h1")
        p.add_argument("--rate", type=float, default=0.05)
        p.add_argument("--decay", type=float, default=0.999)
        p.add_argument("--steps", type=int, default=500)
        p.add_argument("--B", type=float, default=1.0, help="Clamp bound reported with the result")
        if name == "train":
            p.add_argument("--M", type=int, default=256)
        else:
            p.add_argument("--Ms", type=parse_int_list, default=[64, 128, 256, 512])
            p.add_argument("--replicas", type=int, default=20)
    return parser


def _configure_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.getLogger().setLevel(level)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv`` and dispatch; 0 on success, 1 on runtime error, 2 on usage error."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 2
    _configure_logging(args.verbose, args.quiet)

    try:
        if args.replay:
            manifest = load_manifest(Path(args.replay))
            replayed = replay_argv(manifest, args.output_dir)
            print(f"Replaying: {' '.join(replayed)}")
            return run(replayed)
        if args.command is None:
            parser.print_usage(sys.stderr)
            print("pipeline.py: error: a command is required", file=sys.stderr)
            return 2
        cfg = load_config(args.config, seed=args.seed, threads=args.threads, output_dir=args.output_dir)
        ensure_dirs(cfg.output_dir)
        manifest = RunManifest(
            subcommand=args.command if args.command != "capacity" else f"capacity-{args.action}",
            argv=argv,
            parameters={k: v for k, v in vars(args).items() if k not in ("verbose", "quiet", "replay")},
            seed=cfg.seed,
            threads=cfg.threads,
            started=time.strftime("%Y-%m-%dT%H:%M:%S"),
        )
        logger.debug("running %s with seed %d on %d threads", args.command, cfg.seed, cfg.threads)
        COMMANDS[args.command](args, cfg, manifest)
        path = manifest.write(cfg.output_dir)
        print(f"\n{RULER}\nDONE - manifest: {path}\n{RULER}")
        return 0
    except (SobonetError, OSError) as e:
        print(f"✗ {type(e).__name__}: {e}", file=sys.stderr)
        if args.verbose:
            traceback.print_exc()
        return 1


def main() -> int:
    return run()


if __name__ == "__main__":
    raise SystemExit(main())
