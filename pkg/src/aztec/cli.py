"""Command-line entry point.

Every run writes its outputs next to a manifest holding the full
configuration and its hash, so any artifact can be regenerated from the
manifest alone.  Exit codes: 0 success, 1 invalid input, 2 failed verification.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import os
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_INPUT, EXIT_VERIFY = 0, 1, 2


# ------------------------------------------------------------ serialization

def fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def to_json(obj, indent: int = 2, _lvl: int = 0) -> str:
    """JSON with floats at 17 significant digits and sorted keys."""
    pad, inner = " " * (indent * _lvl), " " * (indent * (_lvl + 1))
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(float(obj))
    if isinstance(obj, complex):
        return to_json([obj.real, obj.imag], indent, _lvl)
    if isinstance(obj, str):
        import json

        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return to_json(obj.tolist(), indent, _lvl)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{to_json(str(k))}: {to_json(v, indent, _lvl + 1)}" for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + to_json(v, indent, _lvl + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def config_of(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(to_json(cfg, indent=0).encode()).hexdigest()[:16]


def write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def write_manifest(out: Path, args, artifacts: list, extra: dict | None = None) -> dict:
    from . import __version__

    cfg = config_of(args)
    man = {"config": cfg, "config_hash": config_hash(cfg), "artifacts": sorted(artifacts),
           "version": __version__}
    if extra:
        man.update(extra)
    write_text(out / "manifest.json", to_json(man) + "\n")
    return man


def write_csv(path: Path, header: list, rows: list, chash: str):
    buf = io.StringIO()
    buf.write(f"# config_hash={chash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt_float(v) if isinstance(v, float) else v for v in r])
    write_text(path, buf.getvalue())


# ------------------------------------------------------------ rendering

_CLASS_COLORS = {1: "#9a9a9a", 2: "#1f5fbf", 3: "#111111"}


def render_svg(sq, dec=None, color: str = "class", corridor=None, scale: float = 4.0,
               mirrors: bool = True) -> str:
    """SVG of the squished configuration in node coordinates.

    color: "class" (double edge / loop / path), "none", or "corridor"
    (a-faces shaded by the corridor height field passed as ``corridor``).
    """
    from .squish import LOOP

    n = sq.n
    size = (2 * n + 4) * scale
    f = lambda v: f"{(v + 2) * scale:.3f}"  # noqa: E731
    g = lambda v: f"{(2 * n + 2 - v) * scale:.3f}"  # noqa: E731  (y up)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:.3f}" height="{size:.3f}" '
           f'viewBox="0 0 {size:.3f} {size:.3f}">',
           f'<rect x="0" y="0" width="{size:.3f}" height="{size:.3f}" fill="white"/>']
    if color == "corridor" and corridor is not None:
        vals = np.array([v for _, _, v in corridor.items()]) if corridor.items() else np.zeros(1)
        lo, hi = float(vals.min()), float(vals.max())
        for x, y, v in corridor.items():
            t = 0.0 if hi == lo else (v - lo) / (hi - lo)
            c = int(235 - 150 * t)
            out.append(f'<rect x="{f(x - 1)}" y="{g(y + 1)}" width="{2 * scale:.3f}" height="{2 * scale:.3f}" '
                       f'fill="rgb({c},{c},255)" stroke="none"/>')
    idx = np.argwhere(sq.is_a)
    for p, q in idx:
        (tx, ty), (hx, hy) = sq.tail[p, q], sq.head[p, q]
        stroke = "#111111"
        if dec is not None and color == "class":
            k = int(dec.kind[p, q])
            stroke = _CLASS_COLORS.get(k, stroke)
            if k == LOOP and dec.loop_sign(int(dec.obj[p, q])) > 0:
                stroke = "#c0392b"
        out.append(f'<line x1="{f(tx)}" y1="{g(ty)}" x2="{f(hx)}" y2="{g(hy)}" stroke="{stroke}" '
                   f'stroke-width="{0.5 * scale:.3f}" stroke-linecap="round"/>')
    if dec is not None and mirrors:
        for x, y, o in np.asarray(dec.mirrors).reshape(-1, 3):
            dx, dy = (1, 0) if o == 0 else (0, 1)
            out.append(f'<line x1="{f(x - dx)}" y1="{g(y - dy)}" x2="{f(x + dx)}" y2="{g(y + dy)}" '
                       f'stroke="#2e8b57" stroke-dasharray="{0.4 * scale:.3f}" stroke-width="{0.3 * scale:.3f}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ------------------------------------------------------------ subcommands

def _threads():
    t = os.environ.get("AZTEC_THREADS")
    if t:
        import numba

        numba.set_num_threads(max(1, min(int(t), numba.config.NUMBA_NUM_THREADS)))


def _parse_interval(s: str):
    try:
        l, r = (float(v) for v in s.split(","))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"interval must be 'l,r', got {s!r}") from e
    return (l, r)


def cmd_sample(args) -> int:
    from .sampler import SamplerConfig, sample_many

    cfg = SamplerConfig(args.m, args.a, args.seed, args.method)
    cfg.validate()
    out = Path(args.out)
    dirs = np.stack([c.dirs for c in sample_many(cfg, args.count, args.start)])
    out.mkdir(parents=True, exist_ok=True)
    np.save(out / "dirs.npy", dirs)
    write_manifest(out, args, ["dirs.npy"], {"shape": list(dirs.shape),
                                             "layout": "dirs[i, p, q]: direction of the dimer at white (2p+1, 2q)"})
    return EXIT_OK


def _one(args):
    from .sampler import SamplerConfig, sample

    cfg = SamplerConfig(args.m, args.a, args.seed)
    return sample(cfg, args.index)


def cmd_squish(args) -> int:
    from .heights import a_height, corridor_height, height_function, loop_height
    from .squish import decompose, loop_census, path_census

    cov = _one(args)
    h = height_function(cov)
    dec = decompose(cov, h)
    ha = a_height(h)
    hl = loop_height(dec)
    hc = corridor_height(ha, hl)
    out = Path(args.out)
    body = dec.to_dict()
    body["loop_census"] = loop_census(dec)
    body["path_census"] = path_census(dec)
    man = write_manifest(out, args, ["decomposition.json", "heights.csv"])
    body["config_hash"] = man["config_hash"]
    write_text(out / "decomposition.json", to_json(body) + "\n")
    rows = [(x, y, h(x, y), ha(x, y), hl(x, y), hc(x, y)) for x, y, _ in ha.items()]
    write_csv(out / "heights.csv", ["cx", "cy", "h", "h_a", "h_loop", "h_corridor"], rows, man["config_hash"])
    return EXIT_OK


def cmd_render(args) -> int:
    from .heights import a_height, corridor_height, height_function, loop_height
    from .squish import decompose, squish

    cov = _one(args)
    h = height_function(cov)
    dec = decompose(cov, h)
    hc = corridor_height(a_height(h), loop_height(dec)) if args.color == "corridor" else None
    svg = render_svg(squish(cov), dec, args.color, hc, mirrors=not args.no_mirrors)
    out = Path(args.out)
    cfg = config_of(args)
    svg = svg.replace("<svg ", f"<!-- config_hash={config_hash(cfg)} -->\n<svg ", 1)
    write_text(out, svg)
    return EXIT_OK


def cmd_measure(args) -> int:
    from .measures import InterfaceError, interface_ensemble, resolve_interface
    from .sampler import SamplerConfig

    try:
        spec = resolve_interface(args.m, args.a, args.beta, args.interval, args.M)
    except InterfaceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    rows, flags = interface_ensemble(SamplerConfig(args.m, args.a, args.seed), spec, args.samples)
    out = Path(args.out)
    chash = config_hash(config_of(args))
    write_csv(out, ["p", "q", "statistic", "value", "stderr", "oracle_value"],
              [(r["p"], r["q"], r["statistic"], r["value"], r["stderr"], r["oracle_value"]) for r in rows], chash)
    side = out.with_suffix(".json")
    write_text(side, to_json({"config": config_of(args), "config_hash": chash, "flags": flags,
                              "faces": {"left": {str(k): v for k, v in spec.Jl.items()},
                                        "right": {str(k): v for k, v in spec.Jr.items()}},
                              "rows": rows}) + "\n")
    for f in flags:
        print(f"warning: {f}", file=sys.stderr)
    return EXIT_OK


def cmd_kernels(args) -> int:
    from .kernels import AiryQuery, KernelCache, airy_fredholm, decay_slope

    out = Path(args.out)
    chash = config_hash(config_of(args))
    if args.table == "E":
        cache = KernelCache(args.a)
        rows = [(k, l, cache.E(k, l)) for k in range(args.kmax + 1) for l in range(args.kmax + 1)]
        write_csv(out, ["k", "l", "E"], rows, chash)
    elif args.table == "decay":
        bs = list(range(2, args.kmax + 1, 2))
        res = decay_slope(args.a, bs, diagonal=args.diagonal)
        write_text(out, to_json({"config_hash": chash, "result": res}) + "\n")
    else:
        if not args.interval:
            print("error: --interval is required for the Airy table", file=sys.stderr)
            return EXIT_INPUT
        betas = args.beta or [0.0]
        w = np.full((len(args.interval), len(betas)), complex(args.weight))
        r = airy_fredholm(AiryQuery(tuple(betas), tuple(args.interval), w))
        write_text(out, to_json({"config_hash": chash, "det": r.det, "mean": r.mean, "cov": r.cov,
                                 "nodes": r.nodes, "window": r.window}) + "\n")
    return EXIT_OK


def cmd_trees(args) -> int:
    from . import trees

    out = Path(args.out)
    chash = config_hash(config_of(args))
    if args.mode == "wilson":
        forests = [trees.wilson_sample(args.R, args.a, args.seed + i).to_json() for i in range(args.samples)]
        write_text(out, to_json({"config_hash": chash, "forests": forests}) + "\n")
    elif args.mode == "gauge":
        res = {f"{t}:{R}": trees.check_gauge(R, t) for t in ("w", "f") for R in range(2, args.R + 1)}
        write_text(out, to_json({"config_hash": chash, "mismatched_edges": res}) + "\n")
        return EXIT_OK if not any(res.values()) else EXIT_VERIFY
    elif args.mode == "convergence":
        rows = trees.box_Kinv_convergence(args.Rs, args.a)
        write_csv(out, ["R", "discrepancy", "residual"], [(r["R"], r["discrepancy"], r["residual"]) for r in rows], chash)
    else:
        res = trees.forest_statistics(args.samples, args.R, args.a, args.seed)
        write_text(out, to_json({"config_hash": chash, "result": res}) + "\n")
    return EXIT_OK


SUITES = ("boltzmann", "peierls", "coupling", "independence", "symmetry", "all")


def run_suite(name: str, samples: int, seed: int) -> list[dict]:
    from . import verify as V

    checks = []
    if name in ("boltzmann", "all"):
        for a in (0.2, 0.5, 0.9):
            r = V.boltzmann_chi2(a, samples, seed)
            checks.append({"check": "boltzmann", **r, "passed": r["p_value"] > 1e-3})
    if name in ("peierls", "all"):
        for r in V.peierls_loops(0.2, [4, 8], samples // 10 or 1, seed=seed):
            checks.append({"check": "peierls_loops", **r.to_dict()})
        for a in (0.5, 0.9):
            for r in V.peierls_double_edges(a, [6, 10], samples // 10 or 1, seed=seed):
                checks.append({"check": "peierls_double_edges", **r.to_dict()})
    if name in ("coupling", "all"):
        ms = [4, 8, 16]
        rows = [V.coupling_tv(m, 0.4) for m in ms]
        tvs = [r["tv"] for r in rows]
        slope = V.loglog_slope(ms, tvs)
        ok = all(x > y for x, y in zip(tvs, tvs[1:])) and abs(slope + 1 / 3) <= 0.2
        checks.append({"check": "coupling", "rows": rows, "slope": slope, "passed": ok})
    if name in ("independence", "all"):
        seps = [8, 16, 32]
        vals = [V.smooth_independence(s, 0.5) for s in seps]
        ok = all(x > y for x, y in zip(vals, vals[1:])) and vals[-1] < 1e-3
        checks.append({"check": "independence", "separations": seps, "discrepancy": vals, "passed": ok})
    if name in ("symmetry", "all"):
        r = V.loop_symmetry(16, 0.3, max(50, samples // 50), seed=seed)
        checks.append({"check": "loop_symmetry", **r, "passed": r["within_3se"]})
    return checks


def cmd_verify(args) -> int:
    checks = run_suite(args.suite, args.samples, args.seed)
    passed = all(c["passed"] for c in checks)
    report = {"config": config_of(args), "config_hash": config_hash(config_of(args)),
              "passed": passed, "checks": checks}
    text = to_json(report) + "\n"
    if args.out:
        write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if passed else EXIT_VERIFY


# ------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aztec", description="Two-periodic Aztec diamond toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, m=True):
        if m:
            sp.add_argument("--m", type=int, required=True, help="diamond order n = 4m")
            sp.add_argument("--a", type=float, required=True, help="weight a in (0, 1)")
        sp.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("sample", help="exact samples by domino shuffling")
    common(s)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--start", type=int, default=0, help="first sample index")
    s.add_argument("--method", choices=("shuffle", "enumerate"), default="shuffle")
    s.add_argument("--out", default="samples")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("squish", help="decomposition and heights of one sample")
    common(s)
    s.add_argument("--index", type=int, default=0)
    s.add_argument("--out", default="squish")
    s.set_defaults(func=cmd_squish)

    s = sub.add_parser("render", help="SVG of the squished configuration")
    common(s)
    s.add_argument("--index", type=int, default=0)
    s.add_argument("--color", choices=("class", "corridor", "none"), default="class")
    s.add_argument("--no-mirrors", action="store_true")
    s.add_argument("--out", default="render.svg")
    s.set_defaults(func=cmd_render)

    s = sub.add_parser("measure", help="interface measures kappa, nu, mu")
    common(s)
    s.add_argument("--beta", type=float, action="append", help="line position (repeatable)")
    s.add_argument("--interval", type=_parse_interval, action="append", help="l,r (repeatable)")
    s.add_argument("--M", type=int, default=None, help="number of averaged offsets (default ceil((log m)^2))")
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--out", default="stats.csv")
    s.set_defaults(func=cmd_measure)

    s = sub.add_parser("kernels", help="smooth-phase and Airy tables")
    s.add_argument("--table", choices=("E", "decay", "airy"), default="E")
    s.add_argument("--a", type=float, default=0.5)
    s.add_argument("--kmax", type=int, default=8)
    s.add_argument("--diagonal", action="store_true")
    s.add_argument("--beta", type=float, action="append")
    s.add_argument("--interval", type=_parse_interval, action="append")
    s.add_argument("--weight", type=complex, default=complex("-inf"), help="Psi weight for the Fredholm determinant")
    s.add_argument("--out", default="kernels.csv")
    s.set_defaults(func=cmd_kernels)

    s = sub.add_parser("trees", help="L_R boxes, Wilson forests, convergence")
    s.add_argument("--mode", choices=("wilson", "gauge", "convergence", "forest"), default="wilson")
    s.add_argument("--R", type=int, default=4)
    s.add_argument("--Rs", type=int, nargs="+", default=[4, 8, 12, 16])
    s.add_argument("--a", type=float, default=0.5)
    s.add_argument("--samples", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="trees.json")
    s.set_defaults(func=cmd_trees)

    s = sub.add_parser("verify", help="verification suites")
    s.add_argument("--suite", choices=SUITES, default="all")
    s.add_argument("--samples", type=int, default=20000, help="Monte-Carlo budget")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INPUT
    _threads()
    try:
        return args.func(args)
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
