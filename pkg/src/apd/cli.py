"""Command-line pipeline: generate, analyze, deform, invert-check,
negligibility, derive-check.

Every report embeds a provenance block (rule, k, radii, seed, window,
censoring flags, thread cap) and is byte-identical across runs with the same
config and seed.  Exit codes: 0 ok, 2 config, 3 window too small,
4 inadmissible cocycle, 5 internal.
"""

from __future__ import annotations

import argparse
import os
import random
import sys
from fractions import Fraction
from pathlib import Path

from .apcomplex import (
    CollarError,
    build_ap_graph,
    graph_h1,
    negligibility_profile,
    tile_length_cochain,
)
from .deform import (
    InadmissibleCocycle,
    apply_deformation,
    derive_back_check,
    invert_check,
    invertibility_bound,
)
from .exactnum import format_scalar, to_float
from .fileio import (
    ConfigError,
    cochain_from_spec,
    dumps_canonical,
    graph_to_dict,
    pattern_to_dict,
    profile_csv,
    read_cocycle_spec,
    read_pattern,
    read_rule,
    rule_to_dict,
    sample_svg,
    svg_point_rows,
    write_json,
    write_pattern,
)
from .generators import generate_substitution_sample
from .patterns import (
    WindowError,
    classify_patches,
    find_recurrences,
    offset_separation,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_WINDOW = 3
EXIT_INADMISSIBLE = 4
EXIT_INTERNAL = 5


def _parse_radii(text: str) -> list[Fraction]:
    try:
        out = [Fraction(part) for part in text.split(",") if part]
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad radii list {text!r}: {exc}") from exc
    if not out or any(r <= 0 for r in out):
        raise ConfigError("radii must be positive rationals")
    return sorted(out)


def _provenance(args, sample=None, extra=None) -> dict:
    prov = {
        "command": args.command,
        "rule": getattr(args, "rule", None),
        "pattern": getattr(args, "pattern", None),
        "k": getattr(args, "k", None),
        "radii": [str(r) for r in getattr(args, "radii", [])] if getattr(args, "radii", None) else None,
        "cocycle": getattr(args, "cocycle", None),
        "seed": getattr(args, "seed", None),
        "threads": os.environ.get("APD_THREADS", "1"),
    }
    if sample is not None:
        prov["window"] = [
            [format_scalar(a), format_scalar(b)]
            for a, b in zip(sample.window.lo, sample.window.hi)
        ]
        prov["n_points"] = len(sample)
    if extra:
        prov.update(extra)
    return prov


def _load_sample(args):
    if getattr(args, "pattern", None):
        return read_pattern(args.pattern)
    if getattr(args, "rule", None) is None:
        raise ConfigError("need --pattern file or --rule (+ --k)")
    rule = read_rule(args.rule)
    k = args.k if args.k is not None else 10
    return generate_substitution_sample(rule, args.seed_letter, k)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args) -> int:
    rule = read_rule(args.rule)
    k = args.k if args.k is not None else 10
    sample = generate_substitution_sample(rule, args.seed_letter, k)
    out = _outdir(args)
    write_pattern(out / "pattern.json", sample)
    report = {
        "provenance": _provenance(args, sample),
        "rule": rule_to_dict(rule),
        "n_points": len(sample),
        "r_min": format_scalar(sample.r_min),
        "max_gap": format_scalar(sample.max_gap()),
    }
    write_json(out / "generate.json", report)
    if args.svg:
        sample_svg(sample, out / "pattern.svg")
    print(f"generate: {len(sample)} points -> {out / 'pattern.json'}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    sample = _load_sample(args)
    radii = args.radii or [Fraction(6, 5), Fraction(5, 2), Fraction(4)]
    k_max = args.k if args.k is not None else 2
    out = _outdir(args)

    classes = []
    for r in radii:
        table = classify_patches(sample, r)
        classes.append(
            {
                "r": str(r),
                "count": table.class_count(),
                "excluded_anchors": table.excluded_anchors,
                "censored": table.censored,
            }
        )
    a_table = []
    for r in radii:
        val = offset_separation(sample, r)
        a_table.append({"r": str(r), "value": format_scalar(val), "float": to_float(val)})
    recs = find_recurrences(sample, radii[0], radii[-1] + 1)
    rec_summary = {
        "count": len(recs),
        "censored": sum(1 for r in recs if r.censored),
        "examples": [
            {
                "x1": format_scalar(r.x1.coords[0]),
                "x2": format_scalar(r.x2.coords[0]),
                "size": format_scalar(r.size),
                "censored": r.censored,
            }
            for r in recs[:10]
        ],
    }
    ranks = []
    graphs = {}
    if sample.labels is not None:
        for k in range(k_max + 1):
            g = build_ap_graph(sample, k)
            graphs[k] = g
            h = graph_h1(g)
            ranks.append(
                {
                    "k": k,
                    "edges": g.n_edges,
                    "vertices": g.n_vertices,
                    "rank_euler": h["rank_euler"],
                    "rank_matrix": h["rank_matrix"],
                }
            )
    report = {
        "provenance": _provenance(args, sample),
        "patch_classes": classes,
        "offset_separation": a_table,
        "recurrences": rec_summary,
        "h1_ranks": ranks,
        "graphs": {str(k): graph_to_dict(g) for k, g in graphs.items()},
    }
    write_json(out / "analyze.json", report)
    if args.svg:
        sample_svg(sample, out / "pattern.svg")
    print(f"analyze: {len(sample)} points, {len(radii)} radii -> {out / 'analyze.json'}")
    return EXIT_OK


def _deformation_from_args(args, sample):
    if args.cocycle is None:
        raise ConfigError("need --cocycle spec file")
    spec = read_cocycle_spec(args.cocycle)
    k = spec.get("k", args.k if args.k is not None else 0)
    graph = build_ap_graph(sample, int(k))
    rng = random.Random(args.seed) if args.seed is not None else None
    cocycle = cochain_from_spec(graph, spec, rng)
    return apply_deformation(sample, cocycle), graph


def cmd_deform(args) -> int:
    sample = _load_sample(args)
    d, graph = _deformation_from_args(args, sample)
    radii = args.radii or [Fraction(2)]
    r = radii[0]
    r_max = max(radii[-1], 4 * r)
    out = _outdir(args)

    eps = invertibility_bound(sample, r)
    inv = invert_check(d, r, r_max)
    inv_mid = invert_check(d, r, r_max, scope="midpoints")
    back = derive_back_check(d, radii)
    extent = float(graph.max_collared_extent())
    prof_radii = [Fraction(extent + 1).limit_denominator(100)]
    while float(prof_radii[-1]) * 1.6 < float(r_max):
        prof_radii.append(
            Fraction(float(prof_radii[-1]) * 1.6).limit_denominator(100)
        )
    try:
        profile = negligibility_profile(d.cocycle, prof_radii)
    except (CollarError, WindowError):
        profile = []

    report = {
        "provenance": _provenance(args, sample),
        "distortion": format_scalar(d.distortion),
        "distortion_float": to_float(d.distortion),
        "epsilon_bound": {
            "value": str(eps.value),
            "float": eps.as_float,
            "censored": eps.censored,
            "r": format_scalar(eps.radius),
        },
        "invert_check": {
            "scope": inv.scope,
            "r_prime": str(inv.r_prime) if inv.r_prime is not None else None,
            "verdict": "ok" if inv.succeeded else "failed",
            "anchors_used": inv.anchors_used,
        },
        "invert_check_midpoints": {
            "scope": inv_mid.scope,
            "r_prime": str(inv_mid.r_prime) if inv_mid.r_prime is not None else None,
            "verdict": "ok" if inv_mid.succeeded else "failed",
        },
        "derive_back_R": str(back.passing_radius) if back.passing_radius is not None else None,
        "decay_profile": [[r_, v] for r_, v in profile],
        "deformed_n_points": len(d.deformed),
    }
    write_json(out / "deform.json", report)
    (out / "profile.csv").write_text(profile_csv(profile))
    if args.svg:
        rows = [
            ("source", [float(p.coords[0]) for p in d.source_points()]),
            ("deformed", [float(p.coords[0]) for p in d.deformed.points]),
        ]
        svg_point_rows(rows, out / "deform.svg")
    print(
        f"deform: distortion={to_float(d.distortion):.6g} "
        f"invert={'ok r_prime=' + str(inv.r_prime) if inv.succeeded else 'failed'} "
        f"-> {out / 'deform.json'}"
    )
    return EXIT_OK


def cmd_invert_check(args) -> int:
    sample = _load_sample(args)
    d, _ = _deformation_from_args(args, sample)
    radii = args.radii or [Fraction(2)]
    r = radii[0]
    r_max = max(radii[-1], 4 * r)
    inv = invert_check(d, r, r_max)
    out = _outdir(args)
    report = {
        "provenance": _provenance(args, sample),
        "r": str(r),
        "r_max_search": str(r_max),
        "r_prime": str(inv.r_prime) if inv.r_prime is not None else None,
        "verdict": "ok" if inv.succeeded else "failed",
    }
    write_json(out / "invert-check.json", report)
    print(f"invert-check: {report['verdict']} r_prime={report['r_prime']}")
    return EXIT_OK


def cmd_negligibility(args) -> int:
    sample = _load_sample(args)
    if args.cocycle is None:
        raise ConfigError("need --cocycle spec file")
    spec = read_cocycle_spec(args.cocycle)
    k = spec.get("k", args.k if args.k is not None else 0)
    graph = build_ap_graph(sample, int(k))
    rng = random.Random(args.seed) if args.seed is not None else None
    cocycle = cochain_from_spec(graph, spec, rng)
    extent = float(graph.max_collared_extent())
    radii = args.radii or []
    radii = [r for r in radii if float(r) >= extent]
    if not radii:
        raise ConfigError(
            f"all requested radii fall below the collared extent {extent:.3f}"
        )
    profile = negligibility_profile(cocycle, radii)
    out = _outdir(args)
    (out / "profile.csv").write_text(profile_csv(profile))
    report = {
        "provenance": _provenance(args, sample, {"collared_extent": extent}),
        "profile": [[r_, v] for r_, v in profile],
    }
    write_json(out / "negligibility.json", report)
    print(f"negligibility: {len(profile)} radii -> {out / 'profile.csv'}")
    return EXIT_OK


def cmd_derive_check(args) -> int:
    sample = _load_sample(args)
    d, _ = _deformation_from_args(args, sample)
    radii = args.radii or [Fraction(1), Fraction(2), Fraction(4), Fraction(8)]
    back = derive_back_check(d, radii)
    out = _outdir(args)
    report = {
        "provenance": _provenance(args, sample),
        "tested": [str(r) for r in back.tested],
        "derive_back_R": str(back.passing_radius)
        if back.passing_radius is not None
        else None,
        "verdict": "ok" if back.passing_radius is not None else "failed",
    }
    write_json(out / "derive-check.json", report)
    print(f"derive-check: {report['verdict']} R={report['derive_back_R']}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "analyze": cmd_analyze,
    "deform": cmd_deform,
    "invert-check": cmd_invert_check,
    "negligibility": cmd_negligibility,
    "derive-check": cmd_derive_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="apd",
        description="Finite-window analysis and deformation of aperiodic patterns",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--rule", help="builtin rule name or rule JSON path")
        p.add_argument("--pattern", help="pattern JSON path (overrides --rule)")
        p.add_argument("--k", type=int, default=None,
                       help="iterations (generate) or collar level (others)")
        p.add_argument("--radii", type=_parse_radii, default=None,
                       help="comma-separated positive rationals")
        p.add_argument("--cocycle", help="cocycle spec JSON path")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--seed-letter", default="a",
                       help="substitution seed letter (default a)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--svg", action="store_true", help="emit SVG plots")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (WindowError, CollarError) as exc:
        print(f"window error: {exc}", file=sys.stderr)
        return EXIT_WINDOW
    except InadmissibleCocycle as exc:
        print(f"inadmissible cocycle: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
