"""Command line front end.

Every subcommand is a thin wrapper over a module operation.  Failures
surface as a single JSON object on stderr and a nonzero exit code, so
scripts can parse them.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from .core import EuclideanComparator, MeanFuser, SyntheticModelParams, WeightedMeanFuser, generate_gallery
from .errors import ConfigError, MorphIdxError
from .harness import (
    emit_decision_space,
    load_config,
    run_baseline,
    run_sweep,
    write_report_csv,
)
from .index import build_index, load_index, save_index, validate_index
from .io import load_samples, save_samples
from .metrics import morph_balance
from .pairing import (
    RandomPairing,
    SimilarityPairing,
    SoftBiometricPairing,
    pair_subjects,
    save_groups,
)
from .retrieval import SearchConfig, search_exhaustive, search_multi_stage, search_two_stage


def _fmt_for(path: str) -> str:
    return "csv" if path.endswith(".csv") else "binary"


def _load_gallery(path: str):
    return load_samples(path, fmt=_fmt_for(path))


def _parse_floats(raw: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in raw.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {raw!r}: {exc}") from None


def _parse_ints(raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in raw.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"bad integer list {raw!r}: {exc}") from None


def _method_from_flags(args):
    if args.pairing == "random":
        return RandomPairing(args.seed)
    if args.pairing == "softbio":
        weights = _parse_floats(args.weights)
        if len(weights) != 3:
            raise ConfigError("softbio needs exactly three weights")
        return SoftBiometricPairing(weights)
    return SimilarityPairing()


def _cmd_generate(args) -> int:
    params = SyntheticModelParams(
        n_subjects=args.subjects,
        dimension=args.dim,
        centroid_seed=args.centroid_seed,
        noise_seed=args.noise_seed,
        noise_sigma=args.sigma,
        probes_per_subject=args.probes,
        unenrolled_fraction=args.unenrolled,
    )
    gallery = generate_gallery(params)
    save_samples(gallery, args.out, fmt=_fmt_for(args.out))
    print(json.dumps({
        "out": args.out,
        "subjects": gallery.subject_count,
        "probes": int(gallery.probes.shape[0]),
    }))
    return 0


def _cmd_pair(args) -> int:
    gallery = _load_gallery(args.gallery)
    groups = pair_subjects(
        gallery, _method_from_flags(args), args.capacity,
        EuclideanComparator(), MeanFuser(),
    )
    save_groups(groups, args.out)
    print(json.dumps({"out": args.out, "groups": len(groups)}))
    return 0


def _cmd_build_index(args) -> int:
    gallery = _load_gallery(args.gallery)
    index = build_index(
        gallery, _method_from_flags(args), args.capacity,
        EuclideanComparator(), MeanFuser(),
    )
    report = validate_index(index)
    if not report.ok:
        raise ConfigError("built index failed validation: " + "; ".join(report.violations))
    save_index(index, args.out)
    print(json.dumps({
        "out": args.out,
        "capacity": index.capacity,
        "layers": [len(layer) for layer in index.layers],
        "pairing": index.pairing,
    }))
    return 0


def _cmd_search(args) -> int:
    gallery = _load_gallery(args.gallery)
    comparator = EuclideanComparator()
    index = None
    if args.index is not None:
        index = load_index(args.index, gallery)

    if args.probe_id is not None:
        probe_ids = [args.probe_id]
    else:
        probe_ids = list(range(gallery.probes.shape[0]))

    trace_fh = None
    if args.trace is not None:
        trace_fh = sys.stdout if args.trace == "-" else open(args.trace, "w")
    try:
        for j in probe_ids:
            if not 0 <= j < gallery.probes.shape[0]:
                raise ConfigError(f"probe id {j} out of range")
            probe = gallery.probes[j]
            sink = [] if trace_fh is not None else None
            if args.ks is not None:
                if index is None:
                    raise ConfigError("--ks needs --index")
                cfg = SearchConfig(_parse_ints(args.ks), args.threshold)
                res = search_multi_stage(probe, index, cfg, comparator, trace=sink)
            elif args.k is not None:
                if index is None:
                    raise ConfigError("--k needs --index")
                res = search_two_stage(probe, index, args.k, comparator, trace=sink)
            else:
                res = search_exhaustive(probe, gallery, comparator)
            if sink is not None:
                for record in sink:
                    trace_fh.write(json.dumps({"probe": j, **record}, sort_keys=True))
                    trace_fh.write("\n")
            print(json.dumps({
                "probe": j,
                "owner": int(gallery.probe_owners[j]),
                "unenrolled": bool(gallery.probe_unenrolled[j]),
                "comparisons_per_stage": list(res.comparisons_per_stage),
                "total_comparisons": res.total_comparisons,
                "decision": res.decision,
                "candidates": [
                    [i, s] for i, s in res.ranked_candidates[: args.top]
                ],
            }))
    finally:
        if trace_fh is not None and trace_fh is not sys.stdout:
            trace_fh.close()
    return 0


def _cmd_balance_check(args) -> int:
    gallery = _load_gallery(args.gallery)
    if args.fuser_weights is not None:
        weights = _parse_floats(args.fuser_weights)
        fuser = WeightedMeanFuser(weights)
    else:
        fuser = MeanFuser()
    result = morph_balance(gallery, fuser, EuclideanComparator(), args.seed)
    print(json.dumps({
        "distance": result.distance,
        "samples_per_position": int(result.first_contributor.size),
        "first_mean": float(result.first_contributor.mean()),
        "second_mean": float(result.second_contributor.mean()),
    }))
    return 0


def _cmd_baseline(args) -> int:
    config = load_config(args.config)
    rows = run_baseline(config)
    os.makedirs(config.output_dir, exist_ok=True)
    path = os.path.join(config.output_dir, "report.csv")
    write_report_csv(rows, path)
    print(json.dumps({"report": path, "rows": len(rows)}))
    return 0


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    if args.workers is not None:
        config = replace(config, workers=args.workers)
    report = run_sweep(config)
    print(json.dumps({
        "rows": len(report.rows),
        "files": report.files,
        "warnings": report.summary["warnings"],
    }))
    return 0


def _cmd_decision_space(args) -> int:
    capacities = _parse_ints(args.capacities)
    grids = {}
    for c in capacities:
        raw = getattr(args, f"k_grid_{c}", None) or args.k_grid
        if raw is None:
            raise ConfigError(f"no shortlist grid given for capacity {c}")
        grids[c] = _parse_ints(raw)
    count = emit_decision_space(args.subjects, args.mode, capacities, grids, args.out)
    print(json.dumps({"out": args.out, "rows": count}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morphidx",
        description="Morph-indexed gallery retrieval workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a gallery of samples")
    p.add_argument("--subjects", type=int, default=1024)
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--centroid-seed", type=int, default=1)
    p.add_argument("--noise-seed", type=int, default=2)
    p.add_argument("--probes", type=int, default=1)
    p.add_argument("--unenrolled", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    def add_pairing_flags(q):
        q.add_argument("--pairing", choices=("random", "softbio", "similarity"),
                       required=True)
        q.add_argument("--capacity", type=int, required=True)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--weights", default="1,1,1")

    p = sub.add_parser("pair", help="group subjects for morphing")
    p.add_argument("--gallery", required=True)
    add_pairing_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_pair)

    p = sub.add_parser("build-index", help="build and save a cascade index")
    p.add_argument("--gallery", required=True)
    add_pairing_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_build_index)

    p = sub.add_parser("search", help="identify probes against the gallery")
    p.add_argument("--gallery", required=True)
    p.add_argument("--index")
    p.add_argument("--probe-id", type=int)
    p.add_argument("--k", type=int, help="two-stage root shortlist size")
    p.add_argument("--ks", help="comma list of per-layer shortlist sizes")
    p.add_argument("--threshold", type=float, help="open-set acceptance threshold")
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--trace", help="write per-stage JSON lines here ('-' for stdout)")
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("balance-check", help="two-subject morph contributor balance")
    p.add_argument("--gallery", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fuser-weights", help="comma pair, e.g. 0.8,0.2")
    p.set_defaults(func=_cmd_balance_check)

    p = sub.add_parser("baseline", help="exhaustive-search reference report")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("sweep", help="full grid experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("decision-space", help="predicted workload tables")
    p.add_argument("--subjects", type=int, required=True)
    p.add_argument("--mode", choices=("two-stage", "multi-stage"), default="two-stage")
    p.add_argument("--capacities", default="2,4,8")
    p.add_argument("--k-grid", help="shortlist grid shared by all capacities")
    p.add_argument("--k-grid-2", dest="k_grid_2")
    p.add_argument("--k-grid-4", dest="k_grid_4")
    p.add_argument("--k-grid-8", dest="k_grid_8")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_decision_space)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MorphIdxError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "OSError", "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
