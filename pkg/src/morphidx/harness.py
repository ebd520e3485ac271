"""Experiment orchestration: config parsing, sweeps, and report emission.

A sweep walks the (capacity, pairing method, shortlist size) grid with
two-stage retrieval, cross-validating random pairing over several fold
seeds, and writes `report.csv`, `summary.json`, per-configuration CMC
and DET tables, and optionally a JSON-lines trace of per-transaction
stage counts.  Every output is bit-reproducible from a config file:
rows are assembled in fixed order and floats are written with repr.
"""

from __future__ import annotations

import configparser
import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import t as student_t

from .core import EuclideanComparator, Gallery, MeanFuser, SyntheticModelParams, generate_gallery
from .errors import ConfigError, UndefinedMetricError
from .index import build_index
from .io import load_samples
from .metrics import ScoreSet, cmc_curve, decidability, eer, fnir_at_fpir, fnir_fpir_sweep
from .pairing import RandomPairing, SimilarityPairing, SoftBiometricPairing
from .retrieval import (
    predicted_workload_multi_stage,
    predicted_workload_two_stage,
    search_exhaustive,
    search_two_stage,
)

METHOD_NAMES = ("random", "softbio", "similarity")

REPORT_COLUMNS = (
    "capacity", "method", "k", "folds",
    "hit_rate", "hit_rate_ci95", "rank1",
    "workload", "workload_pct", "workload_pct_ci95", "workload_predicted",
    "eer", "fnir_at_fpir_001", "dprime",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a sweep needs, parsed from a sectioned key=value file."""

    gallery_params: SyntheticModelParams | None
    samples_file: str | None
    capacities: tuple[int, ...]
    methods: tuple[str, ...]
    folds: int
    k_grids: dict[int, tuple[int, ...]]
    hr_levels: tuple[float, ...]
    random_seed_base: int
    softbio_weights: tuple[float, float, float]
    open_set_threshold: float | None
    output_dir: str
    trace: bool
    workers: int

    def __post_init__(self):
        if not self.capacities:
            raise ConfigError("capacities must be non-empty")
        for c in self.capacities:
            if c not in (2, 4, 8):
                raise ConfigError(f"capacity {c} not in {{2, 4, 8}}")
            if not self.k_grids.get(c):
                raise ConfigError(f"empty shortlist grid for capacity {c}")
            if any(k < 1 for k in self.k_grids[c]):
                raise ConfigError(f"shortlist sizes must be positive (capacity {c})")
        if not self.methods:
            raise ConfigError("methods must be non-empty")
        for m in self.methods:
            if m not in METHOD_NAMES:
                raise ConfigError(f"unknown pairing method {m!r}")
        if self.folds < 1:
            raise ConfigError("folds must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if (self.gallery_params is None) == (self.samples_file is None):
            raise ConfigError("exactly one of synthetic params or samples_file required")


def _split(raw: str) -> list[str]:
    return [piece.strip() for piece in raw.split(",") if piece.strip()]


def load_config(path: str) -> ExperimentConfig:
    """Parse an experiment description file; unknown keys are rejected."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")

    known = {
        "gallery": {
            "n_subjects", "dimension", "noise_sigma", "centroid_seed", "noise_seed",
            "probes_per_subject", "unenrolled_fraction", "samples_file",
        },
        "sweep": {
            "capacities", "methods", "folds", "hr_levels", "random_seed_base",
            "softbio_weights", "k_grid_2", "k_grid_4", "k_grid_8",
        },
        "open_set": {"threshold"},
        "output": {"directory", "trace", "workers"},
    }
    for section in cp.sections():
        if section not in known:
            raise ConfigError(f"unknown config section [{section}]")
        extra = set(cp[section]) - known[section]
        if extra:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(extra)}")

    try:
        g = cp["gallery"] if cp.has_section("gallery") else {}
        samples_file = g.get("samples_file") or None
        if samples_file is None:
            params = SyntheticModelParams(
                n_subjects=int(g.get("n_subjects", 1024)),
                dimension=int(g.get("dimension", 128)),
                centroid_seed=int(g.get("centroid_seed", 1)),
                noise_seed=int(g.get("noise_seed", 2)),
                noise_sigma=float(g.get("noise_sigma", 0.05)),
                probes_per_subject=int(g.get("probes_per_subject", 1)),
                unenrolled_fraction=float(g.get("unenrolled_fraction", 0.0)),
            )
        else:
            params = None

        s = cp["sweep"] if cp.has_section("sweep") else {}
        capacities = tuple(int(x) for x in _split(s.get("capacities", "2,4,8")))
        k_grids = {
            c: tuple(int(x) for x in _split(s.get(f"k_grid_{c}", "")))
            for c in capacities
        }
        o = cp["open_set"] if cp.has_section("open_set") else {}
        raw_thr = o.get("threshold", "").strip()
        out = cp["output"] if cp.has_section("output") else {}

        return ExperimentConfig(
            gallery_params=params,
            samples_file=samples_file,
            capacities=capacities,
            methods=tuple(_split(s.get("methods", "random,softbio,similarity"))),
            folds=int(s.get("folds", 10)),
            k_grids=k_grids,
            hr_levels=tuple(float(x) for x in _split(s.get("hr_levels", "0.95,0.99,0.995,1.0"))),
            random_seed_base=int(s.get("random_seed_base", 0)),
            softbio_weights=tuple(float(x) for x in _split(s.get("softbio_weights", "1,1,1"))),
            open_set_threshold=float(raw_thr) if raw_thr else None,
            output_dir=out.get("directory", "out"),
            trace=out.get("trace", "false").strip().lower() in ("1", "true", "yes"),
            workers=int(out.get("workers", 1)),
        )
    except ConfigError:
        raise
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from None


def resolve_gallery(config: ExperimentConfig) -> Gallery:
    if config.samples_file is not None:
        fmt = "csv" if config.samples_file.endswith(".csv") else "binary"
        return load_samples(config.samples_file, fmt=fmt)
    return generate_gallery(config.gallery_params)


def _method_for(config: ExperimentConfig, name: str, fold: int):
    if name == "random":
        return RandomPairing(config.random_seed_base + fold)
    if name == "softbio":
        return SoftBiometricPairing(config.softbio_weights)
    return SimilarityPairing()


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _open_set_metrics(mated, nonmated):
    """EER, FNIR at FPIR=0.1%, and d' of rank-1 scores; None when undefined."""
    if len(mated) == 0 or len(nonmated) == 0:
        return None, None, None
    scores = ScoreSet(np.asarray(mated), np.asarray(nonmated))
    out_eer = eer(scores)
    out_fnir = fnir_at_fpir(scores, 0.001)
    try:
        out_d = decidability(scores)
    except (UndefinedMetricError, ValueError):
        out_d = None
    return out_eer, out_fnir, out_d


@dataclass
class _CellStats:
    """Per-(fold, k) aggregates over all probe transactions."""

    hit_rate: float
    rank1: float
    workload: float
    eer: float | None
    fnir: float | None
    dprime: float | None
    mated: np.ndarray
    rankings: list


def _run_cell(gallery: Gallery, index, k: int, comparator, trace_rows) -> _CellStats:
    totals = []
    hits = 0
    top1 = 0
    enrolled = 0
    mated, nonmated = [], []
    rankings = []
    for j in range(gallery.probes.shape[0]):
        res = search_two_stage(gallery.probes[j], index, k, comparator)
        totals.append(res.total_comparisons)
        if trace_rows is not None:
            trace_rows.append(
                {
                    "probe": j,
                    "k": k,
                    "stages": list(res.comparisons_per_stage),
                    "total": res.total_comparisons,
                }
            )
        top_score = float(res.candidate_scores[0])
        if gallery.probe_unenrolled[j]:
            nonmated.append(top_score)
            continue
        owner = int(gallery.probe_owners[j])
        enrolled += 1
        mated.append(top_score)
        if np.any(res.candidate_ids == owner):
            hits += 1
        if int(res.candidate_ids[0]) == owner:
            top1 += 1
        rankings.append((owner, res.candidate_ids.tolist()))
    cell_eer, cell_fnir, cell_d = _open_set_metrics(mated, nonmated)
    return _CellStats(
        hit_rate=hits / enrolled,
        rank1=top1 / enrolled,
        workload=float(np.mean(totals)),
        eer=cell_eer,
        fnir=cell_fnir,
        dprime=cell_d,
        mated=np.asarray(mated),
        rankings=rankings,
    )


def _run_family_fold(config, gallery, comparator, fuser, capacity, method_name, fold):
    """Build one index and evaluate the whole shortlist grid against it."""
    method = _method_for(config, method_name, fold)
    index = build_index(gallery, method, capacity, comparator, fuser)
    trace_rows = [] if config.trace else None
    cells = {
        k: _run_cell(gallery, index, k, comparator, trace_rows)
        for k in config.k_grids[capacity]
    }
    return cells, index, trace_rows


def _ci_halfwidth(values: np.ndarray) -> float | None:
    """95% t-interval half width over per-fold means."""
    if values.size < 2:
        return None
    spread = float(values.std(ddof=1))
    quantile = float(student_t.ppf(0.975, values.size - 1))
    return quantile * spread / math.sqrt(values.size)


def _mean_or_none(values: list) -> float | None:
    present = [v for v in values if v is not None]
    if not present:
        return None
    return float(np.mean(present))


@dataclass
class ExperimentReport:
    rows: list[dict]
    summary: dict
    files: list[str] = field(default_factory=list)


def _baseline_rows(gallery: Gallery) -> list[dict]:
    comparator = EuclideanComparator()
    n = gallery.subject_count
    top1 = 0
    enrolled = 0
    mated, nonmated = [], []
    rankings = []
    for j in range(gallery.probes.shape[0]):
        res = search_exhaustive(gallery.probes[j], gallery, comparator)
        top_score = float(res.candidate_scores[0])
        if gallery.probe_unenrolled[j]:
            nonmated.append(top_score)
            continue
        owner = int(gallery.probe_owners[j])
        enrolled += 1
        mated.append(top_score)
        if int(res.candidate_ids[0]) == owner:
            top1 += 1
        rankings.append((owner, res.candidate_ids.tolist()))
    if enrolled == 0:
        raise ConfigError("baseline needs at least one enrolled probe")
    base_eer, base_fnir, base_d = _open_set_metrics(mated, nonmated)
    row = {
        "capacity": None,
        "method": "baseline",
        "k": None,
        "folds": 1,
        "hit_rate": 1.0,
        "hit_rate_ci95": None,
        "rank1": top1 / enrolled,
        "workload": float(n),
        "workload_pct": 100.0,
        "workload_pct_ci95": None,
        "workload_predicted": n,
        "eer": base_eer,
        "fnir_at_fpir_001": base_fnir,
        "dprime": base_d,
        "_rankings": rankings,
        "_mated": np.asarray(mated),
        "_nonmated": np.asarray(nonmated),
    }
    return [row]


def run_baseline(config: ExperimentConfig) -> list[dict]:
    """Exhaustive search over every probe: the 100% workload reference."""
    rows = _baseline_rows(resolve_gallery(config))
    return [{k: v for k, v in row.items() if not k.startswith("_")} for row in rows]


def run_sweep(config: ExperimentConfig) -> ExperimentReport:
    """Evaluate the whole grid and write every report artifact."""
    gallery = resolve_gallery(config)
    n = gallery.subject_count
    comparator = EuclideanComparator()
    fuser = MeanFuser()
    for c in config.capacities:
        top = math.ceil(n / c)
        for k in config.k_grids[c]:
            if k > top:
                raise ConfigError(
                    f"shortlist size {k} exceeds the {top} capacity-{c} roots"
                )

    jobs = []
    for capacity in config.capacities:
        for method_name in config.methods:
            fold_count = config.folds if method_name == "random" else 1
            for fold in range(fold_count):
                jobs.append((capacity, method_name, fold))

    def worker(job):
        capacity, method_name, fold = job
        return _run_family_fold(
            config, gallery, comparator, fuser, capacity, method_name, fold
        )

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = dict(zip(jobs, pool.map(worker, jobs)))
    else:
        results = {job: worker(job) for job in jobs}

    baseline_rows = _baseline_rows(gallery)
    rows = list(baseline_rows)
    warnings: list[str] = []
    families = []
    trace_rows_all = []

    for capacity in config.capacities:
        for method_name in config.methods:
            fold_count = config.folds if method_name == "random" else 1
            fold_cells = [results[(capacity, method_name, f)][0] for f in range(fold_count)]
            if config.trace:
                for f in range(fold_count):
                    for rec in results[(capacity, method_name, f)][2]:
                        trace_rows_all.append(
                            {"capacity": capacity, "method": method_name, "fold": f, **rec}
                        )

            per_k = {}
            for k in config.k_grids[capacity]:
                hr = np.array([cells[k].hit_rate for cells in fold_cells])
                r1 = np.array([cells[k].rank1 for cells in fold_cells])
                wl = np.array([cells[k].workload for cells in fold_cells])
                wl_pct = wl / n * 100.0
                row = {
                    "capacity": capacity,
                    "method": method_name,
                    "k": k,
                    "folds": fold_count,
                    "hit_rate": float(hr.mean()),
                    "hit_rate_ci95": _ci_halfwidth(hr),
                    "rank1": float(r1.mean()),
                    "workload": float(wl.mean()),
                    "workload_pct": float(wl_pct.mean()),
                    "workload_pct_ci95": _ci_halfwidth(wl_pct),
                    "workload_predicted": predicted_workload_two_stage(n, capacity, k),
                    "eer": _mean_or_none([cells[k].eer for cells in fold_cells]),
                    "fnir_at_fpir_001": _mean_or_none([cells[k].fnir for cells in fold_cells]),
                    "dprime": _mean_or_none([cells[k].dprime for cells in fold_cells]),
                }
                rows.append(row)
                per_k[k] = row

            levels = {}
            grid = config.k_grids[capacity]
            for level in config.hr_levels:
                chosen = None
                for k in sorted(grid):
                    if per_k[k]["hit_rate"] >= level:
                        chosen = k
                        break
                tag = f"n={capacity} {method_name}"
                if chosen is None:
                    warnings.append(
                        f"{tag}: no shortlist size on the grid reaches HR {level:g}"
                    )
                    levels[f"{level:g}"] = None
                    continue
                boundary = chosen == max(grid)
                if boundary:
                    warnings.append(
                        f"{tag}: HR {level:g} first met at the grid endpoint k={chosen}; "
                        "the grid may be too coarse"
                    )
                levels[f"{level:g}"] = {
                    "k": chosen,
                    "hit_rate": per_k[chosen]["hit_rate"],
                    "workload_pct": per_k[chosen]["workload_pct"],
                    "grid_endpoint": boundary,
                }
            families.append(
                {"capacity": capacity, "method": method_name, "levels": levels}
            )

    summary = {
        "subjects": n,
        "baseline": {
            key: baseline_rows[0][key]
            for key in ("rank1", "eer", "fnir_at_fpir_001", "dprime", "workload_pct")
        },
        "families": families,
        "warnings": warnings,
    }

    files = _write_outputs(config, gallery, rows, summary, results, trace_rows_all)
    clean = [{k: v for k, v in row.items() if not k.startswith("_")} for row in rows]
    return ExperimentReport(rows=clean, summary=summary, files=files)


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_report_csv(rows: list[dict], path: str) -> None:
    """Write report rows (report.csv column set) with repr-formatted floats."""
    _write_csv(
        path, REPORT_COLUMNS,
        [[_fmt(row.get(col)) for col in REPORT_COLUMNS] for row in rows],
    )


def _write_cmc(path: str, rankings) -> None:
    curve = cmc_curve(rankings)
    _write_csv(
        path, ["rank", "probability"],
        [[r + 1, repr(float(p))] for r, p in enumerate(curve)],
    )


def _write_det(path: str, mated: np.ndarray, nonmated: np.ndarray) -> bool:
    if mated.size == 0 or nonmated.size == 0:
        return False
    points = fnir_fpir_sweep(ScoreSet(mated, nonmated))
    _write_csv(
        path, ["threshold", "fnir", "fpir"],
        [[repr(p.threshold), repr(p.fnir), repr(p.fpir)] for p in points],
    )
    return True


def _write_outputs(config, gallery, rows, summary, results, trace_rows) -> list[str]:
    outdir = config.output_dir
    os.makedirs(outdir, exist_ok=True)
    files = []

    report_path = os.path.join(outdir, "report.csv")
    write_report_csv(rows, report_path)
    files.append(report_path)

    summary_path = os.path.join(outdir, "summary.json")
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    files.append(summary_path)

    baseline = rows[0]
    cmc_path = os.path.join(outdir, "cmc_baseline.csv")
    _write_cmc(cmc_path, baseline["_rankings"])
    files.append(cmc_path)
    det_path = os.path.join(outdir, "det_baseline.csv")
    if _write_det(det_path, baseline["_mated"], baseline["_nonmated"]):
        files.append(det_path)

    comparator = EuclideanComparator()
    for capacity in config.capacities:
        for method_name in config.methods:
            cells, index, _ = results[(capacity, method_name, 0)]
            k_max = max(config.k_grids[capacity])
            stats = cells[k_max]
            tag = f"n{capacity}_{method_name}"
            cmc_path = os.path.join(outdir, f"cmc_{tag}.csv")
            _write_cmc(cmc_path, stats.rankings)
            files.append(cmc_path)
            nonmated = []
            for j in range(gallery.probes.shape[0]):
                if gallery.probe_unenrolled[j]:
                    res = search_two_stage(gallery.probes[j], index, k_max, comparator)
                    nonmated.append(float(res.candidate_scores[0]))
            det_path = os.path.join(outdir, f"det_{tag}.csv")
            if _write_det(det_path, stats.mated, np.asarray(nonmated)):
                files.append(det_path)

    if config.trace:
        trace_path = os.path.join(outdir, "trace.jsonl")
        with open(trace_path, "w") as fh:
            for rec in trace_rows:
                fh.write(json.dumps(rec, sort_keys=True))
                fh.write("\n")
        files.append(trace_path)

    return files


def decision_space_rows(n_subjects: int, mode: str, capacities, grids: dict) -> list[dict]:
    """Predicted workload tables over shortlist grids.

    Two-stage rows keep fractions above 1.0 (large k legitimately costs
    more than the baseline); multi-stage rows above 1.0 are suppressed.
    """
    if mode not in ("two-stage", "multi-stage"):
        raise ConfigError(f"unknown decision-space mode {mode!r}")
    rows = []
    for capacity in capacities:
        grid = tuple(grids[capacity])
        roots = math.ceil(n_subjects / capacity)
        if mode == "two-stage":
            for k in grid:
                if k > roots:
                    continue
                w = predicted_workload_two_stage(n_subjects, capacity, k)
                rows.append(
                    {
                        "mode": mode, "capacity": capacity, "ks": (k,),
                        "workload": w, "workload_frac": w / n_subjects,
                    }
                )
            continue
        stages = int(math.log2(capacity))
        layer_caps = [roots * (1 << i) for i in range(stages)]
        combos = [()]
        for stage in range(stages):
            combos = [
                tup + (k,) for tup in combos for k in grid if k <= layer_caps[stage]
            ]
        for ks in combos:
            w = predicted_workload_multi_stage(n_subjects, capacity, ks)
            frac = w / n_subjects
            if frac > 1.0:
                continue
            rows.append(
                {
                    "mode": mode, "capacity": capacity, "ks": ks,
                    "workload": w, "workload_frac": frac,
                }
            )
    return rows


def emit_decision_space(n_subjects: int, mode: str, capacities, grids: dict, path: str) -> int:
    """Write decision_space.csv; returns the number of rows."""
    rows = decision_space_rows(n_subjects, mode, capacities, grids)
    table = []
    for row in rows:
        ks = list(row["ks"]) + [None] * (3 - len(row["ks"]))
        table.append(
            [
                row["mode"], row["capacity"],
                _fmt(ks[0]), _fmt(ks[1]), _fmt(ks[2]),
                row["workload"], repr(float(row["workload_frac"])),
            ]
        )
    _write_csv(path, ["mode", "capacity", "k1", "k2", "k3", "workload", "workload_frac"], table)
    return len(rows)
