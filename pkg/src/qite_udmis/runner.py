"""Experiment orchestration: single-instance characterizations, random-graph
campaigns, histogram construction, and persistence.

Characterization runs one instance across domain kinds, emits one trajectory
CSV per kind, a shot-count decay table, and a bound-audit report. Campaigns
run the full probabilistic solver over many random instances and aggregate
eigenvalue and relative-error histograms. All randomness derives from a
single master seed through the documented stream-splitting rule
(``[master_seed, stream_tag, index...]``); instance-level parallelism never
changes the merged output.
"""

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import (
    FailureSpec,
    TrajectoryRecord,
    failure_prob_ite_closed,
    relative_error,
    thm1_bound,
    thm2_check,
    trajectory_metrics,
    write_trajectory_csv,
)
from .graph import (
    UnitDiskGraph,
    benchmark_graph_6q,
    bits_to_index,
    brute_force_mis,
    load_graph,
    random_unit_disk,
)
from .hamiltonian import from_udmis, spectrum
from .qite import QiteConfig, build_domains, qite_evolve
from .sampler import derive_seed, failure_rate_empirical, measure_shots

log = logging.getLogger(__name__)

ENERGY_BIN_WIDTH = 0.05  # the spectral quantum of the encoding at u = 1.35
RELERR_BIN_WIDTH = 2.5   # percent

# Stream tags for the seed-splitting rule.
_STREAM_GRAPH = 0
_STREAM_MEASURE = 1
_STREAM_DOMAIN_B = 2


@dataclass
class ExperimentConfig:
    """Instance source, model parameters, and evolution/measurement settings."""

    name: str = "experiment"
    out_dir: str = "out"
    instance_kind: str = "bench6"  # bench6 | file | random
    instance_path: str | None = None
    count: int = 1
    n_vertices: int = 6
    box_side: float | None = None
    master_seed: int = 0
    u: float = 1.35
    qite: QiteConfig = field(default_factory=lambda: QiteConfig(tau=0.01, n_max=100))
    domain_kinds: tuple[str, ...] = ("A", "B")
    delta_e: float | str = "gap"
    shots_list: tuple[int, ...] | None = None  # default (N, 2N)
    repetitions: int = 0
    jobs: int = 0  # 0 = one worker per available core

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.instance_kind not in ("bench6", "file", "random"):
            raise ValueError(f"unknown instance kind {self.instance_kind!r}")
        if self.instance_kind == "file" and not self.instance_path:
            raise ValueError("instance_kind 'file' needs instance_path")

    def resolved_box_side(self) -> float:
        if self.box_side is not None:
            return self.box_side
        return 0.6 * math.sqrt(self.n_vertices)

    def resolved_shots(self, n: int) -> tuple[int, ...]:
        return self.shots_list if self.shots_list else (n, 2 * n)

    def out_path(self) -> str:
        return os.path.join(self.out_dir, self.name)


def load_config(path) -> ExperimentConfig:
    """Read the TOML schema documented in the README."""
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    exp = data.get("experiment", {})
    inst = data.get("instance", {})
    model = data.get("model", {})
    q = data.get("qite", {})
    fail = data.get("failure", {})
    run = data.get("run", {})
    qite_cfg = QiteConfig(
        tau=q.get("tau", 0.01),
        n_max=q.get("n_max", 100),
        domain_kind=q.get("domain", "A"),
        regularization_lambda=q.get("lambda", 1e-6),
        rng_seed=q.get("seed", inst.get("master_seed", 0)),
        record_every=q.get("record_every", 10),
        update_mode=q.get("update_mode", "joint"),
    )
    shots = fail.get("shots")
    return ExperimentConfig(
        name=exp.get("name", "experiment"),
        out_dir=exp.get("out_dir", "out"),
        instance_kind=inst.get("kind", "bench6"),
        instance_path=inst.get("path"),
        count=inst.get("count", 1),
        n_vertices=inst.get("n", 6),
        box_side=inst.get("box_side"),
        master_seed=inst.get("master_seed", 0),
        u=model.get("u", 1.35),
        qite=qite_cfg,
        domain_kinds=tuple(q.get("domains", ["A", "B"])),
        delta_e=fail.get("delta_e", "gap"),
        shots_list=tuple(shots) if shots else None,
        repetitions=run.get("repetitions", 0),
        jobs=run.get("jobs", 0),
    )


def _single_instance(cfg: ExperimentConfig) -> UnitDiskGraph:
    if cfg.instance_kind == "bench6":
        return benchmark_graph_6q()
    if cfg.instance_kind == "file":
        return load_graph(cfg.instance_path)
    return random_unit_disk(cfg.n_vertices, cfg.resolved_box_side(),
                            derive_seed(cfg.master_seed, _STREAM_GRAPH, 0))


def _resolve_delta_e(delta_e, gap: float) -> float:
    if delta_e == "gap":
        return gap
    return float(delta_e)


@dataclass
class CharacterizationReport:
    out_dir: str
    trajectory_paths: dict[str, str]
    records: dict[str, list[TrajectoryRecord]]
    thm1_violations: int
    thm2_violations: int
    delta_e: float


def run_characterization(cfg: ExperimentConfig) -> CharacterizationReport:
    """Trajectory CSVs per domain kind, a (P_F)^M table, and a bound audit."""
    g = _single_instance(cfg)
    h = from_udmis(g, cfg.u)
    spec = spectrum(h)
    delta_e = _resolve_delta_e(cfg.delta_e, spec.gap)
    out = cfg.out_path()
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "spectrum.csv"), "w", encoding="utf-8") as fh:
        fh.write("energy,degeneracy\n")
        for level in spec.levels:
            fh.write(f"{level.energy:.12g},{level.degeneracy}\n")

    records: dict[str, list[TrajectoryRecord]] = {}
    paths: dict[str, str] = {}
    finals = {}
    for kind in cfg.domain_kinds:
        domains = build_domains(h, kind, g, derive_seed(cfg.master_seed, _STREAM_DOMAIN_B))
        qcfg = replace(cfg.qite, domain_kind=kind)
        final, trace = qite_evolve(h, domains, qcfg)
        finals[kind] = final
        recs = trajectory_metrics(trace, h, qcfg, FailureSpec(delta_e), spec)
        records[kind] = recs
        paths[kind] = os.path.join(out, f"trajectory-{kind}.csv")
        write_trajectory_csv(recs, paths[kind])
        log.info("characterization: domain %s -> %s (%d snapshots)", kind, paths[kind], len(recs))

    thm1_bad = 0
    thm2_bad = 0
    lines = [f"instance: {cfg.instance_kind} n={g.n_vertices} edges={len(g.edges)} u={cfg.u:g}",
             f"delta_e = {delta_e:.12g}   E0 = {spec.ground_energy:.12g}   g = {spec.ground_degeneracy}"]
    for kind, recs in records.items():
        k1 = sum(1 for r in recs
                 if r.pf_ite > thm1_bound(r.t, delta_e, spec.ground_degeneracy, spec.dimension) + 1e-12)
        k2 = sum(1 for r in recs if not thm2_check(r.epsilon, r.pf_qite, r.pf_ite)[0])
        thm1_bad += k1
        thm2_bad += k2
        lines.append(
            f"domain {kind}: snapshots={len(recs)} thm1_violations={k1} thm2_violations={k2} "
            f"eps_final={recs[-1].epsilon:.6g} eps_aligned_final={recs[-1].epsilon_aligned:.6g} "
            f"fidelity_final={recs[-1].fidelity_final:.6g}"
        )
        if cfg.repetitions > 0:
            m = 2 * g.n_vertices
            rate = failure_rate_empirical(h, build_domains(h, kind, g,
                                          derive_seed(cfg.master_seed, _STREAM_DOMAIN_B)),
                                          replace(cfg.qite, domain_kind=kind),
                                          FailureSpec(delta_e, m), cfg.repetitions,
                                          final_state=finals[kind])
            exact = records[kind][-1].pf_qite ** m
            lines.append(f"domain {kind}: empirical failure rate at M={m}: "
                         f"{rate:.6g} (exact {exact:.6g}, {cfg.repetitions} repetitions)")

    pfm_path = os.path.join(out, "pfm.csv")
    with open(pfm_path, "w", encoding="utf-8") as fh:
        fh.write("domain,M,pf_single,pf_power_m\n")
        for m in range(1, 3 * g.n_vertices + 1):
            pf = failure_prob_ite_closed(spec, cfg.qite.t_max, delta_e)
            fh.write(f"ite,{m},{pf:.12g},{pf ** m:.12g}\n")
        for kind, recs in records.items():
            pf = recs[-1].pf_qite
            for m in range(1, 3 * g.n_vertices + 1):
                fh.write(f"{kind},{m},{pf:.12g},{pf ** m:.12g}\n")

    lines.append(f"total: thm1_violations={thm1_bad} thm2_violations={thm2_bad}")
    bounds_path = os.path.join(out, "bounds.txt")
    with open(bounds_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return CharacterizationReport(out, paths, records, thm1_bad, thm2_bad, delta_e)


@dataclass
class CampaignSummary:
    """Per-instance results plus normalized histograms, keyed by shot count."""

    instance_count: int
    failed_instances: int
    shots_list: tuple[int, ...]
    ground_energies: np.ndarray
    best_energies: dict[int, np.ndarray]
    relative_errors: dict[int, np.ndarray]
    eigenvalue_hist: dict[int, tuple[np.ndarray, np.ndarray]]  # (bin_centers, masses)
    relerr_hist: dict[int, tuple[np.ndarray, np.ndarray]]
    results: list[dict]


def _instance_spec(cfg: ExperimentConfig, idx: int):
    """Picklable description of instance `idx` (graphs are rebuilt in workers)."""
    if cfg.instance_kind == "bench6":
        return ("bench6",)
    if cfg.instance_kind == "file":
        return ("file", cfg.instance_path)
    return ("random", cfg.n_vertices, cfg.resolved_box_side(),
            tuple(derive_seed(cfg.master_seed, _STREAM_GRAPH, idx)))


def _build_instance(spec_tuple) -> UnitDiskGraph:
    kind = spec_tuple[0]
    if kind == "bench6":
        return benchmark_graph_6q()
    if kind == "file":
        return load_graph(spec_tuple[1])
    _, n, box, seed = spec_tuple
    return random_unit_disk(n, box, list(seed))


def _campaign_instance(args) -> list[dict]:
    """One instance end to end; returns one record dict per shot count."""
    idx, spec_tuple, u, qite_cfg, delta_e_cfg, shots_list, master_seed = args
    g = _build_instance(spec_tuple)
    h = from_udmis(g, u)
    spec = spectrum(h)
    mis_size, witnesses = brute_force_mis(g)
    e0 = spec.ground_energy
    delta_e = _resolve_delta_e(delta_e_cfg, spec.gap)
    domains = build_domains(h, qite_cfg.domain_kind, g,
                            derive_seed(master_seed, _STREAM_DOMAIN_B, idx))
    final, _ = qite_evolve(h, domains, qite_cfg)
    table = h.energies()
    out = []
    for m in shots_list:
        seed = derive_seed(master_seed, _STREAM_MEASURE, idx, m)
        shots = measure_shots(final, m, seed)
        energies = [float(table[bits_to_index(s)]) for s in shots]
        best = int(np.argmin(energies))
        best_energy = energies[best]
        out.append({
            "instance": idx,
            "seed": master_seed,
            "M": m,
            "best_energy": best_energy,
            "best_bitstring": "".join(str(b) for b in shots[best]),
            "success": best_energy <= e0 + delta_e + 1e-9,
            "ground_energy": e0,
            "relative_error": relative_error(e0, best_energy),
            "mis_size": mis_size,
            "mis_count": len(witnesses),
        })
    return out


def _normalized_hist(values: np.ndarray, width: float) -> tuple[np.ndarray, np.ndarray]:
    """Histogram with bins centered on integer multiples of `width`; masses sum to 1."""
    if values.size == 0:
        return np.empty(0), np.empty(0)
    bins = np.round(values / width).astype(int)
    lo, hi = bins.min(), bins.max()
    centers = np.arange(lo, hi + 1) * width
    masses = np.bincount(bins - lo, minlength=hi - lo + 1) / values.size
    return centers, masses


def run_campaign(cfg: ExperimentConfig) -> CampaignSummary:
    """Generate instances, solve each at every configured shot count, aggregate."""
    shots_list = cfg.resolved_shots(cfg.n_vertices)
    work = [(idx, _instance_spec(cfg, idx), cfg.u, cfg.qite, cfg.delta_e,
             shots_list, cfg.master_seed) for idx in range(cfg.count)]
    results_by_idx: dict[int, list[dict]] = {}
    failed = 0
    jobs = cfg.jobs if cfg.jobs > 0 else (os.cpu_count() or 1)
    if jobs > 1 and cfg.count > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {idx: pool.submit(_campaign_instance, args)
                       for idx, args in zip(range(cfg.count), work)}
            for idx in sorted(futures):
                try:
                    results_by_idx[idx] = futures[idx].result()
                except Exception:
                    log.exception("instance %d failed; skipping", idx)
                    failed += 1
    else:
        for args in work:
            try:
                results_by_idx[args[0]] = _campaign_instance(args)
            except Exception:
                log.exception("instance %d failed; skipping", args[0])
                failed += 1

    results = [rec for idx in sorted(results_by_idx) for rec in results_by_idx[idx]]
    ground = np.array([recs[0]["ground_energy"] for _, recs in sorted(results_by_idx.items())])
    best: dict[int, np.ndarray] = {}
    relerr: dict[int, np.ndarray] = {}
    for m in shots_list:
        rows = [r for r in results if r["M"] == m]
        best[m] = np.array([r["best_energy"] for r in rows])
        relerr[m] = np.array([r["relative_error"] for r in rows])

    summary = CampaignSummary(
        instance_count=len(results_by_idx),
        failed_instances=failed,
        shots_list=shots_list,
        ground_energies=ground,
        best_energies=best,
        relative_errors=relerr,
        eigenvalue_hist={m: _normalized_hist(best[m], ENERGY_BIN_WIDTH) for m in shots_list},
        relerr_hist={m: _normalized_hist(relerr[m], RELERR_BIN_WIDTH) for m in shots_list},
        results=results,
    )
    if failed:
        log.warning("campaign: %d of %d instances failed and were skipped", failed, cfg.count)

    out = cfg.out_path()
    os.makedirs(out, exist_ok=True)
    _write_hist_csv(os.path.join(out, "hist-eigenvalues.csv"), summary.eigenvalue_hist)
    _write_hist_csv(os.path.join(out, "hist-relerr.csv"), summary.relerr_hist)
    with open(os.path.join(out, "results.jsonl"), "w", encoding="utf-8") as fh:
        for rec in results:
            fh.write(json.dumps(rec) + "\n")
    return summary


def _write_hist_csv(path, hists: dict[int, tuple[np.ndarray, np.ndarray]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("M,bin_center,mass\n")
        for m in sorted(hists):
            centers, masses = hists[m]
            for c, mass in zip(centers, masses):
                fh.write(f"{m},{c:.12g},{mass:.12g}\n")
